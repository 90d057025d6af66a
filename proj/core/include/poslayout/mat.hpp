#pragma once

#include <cstddef>
#include <vector>

namespace poslayout::toy {

// Minimal row-major dense matrix of doubles.  Everything the model needs and
// nothing more; all loops are single-threaded and in fixed order so results
// are bit-reproducible.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  bool empty() const { return rows == 0 || cols == 0; }
};

Mat matmul(const Mat& x, const Mat& y);     // x (m,k) * y (k,n)
Mat matmul_nt(const Mat& x, const Mat& y);  // x (m,k) * y^T, y is (n,k)
Mat matmul_tn(const Mat& x, const Mat& y);  // x^T * y, x is (k,m), y is (k,n)

void add_inplace(Mat& x, const Mat& y);
void scale_inplace(Mat& x, double s);

// Vertical stack: rows of x above rows of y (same column count).
Mat vconcat(const Mat& x, const Mat& y);

// Rows [begin, end) as a copy.
Mat row_slice(const Mat& x, int begin, int end);

}  // namespace poslayout::toy
