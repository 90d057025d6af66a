#include "poslayout/mat.hpp"

#include <algorithm>
#include <stdexcept>

namespace poslayout::toy {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Mat matmul(const Mat& x, const Mat& y) {
  require(x.cols == y.rows, "matmul: inner dimensions differ");
  Mat out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i) {
    double* oi = out.row(i);
    const double* xi = x.row(i);
    for (int k = 0; k < x.cols; ++k) {
      const double v = xi[k];
      if (v == 0.0) continue;
      const double* yk = y.row(k);
      for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& x, const Mat& y) {
  require(x.cols == y.cols, "matmul_nt: inner dimensions differ");
  Mat out(x.rows, y.rows);
  for (int i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (int j = 0; j < y.rows; ++j) {
      const double* yj = y.row(j);
      double s = 0.0;
      for (int k = 0; k < x.cols; ++k) s += xi[k] * yj[k];
      oi[j] = s;
    }
  }
  return out;
}

Mat matmul_tn(const Mat& x, const Mat& y) {
  require(x.rows == y.rows, "matmul_tn: inner dimensions differ");
  Mat out(x.cols, y.cols);
  for (int k = 0; k < x.rows; ++k) {
    const double* xk = x.row(k);
    const double* yk = y.row(k);
    for (int i = 0; i < x.cols; ++i) {
      const double v = xk[i];
      if (v == 0.0) continue;
      double* oi = out.row(i);
      for (int j = 0; j < y.cols; ++j) oi[j] += v * yk[j];
    }
  }
  return out;
}

void add_inplace(Mat& x, const Mat& y) {
  require(x.rows == y.rows && x.cols == y.cols, "add_inplace: shape mismatch");
  for (std::size_t i = 0; i < x.a.size(); ++i) x.a[i] += y.a[i];
}

void scale_inplace(Mat& x, double s) {
  for (auto& v : x.a) v *= s;
}

Mat vconcat(const Mat& x, const Mat& y) {
  if (x.empty()) return y;
  if (y.empty()) return x;
  require(x.cols == y.cols, "vconcat: column counts differ");
  Mat out(x.rows + y.rows, x.cols);
  std::copy(x.a.begin(), x.a.end(), out.a.begin());
  std::copy(y.a.begin(), y.a.end(), out.a.begin() + static_cast<std::ptrdiff_t>(x.a.size()));
  return out;
}

Mat row_slice(const Mat& x, int begin, int end) {
  require(0 <= begin && begin <= end && end <= x.rows, "row_slice: bad range");
  Mat out(end - begin, x.cols);
  std::copy(x.row(begin), x.row(begin) + static_cast<std::size_t>(end - begin) * x.cols,
            out.a.begin());
  return out;
}

}  // namespace poslayout::toy
