#include "poslayout/pe.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "poslayout/rng.hpp"

namespace poslayout::pe {

void SinusoidalParams::validate() const {
  if (d_model < 2 || d_model % 2 != 0)
    throw std::invalid_argument("d_model must be positive and even");
  if (!(base > 1.0)) throw std::invalid_argument("base must be > 1");
}

void RopeParams::validate() const {
  if (head_dim < 2 || head_dim % 2 != 0)
    throw std::invalid_argument("head_dim must be positive and even");
  if (!(base > 1.0)) throw std::invalid_argument("base must be > 1");
}

std::vector<double> sinusoidal_pe(std::int64_t pos, const SinusoidalParams& params) {
  params.validate();
  std::vector<double> enc(static_cast<std::size_t>(params.d_model));
  for (int i = 0; i < params.d_model / 2; ++i) {
    const double freq =
        std::pow(params.base, -2.0 * static_cast<double>(i) / params.d_model);
    const double arg = static_cast<double>(pos) * freq;
    enc[static_cast<std::size_t>(2 * i)] = std::sin(arg);
    enc[static_cast<std::size_t>(2 * i + 1)] = std::cos(arg);
  }
  return enc;
}

std::vector<std::vector<double>> cosine_similarity_curve(int max_pos,
                                                         const SinusoidalParams& params) {
  params.validate();
  if (max_pos < 1) throw std::invalid_argument("max_pos must be positive");

  std::vector<std::vector<double>> enc(static_cast<std::size_t>(max_pos));
  std::vector<double> norm(static_cast<std::size_t>(max_pos));
  for (int p = 0; p < max_pos; ++p) {
    enc[static_cast<std::size_t>(p)] = sinusoidal_pe(p, params);
    double s = 0.0;
    for (const double x : enc[static_cast<std::size_t>(p)]) s += x * x;
    norm[static_cast<std::size_t>(p)] = std::sqrt(s);
  }

  std::vector<std::vector<double>> sim(
      static_cast<std::size_t>(max_pos),
      std::vector<double>(static_cast<std::size_t>(max_pos), 0.0));
  for (int a = 0; a < max_pos; ++a)
    for (int b = 0; b < max_pos; ++b) {
      if (a == b) {
        // Self-similarity is 1 by definition; skip the roundoff.
        sim[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1.0;
        continue;
      }
      double dot = 0.0;
      for (int i = 0; i < params.d_model; ++i)
        dot += enc[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] *
               enc[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
      sim[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          dot / (norm[static_cast<std::size_t>(a)] * norm[static_cast<std::size_t>(b)]);
    }
  return sim;
}

std::vector<double> rope_rotate(std::span<const double> v, std::int64_t position_id,
                                const RopeParams& params) {
  params.validate();
  if (static_cast<int>(v.size()) != params.head_dim)
    throw std::invalid_argument("vector length must equal head_dim");

  std::vector<double> out(v.size());
  for (int i = 0; i < params.head_dim / 2; ++i) {
    const double freq =
        std::pow(params.base, -2.0 * static_cast<double>(i) / params.head_dim);
    const double angle = static_cast<double>(position_id) * freq;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double x = v[static_cast<std::size_t>(2 * i)];
    const double y = v[static_cast<std::size_t>(2 * i + 1)];
    out[static_cast<std::size_t>(2 * i)] = x * c - y * s;
    out[static_cast<std::size_t>(2 * i + 1)] = x * s + y * c;
  }
  return out;
}

std::vector<DecayPoint> rope_attention_decay(const RopeParams& params, int max_delta,
                                             int samples, std::uint64_t seed,
                                             int threads) {
  params.validate();
  if (max_delta < 0) throw std::invalid_argument("max_delta must be non-negative");
  if (samples < 100) throw std::invalid_argument("samples must be at least 100");
  if (threads < 1) throw std::invalid_argument("threads must be positive");

  // One shared sample set; every delta sees the same vectors, so the curve
  // is smooth in delta and independent of how work is split below.
  Rng rng(seed);
  std::vector<std::vector<double>> qs(static_cast<std::size_t>(samples));
  for (auto& q : qs) q = rng.unit_vector(params.head_dim);

  std::vector<DecayPoint> curve(static_cast<std::size_t>(max_delta + 1));
  auto eval_range = [&](int lo, int hi) {
    for (int delta = lo; delta < hi; ++delta) {
      double sum = 0.0;
      for (const auto& q : qs) {
        const auto rotated = rope_rotate(q, delta, params);
        double dot = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * rotated[i];
        sum += dot;
      }
      curve[static_cast<std::size_t>(delta)] = {delta, sum / samples};
    }
  };

  const int n = max_delta + 1;
  if (threads == 1 || n < 2) {
    eval_range(0, n);
  } else {
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      const int lo = n * w / workers;
      const int hi = n * (w + 1) / workers;
      pool.emplace_back(eval_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return curve;
}

}  // namespace poslayout::pe
