#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace poslayout::pe {

struct SinusoidalParams {
  int d_model = 0;
  double base = 10000.0;
  void validate() const;  // d_model positive and even, base > 1
};

struct RopeParams {
  int head_dim = 0;
  double base = 10000.0;
  void validate() const;  // head_dim positive and even, base > 1
};

// Classic sinusoidal encoding: component 2i is sin(pos / base^(2i/d)),
// component 2i+1 is cos of the same argument.  Every vector has L2 norm
// sqrt(d_model / 2).
std::vector<double> sinusoidal_pe(std::int64_t pos, const SinusoidalParams& params);

// max_pos x max_pos matrix of cosine similarities between the encodings of
// positions 0..max_pos-1.
std::vector<std::vector<double>> cosine_similarity_curve(int max_pos,
                                                         const SinusoidalParams& params);

// Rotary transform: consecutive pairs (v[2i], v[2i+1]) rotate by angle
// position_id / base^(2i/head_dim).  An isometry; position 0 is the identity.
std::vector<double> rope_rotate(std::span<const double> v, std::int64_t position_id,
                                const RopeParams& params);

struct DecayPoint {
  int delta = 0;
  double mean_score = 0.0;
};

// Mean self-attention score between a vector placed at position 0 and the
// same vector at position delta, averaged over `samples` random unit vectors,
// for delta = 0..max_delta.  Deterministic for a given seed regardless of
// thread count (each delta's mean is computed independently from one shared
// sample set).  Requires samples >= 100.
std::vector<DecayPoint> rope_attention_decay(const RopeParams& params, int max_delta,
                                             int samples, std::uint64_t seed,
                                             int threads = 1);

}  // namespace poslayout::pe
