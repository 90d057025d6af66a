#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poslayout/layout.hpp"
#include "poslayout/toy_model.hpp"

namespace poslayout::toy {

enum class LossKind { Ae, Lm, Qa };
const char* to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// Compressed representation of a full context, one slot per chunk.  Icae
// carries the memory tokens' final embeddings; X500 carries their per-layer
// rotated KV entries.
struct Carriers {
  Framework framework = Framework::Icae;
  int memory_count = 0;
  std::vector<Mat> memory_outputs;        // per chunk (Icae)
  std::vector<std::vector<LayerKv>> kv;   // per chunk, per layer (X500)
  int chunk_count() const;
};

// Chunk the context per `config`, encode every chunk with its encoder
// layout, and collect the carriers the configured framework consumes.
Carriers compress_context(std::span<const int> context_tokens,
                          const MemoryEmbeddings& memory, const LayoutConfig& config,
                          const ToyModel& model);

// Teacher-forced mean cross-entropy losses.  `decoder` must be the layout of
// the matching task; carriers must come from the same framework.
//
// Ae reconstructs the context from carriers + [AE]; Lm continues it from
// carriers + [LM]; Qa conditions on carriers + [LM] + question and scores
// the answer tokens only.
double ae_loss(std::span<const int> context_tokens, const Carriers& carriers,
               const PositionLayout& decoder, const ToyModel& model);
double lm_loss(std::span<const int> completion_tokens, const Carriers& carriers,
               const PositionLayout& decoder, const ToyModel& model);
double qa_loss(std::span<const int> question_tokens, std::span<const int> answer_tokens,
               const Carriers& carriers, const PositionLayout& decoder,
               const ToyModel& model);

// alpha * ae + (1 - alpha) * lm; the pretraining mixture weight is 0.5.
double joint_pretrain_loss(double ae, double lm, double alpha = 0.5);

// Deterministic token material sized to the config (context, completion,
// question, answer), drawn uniformly from the vocab.
struct LossInputs {
  std::vector<int> context;
  std::vector<int> completion;
  std::vector<int> question;
  std::vector<int> answer;
};
LossInputs sample_loss_inputs(const LayoutConfig& config, int vocab,
                              std::uint64_t seed);

// Token material derived from the model seed itself, so a single seed pins
// both the weights and the data.  grad_check and shift_invariance_max_diff
// evaluate on exactly these inputs.
LossInputs default_loss_inputs(const LayoutConfig& config,
                               const ToyModelParams& params);

// Full decoder evaluation (loss + logits + attention maps) for inspection.
struct DecodeResult {
  double loss = 0.0;
  Mat logits;
  std::vector<Mat> attn;  // layer-major, n_layers * n_heads maps
};
DecodeResult decode_with_loss(LossKind kind, const LossInputs& inputs,
                              const Carriers& carriers, const PositionLayout& decoder,
                              const ToyModel& model);

// Analytic gradient of the chosen loss w.r.t. the memory embeddings and the
// shared token embedding table, backpropagated through decoder and encoders,
// compared entry-by-entry against central finite differences of the same
// loss.  Returns the worst relative error |a - n| / max(|a|, |n|, 1e-5); the
// floor sits a decade above the rounding noise a double-precision central
// difference of an O(ln vocab) loss can carry at these epsilons, so near-zero
// gradient entries are judged by achievable absolute accuracy instead of
// being divided down to machine noise.  epsilon must lie in [1e-6, 1e-4].
struct GradCheckResult {
  double loss = 0.0;
  double max_relative_error = 0.0;
};
GradCheckResult grad_check(LossKind kind, const LayoutConfig& config,
                           const ToyModel& model, double epsilon);

// Largest absolute change in decoder logits when every position ID in the
// pipeline (encoder and decoder alike) is shifted by `shift`.
double shift_invariance_max_diff(const LayoutConfig& config, const ToyModel& model,
                                 std::int64_t shift);

}  // namespace poslayout::toy
