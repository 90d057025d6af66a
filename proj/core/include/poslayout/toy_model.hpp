#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poslayout/layout.hpp"
#include "poslayout/mat.hpp"

namespace poslayout::toy {

// Shape and seed of the self-contained attention model.  Small on purpose:
// large enough to exercise the position machinery, small enough that exact
// finite-difference checks stay cheap.
struct ToyModelParams {
  int d_model = 32;
  int n_heads = 2;
  int vocab = 64;
  int n_layers = 2;
  std::uint64_t seed = 0;
  double rope_base = 10000.0;

  int head_dim() const { return d_model / n_heads; }
  int ffn_dim() const { return 2 * d_model; }
  void validate() const;
};

// Dense weights, all drawn from a seeded Gaussian with std 0.02.
struct ToyWeights {
  Mat embed;    // vocab x d
  Mat special;  // 2 x d; row 0 is the [AE] prompt, row 1 the [LM] prompt
  struct Layer {
    Mat wq, wk, wv, wo;  // d x d
    Mat w1;              // d x ffn
    Mat w2;              // ffn x d
  };
  std::vector<Layer> layers;
  Mat head;  // d x vocab
};

struct ToyModel {
  ToyModelParams params;
  ToyWeights weights;
  static ToyModel create(const ToyModelParams& params);
};

constexpr int kSpecialAe = 0;
constexpr int kSpecialLm = 1;

// Learnable encoder memory slots, one row per memory token.
struct MemoryEmbeddings {
  Mat rows;  // memory_count x d
};
MemoryEmbeddings init_memory(const ToyModelParams& params, int memory_count);

// Boolean attention mask over (query row, key row).  Keys may outnumber
// queries when a KV prefix is attached; prefix keys come first.
struct AttentionMask {
  int n_query = 0;
  int n_key = 0;
  std::vector<std::uint8_t> allow;

  bool allowed(int q, int k) const {
    return allow[static_cast<std::size_t>(q) * n_key + k] != 0;
  }
  void set(int q, int k, bool v) {
    allow[static_cast<std::size_t>(q) * n_key + k] = v ? 1 : 0;
  }

  static AttentionMask causal(int n);
  // n_prefix always-visible keys in front of an n_current-token causal block.
  static AttentionMask causal_with_prefix(int n_current, int n_prefix);
};

// Causal mask over [vision; voco; text] with one change: text queries can
// never see vision keys, so all vision content must reach text through the
// voco slots.
AttentionMask voco_attention_mask(int n_vision, int n_voco, int n_text);

// One layer's exported attention inputs: keys after rotation (so position
// information is baked in) and raw values, heads packed side by side.
struct LayerKv {
  Mat k_rot;  // T x d
  Mat v;      // T x d
};

// Cached per-layer KV rows prepended to every attention window.
struct KvPrefix {
  std::vector<LayerKv> layers;
  int len = 0;
};

// Where one input slot takes its embedding row from.
struct TokenRef {
  enum class Kind { Vocab, Special, Memory, External };
  Kind kind = Kind::Vocab;
  int index = 0;

  static TokenRef vocab(int id) { return {Kind::Vocab, id}; }
  static TokenRef special(int row) { return {Kind::Special, row}; }
  static TokenRef memory(int row) { return {Kind::Memory, row}; }
  static TokenRef external(int row) { return {Kind::External, row}; }
};

// Test hook: add `delta` to the value projection of one layer before its
// attention mixes values, leaving every other tensor untouched.
struct ValuePerturb {
  int layer = 0;
  Mat delta;  // T x d
};

// Everything one stack evaluation computed, kept for the backward pass.
struct LayerTrace {
  std::vector<Mat> q;      // per head, T x head_dim, rotated
  std::vector<Mat> k;      // per head, (prefix+T) x head_dim, rotated
  std::vector<Mat> v;      // per head, (prefix+T) x head_dim
  std::vector<Mat> probs;  // per head, T x (prefix+T), exact zeros off-mask
  Mat ctx;                 // T x d, merged head mix before the output proj
  Mat x_in;                // T x d
  Mat x_attn;              // T x d, after attention residual
  Mat ffn_act;             // T x ffn, tanh activation
  Mat x_out;               // T x d
  Mat k_cur;               // T x d, this stack's own rotated keys, merged
  Mat v_cur;               // T x d
};

struct StackTrace {
  Mat x0;
  std::vector<LayerTrace> layers;
  Mat logits;  // empty unless requested
  int prefix_len = 0;
  std::vector<std::int64_t> position_ids;
  const Mat& x_final() const { return layers.empty() ? x0 : layers.back().x_out; }
};

struct StackOptions {
  bool want_logits = true;
  const KvPrefix* prefix = nullptr;
  const ValuePerturb* perturb = nullptr;
};

// Core evaluation: embed `items`, run every layer's rotary attention + FFN
// with the given position IDs and mask, optionally project logits.
// `memory` supplies rows for TokenRef::Memory items, `external` for
// TokenRef::External items.  Throws on shape mismatches and when some query
// row has no visible key.
StackTrace run_stack(const ToyModel& model, std::span<const TokenRef> items,
                     const Mat* memory, const Mat* external,
                     std::span<const std::int64_t> position_ids,
                     const AttentionMask& mask, const StackOptions& opts = {});

// Gradients entering the stack from downstream consumers.
struct StackSeeds {
  const Mat* dlogits = nullptr;               // T x vocab
  const Mat* dx_final = nullptr;              // T x d
  const std::vector<LayerKv>* dkv = nullptr;  // per layer, on k_cur / v_cur
};

// Gradients leaving the stack towards its inputs.
struct StackGrads {
  Mat dx0;                        // T x d
  std::vector<LayerKv> dprefix;   // per layer, on the prefix KV rows
};

StackGrads stack_backward(const ToyModel& model, const StackTrace& trace,
                          const StackSeeds& seeds);

// dx0 rows routed back to the tables they were gathered from.
struct InputGrads {
  Mat d_embed;
  Mat d_special;
  Mat d_memory;
  Mat d_external;
};
void scatter_input_grads(std::span<const TokenRef> items, const Mat& dx0,
                         const ToyModelParams& params, int memory_count,
                         int external_rows, InputGrads& grads);

// Plain forward over vocab tokens at explicit position IDs.
struct ForwardResult {
  Mat outputs;                // T x d
  Mat logits;                 // T x vocab
  std::vector<LayerKv> kv;    // per layer
  std::vector<Mat> attn;      // layer-major, n_layers * n_heads maps
};
ForwardResult forward(const ToyModel& model, std::span<const int> tokens,
                      std::span<const std::int64_t> position_ids,
                      const AttentionMask& mask);

// Encode one chunk: run [chunk tokens; memory tokens] causally at the
// layout's position IDs and keep the trailing memory rows — both their final
// embeddings and their per-layer rotated KV entries.
struct CompressResult {
  Mat memory_outputs;        // memory_count x d
  std::vector<LayerKv> kv;   // per layer, memory_count rows each
};
CompressResult compress_chunk(std::span<const int> chunk_tokens,
                              const MemoryEmbeddings& memory,
                              const PositionLayout& layout, const ToyModel& model);

}  // namespace poslayout::toy
