#include "poslayout/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "poslayout/rng.hpp"

namespace poslayout::toy {

namespace {

constexpr std::uint64_t kTokenSalt = 0x544f4b454e532121ULL;

PositionLayout shift_layout(PositionLayout layout, std::int64_t delta) {
  for (auto& e : layout.entries) e.position_id += delta;
  return layout;
}

}  // namespace

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::Ae: return "ae";
    case LossKind::Lm: return "lm";
    case LossKind::Qa: return "qa";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ae") return LossKind::Ae;
  if (s == "lm") return LossKind::Lm;
  if (s == "qa") return LossKind::Qa;
  throw std::invalid_argument("unknown loss \"" + s + "\" (want ae|lm|qa)");
}

int Carriers::chunk_count() const {
  return static_cast<int>(framework == Framework::Icae ? memory_outputs.size()
                                                       : kv.size());
}

namespace {

// Encoder pass over one chunk, trace kept for the backward chain.
struct EncodedChunk {
  std::vector<TokenRef> items;
  StackTrace trace;
  int len = 0;  // context tokens in this chunk
};

EncodedChunk encode_chunk_traced(std::span<const int> context_tokens,
                                 const MemoryEmbeddings& memory,
                                 const LayoutConfig& config, int chunk_index,
                                 const ToyModel& model, std::int64_t id_shift) {
  const PositionLayout layout =
      shift_layout(encoder_layout(config, chunk_index), id_shift);

  EncodedChunk chunk;
  std::vector<std::int64_t> pos;
  for (const auto& e : layout.entries) {
    if (e.role == TokenRole::Context) {
      chunk.items.push_back(
          TokenRef::vocab(context_tokens[static_cast<std::size_t>(e.index)]));
      ++chunk.len;
    } else {
      chunk.items.push_back(TokenRef::memory(static_cast<int>(e.index)));
    }
    pos.push_back(e.position_id);
  }

  const AttentionMask mask = AttentionMask::causal(static_cast<int>(chunk.items.size()));
  StackOptions opts;
  opts.want_logits = false;
  chunk.trace = run_stack(model, chunk.items, &memory.rows, nullptr, pos, mask, opts);
  return chunk;
}

Carriers carriers_from_chunks(const std::vector<EncodedChunk>& chunks,
                              const LayoutConfig& config) {
  Carriers carriers;
  carriers.framework = config.framework;
  carriers.memory_count = config.memory_count;
  for (const auto& chunk : chunks) {
    const int t = chunk.trace.x0.rows;
    const int m = config.memory_count;
    if (config.framework == Framework::Icae) {
      carriers.memory_outputs.push_back(row_slice(chunk.trace.x_final(), t - m, t));
    } else {
      std::vector<LayerKv> kv;
      for (const auto& lt : chunk.trace.layers)
        kv.push_back({row_slice(lt.k_cur, t - m, t), row_slice(lt.v_cur, t - m, t)});
      carriers.kv.push_back(std::move(kv));
    }
  }
  return carriers;
}

// Decoder-side evaluation plan derived from a decoder layout.
struct DecodePlan {
  std::vector<TokenRef> items;       // physical input rows (no KV prefix rows)
  std::vector<std::int64_t> pos;     // their position IDs
  Mat external;                      // carrier embeddings (Icae)
  KvPrefix prefix;                   // carrier KV (X500)
  AttentionMask mask;
  std::vector<std::pair<int, int>> targets;  // (predictor row, target token id)
};

DecodePlan build_decode_plan(LossKind kind, std::span<const int> a,
                             std::span<const int> b, const Carriers& carriers,
                             const PositionLayout& decoder, const ToyModel& model) {
  // a = context/completion/question tokens, b = answer tokens (Qa only).
  const int n_layers = model.params.n_layers;
  const int m = carriers.memory_count;
  const int k = carriers.chunk_count();
  if (m < 1 || k < 1) throw std::invalid_argument("carriers are empty");

  std::vector<const LayoutEntry*> carrier_entries;
  const LayoutEntry* prompt = nullptr;
  std::vector<const LayoutEntry*> tail;
  for (const auto& e : decoder.entries) {
    switch (e.role) {
      case TokenRole::Carrier: carrier_entries.push_back(&e); break;
      case TokenRole::Ae:
      case TokenRole::Lm:
        if (prompt != nullptr) throw std::invalid_argument("multiple prompt tokens");
        prompt = &e;
        break;
      case TokenRole::Context:
      case TokenRole::Question:
      case TokenRole::Answer: tail.push_back(&e); break;
      default:
        throw std::invalid_argument("unexpected role in decoder layout");
    }
  }
  if (prompt == nullptr) throw std::invalid_argument("decoder layout lacks a prompt");
  if (static_cast<int>(carrier_entries.size()) != k * m)
    throw std::invalid_argument("carrier entries do not match carriers");
  const bool want_ae = kind == LossKind::Ae;
  if (want_ae != (prompt->role == TokenRole::Ae))
    throw std::invalid_argument("decoder prompt does not match the loss");

  const int n_q = kind == LossKind::Qa ? static_cast<int>(a.size()) : 0;
  const int expected_tail =
      kind == LossKind::Qa ? static_cast<int>(a.size() + b.size())
                           : static_cast<int>(a.size());
  if (static_cast<int>(tail.size()) != expected_tail)
    throw std::invalid_argument("decoder layout length does not match tokens");

  DecodePlan plan;
  const bool icae = carriers.framework == Framework::Icae;

  if (icae) {
    Mat ext;
    for (const auto& chunk : carriers.memory_outputs) ext = vconcat(ext, chunk);
    plan.external = std::move(ext);
    for (int r = 0; r < k * m; ++r) {
      plan.items.push_back(TokenRef::external(r));
      plan.pos.push_back(carrier_entries[static_cast<std::size_t>(r)]->position_id);
    }
  } else {
    plan.prefix.len = k * m;
    plan.prefix.layers.assign(static_cast<std::size_t>(n_layers), LayerKv{});
    for (int l = 0; l < n_layers; ++l) {
      Mat ks, vs;
      for (const auto& chunk_kv : carriers.kv) {
        ks = vconcat(ks, chunk_kv[static_cast<std::size_t>(l)].k_rot);
        vs = vconcat(vs, chunk_kv[static_cast<std::size_t>(l)].v);
      }
      plan.prefix.layers[static_cast<std::size_t>(l)] = {std::move(ks), std::move(vs)};
    }
  }

  plan.items.push_back(
      TokenRef::special(prompt->role == TokenRole::Ae ? kSpecialAe : kSpecialLm));
  plan.pos.push_back(prompt->position_id);
  const int prompt_row = static_cast<int>(plan.items.size()) - 1;

  for (std::size_t i = 0; i < tail.size(); ++i) {
    const int token = i < a.size() ? a[i] : b[i - a.size()];
    plan.items.push_back(TokenRef::vocab(token));
    plan.pos.push_back(tail[i]->position_id);
  }

  const int t = static_cast<int>(plan.items.size());
  plan.mask = icae ? AttentionMask::causal(t)
                   : AttentionMask::causal_with_prefix(t, plan.prefix.len);

  // Teacher forcing: the row holding token i-1 (or the prompt) predicts
  // token i.  For Qa only the answer tokens are scored.
  if (kind == LossKind::Qa) {
    for (std::size_t i = 0; i < b.size(); ++i)
      plan.targets.emplace_back(prompt_row + n_q + static_cast<int>(i),
                                b[i]);
  } else {
    for (std::size_t i = 0; i < a.size(); ++i)
      plan.targets.emplace_back(prompt_row + static_cast<int>(i), a[i]);
  }
  return plan;
}

// Mean cross-entropy over the plan's targets; optionally also d(loss)/d(logits).
double cross_entropy(const Mat& logits, const std::vector<std::pair<int, int>>& targets,
                     Mat* dlogits) {
  if (targets.empty()) throw std::invalid_argument("no target tokens to score");
  if (dlogits != nullptr) *dlogits = Mat(logits.rows, logits.cols);
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  double total = 0.0;
  for (const auto& [row, token] : targets) {
    double best = logits.at(row, 0);
    for (int j = 1; j < logits.cols; ++j) best = std::max(best, logits.at(row, j));
    double z = 0.0;
    for (int j = 0; j < logits.cols; ++j) z += std::exp(logits.at(row, j) - best);
    const double log_z = std::log(z) + best;
    total += log_z - logits.at(row, token);
    if (dlogits != nullptr) {
      for (int j = 0; j < logits.cols; ++j)
        dlogits->at(row, j) += std::exp(logits.at(row, j) - log_z) * inv_n;
      dlogits->at(row, token) -= inv_n;
    }
  }
  return total * inv_n;
}

double decode_loss(LossKind kind, std::span<const int> a, std::span<const int> b,
                   const Carriers& carriers, const PositionLayout& decoder,
                   const ToyModel& model, DecodeResult* full) {
  DecodePlan plan = build_decode_plan(kind, a, b, carriers, decoder, model);
  StackOptions opts;
  opts.prefix = plan.prefix.len > 0 ? &plan.prefix : nullptr;
  const Mat* external = plan.external.empty() ? nullptr : &plan.external;
  StackTrace trace =
      run_stack(model, plan.items, nullptr, external, plan.pos, plan.mask, opts);
  const double loss = cross_entropy(trace.logits, plan.targets, nullptr);
  if (full != nullptr) {
    full->loss = loss;
    full->logits = std::move(trace.logits);
    full->attn.clear();
    for (const auto& lt : trace.layers)
      for (const auto& p : lt.probs) full->attn.push_back(p);
  }
  return loss;
}

}  // namespace

Carriers compress_context(std::span<const int> context_tokens,
                          const MemoryEmbeddings& memory, const LayoutConfig& config,
                          const ToyModel& model) {
  config.validate();
  if (static_cast<int>(context_tokens.size()) != config.context_len)
    throw std::invalid_argument("context length does not match config");
  if (memory.rows.rows != config.memory_count)
    throw std::invalid_argument("memory rows do not match config");

  std::vector<EncodedChunk> chunks;
  const int k = config.chunk_count();
  for (int i = 1; i <= k; ++i)
    chunks.push_back(encode_chunk_traced(context_tokens, memory, config, i, model, 0));
  return carriers_from_chunks(chunks, config);
}

double ae_loss(std::span<const int> context_tokens, const Carriers& carriers,
               const PositionLayout& decoder, const ToyModel& model) {
  return decode_loss(LossKind::Ae, context_tokens, {}, carriers, decoder, model,
                     nullptr);
}

double lm_loss(std::span<const int> completion_tokens, const Carriers& carriers,
               const PositionLayout& decoder, const ToyModel& model) {
  return decode_loss(LossKind::Lm, completion_tokens, {}, carriers, decoder, model,
                     nullptr);
}

double qa_loss(std::span<const int> question_tokens, std::span<const int> answer_tokens,
               const Carriers& carriers, const PositionLayout& decoder,
               const ToyModel& model) {
  return decode_loss(LossKind::Qa, question_tokens, answer_tokens, carriers, decoder,
                     model, nullptr);
}

double joint_pretrain_loss(double ae, double lm, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [0, 1]");
  return alpha * ae + (1.0 - alpha) * lm;
}

LossInputs sample_loss_inputs(const LayoutConfig& config, int vocab,
                              std::uint64_t seed) {
  config.validate();
  if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
  Rng rng(seed);
  LossInputs inputs;
  inputs.context.resize(static_cast<std::size_t>(config.context_len));
  for (auto& t : inputs.context) t = rng.uniform_int(0, vocab - 1);
  if (config.total_len > config.context_len) {
    inputs.completion.resize(
        static_cast<std::size_t>(config.total_len - config.context_len));
    for (auto& t : inputs.completion) t = rng.uniform_int(0, vocab - 1);
  }
  inputs.question.resize(static_cast<std::size_t>(config.question_len));
  for (auto& t : inputs.question) t = rng.uniform_int(0, vocab - 1);
  inputs.answer.resize(static_cast<std::size_t>(config.answer_len));
  for (auto& t : inputs.answer) t = rng.uniform_int(0, vocab - 1);
  return inputs;
}

LossInputs default_loss_inputs(const LayoutConfig& config,
                               const ToyModelParams& params) {
  return sample_loss_inputs(config, params.vocab, params.seed ^ kTokenSalt);
}

DecodeResult decode_with_loss(LossKind kind, const LossInputs& inputs,
                              const Carriers& carriers, const PositionLayout& decoder,
                              const ToyModel& model) {
  DecodeResult result;
  switch (kind) {
    case LossKind::Ae:
      decode_loss(kind, inputs.context, {}, carriers, decoder, model, &result);
      break;
    case LossKind::Lm:
      decode_loss(kind, inputs.completion, {}, carriers, decoder, model, &result);
      break;
    case LossKind::Qa:
      decode_loss(kind, inputs.question, inputs.answer, carriers, decoder, model,
                  &result);
      break;
  }
  return result;
}

namespace {

// Loss of the whole pipeline (encode + decode) with optional analytic
// gradients w.r.t. memory embeddings and the shared token embedding table.
struct PipelineGrads {
  Mat d_memory;
  Mat d_embed;
};

double pipeline_loss(LossKind kind, const LayoutConfig& config,
                     const LossInputs& inputs, const MemoryEmbeddings& memory,
                     const ToyModel& model, std::int64_t id_shift,
                     PipelineGrads* grads, Mat* logits_out) {
  const int k = config.chunk_count();
  const int m = config.memory_count;
  const int n_layers = model.params.n_layers;

  std::vector<EncodedChunk> chunks;
  for (int i = 1; i <= k; ++i)
    chunks.push_back(
        encode_chunk_traced(inputs.context, memory, config, i, model, id_shift));
  const Carriers carriers = carriers_from_chunks(chunks, config);

  const PositionLayout decoder = shift_layout(decoder_layout(config), id_shift);

  std::span<const int> a;
  std::span<const int> b;
  switch (kind) {
    case LossKind::Ae: a = inputs.context; break;
    case LossKind::Lm: a = inputs.completion; break;
    case LossKind::Qa:
      a = inputs.question;
      b = inputs.answer;
      break;
  }

  DecodePlan plan = build_decode_plan(kind, a, b, carriers, decoder, model);
  StackOptions opts;
  opts.prefix = plan.prefix.len > 0 ? &plan.prefix : nullptr;
  const Mat* external = plan.external.empty() ? nullptr : &plan.external;
  StackTrace trace =
      run_stack(model, plan.items, nullptr, external, plan.pos, plan.mask, opts);

  Mat dlogits;
  const double loss =
      cross_entropy(trace.logits, plan.targets, grads != nullptr ? &dlogits : nullptr);
  if (logits_out != nullptr) *logits_out = trace.logits;
  if (grads == nullptr) return loss;

  // Decoder backward, then route carrier gradients into each encoder.
  StackSeeds seeds;
  seeds.dlogits = &dlogits;
  StackGrads dec_grads = stack_backward(model, trace, seeds);

  grads->d_memory = Mat(m, model.params.d_model);
  grads->d_embed = Mat(model.params.vocab, model.params.d_model);
  InputGrads dec_scatter;
  scatter_input_grads(plan.items, dec_grads.dx0, model.params, 0,
                      plan.external.rows, dec_scatter);
  add_inplace(grads->d_embed, dec_scatter.d_embed);

  for (int i = 0; i < k; ++i) {
    const EncodedChunk& chunk = chunks[static_cast<std::size_t>(i)];
    const int t_enc = chunk.trace.x0.rows;

    StackSeeds enc_seeds;
    Mat dx_final;
    std::vector<LayerKv> dkv;
    if (config.framework == Framework::Icae) {
      // The chunk's memory rows fed the decoder as external rows i*m..(i+1)*m.
      dx_final = Mat(t_enc, model.params.d_model);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < model.params.d_model; ++c)
          dx_final.at(t_enc - m + r, c) = dec_scatter.d_external.at(i * m + r, c);
      enc_seeds.dx_final = &dx_final;
    } else {
      // The chunk's per-layer KV rows fed the decoder prefix at the same offset.
      dkv.assign(static_cast<std::size_t>(n_layers),
                 LayerKv{Mat(t_enc, model.params.d_model),
                         Mat(t_enc, model.params.d_model)});
      for (int l = 0; l < n_layers; ++l) {
        const LayerKv& pg = dec_grads.dprefix[static_cast<std::size_t>(l)];
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < model.params.d_model; ++c) {
            dkv[static_cast<std::size_t>(l)].k_rot.at(t_enc - m + r, c) =
                pg.k_rot.at(i * m + r, c);
            dkv[static_cast<std::size_t>(l)].v.at(t_enc - m + r, c) =
                pg.v.at(i * m + r, c);
          }
      }
      enc_seeds.dkv = &dkv;
    }

    StackGrads enc_grads = stack_backward(model, chunk.trace, enc_seeds);
    InputGrads enc_scatter;
    scatter_input_grads(chunk.items, enc_grads.dx0, model.params, m, 0, enc_scatter);
    add_inplace(grads->d_memory, enc_scatter.d_memory);
    add_inplace(grads->d_embed, enc_scatter.d_embed);
  }
  return loss;
}

}  // namespace

GradCheckResult grad_check(LossKind kind, const LayoutConfig& config,
                           const ToyModel& model, double epsilon) {
  config.validate();
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4))
    throw std::invalid_argument("epsilon must lie in [1e-6, 1e-4]");

  const MemoryEmbeddings memory = init_memory(model.params, config.memory_count);
  const LossInputs inputs = default_loss_inputs(config, model.params);

  PipelineGrads analytic;
  GradCheckResult result;
  result.loss = pipeline_loss(kind, config, inputs, memory, model, 0, &analytic, nullptr);

  double worst = 0.0;
  // The denominator floor is set by what the central-difference oracle can
  // resolve: the loss is O(ln vocab) ~ 4, so each evaluation carries a few
  // ulps of rounding noise (~1e-15), and the quotient over 2*epsilon leaves
  // an irreducible |a - n| of order 1e-10 even for a perfect gradient.  A
  // floor of 1e-5 keeps that noise a decade below the 1e-4 pass threshold
  // while still flagging any systematic error, which scales with |a| rather
  // than with ulp.
  const auto update = [&](double a, double n) {
    const double denom = std::max({std::fabs(a), std::fabs(n), 1e-5});
    worst = std::max(worst, std::fabs(a - n) / denom);
  };

  MemoryEmbeddings mem_probe = memory;
  for (std::size_t i = 0; i < mem_probe.rows.a.size(); ++i) {
    const double saved = mem_probe.rows.a[i];
    mem_probe.rows.a[i] = saved + epsilon;
    const double up =
        pipeline_loss(kind, config, inputs, mem_probe, model, 0, nullptr, nullptr);
    mem_probe.rows.a[i] = saved - epsilon;
    const double down =
        pipeline_loss(kind, config, inputs, mem_probe, model, 0, nullptr, nullptr);
    mem_probe.rows.a[i] = saved;
    update(analytic.d_memory.a[i], (up - down) / (2.0 * epsilon));
  }

  ToyModel model_probe = model;
  for (std::size_t i = 0; i < model_probe.weights.embed.a.size(); ++i) {
    const double saved = model_probe.weights.embed.a[i];
    model_probe.weights.embed.a[i] = saved + epsilon;
    const double up =
        pipeline_loss(kind, config, inputs, memory, model_probe, 0, nullptr, nullptr);
    model_probe.weights.embed.a[i] = saved - epsilon;
    const double down =
        pipeline_loss(kind, config, inputs, memory, model_probe, 0, nullptr, nullptr);
    model_probe.weights.embed.a[i] = saved;
    update(analytic.d_embed.a[i], (up - down) / (2.0 * epsilon));
  }

  result.max_relative_error = worst;
  return result;
}

double shift_invariance_max_diff(const LayoutConfig& config, const ToyModel& model,
                                 std::int64_t shift) {
  config.validate();
  const LossKind kind = config.task == Task::Ae   ? LossKind::Ae
                        : config.task == Task::Lm ? LossKind::Lm
                                                  : LossKind::Qa;
  const MemoryEmbeddings memory = init_memory(model.params, config.memory_count);
  const LossInputs inputs = default_loss_inputs(config, model.params);

  Mat base, moved;
  pipeline_loss(kind, config, inputs, memory, model, 0, nullptr, &base);
  pipeline_loss(kind, config, inputs, memory, model, shift, nullptr, &moved);

  double worst = 0.0;
  for (std::size_t i = 0; i < base.a.size(); ++i)
    worst = std::max(worst, std::fabs(base.a[i] - moved.a[i]));
  return worst;
}

}  // namespace poslayout::toy
