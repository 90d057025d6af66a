#include "poslayout/toy_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "poslayout/pe.hpp"
#include "poslayout/rng.hpp"

namespace poslayout::toy {

namespace {

constexpr double kInitStd = 0.02;
constexpr std::uint64_t kMemorySalt = 0x4d454d524f575320ULL;

void fill_gaussian(Mat& m, Rng& rng, double std_dev) {
  for (auto& v : m.a) v = rng.gaussian() * std_dev;
}

}  // namespace

void ToyModelParams::validate() const {
  if (d_model < 2) throw std::invalid_argument("d_model must be at least 2");
  if (n_heads < 1) throw std::invalid_argument("n_heads must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be divisible by n_heads");
  if ((d_model / n_heads) % 2 != 0)
    throw std::invalid_argument("head dimension must be even for rotary pairs");
  if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
  if (n_layers < 1) throw std::invalid_argument("n_layers must be positive");
  if (!(rope_base > 1.0)) throw std::invalid_argument("rope_base must be > 1");
}

ToyModel ToyModel::create(const ToyModelParams& params) {
  params.validate();
  ToyModel model;
  model.params = params;

  Rng rng(params.seed);
  ToyWeights& w = model.weights;
  w.embed = Mat(params.vocab, params.d_model);
  fill_gaussian(w.embed, rng, kInitStd);
  w.special = Mat(2, params.d_model);
  fill_gaussian(w.special, rng, kInitStd);
  w.layers.resize(static_cast<std::size_t>(params.n_layers));
  for (auto& layer : w.layers) {
    layer.wq = Mat(params.d_model, params.d_model);
    layer.wk = Mat(params.d_model, params.d_model);
    layer.wv = Mat(params.d_model, params.d_model);
    layer.wo = Mat(params.d_model, params.d_model);
    layer.w1 = Mat(params.d_model, params.ffn_dim());
    layer.w2 = Mat(params.ffn_dim(), params.d_model);
    fill_gaussian(layer.wq, rng, kInitStd);
    fill_gaussian(layer.wk, rng, kInitStd);
    fill_gaussian(layer.wv, rng, kInitStd);
    fill_gaussian(layer.wo, rng, kInitStd);
    fill_gaussian(layer.w1, rng, kInitStd);
    fill_gaussian(layer.w2, rng, kInitStd);
  }
  w.head = Mat(params.d_model, params.vocab);
  fill_gaussian(w.head, rng, kInitStd);
  return model;
}

MemoryEmbeddings init_memory(const ToyModelParams& params, int memory_count) {
  params.validate();
  if (memory_count < 1) throw std::invalid_argument("memory_count must be positive");
  Rng rng(params.seed ^ kMemorySalt);
  MemoryEmbeddings mem;
  mem.rows = Mat(memory_count, params.d_model);
  fill_gaussian(mem.rows, rng, kInitStd);
  return mem;
}

AttentionMask AttentionMask::causal(int n) {
  if (n < 1) throw std::invalid_argument("mask size must be positive");
  AttentionMask m;
  m.n_query = n;
  m.n_key = n;
  m.allow.assign(static_cast<std::size_t>(n) * n, 0);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k <= q; ++k) m.set(q, k, true);
  return m;
}

AttentionMask AttentionMask::causal_with_prefix(int n_current, int n_prefix) {
  if (n_current < 1) throw std::invalid_argument("mask size must be positive");
  if (n_prefix < 0) throw std::invalid_argument("prefix length must be non-negative");
  AttentionMask m;
  m.n_query = n_current;
  m.n_key = n_prefix + n_current;
  m.allow.assign(static_cast<std::size_t>(m.n_query) * m.n_key, 0);
  for (int q = 0; q < n_current; ++q) {
    for (int k = 0; k < n_prefix; ++k) m.set(q, k, true);
    for (int k = 0; k <= q; ++k) m.set(q, n_prefix + k, true);
  }
  return m;
}

AttentionMask voco_attention_mask(int n_vision, int n_voco, int n_text) {
  if (n_vision < 1 || n_voco < 1 || n_text < 1)
    throw std::invalid_argument("vision/voco/text counts must be positive");
  const int n = n_vision + n_voco + n_text;
  AttentionMask m = AttentionMask::causal(n);
  for (int q = n_vision + n_voco; q < n; ++q)
    for (int k = 0; k < n_vision; ++k) m.set(q, k, false);
  return m;
}

namespace {

std::vector<Mat> split_heads(const Mat& x, int n_heads) {
  const int hd = x.cols / n_heads;
  std::vector<Mat> heads(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Mat& m = heads[static_cast<std::size_t>(h)];
    m = Mat(x.rows, hd);
    for (int r = 0; r < x.rows; ++r)
      for (int c = 0; c < hd; ++c) m.at(r, c) = x.at(r, h * hd + c);
  }
  return heads;
}

Mat merge_heads(const std::vector<Mat>& heads) {
  const int n_heads = static_cast<int>(heads.size());
  const int hd = heads[0].cols;
  Mat out(heads[0].rows, n_heads * hd);
  for (int h = 0; h < n_heads; ++h)
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < hd; ++c)
        out.at(r, h * hd + c) = heads[static_cast<std::size_t>(h)].at(r, c);
  return out;
}

// Rotate every row of every head slice to its position ID (or away from it).
void rope_rows_inplace(Mat& x, std::span<const std::int64_t> pos, int head_dim,
                       double base, bool inverse) {
  pe::RopeParams rp{head_dim, base};
  std::vector<double> slice(static_cast<std::size_t>(head_dim));
  for (int r = 0; r < x.rows; ++r) {
    const std::int64_t p = inverse ? -pos[static_cast<std::size_t>(r)]
                                   : pos[static_cast<std::size_t>(r)];
    for (int h0 = 0; h0 + head_dim <= x.cols; h0 += head_dim) {
      for (int c = 0; c < head_dim; ++c) slice[static_cast<std::size_t>(c)] = x.at(r, h0 + c);
      const auto rotated = pe::rope_rotate(slice, p, rp);
      for (int c = 0; c < head_dim; ++c) x.at(r, h0 + c) = rotated[static_cast<std::size_t>(c)];
    }
  }
}

// Softmax over the allowed keys of each query row; masked entries stay 0.
Mat masked_softmax(const Mat& scores, const AttentionMask& mask) {
  Mat probs(scores.rows, scores.cols);
  for (int q = 0; q < scores.rows; ++q) {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < scores.cols; ++k)
      if (mask.allowed(q, k)) best = std::max(best, scores.at(q, k));
    double z = 0.0;
    for (int k = 0; k < scores.cols; ++k)
      if (mask.allowed(q, k)) {
        const double e = std::exp(scores.at(q, k) - best);
        probs.at(q, k) = e;
        z += e;
      }
    const double inv = 1.0 / z;
    for (int k = 0; k < scores.cols; ++k)
      if (mask.allowed(q, k)) probs.at(q, k) *= inv;
  }
  return probs;
}

// probs * values, touching only allowed keys so masked rows can never leak
// even at the bit level.
Mat masked_mix(const Mat& probs, const Mat& values, const AttentionMask& mask) {
  Mat out(probs.rows, values.cols);
  for (int q = 0; q < probs.rows; ++q) {
    double* oq = out.row(q);
    for (int k = 0; k < probs.cols; ++k) {
      if (!mask.allowed(q, k)) continue;
      const double p = probs.at(q, k);
      const double* vk = values.row(k);
      for (int c = 0; c < values.cols; ++c) oq[c] += p * vk[c];
    }
  }
  return out;
}

Mat gather_rows(const ToyModel& model, std::span<const TokenRef> items,
                const Mat* memory, const Mat* external) {
  const int d = model.params.d_model;
  Mat x0(static_cast<int>(items.size()), d);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const TokenRef& ref = items[t];
    const Mat* table = nullptr;
    switch (ref.kind) {
      case TokenRef::Kind::Vocab:
        if (ref.index < 0 || ref.index >= model.params.vocab)
          throw std::invalid_argument("token id " + std::to_string(ref.index) +
                                      " outside vocab");
        table = &model.weights.embed;
        break;
      case TokenRef::Kind::Special:
        if (ref.index < 0 || ref.index >= 2)
          throw std::invalid_argument("special token row out of range");
        table = &model.weights.special;
        break;
      case TokenRef::Kind::Memory:
        if (memory == nullptr || ref.index < 0 || ref.index >= memory->rows)
          throw std::invalid_argument("memory row out of range");
        table = memory;
        break;
      case TokenRef::Kind::External:
        if (external == nullptr || ref.index < 0 || ref.index >= external->rows)
          throw std::invalid_argument("external row out of range");
        table = external;
        break;
    }
    for (int c = 0; c < d; ++c) x0.at(static_cast<int>(t), c) = table->at(ref.index, c);
  }
  return x0;
}

}  // namespace

StackTrace run_stack(const ToyModel& model, std::span<const TokenRef> items,
                     const Mat* memory, const Mat* external,
                     std::span<const std::int64_t> position_ids,
                     const AttentionMask& mask, const StackOptions& opts) {
  const ToyModelParams& params = model.params;
  params.validate();
  if (items.empty()) throw std::invalid_argument("empty input sequence");
  if (items.size() != position_ids.size())
    throw std::invalid_argument("tokens and position_ids length mismatch");

  const int t_cur = static_cast<int>(items.size());
  const int prefix_len = opts.prefix != nullptr ? opts.prefix->len : 0;
  if (mask.n_query != t_cur || mask.n_key != prefix_len + t_cur)
    throw std::invalid_argument("mask shape does not match sequence");
  for (int q = 0; q < mask.n_query; ++q) {
    bool any = false;
    for (int k = 0; k < mask.n_key && !any; ++k) any = mask.allowed(q, k);
    if (!any) throw std::invalid_argument("query attends to nothing");
  }
  if (opts.prefix != nullptr &&
      static_cast<int>(opts.prefix->layers.size()) != params.n_layers)
    throw std::invalid_argument("kv prefix layer count mismatch");

  StackTrace trace;
  trace.prefix_len = prefix_len;
  trace.position_ids.assign(position_ids.begin(), position_ids.end());
  trace.x0 = gather_rows(model, items, memory, external);

  const int hd = params.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Mat x = trace.x0;
  trace.layers.resize(static_cast<std::size_t>(params.n_layers));
  for (int l = 0; l < params.n_layers; ++l) {
    const ToyWeights::Layer& wl = model.weights.layers[static_cast<std::size_t>(l)];
    LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];
    lt.x_in = x;

    Mat xq = matmul(x, wl.wq);
    Mat xk = matmul(x, wl.wk);
    Mat xv = matmul(x, wl.wv);
    if (opts.perturb != nullptr && opts.perturb->layer == l)
      add_inplace(xv, opts.perturb->delta);

    rope_rows_inplace(xq, position_ids, hd, params.rope_base, false);
    rope_rows_inplace(xk, position_ids, hd, params.rope_base, false);
    lt.k_cur = xk;
    lt.v_cur = xv;

    lt.q = split_heads(xq, params.n_heads);
    std::vector<Mat> k_cur = split_heads(xk, params.n_heads);
    std::vector<Mat> v_cur = split_heads(xv, params.n_heads);
    if (prefix_len > 0) {
      const LayerKv& pf = opts.prefix->layers[static_cast<std::size_t>(l)];
      std::vector<Mat> kp = split_heads(pf.k_rot, params.n_heads);
      std::vector<Mat> vp = split_heads(pf.v, params.n_heads);
      lt.k.resize(static_cast<std::size_t>(params.n_heads));
      lt.v.resize(static_cast<std::size_t>(params.n_heads));
      for (int h = 0; h < params.n_heads; ++h) {
        lt.k[static_cast<std::size_t>(h)] =
            vconcat(kp[static_cast<std::size_t>(h)], k_cur[static_cast<std::size_t>(h)]);
        lt.v[static_cast<std::size_t>(h)] =
            vconcat(vp[static_cast<std::size_t>(h)], v_cur[static_cast<std::size_t>(h)]);
      }
    } else {
      lt.k = std::move(k_cur);
      lt.v = std::move(v_cur);
    }

    std::vector<Mat> mixed(static_cast<std::size_t>(params.n_heads));
    lt.probs.resize(static_cast<std::size_t>(params.n_heads));
    for (int h = 0; h < params.n_heads; ++h) {
      Mat scores = matmul_nt(lt.q[static_cast<std::size_t>(h)],
                             lt.k[static_cast<std::size_t>(h)]);
      scale_inplace(scores, inv_sqrt);
      lt.probs[static_cast<std::size_t>(h)] = masked_softmax(scores, mask);
      mixed[static_cast<std::size_t>(h)] = masked_mix(
          lt.probs[static_cast<std::size_t>(h)], lt.v[static_cast<std::size_t>(h)], mask);
    }
    lt.ctx = merge_heads(mixed);

    lt.x_attn = lt.x_in;
    add_inplace(lt.x_attn, matmul(lt.ctx, wl.wo));

    Mat pre = matmul(lt.x_attn, wl.w1);
    lt.ffn_act = pre;
    for (auto& v : lt.ffn_act.a) v = std::tanh(v);
    lt.x_out = lt.x_attn;
    add_inplace(lt.x_out, matmul(lt.ffn_act, wl.w2));

    x = lt.x_out;
  }

  if (opts.want_logits) trace.logits = matmul(trace.x_final(), model.weights.head);
  return trace;
}

StackGrads stack_backward(const ToyModel& model, const StackTrace& trace,
                          const StackSeeds& seeds) {
  const ToyModelParams& params = model.params;
  const int t_cur = trace.x0.rows;
  const int prefix_len = trace.prefix_len;
  const int hd = params.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  StackGrads grads;
  if (prefix_len > 0)
    grads.dprefix.assign(static_cast<std::size_t>(params.n_layers),
                         LayerKv{Mat(prefix_len, params.d_model),
                                 Mat(prefix_len, params.d_model)});

  Mat dx(t_cur, params.d_model);
  if (seeds.dlogits != nullptr) add_inplace(dx, matmul_nt(*seeds.dlogits, model.weights.head));
  if (seeds.dx_final != nullptr) add_inplace(dx, *seeds.dx_final);

  for (int l = params.n_layers - 1; l >= 0; --l) {
    const ToyWeights::Layer& wl = model.weights.layers[static_cast<std::size_t>(l)];
    const LayerTrace& lt = trace.layers[static_cast<std::size_t>(l)];

    // x_out = x_attn + tanh(x_attn * w1) * w2
    Mat dact = matmul_nt(dx, wl.w2);
    for (std::size_t i = 0; i < dact.a.size(); ++i)
      dact.a[i] *= 1.0 - lt.ffn_act.a[i] * lt.ffn_act.a[i];
    Mat dx_attn = dx;
    add_inplace(dx_attn, matmul_nt(dact, wl.w1));

    // x_attn = x_in + ctx * wo
    Mat dctx = matmul_nt(dx_attn, wl.wo);
    Mat dx_in = dx_attn;

    std::vector<Mat> dctx_h = split_heads(dctx, params.n_heads);
    std::vector<Mat> dq_h(static_cast<std::size_t>(params.n_heads));
    std::vector<Mat> dk_h(static_cast<std::size_t>(params.n_heads));
    std::vector<Mat> dv_h(static_cast<std::size_t>(params.n_heads));
    for (int h = 0; h < params.n_heads; ++h) {
      const Mat& probs = lt.probs[static_cast<std::size_t>(h)];
      const Mat& vfull = lt.v[static_cast<std::size_t>(h)];
      const Mat& kfull = lt.k[static_cast<std::size_t>(h)];
      const Mat& dmix = dctx_h[static_cast<std::size_t>(h)];

      Mat dprobs = matmul_nt(dmix, vfull);
      dv_h[static_cast<std::size_t>(h)] = matmul_tn(probs, dmix);

      // softmax backward: ds = p .* (dp - rowsum(p .* dp))
      Mat ds(probs.rows, probs.cols);
      for (int q = 0; q < probs.rows; ++q) {
        double dot = 0.0;
        for (int k = 0; k < probs.cols; ++k) dot += probs.at(q, k) * dprobs.at(q, k);
        for (int k = 0; k < probs.cols; ++k)
          ds.at(q, k) = probs.at(q, k) * (dprobs.at(q, k) - dot);
      }
      scale_inplace(ds, inv_sqrt);

      dq_h[static_cast<std::size_t>(h)] = matmul(ds, kfull);
      dk_h[static_cast<std::size_t>(h)] = matmul_tn(ds, lt.q[static_cast<std::size_t>(h)]);
    }

    Mat dq = merge_heads(dq_h);
    Mat dk_full = merge_heads(dk_h);
    Mat dv_full = merge_heads(dv_h);

    // Downstream consumers of this layer's exported current-row KV.
    if (seeds.dkv != nullptr) {
      const LayerKv& ext = (*seeds.dkv)[static_cast<std::size_t>(l)];
      for (int r = 0; r < t_cur; ++r)
        for (int c = 0; c < params.d_model; ++c) {
          dk_full.at(prefix_len + r, c) += ext.k_rot.at(r, c);
          dv_full.at(prefix_len + r, c) += ext.v.at(r, c);
        }
    }

    if (prefix_len > 0) {
      LayerKv& pg = grads.dprefix[static_cast<std::size_t>(l)];
      for (int r = 0; r < prefix_len; ++r)
        for (int c = 0; c < params.d_model; ++c) {
          pg.k_rot.at(r, c) += dk_full.at(r, c);
          pg.v.at(r, c) += dv_full.at(r, c);
        }
    }

    Mat dk_cur = row_slice(dk_full, prefix_len, prefix_len + t_cur);
    Mat dv_cur = row_slice(dv_full, prefix_len, prefix_len + t_cur);

    // Rotation is orthogonal: its adjoint is rotation by the negated ID.
    rope_rows_inplace(dq, trace.position_ids, hd, params.rope_base, true);
    rope_rows_inplace(dk_cur, trace.position_ids, hd, params.rope_base, true);

    add_inplace(dx_in, matmul_nt(dq, wl.wq));
    add_inplace(dx_in, matmul_nt(dk_cur, wl.wk));
    add_inplace(dx_in, matmul_nt(dv_cur, wl.wv));

    dx = std::move(dx_in);
  }

  grads.dx0 = std::move(dx);
  return grads;
}

void scatter_input_grads(std::span<const TokenRef> items, const Mat& dx0,
                         const ToyModelParams& params, int memory_count,
                         int external_rows, InputGrads& grads) {
  const int d = params.d_model;
  if (grads.d_embed.empty()) grads.d_embed = Mat(params.vocab, d);
  if (grads.d_special.empty()) grads.d_special = Mat(2, d);
  if (grads.d_memory.empty() && memory_count > 0) grads.d_memory = Mat(memory_count, d);
  if (grads.d_external.empty() && external_rows > 0)
    grads.d_external = Mat(external_rows, d);

  for (std::size_t t = 0; t < items.size(); ++t) {
    Mat* table = nullptr;
    switch (items[t].kind) {
      case TokenRef::Kind::Vocab: table = &grads.d_embed; break;
      case TokenRef::Kind::Special: table = &grads.d_special; break;
      case TokenRef::Kind::Memory: table = &grads.d_memory; break;
      case TokenRef::Kind::External: table = &grads.d_external; break;
    }
    for (int c = 0; c < d; ++c)
      table->at(items[t].index, c) += dx0.at(static_cast<int>(t), c);
  }
}

ForwardResult forward(const ToyModel& model, std::span<const int> tokens,
                      std::span<const std::int64_t> position_ids,
                      const AttentionMask& mask) {
  std::vector<TokenRef> items;
  items.reserve(tokens.size());
  for (const int id : tokens) items.push_back(TokenRef::vocab(id));

  StackTrace trace = run_stack(model, items, nullptr, nullptr, position_ids, mask);

  ForwardResult result;
  result.outputs = trace.x_final();
  result.logits = std::move(trace.logits);
  for (const auto& lt : trace.layers) {
    result.kv.push_back({lt.k_cur, lt.v_cur});
    for (const auto& p : lt.probs) result.attn.push_back(p);
  }
  return result;
}

CompressResult compress_chunk(std::span<const int> chunk_tokens,
                              const MemoryEmbeddings& memory,
                              const PositionLayout& layout, const ToyModel& model) {
  const int m = memory.rows.rows;
  std::vector<TokenRef> items;
  std::vector<std::int64_t> pos;
  int n_context = 0;
  for (const auto& e : layout.entries) {
    if (e.role == TokenRole::Context) {
      if (n_context >= static_cast<int>(chunk_tokens.size()))
        throw std::invalid_argument("layout has more context entries than tokens");
      items.push_back(TokenRef::vocab(chunk_tokens[static_cast<std::size_t>(n_context)]));
      ++n_context;
    } else if (e.role == TokenRole::Memory) {
      const int j = static_cast<int>(e.index);
      items.push_back(TokenRef::memory(j));
    } else {
      throw std::invalid_argument("encoder layout may only hold context and memory");
    }
    pos.push_back(e.position_id);
  }
  if (n_context != static_cast<int>(chunk_tokens.size()))
    throw std::invalid_argument("layout context entries do not match chunk length");
  const int n_memory = static_cast<int>(items.size()) - n_context;
  if (n_memory != m)
    throw std::invalid_argument("layout memory entries do not match memory rows");

  const AttentionMask mask = AttentionMask::causal(static_cast<int>(items.size()));
  StackOptions opts;
  opts.want_logits = false;
  StackTrace trace = run_stack(model, items, &memory.rows, nullptr, pos, mask, opts);

  const int t = static_cast<int>(items.size());
  CompressResult out;
  out.memory_outputs = row_slice(trace.x_final(), t - m, t);
  for (const auto& lt : trace.layers)
    out.kv.push_back({row_slice(lt.k_cur, t - m, t), row_slice(lt.v_cur, t - m, t)});
  return out;
}

}  // namespace poslayout::toy
