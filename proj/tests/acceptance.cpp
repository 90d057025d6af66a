// End-to-end acceptance gate.  Each numbered criterion prints one PASS/FAIL
// line with its runtime; the process exits non-zero if any line fails.  Run
// via ctest or directly from the build tree.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "poslayout/layout.hpp"
#include "poslayout/losses.hpp"
#include "poslayout/oracle.hpp"
#include "poslayout/pe.hpp"
#include "poslayout/rng.hpp"
#include "poslayout/toy_model.hpp"
#include "poslayout/validate.hpp"

using namespace poslayout;
using namespace poslayout::toy;

namespace {

LayoutConfig demo_config(Framework f = Framework::Icae, Scheme s = Scheme::Epl,
                         Task t = Task::Ae) {
  LayoutConfig c;
  c.chunk_size = 8;
  c.memory_count = 2;
  c.context_len = 16;
  c.total_len = 24;
  c.question_len = 4;
  c.answer_len = 3;
  c.framework = f;
  c.scheme = s;
  c.task = t;
  return c;
}

bool ids_match(const std::vector<std::int64_t>& got, std::int64_t first, std::int64_t step,
               std::size_t count, std::string& why, const char* what) {
  if (got.size() != count) {
    why = std::string(what) + ": size " + std::to_string(got.size()) + " != " +
          std::to_string(count);
    return false;
  }
  for (std::size_t j = 0; j < count; ++j)
    if (got[j] != first + step * static_cast<std::int64_t>(j)) {
      why = std::string(what) + ": id[" + std::to_string(j) + "] = " +
            std::to_string(got[j]) + ", want " +
            std::to_string(first + step * static_cast<std::int64_t>(j));
      return false;
    }
  return true;
}

// ---- criterion 1: reference layout tables ---------------------------------

bool check_reference_tables(std::string& why) {
  LayoutConfig epl = LayoutConfig::canonical();
  epl.scheme = Scheme::Epl;

  const PositionLayout enc1 = encoder_layout(epl, 1);
  if (!ids_match(enc1.ids_for(TokenRole::Context), 1, 1, 510, why, "enc1 context") ||
      !ids_match(enc1.ids_for(TokenRole::Memory, 1), 3, 5, 102, why, "enc1 memory"))
    return false;
  const PositionLayout enc2 = encoder_layout(epl, 2);
  if (!ids_match(enc2.ids_for(TokenRole::Context), 511, 1, 510, why, "enc2 context") ||
      !ids_match(enc2.ids_for(TokenRole::Memory, 2), 513, 5, 102, why, "enc2 memory"))
    return false;

  const PositionLayout ae_dec = decoder_layout(LayoutConfig::canonical());
  if (!ids_match(ae_dec.ids_for(TokenRole::Carrier), 0, 1, 204, why, "ae carriers") ||
      !ids_match(ae_dec.ids_for(TokenRole::Ae), 204, 1, 1, why, "ae prompt") ||
      !ids_match(ae_dec.ids_for(TokenRole::Context), 205, 1, 1020, why, "ae targets"))
    return false;

  LayoutConfig kv = LayoutConfig::canonical();
  kv.framework = Framework::X500;
  const PositionLayout kv_dec = decoder_layout(kv);
  if (!ids_match(kv_dec.ids_for(TokenRole::Carrier, 1), 510, 1, 102, why,
                 "kv carriers chunk 1") ||
      !ids_match(kv_dec.ids_for(TokenRole::Carrier, 2), 510, 1, 102, why,
                 "kv carriers chunk 2"))
    return false;

  LayoutConfig qa = LayoutConfig::canonical();
  qa.scheme = Scheme::Epl;
  qa.task = Task::Qa;
  const PositionLayout qa_dec = decoder_layout(qa);
  if (!ids_match(qa_dec.ids_for(TokenRole::Carrier, 1), 3, 5, 102, why,
                 "qa carriers chunk 1") ||
      !ids_match(qa_dec.ids_for(TokenRole::Carrier, 2), 513, 5, 102, why,
                 "qa carriers chunk 2") ||
      !ids_match(qa_dec.ids_for(TokenRole::Lm), 1020, 1, 1, why, "qa prompt") ||
      !ids_match(qa_dec.ids_for(TokenRole::Question), 1021, 1, 50, why, "qa question") ||
      !ids_match(qa_dec.ids_for(TokenRole::Answer), 1071, 1, 5, why, "qa answer"))
    return false;

  return true;
}

// ---- criterion 2: uniform placement is minimax-optimal --------------------

std::int64_t direct_minimax(int chunk_len, const std::vector<std::int64_t>& placed) {
  std::int64_t worst = 0;
  for (std::int64_t c = 1; c <= chunk_len; ++c) {
    std::int64_t best = chunk_len;
    for (const auto m : placed) best = std::min<std::int64_t>(best, std::llabs(c - m));
    worst = std::max(worst, best);
  }
  return worst;
}

bool check_uniform_optimality(std::string& why) {
  for (int L = 1; L <= 30; ++L) {
    for (int M = 1; M <= L; ++M) {
      const std::int64_t searched = brute_force_optimal_minimax(L, M).optimal_value;
      const std::int64_t placed = direct_minimax(L, uniform_memory_positions(1, L, M));
      const std::int64_t formula = ((L + M - 1) / M) / 2;
      if (placed != searched || searched != formula) {
        why = "L=" + std::to_string(L) + " M=" + std::to_string(M) + ": uniform " +
              std::to_string(placed) + ", search " + std::to_string(searched) +
              ", formula " + std::to_string(formula);
        return false;
      }
    }
  }
  return true;
}

// ---- criterion 3: causal audit over random configs -------------------------

bool check_causal_audit(std::string& why) {
  Rng rng(2024);
  int tested = 0;
  while (tested < 1000) {
    LayoutConfig config;
    config.memory_count = rng.uniform_int(1, 12);
    const int ratio = rng.uniform_int(3, 8);
    config.chunk_size = config.memory_count * ratio;
    config.context_len = config.chunk_size * rng.uniform_int(1, 4);
    config.total_len = config.context_len + rng.uniform_int(1, config.context_len);
    config.question_len = rng.uniform_int(1, 24);
    config.answer_len = rng.uniform_int(1, 8);
    config.framework = rng.uniform_int(0, 1) ? Framework::X500 : Framework::Icae;
    config.scheme = Scheme::Epl;
    config.task = rng.uniform_int(0, 1) ? Task::Qa : Task::Lm;
    config.validate();

    const ValidationReport report = validate_layout(decoder_layout(config), config);
    if (!report.all_passed()) {
      for (const auto& c : report.checks)
        if (!c.passed) {
          why = "config " + std::to_string(tested) + " (L=" +
                std::to_string(config.chunk_size) + ", M=" +
                std::to_string(config.memory_count) + ", p=" +
                std::to_string(config.context_len) + ", " + to_string(config.task) +
                ", " + to_string(config.framework) + ") failed \"" + c.name +
                "\": " + c.detail;
          return false;
        }
    }
    ++tested;
  }

  // The default kv-prefix continuation layout must trip the same audit.
  LayoutConfig bad = LayoutConfig::canonical();
  bad.framework = Framework::X500;
  bad.task = Task::Lm;
  const ValidationReport report = validate_layout(decoder_layout(bad), bad);
  const CheckResult* causal = report.find("causal id ordering");
  if (causal == nullptr || causal->passed) {
    why = "default kv-prefix continuation layout was not flagged";
    return false;
  }
  return true;
}

// ---- criterion 4: rotary shift invariance ----------------------------------

bool check_shift_invariance(std::string& why) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyModelParams params;
    params.seed = seed;
    const ToyModel model = ToyModel::create(params);
    const Framework fw = (seed % 2) ? Framework::X500 : Framework::Icae;
    for (const std::int64_t shift : {1, 11, 1000}) {
      const double diff = shift_invariance_max_diff(demo_config(fw), model, shift);
      if (!(diff < 1e-9)) {
        why = "seed " + std::to_string(seed) + " shift " + std::to_string(shift) +
              ": max diff " + std::to_string(diff);
        return false;
      }
    }
  }
  return true;
}

// ---- criterion 5: gradients match finite differences -----------------------

bool check_gradients(std::string& why) {
  for (const auto framework : {Framework::Icae, Framework::X500}) {
    for (const auto kind : {LossKind::Ae, LossKind::Lm, LossKind::Qa}) {
      const Task task = kind == LossKind::Ae  ? Task::Ae
                        : kind == LossKind::Lm ? Task::Lm
                                               : Task::Qa;
      const ToyModel model = ToyModel::create(ToyModelParams{});
      const GradCheckResult res =
          grad_check(kind, demo_config(framework, Scheme::Epl, task), model, 1e-5);
      if (!(res.max_relative_error < 1e-4)) {
        why = std::string(to_string(framework)) + "/" + to_string(kind) +
              ": max relative error " + std::to_string(res.max_relative_error);
        return false;
      }
    }
  }
  return true;
}

// ---- criterion 6: sinusoidal locality --------------------------------------

bool check_sinusoidal_locality(std::string& why) {
  const pe::SinusoidalParams params{128, 10000.0};
  const int n = 512;
  const auto sim = pe::cosine_similarity_curve(n, params);
  const auto mean_at = [&](int k) {
    double sum = 0.0;
    int count = 0;
    for (int a = 0; a + k < n; ++a) {
      sum += sim[a][a + k];
      ++count;
    }
    return sum / count;
  };
  const double near = mean_at(1);
  for (int k = 32; k < n; ++k) {
    const double far = mean_at(k);
    if (!(near > far)) {
      why = "offset 1 mean " + std::to_string(near) + " vs offset " + std::to_string(k) +
            " mean " + std::to_string(far);
      return false;
    }
  }
  return true;
}

// ---- criterion 7: rotary long-range decay -----------------------------------

bool check_rotary_decay(std::string& why) {
  const pe::RopeParams params{64, 10000.0};
  const auto curve = pe::rope_attention_decay(params, 256, 1000, 0);
  if (!(curve[1].mean_score > curve[256].mean_score)) {
    why = "score at offset 1 " + std::to_string(curve[1].mean_score) +
          " not above offset 256 " + std::to_string(curve[256].mean_score);
    return false;
  }
  return true;
}

// ---- criterion 8: vision rows reach text only through compression slots ----

bool rows_bit_equal(const Mat& x, const Mat& y, int begin, int end) {
  for (int r = begin; r < end; ++r)
    for (int c = 0; c < x.cols; ++c)
      if (x.at(r, c) != y.at(r, c)) return false;
  return true;
}

bool check_vision_containment(std::string& why) {
  const int n_vision = 576, n_voco = 128, n_text = 10;
  const int total = n_vision + n_voco + n_text;
  ToyModelParams params;
  const ToyModel model = ToyModel::create(params);

  const PositionLayout layout = voco_layout(n_vision, n_voco, n_text, Scheme::Epl);
  std::vector<TokenRef> items;
  std::vector<std::int64_t> pos;
  for (int t = 0; t < total; ++t) {
    items.push_back(TokenRef::vocab(t % params.vocab));
    pos.push_back(layout.entries[static_cast<std::size_t>(t)].position_id);
  }
  const AttentionMask mask = voco_attention_mask(n_vision, n_voco, n_text);
  const StackTrace clean = run_stack(model, items, nullptr, nullptr, pos, mask);

  const int text_begin = n_vision + n_voco;
  for (int layer = 0; layer < params.n_layers; ++layer) {
    ValuePerturb perturb;
    perturb.layer = layer;
    perturb.delta = Mat(total, params.d_model);
    for (int r = 0; r < n_vision; ++r)
      for (int c = 0; c < params.d_model; ++c)
        perturb.delta.at(r, c) = 0.31 * (r + c + 1);
    StackOptions opts;
    opts.perturb = &perturb;
    const StackTrace dirty = run_stack(model, items, nullptr, nullptr, pos, mask, opts);

    // Up to and including the perturbed layer, text rows cannot have moved:
    // the only route from vision values to text queries crosses a voco slot,
    // which costs at least one extra layer.
    for (int l = 0; l <= layer; ++l) {
      if (!rows_bit_equal(clean.layers[static_cast<std::size_t>(l)].ctx,
                          dirty.layers[static_cast<std::size_t>(l)].ctx, text_begin,
                          total) ||
          !rows_bit_equal(clean.layers[static_cast<std::size_t>(l)].x_out,
                          dirty.layers[static_cast<std::size_t>(l)].x_out, text_begin,
                          total)) {
        why = "perturbing layer " + std::to_string(layer) +
              " moved text rows at layer " + std::to_string(l);
        return false;
      }
    }
    if (layer == params.n_layers - 1 &&
        !rows_bit_equal(clean.logits, dirty.logits, text_begin, total)) {
      why = "last-layer value perturbation of vision rows changed text logits";
      return false;
    }
    // Sanity: the perturbation must reach the vision rows themselves,
    // otherwise this criterion tests nothing.
    if (rows_bit_equal(clean.layers[static_cast<std::size_t>(layer)].ctx,
                       dirty.layers[static_cast<std::size_t>(layer)].ctx, 0, n_vision)) {
      why = "perturbation had no effect at all";
      return false;
    }
  }
  return true;
}

// ---- criterion 9: CLI determinism -------------------------------------------

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(POSLAYOUT_BIN) + " " + args + " 2>/dev/null";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return res;
  std::array<char, 4096> buf;
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

bool check_cli_determinism(std::string& why) {
  const std::string commands[] = {
      "layout encode --canonical --scheme epl --chunk 2",
      "layout decode --canonical --scheme epl --task qa --format csv",
      "layout voco --scheme epl",
      "layout validate --canonical --scheme epl --task lm",
      "layout oracle -L 30 -M 6",
      "pe sine-sim --dmodel 32 --maxpos 16",
      "pe rope-decay --dim 32 --max-delta 32 --samples 200 --threads 2",
      "toy loss --task qa --framework x500",
      "toy grad-check --loss ae",
      "toy attn-dump --seed 3",
      "toy shift-test --shift 5",
  };
  for (const auto& cmd : commands) {
    const RunResult a = run_cli(cmd);
    const RunResult b = run_cli(cmd);
    if (a.exit_code != 0 || b.exit_code != 0) {
      why = "`" + cmd + "` exited " + std::to_string(a.exit_code) + " / " +
            std::to_string(b.exit_code);
      return false;
    }
    if (a.out.empty() || a.out != b.out) {
      why = "`" + cmd + "` output differs between runs";
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"reference layout tables reproduced exactly", 1.0, check_reference_tables},
      {"uniform memory placement is minimax-optimal for all L <= 30", 60.0,
       check_uniform_optimality},
      {"1000 random enhanced layouts pass the causal audit; default kv-prefix fails it",
       30.0, check_causal_audit},
      {"decoder logits invariant under global position shifts (20 seeds)", 30.0,
       check_shift_invariance},
      {"analytic gradients match finite differences for ae/lm/qa", 60.0,
       check_gradients},
      {"sinusoidal similarity favours near neighbours at d=128", 5.0,
       check_sinusoidal_locality},
      {"rotary attention decays from offset 1 to offset 256", 5.0, check_rotary_decay},
      {"vision values reach text only through compression slots", 30.0,
       check_vision_containment},
      {"CLI output is byte-identical across repeated runs", 60.0,
       check_cli_determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    std::string why;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = c.fn(why);
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > c.budget_s) {
      ok = false;
      why = (why.empty() ? "" : why + "; ") + std::string("over time budget");
    }
    std::printf("[%s] %zu. %s (%.2fs, budget %.0fs)%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                c.name, elapsed, c.budget_s, why.empty() ? "" : " -- ", why.c_str());
    if (!ok) ++failed;
  }
  std::printf("acceptance: %zu/%zu passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
