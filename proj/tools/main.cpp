// poslayout — command-line front end for the position-layout toolkit.
//
// Verb-noun subcommands:
//   layout encode|decode|voco|validate|oracle
//   pe     sine-sim|rope-decay
//   toy    loss|grad-check|attn-dump|shift-test
//
// Exit codes: 0 success, 1 input error, 2 semantic validation failure.
// Every subcommand is deterministic given its flags and seed.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poslayout/layout.hpp"
#include "poslayout/layout_config.hpp"
#include "poslayout/losses.hpp"
#include "poslayout/oracle.hpp"
#include "poslayout/pe.hpp"
#include "poslayout/serialize.hpp"
#include "poslayout/toy_model.hpp"
#include "poslayout/validate.hpp"

namespace {

using poslayout::LayoutConfig;
using poslayout::PositionLayout;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitValidation = 2;

// ---------------------------------------------------------------------------
// Shared flag plumbing

// A small configuration every subcommand can run without external files;
// --canonical or --config swap in a different base, individual flags override
// single fields on top of it.
LayoutConfig demo_config() {
  LayoutConfig c;
  c.chunk_size = 8;
  c.memory_count = 2;
  c.context_len = 16;
  c.total_len = 24;
  c.question_len = 4;
  c.answer_len = 3;
  c.framework = poslayout::Framework::Icae;
  c.scheme = poslayout::Scheme::Epl;
  c.task = poslayout::Task::Ae;
  return c;
}

struct ConfigFlags {
  bool canonical = false;
  std::string config_path;
  std::optional<int> chunk_size, memory_count, context_len, total_len;
  std::optional<int> question_len, answer_len;
  std::optional<std::string> framework, scheme, task;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_flag("--canonical", f.canonical,
                "start from the canonical configuration "
                "(k=2, L=510, M=102, p=1020, X=2040, Q=50, A=5)");
  cmd->add_option("--config", f.config_path, "start from a LayoutConfig JSON file");
  cmd->add_option("--chunk-size", f.chunk_size, "context tokens per chunk (L)");
  cmd->add_option("--memory-count", f.memory_count, "memory tokens per chunk (M)");
  cmd->add_option("--context-len", f.context_len, "total context length (p)");
  cmd->add_option("--total-len", f.total_len, "context + completion length (X)");
  cmd->add_option("--question-len", f.question_len, "question tokens (Q)");
  cmd->add_option("--answer-len", f.answer_len, "answer tokens (A)");
  cmd->add_option("--framework", f.framework, "icae | x500");
  cmd->add_option("--scheme", f.scheme, "dpl | epl");
  cmd->add_option("--task", f.task, "ae | lm | qa");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

LayoutConfig apply_overrides(LayoutConfig config, const ConfigFlags& f) {
  if (f.chunk_size) config.chunk_size = *f.chunk_size;
  if (f.memory_count) config.memory_count = *f.memory_count;
  if (f.context_len) config.context_len = *f.context_len;
  if (f.total_len) config.total_len = *f.total_len;
  if (f.question_len) config.question_len = *f.question_len;
  if (f.answer_len) config.answer_len = *f.answer_len;
  if (f.framework) config.framework = poslayout::framework_from_string(*f.framework);
  if (f.scheme) config.scheme = poslayout::scheme_from_string(*f.scheme);
  if (f.task) config.task = poslayout::task_from_string(*f.task);
  return config;
}

LayoutConfig resolve_config(const ConfigFlags& f) {
  if (f.canonical && !f.config_path.empty())
    throw std::invalid_argument("--canonical and --config are mutually exclusive");
  LayoutConfig base = f.canonical ? LayoutConfig::canonical()
                      : !f.config_path.empty()
                          ? poslayout::layout_config_from_json(read_file(f.config_path))
                          : demo_config();
  LayoutConfig config = apply_overrides(base, f);
  config.validate();
  return config;
}

struct OutputFlags {
  std::string out_path;  // empty = stdout
  std::string format = "json";
};

void add_out_flag(CLI::App* cmd, OutputFlags& o) {
  cmd->add_option("--out", o.out_path, "write output to this file instead of stdout");
}

void add_format_flag(CLI::App* cmd, OutputFlags& o) {
  cmd->add_option("--format", o.format, "json | csv (default json)")
      ->check(CLI::IsMember({"json", "csv"}));
}

void emit(const OutputFlags& o, const std::string& text) {
  if (o.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.out_path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file: " + o.out_path);
  out << text;
}

std::string render_layout(const PositionLayout& layout, const OutputFlags& o) {
  return o.format == "csv" ? poslayout::to_csv(layout) : poslayout::to_json(layout);
}

// ---------------------------------------------------------------------------
// toy run-spec

struct RunSpec {
  poslayout::toy::ToyModelParams model;
  ConfigFlags config_flags;  // layered on top of the spec's layout
  std::string spec_path;
  std::optional<LayoutConfig> spec_layout;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> d_model, n_heads, vocab, n_layers;
  std::optional<double> rope_base;
};

void add_runspec_flags(CLI::App* cmd, RunSpec& r) {
  cmd->add_option("--spec", r.spec_path,
                  "JSON run-spec {\"model\":{...},\"layout\":{...},\"seed\":n}");
  cmd->add_option("--seed", r.seed_flag, "seed for weights and token material");
  cmd->add_option("--d-model", r.d_model, "model width");
  cmd->add_option("--n-heads", r.n_heads, "attention heads");
  cmd->add_option("--vocab", r.vocab, "vocabulary size");
  cmd->add_option("--n-layers", r.n_layers, "transformer layers");
  cmd->add_option("--rope-base", r.rope_base, "rotary frequency base");
  add_config_flags(cmd, r.config_flags);
}

void parse_spec_file(RunSpec& r) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(r.spec_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("run-spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("run-spec must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer())
        throw std::invalid_argument("run-spec seed must be an integer");
      r.model.seed = value.get<std::uint64_t>();
    } else if (key == "layout") {
      r.spec_layout = poslayout::layout_config_from_json(value.dump());
    } else if (key == "model") {
      if (!value.is_object())
        throw std::invalid_argument("run-spec model must be an object");
      for (const auto& [mk, mv] : value.items()) {
        if (mk == "d_model") r.model.d_model = mv.get<int>();
        else if (mk == "n_heads") r.model.n_heads = mv.get<int>();
        else if (mk == "vocab") r.model.vocab = mv.get<int>();
        else if (mk == "n_layers") r.model.n_layers = mv.get<int>();
        else if (mk == "rope_base") r.model.rope_base = mv.get<double>();
        else throw std::invalid_argument("run-spec model has unknown key \"" + mk + "\"");
      }
    } else {
      throw std::invalid_argument("run-spec has unknown key \"" + key + "\"");
    }
  }
}

// Resolution order: defaults < spec file < individual flags.
struct ResolvedRun {
  poslayout::toy::ToyModelParams params;
  LayoutConfig config;
};

ResolvedRun resolve_run(RunSpec& r) {
  if (!r.spec_path.empty()) parse_spec_file(r);
  if (r.seed_flag) r.model.seed = *r.seed_flag;
  if (r.d_model) r.model.d_model = *r.d_model;
  if (r.n_heads) r.model.n_heads = *r.n_heads;
  if (r.vocab) r.model.vocab = *r.vocab;
  if (r.n_layers) r.model.n_layers = *r.n_layers;
  if (r.rope_base) r.model.rope_base = *r.rope_base;
  r.model.validate();

  const ConfigFlags& f = r.config_flags;
  if (r.spec_layout && (f.canonical || !f.config_path.empty()))
    throw std::invalid_argument(
        "run-spec layout conflicts with --canonical/--config");
  LayoutConfig base = r.spec_layout ? *r.spec_layout
                      : f.canonical ? LayoutConfig::canonical()
                      : !f.config_path.empty()
                          ? poslayout::layout_config_from_json(read_file(f.config_path))
                          : demo_config();
  LayoutConfig config = apply_overrides(base, f);
  config.validate();
  return {r.model, config};
}

poslayout::toy::LossKind kind_for_task(poslayout::Task task) {
  switch (task) {
    case poslayout::Task::Ae: return poslayout::toy::LossKind::Ae;
    case poslayout::Task::Lm: return poslayout::toy::LossKind::Lm;
    case poslayout::Task::Qa: return poslayout::toy::LossKind::Qa;
  }
  throw std::invalid_argument("unknown task");
}

std::string metrics_json(double loss, std::optional<double> grad_check) {
  nlohmann::ordered_json doc;
  doc["loss"] = loss;
  if (grad_check) doc["grad_check"] = *grad_check;
  else doc["grad_check"] = nullptr;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Subcommand bodies.  Each returns the process exit code.

int run_layout_encode(const ConfigFlags& f, int chunk, const OutputFlags& o) {
  const LayoutConfig config = resolve_config(f);
  emit(o, render_layout(poslayout::encoder_layout(config, chunk), o));
  return kExitOk;
}

int run_layout_decode(const ConfigFlags& f, const OutputFlags& o) {
  const LayoutConfig config = resolve_config(f);
  emit(o, render_layout(poslayout::decoder_layout(config), o));
  return kExitOk;
}

int run_layout_voco(int vision, int voco, int text, const std::string& scheme,
                    const OutputFlags& o) {
  const PositionLayout layout = poslayout::voco_layout(
      vision, voco, text, poslayout::scheme_from_string(scheme));
  emit(o, render_layout(layout, o));
  return kExitOk;
}

int run_layout_validate(const ConfigFlags& f, const std::string& stage, int chunk,
                        const OutputFlags& o) {
  const LayoutConfig config = resolve_config(f);
  const PositionLayout layout = stage == "encoder"
                                    ? poslayout::encoder_layout(config, chunk)
                                    : poslayout::decoder_layout(config);
  const poslayout::ValidationReport report = poslayout::validate_layout(layout, config);
  emit(o, poslayout::to_json(report));
  return report.all_passed() ? kExitOk : kExitValidation;
}

int run_layout_oracle(int len, int memory, const OutputFlags& o) {
  emit(o, poslayout::to_json(poslayout::brute_force_optimal_minimax(len, memory)));
  return kExitOk;
}

int run_pe_sine_sim(int dmodel, int maxpos, double base, const OutputFlags& o) {
  poslayout::pe::SinusoidalParams params;
  params.d_model = dmodel;
  params.base = base;
  if (maxpos < 1) throw std::invalid_argument("--maxpos must be at least 1");
  const auto sim = poslayout::pe::cosine_similarity_curve(maxpos, params);
  std::string out = "pos_a,pos_b,cosine\n";
  for (int a = 0; a < maxpos; ++a)
    for (int b = 0; b < maxpos; ++b)
      out += std::to_string(a) + "," + std::to_string(b) + "," +
             poslayout::format_double(sim[static_cast<std::size_t>(a)]
                                         [static_cast<std::size_t>(b)]) +
             "\n";
  emit(o, out);
  return kExitOk;
}

int run_pe_rope_decay(int dim, int max_delta, int samples, std::uint64_t seed,
                      double base, int threads, const OutputFlags& o) {
  poslayout::pe::RopeParams params;
  params.head_dim = dim;
  params.base = base;
  const auto curve =
      poslayout::pe::rope_attention_decay(params, max_delta, samples, seed, threads);
  std::string out = "delta,mean_score\n";
  for (const auto& point : curve)
    out += std::to_string(point.delta) + "," +
           poslayout::format_double(point.mean_score) + "\n";
  emit(o, out);
  return kExitOk;
}

int run_toy_loss(RunSpec& spec, const OutputFlags& o) {
  const auto [params, config] = resolve_run(spec);
  const auto model = poslayout::toy::ToyModel::create(params);
  const auto memory = poslayout::toy::init_memory(params, config.memory_count);
  const auto inputs = poslayout::toy::default_loss_inputs(config, params);
  const auto carriers =
      poslayout::toy::compress_context(inputs.context, memory, config, model);
  const PositionLayout decoder = poslayout::decoder_layout(config);

  double loss = 0.0;
  switch (config.task) {
    case poslayout::Task::Ae:
      loss = poslayout::toy::ae_loss(inputs.context, carriers, decoder, model);
      break;
    case poslayout::Task::Lm:
      loss = poslayout::toy::lm_loss(inputs.completion, carriers, decoder, model);
      break;
    case poslayout::Task::Qa:
      loss = poslayout::toy::qa_loss(inputs.question, inputs.answer, carriers,
                                     decoder, model);
      break;
  }
  emit(o, metrics_json(loss, std::nullopt));
  return kExitOk;
}

int run_toy_grad_check(RunSpec& spec, const std::string& loss_name, double epsilon,
                       const OutputFlags& o) {
  const auto [params, config] = resolve_run(spec);
  const auto model = poslayout::toy::ToyModel::create(params);
  const poslayout::toy::LossKind kind =
      loss_name.empty() ? kind_for_task(config.task)
                        : poslayout::toy::loss_kind_from_string(loss_name);
  // The decoder layout must match the loss being differentiated.
  LayoutConfig run = config;
  run.task = kind == poslayout::toy::LossKind::Ae   ? poslayout::Task::Ae
             : kind == poslayout::toy::LossKind::Lm ? poslayout::Task::Lm
                                                    : poslayout::Task::Qa;
  run.validate();
  const auto result = poslayout::toy::grad_check(kind, run, model, epsilon);
  emit(o, metrics_json(result.loss, result.max_relative_error));
  return kExitOk;
}

int run_toy_attn_dump(RunSpec& spec, const OutputFlags& o) {
  const auto [params, config] = resolve_run(spec);
  const auto model = poslayout::toy::ToyModel::create(params);
  const auto memory = poslayout::toy::init_memory(params, config.memory_count);
  const auto inputs = poslayout::toy::default_loss_inputs(config, params);
  const auto carriers =
      poslayout::toy::compress_context(inputs.context, memory, config, model);
  const auto result = poslayout::toy::decode_with_loss(
      kind_for_task(config.task), inputs, carriers,
      poslayout::decoder_layout(config), model);

  std::string out;
  const int heads = params.n_heads;
  for (std::size_t m = 0; m < result.attn.size(); ++m) {
    const int layer = static_cast<int>(m) / heads;
    const int head = static_cast<int>(m) % heads;
    out += "# " + std::to_string(layer) + "," + std::to_string(head) + "\n";
    const auto& mat = result.attn[m];
    for (int r = 0; r < mat.rows; ++r) {
      for (int c = 0; c < mat.cols; ++c) {
        if (c > 0) out += ",";
        out += poslayout::format_double(mat.at(r, c));
      }
      out += "\n";
    }
  }
  emit(o, out);
  return kExitOk;
}

int run_toy_shift_test(RunSpec& spec, std::int64_t shift, const OutputFlags& o) {
  const auto [params, config] = resolve_run(spec);
  const auto model = poslayout::toy::ToyModel::create(params);
  const double diff =
      poslayout::toy::shift_invariance_max_diff(config, model, shift);
  nlohmann::ordered_json doc;
  doc["max_abs_diff"] = diff;
  emit(o, doc.dump(2) + "\n");
  return diff > 1e-9 ? kExitValidation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"position-layout toolkit: layout generation, validation, oracle "
               "certification, PE analysis, toy-model verification"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  // --- layout ---------------------------------------------------------------
  auto* layout = app.add_subcommand("layout", "generate, validate, certify layouts");
  layout->require_subcommand(1);

  auto* enc = layout->add_subcommand("encode", "encoder layout for one chunk");
  ConfigFlags enc_cfg;
  OutputFlags enc_out;
  int enc_chunk = 1;
  add_config_flags(enc, enc_cfg);
  enc->add_option("--chunk", enc_chunk, "1-based chunk index (default 1)");
  add_out_flag(enc, enc_out);
  add_format_flag(enc, enc_out);
  enc->callback([&] { exit_code = run_layout_encode(enc_cfg, enc_chunk, enc_out); });

  auto* dec = layout->add_subcommand("decode", "decoder layout for the whole task");
  ConfigFlags dec_cfg;
  OutputFlags dec_out;
  add_config_flags(dec, dec_cfg);
  add_out_flag(dec, dec_out);
  add_format_flag(dec, dec_out);
  dec->callback([&] { exit_code = run_layout_decode(dec_cfg, dec_out); });

  auto* voco = layout->add_subcommand("voco", "vision/voco/text sequence layout");
  OutputFlags voco_out;
  int voco_vision = 576, voco_tokens = 128, voco_text = 10;
  std::string voco_scheme = "dpl";
  voco->add_option("--vision", voco_vision, "vision token count (default 576)");
  voco->add_option("--voco", voco_tokens, "compression token count (default 128)");
  voco->add_option("--text", voco_text, "text token count (default 10)");
  voco->add_option("--scheme", voco_scheme, "dpl | epl (default dpl)");
  add_out_flag(voco, voco_out);
  add_format_flag(voco, voco_out);
  voco->callback([&] {
    exit_code = run_layout_voco(voco_vision, voco_tokens, voco_text, voco_scheme,
                                voco_out);
  });

  auto* val = layout->add_subcommand(
      "validate", "audit a generated layout; exit 2 when any check fails");
  ConfigFlags val_cfg;
  OutputFlags val_out;
  std::string val_stage = "decoder";
  int val_chunk = 1;
  add_config_flags(val, val_cfg);
  val->add_option("--stage", val_stage, "encoder | decoder (default decoder)")
      ->check(CLI::IsMember({"encoder", "decoder"}));
  val->add_option("--chunk", val_chunk, "chunk index when --stage encoder");
  add_out_flag(val, val_out);
  val->callback(
      [&] { exit_code = run_layout_validate(val_cfg, val_stage, val_chunk, val_out); });

  auto* oracle = layout->add_subcommand(
      "oracle", "exhaustive minimax placement optimum for one chunk");
  OutputFlags oracle_out;
  int oracle_len = 0, oracle_mem = 0;
  oracle->add_option("-L,--L", oracle_len, "chunk length")->required();
  oracle->add_option("-M,--M", oracle_mem, "memory token count")->required();
  add_out_flag(oracle, oracle_out);
  oracle->callback([&] { exit_code = run_layout_oracle(oracle_len, oracle_mem, oracle_out); });

  // --- pe -------------------------------------------------------------------
  auto* pe = app.add_subcommand("pe", "position-encoding analysis curves (CSV)");
  pe->require_subcommand(1);

  auto* sine = pe->add_subcommand("sine-sim",
                                  "sinusoidal cosine-similarity matrix");
  OutputFlags sine_out;
  int sine_dmodel = 0, sine_maxpos = 0;
  double sine_base = 10000.0;
  sine->add_option("--dmodel", sine_dmodel, "encoding dimension (even)")->required();
  sine->add_option("--maxpos", sine_maxpos, "positions 0..maxpos-1")->required();
  sine->add_option("--base", sine_base, "frequency base (default 10000)");
  add_out_flag(sine, sine_out);
  sine->callback(
      [&] { exit_code = run_pe_sine_sim(sine_dmodel, sine_maxpos, sine_base, sine_out); });

  auto* decay = pe->add_subcommand("rope-decay",
                                   "rotary self-score decay over distance");
  OutputFlags decay_out;
  int decay_dim = 0, decay_max = 0, decay_samples = 1000, decay_threads = 1;
  std::uint64_t decay_seed = 0;
  double decay_base = 10000.0;
  decay->add_option("--dim", decay_dim, "head dimension (even)")->required();
  decay->add_option("--max-delta", decay_max, "largest offset")->required();
  decay->add_option("--samples", decay_samples, "unit vectors averaged (default 1000)");
  decay->add_option("--seed", decay_seed, "sample seed (default 0)");
  decay->add_option("--base", decay_base, "frequency base (default 10000)");
  decay->add_option("--threads", decay_threads, "worker threads (default 1)");
  add_out_flag(decay, decay_out);
  decay->callback([&] {
    exit_code = run_pe_rope_decay(decay_dim, decay_max, decay_samples, decay_seed,
                                  decay_base, decay_threads, decay_out);
  });

  // --- toy ------------------------------------------------------------------
  auto* toy = app.add_subcommand("toy", "compression pipeline on the toy model");
  toy->require_subcommand(1);

  auto* loss = toy->add_subcommand("loss", "pipeline loss for the config's task");
  RunSpec loss_spec;
  OutputFlags loss_out;
  add_runspec_flags(loss, loss_spec);
  add_out_flag(loss, loss_out);
  loss->callback([&] { exit_code = run_toy_loss(loss_spec, loss_out); });

  auto* grad = toy->add_subcommand(
      "grad-check", "analytic vs finite-difference pipeline gradients");
  RunSpec grad_spec;
  OutputFlags grad_out;
  std::string grad_loss;
  double grad_eps = 1e-5;
  add_runspec_flags(grad, grad_spec);
  grad->add_option("--loss", grad_loss, "ae | lm | qa (default: config task)");
  grad->add_option("--epsilon", grad_eps,
                   "finite-difference step in [1e-6, 1e-4] (default 1e-5)");
  add_out_flag(grad, grad_out);
  grad->callback(
      [&] { exit_code = run_toy_grad_check(grad_spec, grad_loss, grad_eps, grad_out); });

  auto* attn = toy->add_subcommand("attn-dump",
                                   "decoder attention maps, one CSV matrix per "
                                   "(layer, head)");
  RunSpec attn_spec;
  OutputFlags attn_out;
  add_runspec_flags(attn, attn_spec);
  add_out_flag(attn, attn_out);
  attn->callback([&] { exit_code = run_toy_attn_dump(attn_spec, attn_out); });

  auto* shift = toy->add_subcommand(
      "shift-test", "global position-ID shift invariance; exit 2 above 1e-9");
  RunSpec shift_spec;
  OutputFlags shift_out;
  std::int64_t shift_by = 1;
  add_runspec_flags(shift, shift_spec);
  shift->add_option("--shift", shift_by, "ID offset applied everywhere (default 1)");
  add_out_flag(shift, shift_out);
  shift->callback([&] { exit_code = run_toy_shift_test(shift_spec, shift_by, shift_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints message + usage hint to stderr
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return exit_code;
}
