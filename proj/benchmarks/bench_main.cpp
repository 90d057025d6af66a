#include <benchmark/benchmark.h>

#include <cstdint>
#include <numeric>
#include <vector>

#include "poslayout/layout.hpp"
#include "poslayout/losses.hpp"
#include "poslayout/oracle.hpp"
#include "poslayout/pe.hpp"
#include "poslayout/toy_model.hpp"

namespace {

using namespace poslayout;
using namespace poslayout::toy;

LayoutConfig demo_config(Framework framework = Framework::Icae,
                         Scheme scheme = Scheme::Epl, Task task = Task::Ae) {
  LayoutConfig c;
  c.chunk_size = 8;
  c.memory_count = 2;
  c.context_len = 16;
  c.total_len = 24;
  c.question_len = 4;
  c.answer_len = 3;
  c.framework = framework;
  c.scheme = scheme;
  c.task = task;
  return c;
}

void BM_UniformMemoryPositions(benchmark::State& state) {
  const auto L = static_cast<std::int64_t>(state.range(0));
  const auto M = static_cast<std::int64_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(uniform_memory_positions(1, L, M));
  }
}
BENCHMARK(BM_UniformMemoryPositions)->Args({8, 2})->Args({510, 102})->Args({576, 128});

void BM_MinimaxDistance(benchmark::State& state) {
  std::vector<std::int64_t> context(510);
  std::iota(context.begin(), context.end(), 1);
  const std::vector<std::int64_t> memory = uniform_memory_positions(1, 510, 102);
  for (auto _ : state) {
    benchmark::DoNotOptimize(minimax_distance(context, memory));
  }
}
BENCHMARK(BM_MinimaxDistance);

void BM_EncoderLayout(benchmark::State& state) {
  const LayoutConfig config = LayoutConfig::canonical();
  for (auto _ : state) {
    benchmark::DoNotOptimize(encoder_layout(config, 1));
  }
}
BENCHMARK(BM_EncoderLayout);

void BM_DecoderLayout(benchmark::State& state) {
  LayoutConfig config = LayoutConfig::canonical();
  config.task = static_cast<Task>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(decoder_layout(config));
  }
}
BENCHMARK(BM_DecoderLayout)
    ->Arg(static_cast<int>(Task::Ae))
    ->Arg(static_cast<int>(Task::Lm))
    ->Arg(static_cast<int>(Task::Qa));

void BM_VocoLayout(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(voco_layout(576, 128, 10, Scheme::Epl));
  }
}
BENCHMARK(BM_VocoLayout);

void BM_OracleSearch(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const int M = static_cast<int>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(brute_force_optimal_minimax(L, M));
  }
}
BENCHMARK(BM_OracleSearch)->Args({10, 3})->Args({24, 6})->Args({48, 8});

void BM_SinusoidalCurve(benchmark::State& state) {
  pe::SinusoidalParams params;
  params.d_model = 128;
  const int max_pos = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pe::cosine_similarity_curve(max_pos, params));
  }
}
BENCHMARK(BM_SinusoidalCurve)->Arg(64)->Arg(256)->Arg(512);

void BM_RopeDecay(benchmark::State& state) {
  pe::RopeParams params;
  params.head_dim = 64;
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pe::rope_attention_decay(params, 64, 1000, 7, threads));
  }
}
BENCHMARK(BM_RopeDecay)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_ToyForward(benchmark::State& state) {
  const ToyModel model = ToyModel::create({});
  const int n = static_cast<int>(state.range(0));
  std::vector<int> tokens(n);
  for (int i = 0; i < n; ++i) tokens[i] = i % model.params.vocab;
  std::vector<std::int64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  const AttentionMask mask = AttentionMask::causal(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, tokens, ids, mask));
  }
}
BENCHMARK(BM_ToyForward)->Arg(8)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_CompressChunk(benchmark::State& state) {
  const ToyModel model = ToyModel::create({});
  const LayoutConfig config = demo_config();
  const MemoryEmbeddings memory = init_memory(model.params, config.memory_count);
  const PositionLayout layout = encoder_layout(config, 1);
  const std::vector<int> chunk{3, 1, 4, 1, 5, 9, 2, 6};
  for (auto _ : state) {
    benchmark::DoNotOptimize(compress_chunk(chunk, memory, layout, model));
  }
}
BENCHMARK(BM_CompressChunk)->Unit(benchmark::kMicrosecond);

void BM_AeLossPipeline(benchmark::State& state) {
  const ToyModel model = ToyModel::create({});
  const LayoutConfig config =
      demo_config(static_cast<Framework>(state.range(0)));
  const MemoryEmbeddings memory = init_memory(model.params, config.memory_count);
  const LossInputs inputs = default_loss_inputs(config, model.params);
  const PositionLayout decoder = decoder_layout(config);
  for (auto _ : state) {
    const Carriers carriers = compress_context(inputs.context, memory, config, model);
    benchmark::DoNotOptimize(ae_loss(inputs.context, carriers, decoder, model));
  }
}
BENCHMARK(BM_AeLossPipeline)
    ->Arg(static_cast<int>(Framework::Icae))
    ->Arg(static_cast<int>(Framework::X500))
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
