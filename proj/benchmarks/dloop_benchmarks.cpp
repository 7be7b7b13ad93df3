#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "dloop/exemplar.hpp"
#include "dloop/gateway.hpp"
#include "dloop/graph.hpp"
#include "dloop/prompt.hpp"
#include "dloop/serialization.hpp"
#include "dloop/session_store.hpp"

using namespace dloop;

namespace {

std::vector<float> unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g;
  std::vector<float> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = g(rng);
    n += static_cast<double>(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
  return v;
}

// Layered DAG: each node links to up to three earlier nodes.
Canvas layered_canvas(std::size_t n) {
  std::mt19937_64 rng(7);
  Canvas c;
  for (std::size_t i = 0; i < n; ++i) {
    c.add_node(StickyNote{NodeId{"n" + std::to_string(i)}, "x", {}, std::nullopt});
    for (int k = 0; k < 3 && i > 0; ++k) {
      const auto j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      const NodeId s{"n" + std::to_string(j)}, t{"n" + std::to_string(i)};
      if (!c.connected(s, t)) c.connect(EdgeId{"e" + std::to_string(i) + "-" + std::to_string(k)}, s, t);
    }
  }
  return c;
}

Session sample_session(std::size_t nodes) {
  Session s;
  s.id = "bench-session";
  s.context = {"background", "design goal", {}};
  s.main_canvas = layered_canvas(nodes);
  return s;
}

}  // namespace

static void BM_RetrieveVector(benchmark::State& state) {
  std::mt19937_64 rng(1);
  ExemplarStore store(std::make_shared<HashingEmbeddingProvider>());
  for (int i = 0; i < state.range(0); ++i) {
    store.insert(Exemplar{"ex-" + std::to_string(i), {}, "g", "o", unit_vector(rng, 32)});
  }
  const auto q = unit_vector(rng, 32);
  for (auto _ : state) benchmark::DoNotOptimize(store.retrieve_vector(q, 2));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RetrieveVector)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

static void BM_EmbedAndRetrieve(benchmark::State& state) {
  ExemplarStore store(std::make_shared<HashingEmbeddingProvider>());
  for (int i = 0; i < 200; ++i) {
    store.ingest({"ex-" + std::to_string(i), {}, "goal number " + std::to_string(i) + " about waiting", "o"});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.retrieve("find common pain points across user interviews"));
  }
}
BENCHMARK(BM_EmbedAndRetrieve);

static void BM_PredecessorsInOrder(benchmark::State& state) {
  const auto c = layered_canvas(static_cast<std::size_t>(state.range(0)));
  const NodeId last{"n" + std::to_string(state.range(0) - 1)};
  for (auto _ : state) benchmark::DoNotOptimize(c.predecessors_in_order(last));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PredecessorsInOrder)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

static void BM_RenderRationalePrompt(benchmark::State& state) {
  const auto catalog = TemplateCatalog::load(std::filesystem::path(DLOOP_SOURCE_DIR) / "core" / "templates");
  PromptContext ctx;
  ctx.bg = "A storytelling app for children aged 5-8.";
  ctx.dg = "visual-first interaction";
  ctx.goal = "onboarding for non-readers";
  ctx.context_str = "1. Map Pre-reader Abilities\n2. Audio Prompt Guidance";
  ctx.current_node_content = "Progressive Disclosure Onboarding";
  ctx.few_shot_example = "{\"title\":\"t\"}";
  ctx.rationale_type = "Develop_Convergent";
  ctx.rationale_type_description = "Converge on the strongest options.";
  ctx.reasoning_modes = "Abductive reasoning";
  ctx.parent_title = "Onboarding Interaction";
  ctx.parent_content = "- audio first";
  for (auto _ : state) benchmark::DoNotOptimize(catalog.render(TemplateId::RationaleGeneration, ctx));
}
BENCHMARK(BM_RenderRationalePrompt);

static void BM_RequestHash(benchmark::State& state) {
  ChatRequest r;
  r.system = std::string(static_cast<std::size_t>(state.range(0)), 's');
  r.user = std::string(static_cast<std::size_t>(state.range(0)), 'u');
  for (auto _ : state) benchmark::DoNotOptimize(request_hash(r));
  state.SetBytesProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_RequestHash)->Range(256, 65536);

static void BM_CanonicalJson(benchmark::State& state) {
  const auto s = sample_session(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(canonical_session_json(s));
}
BENCHMARK(BM_CanonicalJson)->Range(16, 512);

static void BM_SaveLoad(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "dloop-bench";
  std::filesystem::create_directories(dir);
  const auto s = sample_session(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto path = save_session(s, dir);
    benchmark::DoNotOptimize(load_session(path));
  }
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_SaveLoad)->Range(16, 512);

BENCHMARK_MAIN();
