// Serial reference against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "evontree/calibration.hpp"
#include "evontree/confirm.hpp"
#include "evontree/rules.hpp"
#include "evontree/synthetic.hpp"

using namespace evontree;

namespace {

std::vector<LabeledScore> samples(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = u(rng);
    out.push_back({s, std::bernoulli_distribution(0.2 + 0.3 * (s + 1.0))(rng)});
  }
  return out;
}

// Random store dense enough in synonyms for triangles and chains to occur.
TripleStore store(std::size_t n, int vocab) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  std::bernoulli_distribution syn(0.3);
  TripleStore s;
  while (s.size() < n) {
    const auto a = "c" + std::to_string(pick(rng)), b = "c" + std::to_string(pick(rng));
    if (auto t = Triple::make(a, syn(rng) ? Relation::SynonymOf : Relation::SubclassOf, b)) s.insert(*t);
  }
  return s;
}

std::set<Triple> subclass_set(const TripleStore& s) {
  const auto v = s.of_relation(Relation::SubclassOf);
  return {v.begin(), v.end()};
}

void BM_fit_serial(benchmark::State& st) {
  const auto s = samples(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(serial::fit_threshold(s));
}
void BM_fit_parallel(benchmark::State& st) {
  const auto s = samples(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(fit_threshold(s));
}

void BM_reliable_serial(benchmark::State& st) {
  const auto s = store(st.range(0), static_cast<int>(st.range(0) / 4));
  for (auto _ : st) benchmark::DoNotOptimize(serial::select_reliable(s));
}
void BM_reliable_parallel(benchmark::State& st) {
  const auto s = store(st.range(0), static_cast<int>(st.range(0) / 4));
  for (auto _ : st) benchmark::DoNotOptimize(select_reliable(s));
}

void BM_extrapolate_serial(benchmark::State& st) {
  const auto s = store(st.range(0), static_cast<int>(st.range(0) / 4));
  const auto rel = subclass_set(s);
  for (auto _ : st) benchmark::DoNotOptimize(serial::extrapolate(rel, s));
}
void BM_extrapolate_parallel(benchmark::State& st) {
  const auto s = store(st.range(0), static_cast<int>(st.range(0) / 4));
  const auto rel = subclass_set(s);
  for (auto _ : st) benchmark::DoNotOptimize(extrapolate(rel, s));
}

struct Scoring {
  std::shared_ptr<SyntheticModel> model;
  std::vector<Triple> triples;
  Scoring() {
    auto gt = std::make_shared<GroundTruth>(sample_ground_truth(3, 3, 0.5, 4, 8));
    NoiseProfile noise;
    noise.jitter = 0.05;
    model = std::make_shared<SyntheticModel>(gt, noise, GenerationProfile{}, 4);
    for (const auto& [c, p] : gt->dag()) triples.push_back(*Triple::make(c, Relation::SubclassOf, p));
  }
};

// No cache directory, so every iteration reaches the synthetic transport.
void BM_score_serial(benchmark::State& st) {
  Scoring s;
  Gateway gw(s.model, GatewayOptions{});
  for (auto _ : st) benchmark::DoNotOptimize(serial::score_batch(s.triples, gw));
}
void BM_score_parallel(benchmark::State& st) {
  Scoring s;
  Gateway gw(s.model, GatewayOptions{});
  for (auto _ : st) benchmark::DoNotOptimize(score_batch(s.triples, gw));
}

}  // namespace

BENCHMARK(BM_fit_serial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_fit_parallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_reliable_serial)->Arg(2000)->Arg(20000);
BENCHMARK(BM_reliable_parallel)->Arg(2000)->Arg(20000);
BENCHMARK(BM_extrapolate_serial)->Arg(2000)->Arg(6000);
BENCHMARK(BM_extrapolate_parallel)->Arg(2000)->Arg(6000);
BENCHMARK(BM_score_serial);
BENCHMARK(BM_score_parallel);

BENCHMARK_MAIN();
