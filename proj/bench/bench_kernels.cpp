// Parallel kernels against their serial references. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "confret/conformal.hpp"
#include "confret/data.hpp"
#include "confret/eval.hpp"
#include "confret/refine.hpp"
#include "confret/retrieval.hpp"
#include "confret/serial.hpp"
#include "confret/tune.hpp"

namespace {

using namespace confret;

EmbeddingMatrix random_embeddings(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<DocId> ids;
  std::vector<double> v;
  for (std::size_t i = 0; i < rows; ++i) {
    ids.emplace_back("d" + std::to_string(i));
    for (std::size_t j = 0; j < dim; ++j) v.push_back(g(rng));
  }
  EmbeddingMatrix m(std::move(ids), dim, std::move(v));
  m.normalize();
  return m;
}

const EmbeddingMatrix& corpus() {
  static const auto m = random_embeddings(20000, 128, 1);
  return m;
}

const EmbeddingMatrix& queries() {
  static const auto m = random_embeddings(64, 128, 2);
  return m;
}

const SynthData& synth() {
  static const auto d = [] {
    SynthConfig cfg;
    cfg.n_queries = 4000;
    cfg.n_candidates = 200;
    return generate_synthetic(cfg);
  }();
  return d;
}

struct TuneSplits {
  RetrievalRun cal, val;
};

const TuneSplits& tune_splits() {
  static const auto s = [] {
    const auto split = random_split(synth().run, synth().truth, 0);
    return TuneSplits{synth().run.subset(split.calibration), synth().run.subset(split.test)};
  }();
  return s;
}

template <bool Parallel>
void BM_CosineScores(benchmark::State& state) {
  corpus();
  queries();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? cosine_scores(queries().row(0), corpus())
                                      : serial::cosine_scores(queries().row(0), corpus()));
  }
}

template <bool Parallel>
void BM_RetrieveAll(benchmark::State& state) {
  corpus();
  queries();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? retrieve_all(queries(), corpus(), 2000)
                                      : serial::retrieve_all(queries(), corpus(), 2000));
  }
}

template <bool Parallel>
void BM_RefineAll(benchmark::State& state) {
  const auto spec = TransformSpec::log_rank(0.03);
  synth();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? refine_all(synth().run, spec) : serial::refine_all(synth().run, spec));
  }
}

template <bool Parallel>
void BM_NonconformityRecords(benchmark::State& state) {
  const auto refined = refine_all(synth().run, TransformSpec::log_rank(0.03));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? nonconformity_records(refined, synth().truth, Method::APS)
                                      : serial::nonconformity_records(refined, synth().truth, Method::APS));
  }
}

template <bool Parallel>
void BM_PredictAll(benchmark::State& state) {
  const auto refined = refine_all(synth().run, TransformSpec::log_rank(0.03));
  const auto cal = calibrate(Method::APS, refined, synth().truth, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? predict_all(refined, cal) : serial::predict_all(refined, cal));
  }
}

template <bool Parallel>
void BM_TuneLambda(benchmark::State& state) {
  const auto& s = tune_splits();
  const auto grid = LambdaGrid::default_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? tune_lambda(s.cal, synth().truth, s.val, synth().truth, 0.05, grid)
                                      : serial::tune_lambda(s.cal, synth().truth, s.val, synth().truth, 0.05, grid));
  }
}

BENCHMARK(BM_CosineScores<false>)->Name("cosine_scores/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CosineScores<true>)->Name("cosine_scores/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RetrieveAll<false>)->Name("retrieve_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RetrieveAll<true>)->Name("retrieve_all/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RefineAll<false>)->Name("refine_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RefineAll<true>)->Name("refine_all/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonconformityRecords<false>)->Name("nonconformity_records/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NonconformityRecords<true>)->Name("nonconformity_records/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictAll<false>)->Name("predict_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictAll<true>)->Name("predict_all/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TuneLambda<false>)->Name("tune_lambda/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TuneLambda<true>)->Name("tune_lambda/omp")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
