#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "confret/conformal.hpp"
#include "confret/core.hpp"
#include "confret/tune.hpp"

namespace confret {

// Fraction of sets containing their query's ground truth. Throws
// MissingGroundTruth for an unlabelled query and InvalidArg for no sets.
double empirical_coverage(std::span<const PredictionSet> sets, const GroundTruth& truth);

// Mean set cardinality. Throws InvalidArg on an empty list.
double avg_group_size(std::span<const PredictionSet> sets);

struct Split {
  std::vector<std::string> calibration;
  std::vector<std::string> test;
};

// Labelled queries of run (sorted by id), shuffled by seed, the first
// round(cal_fraction * n) going to calibration.
Split random_split(const RetrievalRun& run, const GroundTruth& truth, std::uint64_t seed,
                   double cal_fraction = 0.5);

// TSV `query_id<TAB>calibration|test`.
Split load_split(const std::string& path);
void save_split(const Split& split, const std::string& path);

// A (method, transform) pair evaluated by the benchmark. With tune_lambda set
// the transform is LogRankDiscount and its lambda is chosen per seed and alpha
// on a held-out part of the calibration split.
struct Setting {
  Method method = Method::VanillaThreshold;
  TransformSpec transform;
  bool tune_lambda = false;

  // `<method>+<transform>`, transform may be `logrank:auto`.
  static Setting parse(std::string_view text);
  std::string transform_name() const;
  // Row label used in Markdown tables: Baseline, Max Score, Z-Score, Ours,
  // TopK, APS, RAPS; other combinations read `<method> (<transform>)`.
  std::string label() const;
};

// Baseline, APS, TopK, Ours.
std::vector<Setting> table2_settings(const Setting& ours);
// Baseline, Max Score, Z-Score, Ours.
std::vector<Setting> table4_settings(const Setting& ours);

struct BenchOptions {
  std::string dataset = "dataset";
  std::vector<Setting> settings;
  std::vector<double> alphas{0.1, 0.05, 0.03};
  std::vector<std::uint64_t> seeds{0};
  RapsParams raps;
  double cal_fraction = 0.5;
  // Share of the calibration split reserved for lambda tuning (tuned settings only).
  double tune_fraction = 0.5;
  LambdaGrid grid = LambdaGrid::default_grid();
  // Replaces the seeded split; seeds then only drive lambda tuning splits.
  std::optional<Split> fixed_split;
};

struct EvalRow {
  std::string dataset;
  double alpha = 0.0;
  std::string method;
  std::string transform;
  std::string label;
  double empirical_coverage = 0.0;  // mean over seeds
  double avg_group_size = 0.0;      // mean over seeds
  int n_test = 0;
  int n_seeds = 1;
  double coverage_std = 0.0;  // sample stddev over seeds, 0 for one seed
  double size_std = 0.0;
  std::optional<double> tuned_lambda;  // mean over seeds
};

struct EvalReport {
  std::vector<EvalRow> rows;  // alpha-major, settings in the order given
};

// Result of one seed for every (alpha, setting) cell, alpha-major.
struct SeedResult {
  std::vector<double> coverage;
  std::vector<double> size;
  std::vector<double> lambda;  // NaN unless tuned
  int n_test = 0;
};

SeedResult run_seed(const RetrievalRun& run, const GroundTruth& truth, const BenchOptions& opts,
                    std::uint64_t seed);

EvalReport run_benchmark(const RetrievalRun& run, const GroundTruth& truth, const BenchOptions& opts);

// Columns: dataset,alpha,method,transform,label,empirical_coverage,avg_group_size,n_test
// plus n_seeds,coverage_std,avg_group_size_std when any row averages several
// seeds, plus tuned_lambda when any row was tuned.
std::string report_csv(const EvalReport& report);
// `| Dataset | α | Method | Emp. Cov. | Avg. Grp. Size |`
std::string report_markdown(const EvalReport& report);

}  // namespace confret
