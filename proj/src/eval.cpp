#include "confret/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <fmt/format.h>

#include "confret/error.hpp"
#include "confret/io.hpp"
#include "confret/refine.hpp"

namespace confret {

double empirical_coverage(std::span<const PredictionSet> sets, const GroundTruth& truth) {
  if (sets.empty()) throw Error(ErrorCode::InvalidArg, "no prediction sets");
  std::size_t covered = 0;
  for (const auto& s : sets) {
    const DocId* label = truth.find(s.query_id);
    if (label == nullptr) {
      throw Error(ErrorCode::MissingGroundTruth, fmt::format("no ground truth for query '{}'", s.query_id));
    }
    if (s.contains(*label)) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

double avg_group_size(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw Error(ErrorCode::InvalidArg, "no prediction sets");
  std::size_t total = 0;
  for (const auto& s : sets) total += s.size();
  return static_cast<double>(total) / static_cast<double>(sets.size());
}

namespace {

std::vector<std::string> shuffled(std::vector<std::string> ids, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  return ids;
}

std::size_t split_point(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Seeds for the lambda-tuning sub-split are derived so they never coincide
// with the top-level split seed.
constexpr std::uint64_t kTuneSeedSalt = 0x9E3779B97F4A7C15ull;

}  // namespace

Split random_split(const RetrievalRun& run, const GroundTruth& truth, std::uint64_t seed, double cal_fraction) {
  if (!(cal_fraction > 0.0 && cal_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArg, fmt::format("calibration fraction must be in (0,1), got {}", cal_fraction));
  }
  std::vector<std::string> ids;
  for (const auto& q : run.queries()) {
    if (truth.find(q.query_id) != nullptr) ids.push_back(q.query_id);
  }
  ids = shuffled(std::move(ids), seed);
  const auto cut = split_point(ids.size(), cal_fraction);
  if (cut == 0 || cut == ids.size()) {
    throw Error(ErrorCode::InvalidArg,
                fmt::format("{} labelled queries cannot be split into calibration and test", ids.size()));
  }
  Split split;
  split.calibration.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
  return split;
}

Split load_split(const std::string& path) {
  io::Reader in(path);
  Split split;
  std::string line;
  while (in.next_line(line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto role = tab == std::string::npos ? std::string() : line.substr(tab + 1);
    if (tab == 0 || (role != "calibration" && role != "cal" && role != "test")) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("{}:{}: expected query_id<TAB>calibration|test", path, in.line_number()));
    }
    (role == "test" ? split.test : split.calibration).push_back(line.substr(0, tab));
  }
  if (split.calibration.empty() || split.test.empty()) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: split needs calibration and test queries", path));
  }
  return split;
}

void save_split(const Split& split, const std::string& path) {
  io::Writer out(path);
  for (const auto& id : split.calibration) out.write(id + "\tcalibration\n");
  for (const auto& id : split.test) out.write(id + "\ttest\n");
  out.close();
}

Setting Setting::parse(std::string_view text) {
  const auto plus = text.find('+');
  if (plus == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArg, fmt::format("setting '{}' must be <method>+<transform>", text));
  }
  Setting s;
  s.method = parse_method(text.substr(0, plus));
  const auto transform = text.substr(plus + 1);
  if (transform == "logrank:auto") {
    s.transform = TransformSpec::log_rank(0.0);
    s.tune_lambda = true;
  } else {
    s.transform = parse_transform(transform);
  }
  return s;
}

std::string Setting::transform_name() const {
  return tune_lambda ? "logrank:auto" : to_string(transform);
}

std::string Setting::label() const {
  if (method == Method::VanillaThreshold) {
    switch (transform.kind) {
      case TransformKind::Identity: return "Baseline";
      case TransformKind::MaxScore: return "Max Score";
      case TransformKind::ZScore: return "Z-Score";
      case TransformKind::LogRankDiscount: return "Ours";
    }
  }
  const std::string name = method == Method::TopK ? "TopK" : method == Method::APS ? "APS" : "RAPS";
  if (transform.kind == TransformKind::Identity && !tune_lambda) return name;
  return fmt::format("{} ({})", name, transform_name());
}

std::vector<Setting> table2_settings(const Setting& ours) {
  return {Setting{Method::VanillaThreshold, TransformSpec::identity(), false},
          Setting{Method::APS, TransformSpec::identity(), false},
          Setting{Method::TopK, TransformSpec::identity(), false}, ours};
}

std::vector<Setting> table4_settings(const Setting& ours) {
  return {Setting{Method::VanillaThreshold, TransformSpec::identity(), false},
          Setting{Method::VanillaThreshold, TransformSpec::max_score(), false},
          Setting{Method::VanillaThreshold, TransformSpec::z_score(), false}, ours};
}

namespace {

void validate(const BenchOptions& opts) {
  if (opts.settings.empty()) throw Error(ErrorCode::InvalidArg, "benchmark needs at least one setting");
  if (opts.alphas.empty()) throw Error(ErrorCode::InvalidArg, "benchmark needs at least one alpha");
  if (opts.seeds.empty()) throw Error(ErrorCode::InvalidArg, "benchmark needs at least one seed");
  for (double a : opts.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArg, fmt::format("alpha {} outside (0,1)", a));
  }
  if (!(opts.tune_fraction > 0.0 && opts.tune_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArg, "tune fraction must be in (0,1)");
  }
}

struct Refined {
  RetrievalRun cal;
  RetrievalRun test;
};

struct Cell {
  double coverage;
  double size;
};

Cell evaluate_cell(const Refined& refined, const GroundTruth& truth, Method method,
                   std::span<const NonconformityRecord> records, double alpha, const RapsParams& raps) {
  const auto& transform = refined.cal.queries().front().transform;
  const auto cal = calibrate_from_records(method, records, alpha, transform, refined.cal.n_trunc(), raps);
  const auto sets = predict_all(refined.test, cal);
  return {empirical_coverage(sets, truth), avg_group_size(sets)};
}

}  // namespace

SeedResult run_seed(const RetrievalRun& run, const GroundTruth& truth, const BenchOptions& opts,
                    std::uint64_t seed) {
  validate(opts);
  const Split split = opts.fixed_split ? *opts.fixed_split : random_split(run, truth, seed, opts.cal_fraction);
  const RetrievalRun cal_run = run.subset(split.calibration);
  const RetrievalRun test_run = run.subset(split.test);

  const std::size_t n_settings = opts.settings.size();
  const std::size_t n_cells = opts.alphas.size() * n_settings;
  SeedResult out;
  out.coverage.assign(n_cells, 0.0);
  out.size.assign(n_cells, 0.0);
  out.lambda.assign(n_cells, std::numeric_limits<double>::quiet_NaN());
  out.n_test = static_cast<int>(test_run.size());

  // Fixed transforms: refine each split once, compute records once per method.
  std::map<std::string, Refined> refined;
  for (std::size_t s = 0; s < n_settings; ++s) {
    const auto& setting = opts.settings[s];
    if (setting.tune_lambda) continue;
    const auto key = to_string(setting.transform);
    auto it = refined.find(key);
    if (it == refined.end()) {
      it = refined
               .emplace(key, Refined{refine_all(cal_run, setting.transform), refine_all(test_run, setting.transform)})
               .first;
    }
    const auto records = nonconformity_records(it->second.cal, truth, setting.method, opts.raps);
    for (std::size_t a = 0; a < opts.alphas.size(); ++a) {
      const auto cell = evaluate_cell(it->second, truth, setting.method, records, opts.alphas[a], opts.raps);
      out.coverage[a * n_settings + s] = cell.coverage;
      out.size[a * n_settings + s] = cell.size;
    }
  }

  bool any_tuned = false;
  for (const auto& s : opts.settings) any_tuned |= s.tune_lambda;
  if (!any_tuned) return out;

  // Tuned lambda: a disjoint slice of the calibration split picks lambda, the
  // rest calibrates, so the test coverage guarantee is untouched.
  const auto cal_ids = shuffled(split.calibration, seed ^ kTuneSeedSalt);
  const auto tune_n = split_point(cal_ids.size(), opts.tune_fraction);
  const auto half = tune_n / 2;
  if (half == 0 || tune_n == cal_ids.size()) {
    throw Error(ErrorCode::InvalidArg,
                fmt::format("calibration split of {} queries too small to tune lambda", cal_ids.size()));
  }
  const auto begin = cal_ids.begin();
  const std::vector<std::string> tune_cal_ids(begin, begin + static_cast<std::ptrdiff_t>(half));
  const std::vector<std::string> tune_val_ids(begin + static_cast<std::ptrdiff_t>(half),
                                              begin + static_cast<std::ptrdiff_t>(tune_n));
  const std::vector<std::string> final_cal_ids(begin + static_cast<std::ptrdiff_t>(tune_n), cal_ids.end());
  const auto tune_cal = run.subset(tune_cal_ids);
  const auto tune_val = run.subset(tune_val_ids);
  const auto final_cal = run.subset(final_cal_ids);

  for (std::size_t a = 0; a < opts.alphas.size(); ++a) {
    const double alpha = opts.alphas[a];
    const auto tuned = tune_lambda(tune_cal, truth, tune_val, truth, alpha, opts.grid);
    const auto spec = TransformSpec::log_rank(tuned.best_lambda);
    const Refined r{refine_all(final_cal, spec), refine_all(test_run, spec)};
    for (std::size_t s = 0; s < n_settings; ++s) {
      const auto& setting = opts.settings[s];
      if (!setting.tune_lambda) continue;
      const auto records = nonconformity_records(r.cal, truth, setting.method, opts.raps);
      const auto cell = evaluate_cell(r, truth, setting.method, records, alpha, opts.raps);
      out.coverage[a * n_settings + s] = cell.coverage;
      out.size[a * n_settings + s] = cell.size;
      out.lambda[a * n_settings + s] = tuned.best_lambda;
    }
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

EvalReport run_benchmark(const RetrievalRun& run, const GroundTruth& truth, const BenchOptions& opts) {
  validate(opts);
  std::vector<SeedResult> per_seed;
  per_seed.reserve(opts.seeds.size());
  for (auto seed : opts.seeds) per_seed.push_back(run_seed(run, truth, opts, seed));

  const std::size_t n_settings = opts.settings.size();
  EvalReport report;
  for (std::size_t a = 0; a < opts.alphas.size(); ++a) {
    for (std::size_t s = 0; s < n_settings; ++s) {
      const auto idx = a * n_settings + s;
      std::vector<double> cov, size, lambda;
      for (const auto& r : per_seed) {
        cov.push_back(r.coverage[idx]);
        size.push_back(r.size[idx]);
        lambda.push_back(r.lambda[idx]);
      }
      const auto& setting = opts.settings[s];
      EvalRow row;
      row.dataset = opts.dataset;
      row.alpha = opts.alphas[a];
      row.method = std::string(to_string(setting.method));
      row.transform = setting.transform_name();
      row.label = setting.label();
      std::tie(row.empirical_coverage, row.coverage_std) = mean_std(cov);
      std::tie(row.avg_group_size, row.size_std) = mean_std(size);
      row.n_test = per_seed.front().n_test;
      row.n_seeds = static_cast<int>(per_seed.size());
      if (setting.tune_lambda) row.tuned_lambda = mean_std(lambda).first;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  bool multi_seed = false;
  bool tuned = false;
  for (const auto& r : report.rows) {
    multi_seed |= r.n_seeds > 1;
    tuned |= r.tuned_lambda.has_value();
  }
  std::string out = "dataset,alpha,method,transform,label,empirical_coverage,avg_group_size,n_test";
  if (multi_seed) out += ",n_seeds,coverage_std,avg_group_size_std";
  if (tuned) out += ",tuned_lambda";
  out += '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}", r.dataset, r.alpha, r.method, r.transform, r.label,
                       r.empirical_coverage, r.avg_group_size, r.n_test);
    if (multi_seed) out += fmt::format(",{},{},{}", r.n_seeds, r.coverage_std, r.size_std);
    if (tuned) out += r.tuned_lambda ? fmt::format(",{}", *r.tuned_lambda) : std::string(",");
    out += '\n';
  }
  return out;
}

std::string report_markdown(const EvalReport& report) {
  std::string out = "| Dataset | α | Method | Emp. Cov. | Avg. Grp. Size |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    if (r.n_seeds > 1) {
      out += fmt::format("| {} | {} | {} | {:.2f} ± {:.2f} | {:.2f} ± {:.2f} |\n", r.dataset, r.alpha, r.label,
                         r.empirical_coverage, r.coverage_std, r.avg_group_size, r.size_std);
    } else {
      out += fmt::format("| {} | {} | {} | {:.2f} | {:.2f} |\n", r.dataset, r.alpha, r.label,
                         r.empirical_coverage, r.avg_group_size);
    }
  }
  return out;
}

}  // namespace confret
