#include "confret/tune.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "confret/conformal.hpp"
#include "confret/error.hpp"
#include "confret/eval.hpp"
#include "confret/refine.hpp"
#include "kernels.hpp"

namespace confret {

namespace {

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArg, fmt::format("bad number '{}' in lambda grid", text));
  }
  return v;
}

void check_disjoint(const RetrievalRun& a, const RetrievalRun& b) {
  // Both are sorted by query id.
  auto ia = a.queries().begin();
  auto ib = b.queries().begin();
  while (ia != a.queries().end() && ib != b.queries().end()) {
    if (ia->query_id == ib->query_id) {
      throw Error(ErrorCode::InvalidArg,
                  fmt::format("query '{}' is in both calibration and validation splits", ia->query_id));
    }
    if (ia->query_id < ib->query_id) ++ia;
    else ++ib;
  }
}

}  // namespace

LambdaGrid LambdaGrid::default_grid() {
  LambdaGrid g;
  for (int i = 0; i <= 33; ++i) g.values.push_back(i * 0.03);
  return g;
}

LambdaGrid LambdaGrid::parse(std::string_view text) {
  LambdaGrid g;
  if (text.find(':') != std::string_view::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw Error(ErrorCode::InvalidArg, "grid range must be start:stop:step");
    const double start = parse_double(text.substr(0, c1));
    const double stop = parse_double(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = parse_double(text.substr(c2 + 1));
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArg, "grid step must be positive");
    // Index-based so e.g. 19 * 0.03 is produced the same way as the default grid.
    const auto count = static_cast<int>(std::floor((stop - start) / step + 1e-9));
    for (int i = 0; i <= count; ++i) g.values.push_back(start + i * step);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = text.find(',', pos);
      const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      g.values.push_back(parse_double(item));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  g.validate();
  return g;
}

void LambdaGrid::validate() const {
  if (values.empty()) throw Error(ErrorCode::InvalidArg, "lambda grid is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidArg, fmt::format("lambda {} outside [0,1]", values[i]));
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw Error(ErrorCode::InvalidArg, "lambda grid must be strictly increasing");
    }
  }
}

CurvePoint evaluate_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth,
                           const RetrievalRun& val_run, const GroundTruth& val_truth, double alpha,
                           double lambda) {
  const auto spec = TransformSpec::log_rank(lambda);
  const auto cal = calibrate(Method::VanillaThreshold, refine_all(cal_run, spec), cal_truth, alpha);
  const auto sets = predict_all(refine_all(val_run, spec), cal);
  return {lambda, avg_group_size(sets), empirical_coverage(sets, val_truth)};
}

TuneResult tune_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth, const RetrievalRun& val_run,
                       const GroundTruth& val_truth, double alpha, const LambdaGrid& grid) {
  grid.validate();
  check_disjoint(cal_run, val_run);

  TuneResult result;
  result.curve.resize(grid.values.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.values.size());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    failure.run([&] {
      result.curve[i] = evaluate_lambda(cal_run, cal_truth, val_run, val_truth, alpha, grid.values[i]);
    });
  }
  failure.rethrow();

  // Strict comparison in grid order keeps the smallest lambda on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.curve.size(); ++i) {
    if (result.curve[i].avg_group_size < result.curve[best].avg_group_size) best = i;
  }
  result.best_lambda = result.curve[best].lambda;
  return result;
}

std::string curve_csv(const TuneResult& result) {
  std::string out = "lambda,avg_group_size,empirical_coverage\n";
  for (const auto& p : result.curve) {
    out += fmt::format("{},{},{}\n", p.lambda, p.avg_group_size, p.empirical_coverage);
  }
  return out;
}

}  // namespace confret
