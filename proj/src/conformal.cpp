#include "confret/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "confret/error.hpp"
#include "confret/io.hpp"
#include "confret/refine.hpp"
#include "kernels.hpp"

namespace confret {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArg, fmt::format("alpha must be in (0,1), got {}", alpha));
  }
}

const DocId& label_for(const GroundTruth& truth, const std::string& query_id) {
  const DocId* label = truth.find(query_id);
  if (label == nullptr) {
    throw Error(ErrorCode::MissingGroundTruth, fmt::format("no ground truth for query '{}'", query_id));
  }
  return *label;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::VanillaThreshold: return "vanilla";
    case Method::TopK: return "topk";
    case Method::APS: return "aps";
    case Method::RAPS: return "raps";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "vanilla") return Method::VanillaThreshold;
  if (text == "topk") return Method::TopK;
  if (text == "aps") return Method::APS;
  if (text == "raps") return Method::RAPS;
  throw Error(ErrorCode::InvalidArg, fmt::format("unknown method '{}'", text));
}

std::vector<double> cumulative_softmax(const QueryRun& run) {
  std::vector<double> mass(run.size());
  if (run.empty()) return mass;
  // Scores are sorted, so the first is the max used for stabilisation.
  const double top = run.candidates.front().score;
  double total = 0.0;
  for (std::size_t i = 0; i < run.size(); ++i) {
    mass[i] = std::exp(run.candidates[i].score - top);
    total += mass[i];
  }
  double acc = 0.0;
  for (double& m : mass) {
    acc += m / total;
    m = acc;
  }
  return mass;
}

std::vector<double> candidate_nonconformity(const QueryRun& run, Method method, const RapsParams& raps) {
  std::vector<double> c(run.size());
  switch (method) {
    case Method::VanillaThreshold:
      for (std::size_t i = 0; i < run.size(); ++i) c[i] = -run.candidates[i].score;
      break;
    case Method::TopK:
      for (std::size_t i = 0; i < run.size(); ++i) c[i] = run.candidates[i].rank;
      break;
    case Method::APS:
    case Method::RAPS:
      c = cumulative_softmax(run);
      if (method == Method::RAPS) {
        for (std::size_t i = 0; i < run.size(); ++i) {
          c[i] += raps.lambda_reg * std::max(0, run.candidates[i].rank - raps.k_reg);
        }
      }
      break;
  }
  return c;
}

double nonconformity(const QueryRun& run, const DocId& truth, Method method, const RapsParams& raps) {
  const auto rank = run.rank_of(truth);
  if (!rank) return kInf;
  const auto idx = static_cast<std::size_t>(*rank - 1);
  switch (method) {
    case Method::VanillaThreshold: return -run.candidates[idx].score;
    case Method::TopK: return *rank;
    case Method::APS:
    case Method::RAPS: return candidate_nonconformity(run, method, raps)[idx];
  }
  throw Error(ErrorCode::Internal, "unhandled method");
}

double nonconformity_vanilla(const QueryRun& run, const DocId& truth) {
  return nonconformity(run, truth, Method::VanillaThreshold);
}

double nonconformity_aps(const QueryRun& run, const DocId& truth) {
  return nonconformity(run, truth, Method::APS);
}

double nonconformity_raps(const QueryRun& run, const DocId& truth, int k_reg, double lambda_reg) {
  return nonconformity(run, truth, Method::RAPS, RapsParams{k_reg, lambda_reg});
}

std::vector<NonconformityRecord> nonconformity_records(const RetrievalRun& run, const GroundTruth& truth,
                                                       Method method, const RapsParams& raps) {
  const auto queries = run.queries();
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<NonconformityRecord> records(queries.size());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    failure.run([&] {
      const auto& q = queries[i];
      records[i] = {q.query_id, nonconformity(q, label_for(truth, q.query_id), method, raps)};
    });
  }
  failure.rethrow();
  return records;
}

std::size_t quantile_index(std::size_t n, double alpha) {
  check_alpha(alpha);
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));
}

double calibrate_threshold(std::span<const NonconformityRecord> records, double alpha) {
  if (records.empty()) throw Error(ErrorCode::NoCalibrationData, "no calibration records");
  const std::size_t m = quantile_index(records.size(), alpha);
  if (m > records.size()) return kInf;
  std::vector<double> c;
  c.reserve(records.size());
  for (const auto& r : records) c.push_back(r.c_true);
  std::nth_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m - 1), c.end());
  return c[m - 1];
}

namespace {

int topk_from_threshold(double k, int n_trunc) {
  if (!std::isfinite(k) || k > n_trunc) return n_trunc;
  return static_cast<int>(k);
}

}  // namespace

int calibrate_topk(const RetrievalRun& run, const GroundTruth& truth, double alpha) {
  const auto records = nonconformity_records(run, truth, Method::TopK);
  return topk_from_threshold(calibrate_threshold(records, alpha), run.n_trunc());
}

Calibrator calibrate_from_records(Method method, std::span<const NonconformityRecord> records, double alpha,
                                  const TransformSpec& transform, int n_trunc, const RapsParams& raps) {
  Calibrator cal;
  cal.method = method;
  cal.alpha = alpha;
  cal.transform = transform;
  cal.raps = raps;
  cal.n_calibration = static_cast<int>(records.size());
  const double threshold = calibrate_threshold(records, alpha);
  if (method == Method::TopK) {
    cal.k = topk_from_threshold(threshold, n_trunc);
  } else {
    cal.tau = threshold;
  }
  return cal;
}

Calibrator calibrate(Method method, const RetrievalRun& refined, const GroundTruth& truth, double alpha,
                     const RapsParams& raps) {
  check_alpha(alpha);
  if (refined.empty()) throw Error(ErrorCode::NoCalibrationData, "calibration run has no queries");
  const TransformSpec transform = refined.queries().front().transform;
  for (const auto& q : refined.queries()) {
    if (!(q.transform == transform)) {
      throw Error(ErrorCode::TransformMismatch,
                  fmt::format("query '{}' refined with {}, expected {}", q.query_id, to_string(q.transform),
                              to_string(transform)));
    }
  }
  const auto records = nonconformity_records(refined, truth, method, raps);
  return calibrate_from_records(method, records, alpha, transform, refined.n_trunc(), raps);
}

PredictionSet predict(const QueryRun& run, const Calibrator& cal) {
  if (!(run.transform == cal.transform)) {
    throw Error(ErrorCode::TransformMismatch,
                fmt::format("query '{}' refined with {} but calibrator expects {}", run.query_id,
                            to_string(run.transform), to_string(cal.transform)));
  }
  PredictionSet set{run.query_id, {}, cal.cutoff()};
  if (cal.method == Method::TopK) {
    const auto keep = std::min(run.size(), static_cast<std::size_t>(std::max(cal.k, 0)));
    set.members.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) set.members.push_back(run.candidates[i].doc);
    return set;
  }
  const auto c = candidate_nonconformity(run, cal.method, cal.raps);
  for (std::size_t i = 0; i < run.size(); ++i) {
    if (c[i] <= cal.tau) set.members.push_back(run.candidates[i].doc);
  }
  return set;
}

std::vector<PredictionSet> predict_all(const RetrievalRun& run, const Calibrator& cal) {
  const auto queries = run.queries();
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<PredictionSet> sets(queries.size());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    failure.run([&] { sets[i] = predict(queries[i], cal); });
  }
  failure.rethrow();
  return sets;
}

nlohmann::json to_json(const Calibrator& cal) {
  nlohmann::json j;
  j["method"] = std::string(to_string(cal.method));
  j["alpha"] = cal.alpha;
  j["transform"] = to_string(cal.transform);
  if (cal.method == Method::TopK) {
    j["k"] = cal.k;
  } else if (std::isinf(cal.tau)) {
    // JSON has no infinity literal.
    j["tau"] = cal.tau > 0 ? "inf" : "-inf";
  } else {
    j["tau"] = cal.tau;
  }
  j["raps_k_reg"] = cal.raps.k_reg;
  j["raps_lambda_reg"] = cal.raps.lambda_reg;
  j["n_calibration"] = cal.n_calibration;
  return j;
}

Calibrator calibrator_from_json(const nlohmann::json& j) {
  try {
    Calibrator cal;
    cal.method = parse_method(j.at("method").get<std::string>());
    cal.alpha = j.at("alpha").get<double>();
    check_alpha(cal.alpha);
    cal.transform = parse_transform(j.at("transform").get<std::string>());
    if (cal.method == Method::TopK) {
      cal.k = j.at("k").get<int>();
    } else {
      const auto& tau = j.at("tau");
      if (tau.is_string()) {
        const auto s = tau.get<std::string>();
        if (s == "inf") cal.tau = kInf;
        else if (s == "-inf") cal.tau = -kInf;
        else throw Error(ErrorCode::ParseError, fmt::format("bad tau '{}'", s));
      } else {
        cal.tau = tau.get<double>();
      }
    }
    cal.raps.k_reg = j.value("raps_k_reg", RapsParams{}.k_reg);
    cal.raps.lambda_reg = j.value("raps_lambda_reg", RapsParams{}.lambda_reg);
    cal.n_calibration = j.at("n_calibration").get<int>();
    return cal;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("calibrator JSON: {}", e.what()));
  }
}

void save_calibrator(const Calibrator& cal, const std::string& path) {
  io::Writer out(path);
  out.write(to_json(cal).dump(2));
  out.write("\n");
  out.close();
}

Calibrator load_calibrator(const std::string& path) {
  io::Reader in(path);
  std::string text, line;
  while (in.next_line(line)) {
    text += line;
    text += '\n';
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", path, e.what()));
  }
  return calibrator_from_json(j);
}

}  // namespace confret
