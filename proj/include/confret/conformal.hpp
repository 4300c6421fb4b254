#pragma once

// Split-conformal calibration and prediction sets over (refined) retrieval runs.
//
// Every method reduces to the same recipe: a nonconformity score for the
// ground-truth document of each calibration query, the m-th smallest of those
// with m = ceil((n + 1)(1 - alpha)), and a prediction set holding every
// candidate whose own nonconformity does not exceed that threshold.
//
//   VanillaThreshold  c = -t                     (t the refined score)
//   TopK              c = rank                   (threshold is a set size K)
//   APS               c = cumulative softmax mass down to the candidate
//   RAPS              c = APS + lambda_reg * max(0, rank - k_reg)
//
// Ground truths outside the truncated run get c = +inf and are never covered.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "confret/core.hpp"

namespace confret {

enum class Method { VanillaThreshold, TopK, APS, RAPS };

// "vanilla", "topk", "aps", "raps".
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct RapsParams {
  int k_reg = 5;
  double lambda_reg = 0.01;
};

struct Calibrator {
  Method method = Method::VanillaThreshold;
  double alpha = 0.1;
  TransformSpec transform;
  double tau = 0.0;  // VanillaThreshold, APS, RAPS; may be +inf
  int k = 0;         // TopK
  RapsParams raps;
  int n_calibration = 0;

  // The threshold or K actually applied by predict().
  double cutoff() const { return method == Method::TopK ? static_cast<double>(k) : tau; }
};

struct NonconformityRecord {
  std::string query_id;
  double c_true = 0.0;  // +inf for a retrieval miss
};

double nonconformity_vanilla(const QueryRun& run, const DocId& truth);
double nonconformity_aps(const QueryRun& run, const DocId& truth);
double nonconformity_raps(const QueryRun& run, const DocId& truth, int k_reg, double lambda_reg);

// Cumulative softmax mass (temperature 1) at each rank of the run.
std::vector<double> cumulative_softmax(const QueryRun& run);

// Nonconformity of every candidate of the run under method, in rank order.
std::vector<double> candidate_nonconformity(const QueryRun& run, Method method, const RapsParams& raps = {});

// Nonconformity of the labelled document of one query under method.
double nonconformity(const QueryRun& run, const DocId& truth, Method method, const RapsParams& raps = {});

// One record per query of run, parallel across queries. Throws
// MissingGroundTruth when a query has no label.
std::vector<NonconformityRecord> nonconformity_records(const RetrievalRun& run, const GroundTruth& truth,
                                                       Method method, const RapsParams& raps = {});

// m = ceil((n + 1)(1 - alpha)), the 1-based order statistic used as threshold.
std::size_t quantile_index(std::size_t n, double alpha);

// m-th smallest c_true, or +inf when m > n. Throws NoCalibrationData / InvalidArg.
double calibrate_threshold(std::span<const NonconformityRecord> records, double alpha);

// m-th smallest ground-truth rank; n_trunc when m > n or that rank is a miss.
int calibrate_topk(const RetrievalRun& run, const GroundTruth& truth, double alpha);

// Calibrator from precomputed records (TopK records hold ranks; K falls back
// to n_trunc on overflow or a miss).
Calibrator calibrate_from_records(Method method, std::span<const NonconformityRecord> records, double alpha,
                                  const TransformSpec& transform, int n_trunc, const RapsParams& raps = {});

// Fits a calibrator on an already refined run; every query must carry the
// same transform and a label.
Calibrator calibrate(Method method, const RetrievalRun& refined, const GroundTruth& truth, double alpha,
                     const RapsParams& raps = {});

// Throws TransformMismatch when run was not refined with cal.transform.
PredictionSet predict(const QueryRun& run, const Calibrator& cal);

// predict() over every query, parallel across queries.
std::vector<PredictionSet> predict_all(const RetrievalRun& run, const Calibrator& cal);

nlohmann::json to_json(const Calibrator& cal);
Calibrator calibrator_from_json(const nlohmann::json& j);
void save_calibrator(const Calibrator& cal, const std::string& path);
Calibrator load_calibrator(const std::string& path);

}  // namespace confret
