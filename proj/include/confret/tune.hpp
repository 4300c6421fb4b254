#pragma once

// Grid search for the rank-discount exponent lambda: refine calibration and
// validation splits with LogRankDiscount(lambda), calibrate a vanilla
// threshold on the first, and keep the lambda with the smallest average set
// size on the second.

#include <string>
#include <string_view>
#include <vector>

#include "confret/core.hpp"

namespace confret {

struct LambdaGrid {
  std::vector<double> values;  // strictly increasing, within [0, 1]

  // 0.00, 0.03, ..., 0.99
  static LambdaGrid default_grid();
  // "start:stop:step" (inclusive stop) or a comma list. Throws InvalidArg.
  static LambdaGrid parse(std::string_view text);
  void validate() const;
};

struct CurvePoint {
  double lambda = 0.0;
  double avg_group_size = 0.0;
  double empirical_coverage = 0.0;
};

struct TuneResult {
  double best_lambda = 0.0;
  std::vector<CurvePoint> curve;  // grid order
};

// One grid point: refine, calibrate on cal, measure on val.
CurvePoint evaluate_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth,
                           const RetrievalRun& val_run, const GroundTruth& val_truth, double alpha,
                           double lambda);

// Grid points run in parallel; ties in avg size go to the smaller lambda.
// Throws InvalidArg on an empty grid or overlapping splits.
TuneResult tune_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth, const RetrievalRun& val_run,
                       const GroundTruth& val_truth, double alpha, const LambdaGrid& grid);

// Header `lambda,avg_group_size,empirical_coverage`.
std::string curve_csv(const TuneResult& result);

}  // namespace confret
