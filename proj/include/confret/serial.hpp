#pragma once

// Single-threaded reference versions of the parallel batch kernels. They share
// the per-item code with the OpenMP loops and exist so tests can check the
// parallel results element-for-element and the benchmark can compare timings.

#include <span>
#include <utility>
#include <vector>

#include "confret/conformal.hpp"
#include "confret/core.hpp"
#include "confret/retrieval.hpp"
#include "confret/tune.hpp"

namespace confret::serial {

std::vector<std::pair<DocId, double>> cosine_scores(std::span<const double> query, const EmbeddingMatrix& corpus);
RetrievalRun retrieve_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& corpus, int n);
RetrievalRun refine_all(const RetrievalRun& run, const TransformSpec& spec);
std::vector<NonconformityRecord> nonconformity_records(const RetrievalRun& run, const GroundTruth& truth,
                                                       Method method, const RapsParams& raps = {});
std::vector<PredictionSet> predict_all(const RetrievalRun& run, const Calibrator& cal);
CurvePoint evaluate_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth,
                           const RetrievalRun& val_run, const GroundTruth& val_truth, double alpha,
                           double lambda);
TuneResult tune_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth, const RetrievalRun& val_run,
                       const GroundTruth& val_truth, double alpha, const LambdaGrid& grid);

}  // namespace confret::serial
