#include "confret/serial.hpp"

#include "confret/error.hpp"
#include "confret/eval.hpp"
#include "confret/refine.hpp"
#include "kernels.hpp"

namespace confret::serial {

std::vector<std::pair<DocId, double>> cosine_scores(std::span<const double> query, const EmbeddingMatrix& corpus) {
  const double qn = kernels::query_norm(query, corpus);
  std::vector<std::pair<DocId, double>> out;
  out.reserve(corpus.rows());
  for (std::size_t i = 0; i < corpus.rows(); ++i) {
    out.emplace_back(corpus.ids()[i], kernels::cosine_at(query, qn, corpus, i));
  }
  return out;
}

RetrievalRun retrieve_all(const EmbeddingMatrix& queries, const EmbeddingMatrix& corpus, int n) {
  std::vector<QueryRun> runs;
  runs.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    runs.push_back(top_n(queries.ids()[i].str(), serial::cosine_scores(queries.row(i), corpus), n));
  }
  return RetrievalRun(std::move(runs), n);
}

RetrievalRun refine_all(const RetrievalRun& run, const TransformSpec& spec) {
  std::vector<QueryRun> out;
  out.reserve(run.size());
  for (const auto& q : run.queries()) out.push_back(refine(q, spec));
  return RetrievalRun(std::move(out), run.n_trunc());
}

std::vector<NonconformityRecord> nonconformity_records(const RetrievalRun& run, const GroundTruth& truth,
                                                       Method method, const RapsParams& raps) {
  std::vector<NonconformityRecord> records;
  records.reserve(run.size());
  for (const auto& q : run.queries()) {
    const DocId* label = truth.find(q.query_id);
    if (label == nullptr) throw Error(ErrorCode::MissingGroundTruth, "no ground truth for query '" + q.query_id + "'");
    records.push_back({q.query_id, nonconformity(q, *label, method, raps)});
  }
  return records;
}

std::vector<PredictionSet> predict_all(const RetrievalRun& run, const Calibrator& cal) {
  std::vector<PredictionSet> sets;
  sets.reserve(run.size());
  for (const auto& q : run.queries()) sets.push_back(predict(q, cal));
  return sets;
}

CurvePoint evaluate_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth,
                           const RetrievalRun& val_run, const GroundTruth& val_truth, double alpha,
                           double lambda) {
  const auto spec = TransformSpec::log_rank(lambda);
  const auto cal_refined = serial::refine_all(cal_run, spec);
  const auto records = serial::nonconformity_records(cal_refined, cal_truth, Method::VanillaThreshold);
  const auto cal = calibrate_from_records(Method::VanillaThreshold, records, alpha, spec, cal_run.n_trunc());
  const auto sets = serial::predict_all(serial::refine_all(val_run, spec), cal);
  return {lambda, avg_group_size(sets), empirical_coverage(sets, val_truth)};
}

TuneResult tune_lambda(const RetrievalRun& cal_run, const GroundTruth& cal_truth, const RetrievalRun& val_run,
                       const GroundTruth& val_truth, double alpha, const LambdaGrid& grid) {
  grid.validate();
  TuneResult result;
  for (double lambda : grid.values) {
    result.curve.push_back(serial::evaluate_lambda(cal_run, cal_truth, val_run, val_truth, alpha, lambda));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.curve.size(); ++i) {
    if (result.curve[i].avg_group_size < result.curve[best].avg_group_size) best = i;
  }
  result.best_lambda = result.curve[best].lambda;
  return result;
}

}  // namespace confret::serial
