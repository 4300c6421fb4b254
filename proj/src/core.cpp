#include "confret/core.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "confret/error.hpp"

namespace confret {

DocId::DocId(std::string id) : id_(std::move(id)) {
  if (id_.empty()) throw Error(ErrorCode::InvalidDocId, "document id must be non-empty");
}

TransformSpec TransformSpec::log_rank(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArg, fmt::format("lambda must be in [0,1], got {}", lambda));
  }
  return {TransformKind::LogRankDiscount, lambda};
}

std::optional<int> QueryRun::rank_of(const DocId& doc) const {
  for (const auto& c : candidates) {
    if (c.doc == doc) return c.rank;
  }
  return std::nullopt;
}

namespace {

bool ranks_before(const std::pair<DocId, double>& a, const std::pair<DocId, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

void check_finite(const std::vector<std::pair<DocId, double>>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidateList, "no candidates to rank");
  for (const auto& [doc, score] : candidates) {
    if (!std::isfinite(score)) {
      throw Error(ErrorCode::InvalidScore, fmt::format("non-finite score for doc '{}'", doc.str()));
    }
  }
}

std::vector<ScoredCandidate> assign_ranks(std::vector<std::pair<DocId, double>>&& sorted) {
  std::vector<ScoredCandidate> out;
  out.reserve(sorted.size());
  int rank = 1;
  for (auto& [doc, score] : sorted) out.push_back({std::move(doc), score, rank++});
  return out;
}

}  // namespace

std::vector<ScoredCandidate> sort_and_rank(std::vector<std::pair<DocId, double>> candidates) {
  check_finite(candidates);
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  return assign_ranks(std::move(candidates));
}

QueryRun make_query_run(std::string query_id, std::vector<std::pair<DocId, double>> candidates,
                        int n_trunc) {
  if (n_trunc < 1) throw Error(ErrorCode::InvalidArg, "n_trunc must be >= 1");
  check_finite(candidates);
  const auto keep = std::min(candidates.size(), static_cast<std::size_t>(n_trunc));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), ranks_before);
  candidates.resize(keep);
  return QueryRun{std::move(query_id), assign_ranks(std::move(candidates)), {}};
}

bool is_well_formed(const QueryRun& run) {
  for (std::size_t i = 0; i < run.candidates.size(); ++i) {
    const auto& c = run.candidates[i];
    if (!std::isfinite(c.score) || c.rank != static_cast<int>(i) + 1 || c.doc.empty()) return false;
    if (i > 0) {
      const auto& prev = run.candidates[i - 1];
      if (prev.score < c.score) return false;
      if (prev.score == c.score && !(prev.doc < c.doc)) return false;
    }
  }
  return true;
}

RetrievalRun::RetrievalRun(std::vector<QueryRun> queries, int n_trunc)
    : queries_(std::move(queries)), n_trunc_(n_trunc) {
  if (n_trunc_ < 1) throw Error(ErrorCode::InvalidArg, "n_trunc must be >= 1");
  std::sort(queries_.begin(), queries_.end(),
            [](const QueryRun& a, const QueryRun& b) { return a.query_id < b.query_id; });
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (i > 0 && queries_[i].query_id == queries_[i - 1].query_id) {
      throw Error(ErrorCode::DuplicateEntry,
                  fmt::format("query '{}' appears more than once", queries_[i].query_id));
    }
    auto& cands = queries_[i].candidates;
    if (cands.size() > static_cast<std::size_t>(n_trunc_)) cands.resize(n_trunc_);
  }
}

const QueryRun* RetrievalRun::find(const std::string& query_id) const {
  auto it = std::lower_bound(queries_.begin(), queries_.end(), query_id,
                             [](const QueryRun& q, const std::string& id) { return q.query_id < id; });
  if (it == queries_.end() || it->query_id != query_id) return nullptr;
  return &*it;
}

RetrievalRun RetrievalRun::subset(std::span<const std::string> query_ids) const {
  std::vector<QueryRun> picked;
  picked.reserve(query_ids.size());
  for (const auto& id : query_ids) {
    const QueryRun* q = find(id);
    if (q == nullptr) throw Error(ErrorCode::InvalidArg, fmt::format("unknown query '{}'", id));
    picked.push_back(*q);
  }
  return RetrievalRun(std::move(picked), n_trunc_);
}

const DocId* GroundTruth::find(const std::string& query_id) const {
  auto it = labels.find(query_id);
  return it == labels.end() ? nullptr : &it->second;
}

bool PredictionSet::contains(const DocId& doc) const {
  return std::find(members.begin(), members.end(), doc) != members.end();
}

}  // namespace confret
