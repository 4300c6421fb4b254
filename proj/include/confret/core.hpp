#pragma once

// Domain types shared by every module. Nothing here performs I/O or statistics.

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace confret {

inline constexpr int kDefaultNTrunc = 2000;

class DocId {
 public:
  DocId() = default;
  explicit DocId(std::string id);

  const std::string& str() const noexcept { return id_; }
  bool empty() const noexcept { return id_.empty(); }

  friend bool operator==(const DocId&, const DocId&) = default;
  friend auto operator<=>(const DocId&, const DocId&) = default;

 private:
  std::string id_;
};

struct ScoredCandidate {
  DocId doc;
  double score = 0.0;
  int rank = 0;  // 1-based position in descending-score order

  friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

enum class TransformKind { Identity, MaxScore, ZScore, LogRankDiscount };

// Which score refinement a run has been passed through. lambda is only read
// for LogRankDiscount.
struct TransformSpec {
  TransformKind kind = TransformKind::Identity;
  double lambda = 0.0;

  static TransformSpec identity() { return {}; }
  static TransformSpec max_score() { return {TransformKind::MaxScore, 0.0}; }
  static TransformSpec z_score() { return {TransformKind::ZScore, 0.0}; }
  // Throws InvalidArg unless lambda is in [0, 1].
  static TransformSpec log_rank(double lambda);

  friend bool operator==(const TransformSpec& a, const TransformSpec& b) {
    if (a.kind != b.kind) return false;
    return a.kind != TransformKind::LogRankDiscount || a.lambda == b.lambda;
  }
};

struct QueryRun {
  std::string query_id;
  std::vector<ScoredCandidate> candidates;  // sorted by score desc, ranks 1..size
  TransformSpec transform;                  // refinement already applied to the scores

  std::size_t size() const noexcept { return candidates.size(); }
  bool empty() const noexcept { return candidates.empty(); }
  double max_score() const { return candidates.front().score; }

  // 1-based rank of doc, or nullopt when doc was not retrieved.
  std::optional<int> rank_of(const DocId& doc) const;
};

// Sorts by score descending with ascending DocId as tie-break and assigns
// contiguous ranks from 1. Throws EmptyCandidateList / InvalidScore.
std::vector<ScoredCandidate> sort_and_rank(std::vector<std::pair<DocId, double>> candidates);

// Builds a QueryRun from unsorted (doc, score) pairs, keeping the n_trunc best.
QueryRun make_query_run(std::string query_id, std::vector<std::pair<DocId, double>> candidates,
                        int n_trunc = kDefaultNTrunc);

// Checks the QueryRun invariants (sorted, contiguous ranks, finite scores).
bool is_well_formed(const QueryRun& run);

// A collection of per-query runs, kept sorted by query id so iteration order
// never depends on hashing and parallel loops can index it directly.
class RetrievalRun {
 public:
  RetrievalRun() = default;
  // Throws DuplicateEntry on repeated query ids and InvalidArg on n_trunc < 1.
  // Longer runs are truncated to n_trunc.
  RetrievalRun(std::vector<QueryRun> queries, int n_trunc);

  std::span<const QueryRun> queries() const noexcept { return queries_; }
  std::size_t size() const noexcept { return queries_.size(); }
  bool empty() const noexcept { return queries_.empty(); }
  int n_trunc() const noexcept { return n_trunc_; }

  const QueryRun* find(const std::string& query_id) const;

  // Run restricted to query_ids (still sorted by id); unknown ids throw InvalidArg.
  RetrievalRun subset(std::span<const std::string> query_ids) const;

 private:
  std::vector<QueryRun> queries_;
  int n_trunc_ = kDefaultNTrunc;
};

// One relevant document per query. Queries whose label was never retrieved are
// recorded in misses.
struct GroundTruth {
  std::map<std::string, DocId> labels;
  std::set<std::string> misses;

  const DocId* find(const std::string& query_id) const;
};

struct PredictionSet {
  std::string query_id;
  std::vector<DocId> members;  // in rank order
  double cutoff_value = 0.0;   // tau, or K for TopK

  bool contains(const DocId& doc) const;
  std::size_t size() const noexcept { return members.size(); }
};

}  // namespace confret
