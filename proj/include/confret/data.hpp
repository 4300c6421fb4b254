#pragma once

// Run and qrels files, plus the synthetic exchangeable generator.
//
// Runs are TSV `query_id<TAB>doc_id<TAB>score`; six-column TREC runs
// (`qid Q0 doc rank score tag`) are read as well. Qrels are TSV
// `query_id<TAB>doc_id<TAB>grade`, optionally with a BEIR header line, or
// four-column TREC qrels. A ".gz" suffix selects gzip on both read and write.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "confret/core.hpp"

namespace confret {

struct Qrels {
  std::map<std::string, std::map<DocId, int>> entries;
};

// Enforces the core invariants: candidates re-sorted and cut to n_trunc.
// Throws ParseError (with line number) and DuplicateEntry.
RetrievalRun load_run(const std::string& path, int n_trunc = kDefaultNTrunc);
void save_run(const RetrievalRun& run, const std::string& path);

Qrels load_qrels(const std::string& path);
void save_qrels(const Qrels& qrels, const std::string& path);

// Per query of run that has judgments: the positive-grade document retrieved
// with the highest score. When none was retrieved the smallest positive id is
// used and the query is recorded as a miss. Throws NoRelevantDoc.
GroundTruth reduce_qrels(const Qrels& qrels, const RetrievalRun& run);

// Grade-1 qrels holding exactly the labels of truth.
Qrels qrels_from_truth(const GroundTruth& truth);

struct TruthRankDist {
  enum class Kind { Geometric, Uniform };
  Kind kind = Kind::Geometric;
  double p = 0.3;  // Geometric: success probability in (0, 1]
  int max_r = 10;  // Uniform: ranks 1..max_r

  // "geometric:<p>" or "uniform:<max_r>".
  static TruthRankDist parse(std::string_view text);
  std::string to_string() const;
};

struct SynthConfig {
  int n_queries = 1000;
  int n_candidates = 200;
  int n_trunc = kDefaultNTrunc;
  double scale_spread = 1.0;  // sd of log per-query score scale
  double slope_spread = 0.5;  // sd of log per-query decay exponent
  double truth_gap = 0.15;    // relative score drop right after the ground truth
  TruthRankDist truth_rank;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
  std::string query_prefix = "q";

  void validate() const;
};

struct SynthData {
  RetrievalRun run;
  GroundTruth truth;
};

// Each query, independently: scale k ~ LogNormal(0, scale_spread), decay
// exponent b = 0.08 * LogNormal(0, slope_spread), truth slot r* from
// truth_rank. Slot j gets base 0.85 * j^-b, scaled by (1 - truth_gap) for
// j > r*, and score k * (base + N(0, noise_sigma)). The truth is the document
// in slot r*; when r* > n_candidates it is a document that was not retrieved.
SynthData generate_synthetic(const SynthConfig& cfg);

}  // namespace confret
