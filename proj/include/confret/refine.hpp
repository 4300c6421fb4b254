#pragma once

// Score refinement applied per query before conformal calibration.
//
//   Identity         t_r = s_r
//   MaxScore         t_r = s_r / s_max
//   ZScore           t_r = (s_r - mean) / stddev      (population stddev)
//   LogRankDiscount  t_r = (s_r / s_max) / ln(1 + r^lambda)
//
// The rank discount is strictly decreasing in r for lambda > 0, so on runs with
// non-negative scores every transform preserves the retrieval order. Natural
// log is used; another base rescales every refined score by one positive
// constant and leaves the induced prediction sets unchanged.

#include <string>
#include <string_view>

#include "confret/core.hpp"

namespace confret {

// `identity`, `maxscore`, `zscore`, `logrank:<lambda>`. Throws InvalidArg.
TransformSpec parse_transform(std::string_view text);
std::string to_string(const TransformSpec& spec);

// W(r) = 1 / ln(1 + r^lambda).
double rank_discount(int rank, double lambda);

// Throws NonPositiveMax (MaxScore, LogRankDiscount with s_max <= 0),
// DegenerateScores (ZScore with zero spread), EmptyCandidateList, and
// TransformMismatch if the run was already refined by a non-identity transform.
QueryRun refine(const QueryRun& run, const TransformSpec& spec);

// refine() over every query, parallel across queries.
RetrievalRun refine_all(const RetrievalRun& run, const TransformSpec& spec);

}  // namespace confret
