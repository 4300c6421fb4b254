#include "confret/refine.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "confret/error.hpp"
#include "kernels.hpp"

namespace confret {

TransformSpec parse_transform(std::string_view text) {
  if (text == "identity") return TransformSpec::identity();
  if (text == "maxscore") return TransformSpec::max_score();
  if (text == "zscore") return TransformSpec::z_score();
  constexpr std::string_view prefix = "logrank:";
  if (text.starts_with(prefix)) {
    const auto arg = text.substr(prefix.size());
    double lambda = 0.0;
    auto [end, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), lambda);
    if (ec != std::errc() || end != arg.data() + arg.size()) {
      throw Error(ErrorCode::InvalidArg, fmt::format("bad lambda in transform '{}'", text));
    }
    return TransformSpec::log_rank(lambda);
  }
  throw Error(ErrorCode::InvalidArg, fmt::format("unknown transform '{}'", text));
}

std::string to_string(const TransformSpec& spec) {
  switch (spec.kind) {
    case TransformKind::Identity: return "identity";
    case TransformKind::MaxScore: return "maxscore";
    case TransformKind::ZScore: return "zscore";
    // Shortest round-trip representation, so parse(to_string(x)) == x.
    case TransformKind::LogRankDiscount: return fmt::format("logrank:{}", spec.lambda);
  }
  throw Error(ErrorCode::Internal, "unhandled transform kind");
}

double rank_discount(int rank, double lambda) {
  return 1.0 / std::log(1.0 + std::pow(static_cast<double>(rank), lambda));
}

QueryRun refine(const QueryRun& run, const TransformSpec& spec) {
  if (run.empty()) throw Error(ErrorCode::EmptyCandidateList, fmt::format("query '{}' has no candidates", run.query_id));
  if (run.transform.kind != TransformKind::Identity) {
    throw Error(ErrorCode::TransformMismatch,
                fmt::format("query '{}' is already refined with {}", run.query_id, to_string(run.transform)));
  }

  QueryRun out = run;
  out.transform = spec;
  auto& cands = out.candidates;

  switch (spec.kind) {
    case TransformKind::Identity:
      break;

    case TransformKind::MaxScore:
    case TransformKind::LogRankDiscount: {
      const double s_max = run.max_score();
      if (!(s_max > 0.0)) {
        throw Error(ErrorCode::NonPositiveMax,
                    fmt::format("query '{}' has max score {} <= 0", run.query_id, s_max));
      }
      const bool discount = spec.kind == TransformKind::LogRankDiscount;
      for (auto& c : cands) {
        c.score /= s_max;
        if (discount) c.score *= rank_discount(c.rank, spec.lambda);
      }
      break;
    }

    case TransformKind::ZScore: {
      // Sorted, so equal ends mean equal scores; checked directly because the
      // rounded mean can leave a tiny nonzero spread.
      if (cands.front().score == cands.back().score) {
        throw Error(ErrorCode::DegenerateScores,
                    fmt::format("query '{}' has identical scores; z-score undefined", run.query_id));
      }
      const auto n = static_cast<double>(cands.size());
      double mean = 0.0;
      for (const auto& c : cands) mean += c.score;
      mean /= n;
      double var = 0.0;
      for (const auto& c : cands) var += (c.score - mean) * (c.score - mean);
      const double sd = std::sqrt(var / n);
      if (!(sd > 0.0)) {
        throw Error(ErrorCode::DegenerateScores,
                    fmt::format("query '{}' has identical scores; z-score undefined", run.query_id));
      }
      for (auto& c : cands) c.score = (c.score - mean) / sd;
      break;
    }
  }
  return out;
}

RetrievalRun refine_all(const RetrievalRun& run, const TransformSpec& spec) {
  const auto queries = run.queries();
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<QueryRun> out(queries.size());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    failure.run([&] { out[i] = refine(queries[i], spec); });
  }
  failure.rethrow();
  return RetrievalRun(std::move(out), run.n_trunc());
}

}  // namespace confret
