#include "confret/data.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "confret/error.hpp"
#include "confret/io.hpp"
#include "kernels.hpp"

namespace confret {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  const char sep = line.find('\t') != std::string_view::npos ? '\t' : ' ';
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto next = line.find(sep, pos);
    const auto field = line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    // Space-separated TREC files may use runs of blanks.
    if (sep == '\t' || !field.empty()) fields.push_back(field);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && end == text.data() + text.size();
}

[[noreturn]] void parse_error(const io::Reader& in, const std::string& what) {
  throw Error(ErrorCode::ParseError, fmt::format("{}:{}: {}", in.path(), in.line_number(), what));
}

}  // namespace

RetrievalRun load_run(const std::string& path, int n_trunc) {
  if (n_trunc < 1) throw Error(ErrorCode::InvalidArg, "n_trunc must be >= 1");
  io::Reader in(path);

  struct Pending {
    std::vector<std::pair<DocId, double>> candidates;
    std::unordered_set<std::string> seen;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> by_query;

  std::string line;
  while (in.next_line(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_fields(line);
    std::string_view qid, doc, score_text;
    if (f.size() == 3) {
      qid = f[0], doc = f[1], score_text = f[2];
    } else if (f.size() == 6) {
      qid = f[0], doc = f[2], score_text = f[4];
    } else {
      parse_error(in, fmt::format("expected 3 (query, doc, score) or 6 (TREC) fields, got {}", f.size()));
    }
    if (qid.empty() || doc.empty()) parse_error(in, "empty query or document id");
    double score = 0.0;
    if (!parse_number(score_text, score)) parse_error(in, fmt::format("bad score '{}'", score_text));
    if (!std::isfinite(score)) parse_error(in, "non-finite score");

    auto [it, inserted] = by_query.try_emplace(std::string(qid));
    if (inserted) order.emplace_back(qid);
    if (!it->second.seen.emplace(doc).second) {
      throw Error(ErrorCode::DuplicateEntry, fmt::format("{}:{}: document '{}' listed twice for query '{}'",
                                                         path, in.line_number(), doc, qid));
    }
    it->second.candidates.emplace_back(DocId(std::string(doc)), score);
  }

  std::vector<QueryRun> runs(order.size());
  const auto n = static_cast<std::ptrdiff_t>(order.size());
  kernels::ErrorSlot failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    failure.run([&] {
      auto& pending = by_query.at(order[i]);
      runs[i] = make_query_run(order[i], std::move(pending.candidates), n_trunc);
    });
  }
  failure.rethrow();
  return RetrievalRun(std::move(runs), n_trunc);
}

void save_run(const RetrievalRun& run, const std::string& path) {
  io::Writer out(path);
  std::string buf;
  for (const auto& q : run.queries()) {
    buf.clear();
    // "{}" is the shortest representation that parses back to the same double.
    for (const auto& c : q.candidates) buf += fmt::format("{}\t{}\t{}\n", q.query_id, c.doc.str(), c.score);
    out.write(buf);
  }
  out.close();
}

Qrels load_qrels(const std::string& path) {
  io::Reader in(path);
  Qrels qrels;
  std::string line;
  while (in.next_line(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_fields(line);
    if (in.line_number() == 1 && !f.empty() && (f[0] == "query-id" || f[0] == "query_id")) continue;
    std::string_view qid, doc, grade_text;
    if (f.size() == 3) {
      qid = f[0], doc = f[1], grade_text = f[2];
    } else if (f.size() == 4) {
      qid = f[0], doc = f[2], grade_text = f[3];
    } else {
      parse_error(in, fmt::format("expected 3 (query, doc, grade) or 4 (TREC) fields, got {}", f.size()));
    }
    if (qid.empty() || doc.empty()) parse_error(in, "empty query or document id");
    int grade = 0;
    if (!parse_number(grade_text, grade) || grade < 0) parse_error(in, fmt::format("bad grade '{}'", grade_text));
    auto& docs = qrels.entries[std::string(qid)];
    if (!docs.emplace(DocId(std::string(doc)), grade).second) {
      throw Error(ErrorCode::DuplicateEntry, fmt::format("{}:{}: document '{}' judged twice for query '{}'", path,
                                                         in.line_number(), doc, qid));
    }
  }
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::string& path) {
  io::Writer out(path);
  for (const auto& [qid, docs] : qrels.entries) {
    for (const auto& [doc, grade] : docs) out.write(fmt::format("{}\t{}\t{}\n", qid, doc.str(), grade));
  }
  out.close();
}

GroundTruth reduce_qrels(const Qrels& qrels, const RetrievalRun& run) {
  GroundTruth truth;
  for (const auto& q : run.queries()) {
    auto judged = qrels.entries.find(q.query_id);
    if (judged == qrels.entries.end()) continue;

    const DocId* fallback = nullptr;
    for (const auto& [doc, grade] : judged->second) {
      if (grade > 0) {
        fallback = &doc;  // map order: the first positive is the smallest id
        break;
      }
    }
    if (fallback == nullptr) {
      throw Error(ErrorCode::NoRelevantDoc, fmt::format("query '{}' has no positive-grade document", q.query_id));
    }

    // Candidates are in descending score order, so the first relevant hit wins.
    const DocId* best = nullptr;
    for (const auto& c : q.candidates) {
      auto g = judged->second.find(c.doc);
      if (g != judged->second.end() && g->second > 0) {
        best = &c.doc;
        break;
      }
    }
    if (best != nullptr) {
      truth.labels.emplace(q.query_id, *best);
    } else {
      truth.labels.emplace(q.query_id, *fallback);
      truth.misses.insert(q.query_id);
    }
  }
  return truth;
}

Qrels qrels_from_truth(const GroundTruth& truth) {
  Qrels qrels;
  for (const auto& [qid, doc] : truth.labels) qrels.entries[qid].emplace(doc, 1);
  return qrels;
}

TruthRankDist TruthRankDist::parse(std::string_view text) {
  TruthRankDist d;
  const auto colon = text.find(':');
  const auto name = text.substr(0, colon);
  const auto arg = colon == std::string_view::npos ? std::string_view() : text.substr(colon + 1);
  if (name == "geometric") {
    d.kind = Kind::Geometric;
    if (!parse_number(arg, d.p) || !(d.p > 0.0 && d.p <= 1.0)) {
      throw Error(ErrorCode::InvalidArg, fmt::format("geometric needs p in (0,1], got '{}'", arg));
    }
  } else if (name == "uniform") {
    d.kind = Kind::Uniform;
    if (!parse_number(arg, d.max_r) || d.max_r < 1) {
      throw Error(ErrorCode::InvalidArg, fmt::format("uniform needs max rank >= 1, got '{}'", arg));
    }
  } else {
    throw Error(ErrorCode::InvalidArg, fmt::format("unknown truth rank distribution '{}'", text));
  }
  return d;
}

std::string TruthRankDist::to_string() const {
  return kind == Kind::Geometric ? fmt::format("geometric:{}", p) : fmt::format("uniform:{}", max_r);
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArg, what); };
  if (n_queries < 1) fail("n_queries must be >= 1");
  if (n_candidates < 1) fail("n_candidates must be >= 1");
  if (n_trunc < 1 || n_candidates > n_trunc) fail("n_candidates must be in [1, n_trunc]");
  if (!(scale_spread >= 0.0)) fail("scale_spread must be >= 0");
  if (!(slope_spread >= 0.0)) fail("slope_spread must be >= 0");
  if (!(truth_gap >= 0.0 && truth_gap < 1.0)) fail("truth_gap must be in [0,1)");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (truth_rank.kind == TruthRankDist::Kind::Geometric && !(truth_rank.p > 0.0 && truth_rank.p <= 1.0)) {
    fail("geometric p must be in (0,1]");
  }
  if (truth_rank.kind == TruthRankDist::Kind::Uniform && truth_rank.max_r < 1) fail("uniform max rank must be >= 1");
}

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto draw_rank = [&]() -> long long {
    if (cfg.truth_rank.kind == TruthRankDist::Kind::Uniform) {
      return std::uniform_int_distribution<long long>(1, cfg.truth_rank.max_r)(rng);
    }
    if (cfg.truth_rank.p >= 1.0) return 1;
    return 1 + std::geometric_distribution<long long>(cfg.truth_rank.p)(rng);
  };

  const int width = std::max(5, static_cast<int>(std::to_string(cfg.n_candidates).size()));
  auto doc_name = [&](long long slot) { return fmt::format("d{:0{}}", slot, width); };

  std::vector<QueryRun> runs;
  runs.reserve(static_cast<std::size_t>(cfg.n_queries));
  GroundTruth truth;
  std::vector<std::pair<DocId, double>> cands;
  for (int q = 0; q < cfg.n_queries; ++q) {
    const double scale = std::exp(cfg.scale_spread * normal(rng));
    const double decay = 0.08 * std::exp(cfg.slope_spread * normal(rng));
    const long long truth_slot = draw_rank();

    cands.clear();
    for (int j = 1; j <= cfg.n_candidates; ++j) {
      double base = 0.85 * std::pow(static_cast<double>(j), -decay);
      if (j > truth_slot) base *= 1.0 - cfg.truth_gap;
      const double noise = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * normal(rng) : 0.0;
      cands.emplace_back(DocId(doc_name(j)), scale * (base + noise));
    }

    const auto qid = fmt::format("{}{:06}", cfg.query_prefix, q);
    truth.labels.emplace(qid, DocId(doc_name(truth_slot)));
    if (truth_slot > cfg.n_candidates) truth.misses.insert(qid);
    runs.push_back(make_query_run(qid, cands, cfg.n_trunc));
  }
  return {RetrievalRun(std::move(runs), cfg.n_trunc), std::move(truth)};
}

}  // namespace confret
