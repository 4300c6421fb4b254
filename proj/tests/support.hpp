#pragma once

// Test-only helpers and independent oracles. Nothing here calls into the
// library code path it is used to check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "confret/core.hpp"

namespace confret::testing {

// Run with ranks assigned in the order given (scores assumed sorted desc).
inline QueryRun run_of(const std::string& qid, const std::vector<double>& scores,
                       const std::string& doc_prefix = "d") {
  QueryRun run;
  run.query_id = qid;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04zu", doc_prefix.c_str(), i + 1);
    run.candidates.push_back({DocId(buf), scores[i], static_cast<int>(i) + 1});
  }
  return run;
}

inline std::vector<double> random_sorted_scores(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

// Plain double loop with norms computed from the raw vectors.
inline std::vector<double> naive_cosine(const std::vector<double>& q, const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) {
    double dot = 0, nq = 0, nr = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      dot += q[j] * r[j];
      nq += q[j] * q[j];
      nr += r[j] * r[j];
    }
    out.push_back(dot / (std::sqrt(nq) * std::sqrt(nr)));
  }
  return out;
}

// Full stable sort by (score desc, id asc) then truncate.
inline std::vector<std::pair<std::string, double>> full_sort_top_n(std::vector<std::pair<std::string, double>> v,
                                                                   std::size_t n) {
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  if (v.size() > n) v.resize(n);
  return v;
}

// Sort ascending and index at ceil((n+1)(1-alpha)), computed in long double.
inline double naive_quantile(std::vector<double> c, double alpha) {
  std::sort(c.begin(), c.end());
  const auto n = c.size();
  const auto m = static_cast<std::size_t>(std::ceil(static_cast<long double>(n + 1) * (1.0L - alpha)));
  if (m > n) return INFINITY;
  return c[m - 1];
}

inline std::vector<double> softmax_cumsum(const std::vector<double>& s) {
  std::vector<double> e(s.size());
  double z = 0;
  for (std::size_t i = 0; i < s.size(); ++i) z += (e[i] = std::exp(s[i]));
  double acc = 0;
  for (auto& x : e) x = (acc += x / z);
  return e;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("confret_test_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace confret::testing
