#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "confret/conformal.hpp"
#include "confret/error.hpp"
#include "confret/refine.hpp"
#include "support.hpp"

namespace confret {
namespace {

using testing::run_of;

const double kInf = std::numeric_limits<double>::infinity();

std::vector<NonconformityRecord> records_of(const std::vector<double>& c) {
  std::vector<NonconformityRecord> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back({"q" + std::to_string(i), c[i]});
  return out;
}

// One query per rank; the truth sits at that rank (0 marks a miss).
std::pair<RetrievalRun, GroundTruth> ranked_truths(const std::vector<int>& ranks, int n_cand = 10,
                                                   int n_trunc = kDefaultNTrunc) {
  std::vector<QueryRun> runs;
  GroundTruth truth;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    std::vector<double> s;
    for (int j = 0; j < n_cand; ++j) s.push_back(1.0 - 0.05 * j);
    const auto qid = "q" + std::to_string(i);
    auto run = run_of(qid, s);
    if (ranks[i] > 0) {
      truth.labels.emplace(qid, run.candidates[ranks[i] - 1].doc);
    } else {
      truth.labels.emplace(qid, DocId("absent"));
      truth.misses.insert(qid);
    }
    runs.push_back(std::move(run));
  }
  return {RetrievalRun(std::move(runs), n_trunc), truth};
}

TEST(Nonconformity, Vanilla) {
  const auto run = run_of("q", {0.9, 0.8, 0.6, 0.3});
  EXPECT_EQ(nonconformity_vanilla(run, DocId("d0002")), -0.8);
  EXPECT_EQ(nonconformity_vanilla(run_of("q", {0.9, 0.6, 0.3}), DocId("d0002")), -0.6);
  EXPECT_EQ(nonconformity_vanilla(run, DocId("nowhere")), kInf);
}

// Masses evaluated independently in Python (math.exp, float64).
TEST(Nonconformity, ApsFrozenValues) {
  const auto run = run_of("q", {2.0, 1.0, 0.0});
  EXPECT_NEAR(nonconformity_aps(run, DocId("d0001")), 0.6652409557748219, 1e-15);
  EXPECT_NEAR(nonconformity_aps(run, DocId("d0002")), 0.9099694268296196, 1e-15);
  EXPECT_NEAR(nonconformity_aps(run, DocId("d0003")), 1.0, 1e-9);
  EXPECT_EQ(nonconformity_aps(run, DocId("x")), kInf);
}

TEST(Nonconformity, RapsHinge) {
  const auto run = run_of("q", {2.0, 1.0, 0.0});
  EXPECT_NEAR(nonconformity_raps(run, DocId("d0002"), 1, 0.1), 1.0099694268296195, 1e-15);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto s = testing::random_sorted_scores(rng, 1 + rng() % 50, -3, 3);
    const auto r = run_of("q", s);
    const auto& doc = r.candidates[rng() % s.size()].doc;
    const double aps = nonconformity_aps(r, doc);
    EXPECT_EQ(nonconformity_raps(r, doc, 3, 0.0), aps);
    EXPECT_EQ(nonconformity_raps(r, doc, static_cast<int>(s.size()), 0.5), aps);
  }
}

TEST(Nonconformity, ApsMassesAgainstOracle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 500; ++t) {
    const auto s = testing::random_sorted_scores(rng, 1 + rng() % 300, -20, 20);
    const auto got = cumulative_softmax(run_of("q", s));
    // Shifted oracle so large exponents stay finite.
    std::vector<double> shifted(s);
    for (auto& x : shifted) x -= s.front();
    const auto want = testing::softmax_cumsum(shifted);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-12);
      if (i > 0) {
        EXPECT_GE(got[i], got[i - 1]);
      }
    }
    EXPECT_NEAR(got.back(), 1.0, 1e-9);
  }
}

TEST(Nonconformity, CandidateScoresPerMethod) {
  const auto run = run_of("q", {0.9, 0.6, 0.3});
  EXPECT_EQ(candidate_nonconformity(run, Method::VanillaThreshold), (std::vector<double>{-0.9, -0.6, -0.3}));
  EXPECT_EQ(candidate_nonconformity(run, Method::TopK), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(nonconformity(run, DocId("d0003"), Method::TopK), 3.0);
  EXPECT_EQ(nonconformity(run, DocId("zz"), Method::TopK), kInf);
}

TEST(Threshold, HandExamples) {
  EXPECT_EQ(quantile_index(4, 0.25), 4u);
  EXPECT_EQ(quantile_index(9, 0.05), 10u);
  EXPECT_EQ(calibrate_threshold(records_of({-0.5, -0.9, -0.2, -0.7}), 0.25), -0.2);
  EXPECT_EQ(calibrate_threshold(records_of({1, 2, 3, 4, 5, 6, 7, 8, 9}), 0.05), kInf);
  try {
    calibrate_threshold({}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoCalibrationData);
  }
  EXPECT_THROW(calibrate_threshold(records_of({1.0}), 0.0), Error);
  EXPECT_THROW(calibrate_threshold(records_of({1.0}), 1.0), Error);
}

TEST(Threshold, MatchesNaiveSortAndIndex) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> a(0.01, 0.5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 500;
    const double alpha = a(rng);
    std::vector<double> c(n);
    for (auto& x : c) x = (rng() % 10 == 0) ? kInf : g(rng);
    EXPECT_EQ(calibrate_threshold(records_of(c), alpha), testing::naive_quantile(c, alpha)) << n << " " << alpha;
  }
}

// tau is the 901st order statistic of 1000 uniforms: Beta(901, 100), mean
// 901/1001 = 0.9000999, sd about 0.0095.
TEST(Threshold, UniformOrderStatisticMonteCarlo) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  const int draws = 400;
  double sum = 0;
  int within = 0;
  for (int d = 0; d < draws; ++d) {
    std::vector<double> c(1000);
    for (auto& x : c) x = u(rng);
    const double tau = calibrate_threshold(records_of(c), 0.1);
    sum += tau;
    within += std::abs(tau - 0.901) <= 0.02;
  }
  EXPECT_NEAR(sum / draws, 901.0 / 1001.0, 0.002);
  EXPECT_GE(within, static_cast<int>(0.9 * draws));
}

TEST(TopK, HandExamples) {
  {
    auto [run, truth] = ranked_truths({1, 1, 2, 5});
    EXPECT_EQ(calibrate_topk(run, truth, 0.25), 5);
  }
  {
    auto [run, truth] = ranked_truths({1, 1, 1, 1, 1, 1, 1, 1, 1});
    EXPECT_EQ(calibrate_topk(run, truth, 0.2), 1);
  }
  {
    auto [run, truth] = ranked_truths({1, 1, 2, 0}, 10, 2000);
    EXPECT_EQ(calibrate_topk(run, truth, 0.25), 2000);
  }
  {
    auto [run, truth] = ranked_truths({1, 2, 3}, 10, 50);
    EXPECT_EQ(calibrate_topk(run, truth, 0.1), 50);  // m = 4 > n = 3
  }
}

TEST(Predict, ThresholdAndTopKExamples) {
  Calibrator cal;
  cal.transform = TransformSpec::identity();
  cal.tau = -0.5;
  const auto run = run_of("q", {1.44, 0.61, 0.24});
  auto set = predict(run, cal);
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.members[0].str(), "d0001");
  EXPECT_EQ(set.members[1].str(), "d0002");
  EXPECT_EQ(set.cutoff_value, -0.5);

  cal.tau = kInf;
  EXPECT_EQ(predict(run, cal).size(), 3u);

  Calibrator topk;
  topk.method = Method::TopK;
  topk.k = 2;
  const auto top = predict(run_of("q", {0.5, 0.4, 0.3, 0.2}), topk);
  EXPECT_EQ(top.members, (std::vector<DocId>{DocId("d0001"), DocId("d0002")}));
  topk.k = 10;
  EXPECT_EQ(predict(run, topk).size(), 3u);

  cal.transform = TransformSpec::log_rank(0.03);
  try {
    predict(run, cal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransformMismatch);
  }
}

TEST(Calibrate, RejectsMixedTransformsAndMissingLabels) {
  auto a = refine(run_of("a", {0.9, 0.1}), TransformSpec::max_score());
  auto b = run_of("b", {0.9, 0.1});
  GroundTruth truth;
  truth.labels.emplace("a", DocId("d0001"));
  truth.labels.emplace("b", DocId("d0001"));
  try {
    calibrate(Method::VanillaThreshold, RetrievalRun({a, b}, 10), truth, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransformMismatch);
  }
  GroundTruth partial;
  partial.labels.emplace("b", DocId("d0001"));
  try {
    calibrate(Method::VanillaThreshold, RetrievalRun({run_of("a", {0.5}), b}, 10), partial, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingGroundTruth);
  }
}

struct RandomCase {
  RetrievalRun run;
  GroundTruth truth;
};

RandomCase random_case(std::mt19937_64& rng, int n_queries) {
  std::vector<QueryRun> runs;
  GroundTruth truth;
  for (int q = 0; q < n_queries; ++q) {
    const auto qid = "q" + std::to_string(q);
    auto r = run_of(qid, testing::random_sorted_scores(rng, 2 + rng() % 40, 0.01, 1.0));
    const auto pick = rng() % (r.size() + 2);
    if (pick < r.size()) {
      truth.labels.emplace(qid, r.candidates[pick].doc);
    } else {
      truth.labels.emplace(qid, DocId("missing"));
      truth.misses.insert(qid);
    }
    runs.push_back(std::move(r));
  }
  return {RetrievalRun(std::move(runs), 100), std::move(truth)};
}

// Smaller alpha never shrinks tau, K or any prediction set.
TEST(Predict, NestedInAlpha) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    auto [run, truth] = random_case(rng, 60);
    for (auto method : {Method::VanillaThreshold, Method::TopK, Method::APS, Method::RAPS}) {
      for (const auto& spec : {TransformSpec::identity(), TransformSpec::log_rank(0.3)}) {
        const auto refined = refine_all(run, spec);
        const auto loose = calibrate(method, refined, truth, 0.3);
        const auto tight = calibrate(method, refined, truth, 0.05);
        EXPECT_GE(tight.cutoff(), loose.cutoff());
        const auto big = predict_all(refined, tight);
        const auto small = predict_all(refined, loose);
        for (std::size_t i = 0; i < big.size(); ++i) {
          EXPECT_GE(big[i].size(), small[i].size());
          for (const auto& d : small[i].members) EXPECT_TRUE(big[i].contains(d));
        }
      }
    }
  }
}

// Members are exactly the candidates with c <= tau, and form a rank prefix
// when the refined scores are order preserving.
TEST(Predict, MembersArePrefixOfCandidatesBelowThreshold) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.5, 0);
  for (int t = 0; t < 300; ++t) {
    const auto run = refine(run_of("q", testing::random_sorted_scores(rng, 1 + rng() % 60, 0.01, 1.0)),
                            TransformSpec::log_rank(0.5));
    Calibrator cal;
    cal.transform = run.transform;
    cal.tau = u(rng);
    const auto set = predict(run, cal);
    std::size_t below = 0;
    for (const auto& c : run.candidates) below += -c.score <= cal.tau;
    ASSERT_EQ(set.size(), below);
    for (std::size_t i = 0; i < below; ++i) EXPECT_EQ(set.members[i], run.candidates[i].doc);
  }
}

TEST(CalibratorJson, RoundTripsAtDoublePrecision) {
  testing::TempDir dir;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 50; ++t) {
    Calibrator cal;
    cal.method = static_cast<Method>(t % 4);
    cal.alpha = 0.01 + (t % 7) * 0.07;
    cal.transform = t % 2 ? TransformSpec::log_rank(std::ldexp(static_cast<double>(rng() % 1000), -10))
                          : TransformSpec::z_score();
    cal.tau = t % 5 == 0 ? kInf : u(rng);
    cal.k = static_cast<int>(rng() % 2000) + 1;
    cal.raps = {static_cast<int>(rng() % 9), u(rng) * u(rng)};
    cal.n_calibration = static_cast<int>(rng() % 5000);
    const auto path = dir.file("cal.json");
    save_calibrator(cal, path);
    const auto back = load_calibrator(path);
    EXPECT_EQ(back.method, cal.method);
    EXPECT_EQ(back.alpha, cal.alpha);
    EXPECT_EQ(back.transform, cal.transform);
    EXPECT_EQ(back.cutoff(), cal.cutoff());
    EXPECT_EQ(back.raps.k_reg, cal.raps.k_reg);
    EXPECT_EQ(back.raps.lambda_reg, cal.raps.lambda_reg);
    EXPECT_EQ(back.n_calibration, cal.n_calibration);
  }
  Calibrator inf;
  inf.tau = kInf;
  const auto j = to_json(inf);
  EXPECT_EQ(j.at("tau"), "inf");
  EXPECT_THROW(calibrator_from_json(nlohmann::json::parse(R"({"method":"vanilla"})")), Error);
}

TEST(MethodText, ParseAndPrint) {
  for (auto m : {Method::VanillaThreshold, Method::TopK, Method::APS, Method::RAPS}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("lac"), Error);
}

}  // namespace
}  // namespace confret
