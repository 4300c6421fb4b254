#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "confret/core.hpp"
#include "confret/error.hpp"
#include "support.hpp"

namespace confret {
namespace {

using Pairs = std::vector<std::pair<DocId, double>>;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no confret::Error thrown";
  return ErrorCode::Internal;
}

TEST(SortAndRank, OrdersByScoreDescending) {
  const auto out = sort_and_rank({{DocId("b"), 0.3}, {DocId("a"), 0.9}, {DocId("c"), 0.6}});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], (ScoredCandidate{DocId("a"), 0.9, 1}));
  EXPECT_EQ(out[1], (ScoredCandidate{DocId("c"), 0.6, 2}));
  EXPECT_EQ(out[2], (ScoredCandidate{DocId("b"), 0.3, 3}));
}

TEST(SortAndRank, TiesBrokenByAscendingDocId) {
  const auto out = sort_and_rank({{DocId("b"), 0.5}, {DocId("a"), 0.5}});
  EXPECT_EQ(out[0], (ScoredCandidate{DocId("a"), 0.5, 1}));
  EXPECT_EQ(out[1], (ScoredCandidate{DocId("b"), 0.5, 2}));
}

TEST(SortAndRank, Errors) {
  EXPECT_EQ(code_of([] { sort_and_rank({}); }), ErrorCode::EmptyCandidateList);
  EXPECT_EQ(code_of([] { sort_and_rank({{DocId("a"), std::nan("")}}); }), ErrorCode::InvalidScore);
  EXPECT_EQ(code_of([] { sort_and_rank({{DocId("a"), std::numeric_limits<double>::infinity()}}); }),
            ErrorCode::InvalidScore);
  EXPECT_EQ(code_of([] { DocId(""); }), ErrorCode::InvalidDocId);
}

// 2000 random scores (with deliberate ties) against a reference stable sort;
// also a permutation, idempotent and deterministic.
TEST(SortAndRank, PropertyAgainstReferenceSort) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coarse(0, 500);
  for (int trial = 0; trial < 20; ++trial) {
    Pairs in;
    std::vector<std::pair<std::string, double>> plain;
    for (int i = 0; i < 2000; ++i) {
      const double s = coarse(rng) / 500.0;
      const auto id = "doc" + std::to_string(rng() % 100000) + "_" + std::to_string(i);
      in.emplace_back(DocId(id), s);
      plain.emplace_back(id, s);
    }
    const auto out = sort_and_rank(in);
    const auto ref = testing::full_sort_top_n(plain, plain.size());
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].doc.str(), ref[i].first);
      EXPECT_EQ(out[i].score, ref[i].second);
      EXPECT_EQ(out[i].rank, static_cast<int>(i) + 1);
    }

    Pairs projected;
    for (const auto& c : out) projected.emplace_back(c.doc, c.score);
    EXPECT_EQ(sort_and_rank(projected), out);
    EXPECT_EQ(sort_and_rank(in), out);
  }
}

TEST(QueryRun, MakeQueryRunTruncatesToBest) {
  Pairs in;
  for (int i = 0; i < 10; ++i) in.emplace_back(DocId("d" + std::to_string(i)), i * 0.1);
  const auto run = make_query_run("q", in, 3);
  ASSERT_EQ(run.size(), 3u);
  EXPECT_EQ(run.candidates[0].doc.str(), "d9");
  EXPECT_EQ(run.candidates[2].doc.str(), "d7");
  EXPECT_TRUE(is_well_formed(run));
  EXPECT_EQ(run.rank_of(DocId("d8")), 2);
  EXPECT_FALSE(run.rank_of(DocId("d0")).has_value());
}

TEST(RetrievalRunTest, SortedLookupAndDuplicates) {
  RetrievalRun run({testing::run_of("b", {0.5}), testing::run_of("a", {0.4, 0.3})}, 10);
  EXPECT_EQ(run.queries()[0].query_id, "a");
  ASSERT_NE(run.find("b"), nullptr);
  EXPECT_EQ(run.find("zz"), nullptr);

  const std::vector<std::string> only_b{"b"};
  EXPECT_EQ(run.subset(only_b).size(), 1u);
  const std::vector<std::string> unknown{"nope"};
  EXPECT_EQ(code_of([&] { run.subset(unknown); }), ErrorCode::InvalidArg);

  EXPECT_EQ(code_of([] { RetrievalRun({testing::run_of("a", {1.0}), testing::run_of("a", {2.0})}, 10); }),
            ErrorCode::DuplicateEntry);
  RetrievalRun truncated({testing::run_of("a", {0.9, 0.8, 0.7})}, 2);
  EXPECT_EQ(truncated.queries()[0].size(), 2u);
}

TEST(TransformSpecTest, LambdaRange) {
  EXPECT_NO_THROW(TransformSpec::log_rank(0.0));
  EXPECT_NO_THROW(TransformSpec::log_rank(1.0));
  EXPECT_EQ(code_of([] { TransformSpec::log_rank(1.5); }), ErrorCode::InvalidArg);
  EXPECT_EQ(code_of([] { TransformSpec::log_rank(-0.1); }), ErrorCode::InvalidArg);
  EXPECT_EQ(TransformSpec::max_score(), TransformSpec::max_score());
  EXPECT_FALSE(TransformSpec::log_rank(0.1) == TransformSpec::log_rank(0.2));
}

}  // namespace
}  // namespace confret
