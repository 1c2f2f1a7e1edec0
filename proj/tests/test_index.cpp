#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace repsel;

namespace {

std::vector<std::uint64_t> ids_of(const RetrievalResult& r) {
  std::vector<std::uint64_t> out;
  for (const auto& n : r.neighbors) out.push_back(n.id);
  return out;
}

}  // namespace

TEST(Index, EmptySetGivesEmptyIndexAndResults) {
  const auto index = build_index(EmbeddingSet(3, {"a"}, {}));
  EXPECT_TRUE(index.empty());
  const std::vector<float> q{1, 0, 0};
  EXPECT_TRUE(index.query_topk(q, 5).empty());
  EXPECT_THROW(index.classify_top1(q), ValidationError);
}

TEST(Index, NormalizesOnInsert) {
  VectorIndex index(2);
  const std::vector<float> v{3, 4};
  index.add(1, 0, v);
  EXPECT_NEAR(index.vector(0)[0], 0.6f, 1e-7);
  EXPECT_NEAR(index.vector(0)[1], 0.8f, 1e-7);
}

TEST(Index, RejectsBadInserts) {
  VectorIndex index(2);
  const std::vector<float> zero{0, 0}, wrong{1, 2, 3}, ok{1, 1};
  EXPECT_THROW(index.add(1, 0, zero), ValidationError);
  try {
    index.add(42, 0, zero);
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
  EXPECT_THROW(index.add(1, 0, wrong), ValidationError);
  index.add(1, 0, ok);
  EXPECT_THROW(index.add(1, 0, ok), ValidationError);
  EXPECT_THROW(index.query_topk(zero, 1), ValidationError);
  EXPECT_THROW(index.query_topk(wrong, 1), ValidationError);
  EXPECT_THROW(index.query_topk(ok, 0), ValidationError);
}

TEST(Index, StoredNormsAreUnit) {
  Rng rng(1);
  const auto index = build_index(oracle::random_set(rng, 200, 17, 3));
  for (std::size_t p = 0; p < index.size(); ++p) {
    double s = 0;
    for (float x : index.vector(p)) s += double{x} * x;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
  }
}

TEST(Index, SelfRetrieval) {
  Rng rng(2);
  const auto set = oracle::random_set(rng, 100, 8, 4);
  const auto index = build_index(set);
  for (const auto& r : set.records()) {
    const auto res = index.query_topk(r.vector, 1);
    EXPECT_EQ(res[0].id, r.id);
    EXPECT_NEAR(res[0].similarity, 1.0, 1e-6);
  }
}

TEST(Index, SmallInstanceMatchesFullSort) {
  Rng rng(3);
  const auto set = oracle::random_set(rng, 10, 4, 3);
  const auto index = build_index(set);
  for (int t = 0; t < 20; ++t) {
    std::vector<float> q(4);
    for (auto& x : q) x = static_cast<float>(standard_normal(rng));
    const auto res = index.query_topk(q, 3);
    const auto expected = oracle::knn(index, index.prepare_query(q), 3);
    ASSERT_EQ(res.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(res[i].id, expected[i].first);
      EXPECT_EQ(res[i].similarity, expected[i].second);
    }
  }
}

TEST(Index, TiesBreakByAscendingId) {
  VectorIndex index(2);
  const std::vector<float> v{1, 1}, w{2, 2}, u{1, 0};
  index.add(30, 0, v);
  index.add(10, 1, w);
  index.add(20, 2, u);
  index.add(5, 2, std::vector<float>{0, 1});
  const auto res = index.query_topk(std::vector<float>{1, 1}, 4);
  EXPECT_EQ(ids_of(res), (std::vector<std::uint64_t>{10, 30, 5, 20}));
}

TEST(Index, KLargerThanSizeReturnsAllSorted) {
  Rng rng(4);
  const auto set = oracle::random_set(rng, 7, 5, 2);
  const auto index = build_index(set);
  const std::vector<float> q{1, 2, 3, 4, 5};
  const auto res = index.query_topk(q, 50);
  ASSERT_EQ(res.size(), 7u);
  for (std::size_t i = 1; i < res.size(); ++i)
    EXPECT_TRUE(ranks_before(res[i - 1].similarity, res[i - 1].id, res[i].similarity, res[i].id));
}

TEST(Index, SimilarityMatchesDefinition) {
  Rng rng(5);
  const auto set = oracle::random_set(rng, 50, 33, 2);
  const auto index = build_index(set);
  const auto q = set[0].vector;
  const auto res = index.query_topk(q, 50);
  for (const auto& n : res.neighbors) {
    const auto it = std::find_if(set.records().begin(), set.records().end(), [&](const auto& r) { return r.id == n.id; });
    EXPECT_NEAR(n.similarity, static_cast<double>(oracle::cosine_ld(q, it->vector)), 1e-6);
  }
}

TEST(Index, ScaledQueryKeepsRanking) {
  Rng rng(6);
  const auto set = oracle::random_set(rng, 300, 12, 5, true, 0.1);
  const auto index = build_index(set);
  for (int t = 0; t < 30; ++t) {
    std::vector<float> q(12), q2(12);
    for (std::size_t j = 0; j < 12; ++j) {
      q[j] = static_cast<float>(static_cast<int>(uniform_index(rng, 5)) - 2);
      q2[j] = q[j] * 4.0f;
    }
    if (std::all_of(q.begin(), q.end(), [](float x) { return x == 0; })) continue;
    EXPECT_EQ(ids_of(index.query_topk(q, 20)), ids_of(index.query_topk(q2, 20)));
  }
}

TEST(Classify, SingleEntryAndOrthogonalCases) {
  VectorIndex one(3);
  one.add(1, 4, std::vector<float>{0, 0, 1});
  EXPECT_EQ(one.classify_top1(std::vector<float>{1, 0, 0}), 4u);

  VectorIndex axes(3);
  axes.add(1, 0, std::vector<float>{1, 0, 0});
  axes.add(2, 1, std::vector<float>{0, 1, 0});
  axes.add(3, 2, std::vector<float>{0, 0, 1});
  EXPECT_EQ(axes.classify_top1(std::vector<float>{0, 5, 0}), 1u);
}

TEST(Classify, MatchesBruteForceArgmax) {
  Rng rng(7);
  const auto set = oracle::random_set(rng, 400, 16, 6);
  const auto index = build_index(set);
  for (int t = 0; t < 100; ++t) {
    std::vector<float> q(16);
    for (auto& x : q) x = static_cast<float>(standard_normal(rng));
    std::size_t best = 0;
    long double best_sim = -2;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto s = oracle::cosine_ld(q, set[i].vector);
      if (s > best_sim) {
        best_sim = s;
        best = i;
      }
    }
    EXPECT_EQ(classify_top1(index, q), set[best].label);
  }
}
