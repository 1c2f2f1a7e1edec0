#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace repsel;

namespace {

EmbeddingSet homogeneous_11() {
  Rng rng(1);
  return oracle::random_set(rng, 11, 5, 1);
}

std::set<std::uint64_t> id_set(const EmbeddingSet& s) {
  std::set<std::uint64_t> out;
  for (const auto& r : s.records()) out.insert(r.id);
  return out;
}

SyntheticData noisy_synthetic(std::uint64_t seed) {
  return generate_synthetic({20, 5, 40, 64, 0.1, 1.0, 0.2, seed});
}

}  // namespace

TEST(Homogeneity, HomogeneousSetScoresOne) {
  const auto table = homogeneity_scores(homogeneous_11(), 10);
  ASSERT_EQ(table.size(), 11u);
  for (double s : table.scores()) EXPECT_EQ(s, 1.0);
}

TEST(Homogeneity, SurroundedRecordScoresZero) {
  // Record 0 (label a) sits at the centre of ten label-b points; two
  // label-a points lie far away on the opposite side.
  std::vector<EmbeddingRecord> recs{{0, {1, 0, 0}, 0}};
  for (std::uint64_t i = 1; i <= 10; ++i)
    recs.push_back({i, {1, 0.01f * static_cast<float>(i), -0.01f * static_cast<float>(i % 3)}, 1});
  recs.push_back({11, {-1, 0, 0}, 0});
  recs.push_back({12, {-1, 0.1f, 0}, 0});
  const EmbeddingSet set(3, {"a", "b"}, recs);
  const auto table = homogeneity_scores(set, 10);
  EXPECT_EQ(table.score_of(0), 0.0);
}

TEST(Homogeneity, MatchesBruteForceOracle) {
  Rng rng(2);
  const auto set = oracle::random_set(rng, 200, 8, 5);
  const auto table = homogeneity_scores(set, 7);
  EXPECT_EQ(table.scores(), oracle::homogeneity(set, 7));
}

TEST(Homogeneity, MatchesOracleWithDuplicatesAndTies) {
  Rng rng(3);
  const auto set = oracle::random_set(rng, 150, 3, 4, true, 0.3);
  for (std::uint32_t n : {1u, 4u, 15u}) EXPECT_EQ(homogeneity_scores(set, n).scores(), oracle::homogeneity(set, n));
}

TEST(Homogeneity, ScoresLieOnTheGrid) {
  Rng rng(4);
  const auto set = oracle::random_set(rng, 120, 6, 3);
  for (std::uint32_t n : {3u, 10u, 50u}) {
    const auto table = homogeneity_scores(set, n);
    for (double s : table.scores()) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
      EXPECT_DOUBLE_EQ(s * n, std::round(s * n));
    }
  }
}

TEST(Homogeneity, PermutationInvariant) {
  Rng rng(5);
  const auto set = oracle::random_set(rng, 150, 6, 4, true, 0.2);
  std::vector<std::size_t> perm(set.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle(perm, rng);
  const auto shuffled = set.select(perm);
  const auto a = homogeneity_scores(set, 9);
  const auto b = homogeneity_scores(shuffled, 9);
  for (const auto& r : set.records()) EXPECT_EQ(a.score_of(r.id), b.score_of(r.id));
}

TEST(Homogeneity, IndependentOfJobCount) {
  Rng rng(6);
  const auto set = oracle::random_set(rng, 300, 10, 4);
  EXPECT_EQ(homogeneity_scores(set, 10, 1).scores(), homogeneity_scores(set, 10, 4).scores());
}

TEST(Homogeneity, RejectsTooSmallSets) {
  EXPECT_THROW(homogeneity_scores(homogeneous_11(), 11), ValidationError);
  EXPECT_THROW(homogeneity_scores(homogeneous_11(), 0), ValidationError);
  EXPECT_NO_THROW(homogeneity_scores(homogeneous_11(), 10));
}

TEST(Homogeneity, NoiseScoresLowerThanClean) {
  const auto data = noisy_synthetic(8);
  const auto table = homogeneity_scores(data.set, 10);
  const std::set<std::uint64_t> noise(data.noise_ids.begin(), data.noise_ids.end());
  double noisy = 0, clean = 0;
  for (std::size_t i = 0; i < table.size(); ++i)
    (noise.contains(table.ids()[i]) ? noisy : clean) += table.scores()[i];
  noisy /= static_cast<double>(noise.size());
  clean /= static_cast<double>(table.size() - noise.size());
  EXPECT_LT(noisy, clean);
}

TEST(Filter, ZeroThresholdKeepsEverything) {
  Rng rng(9);
  const auto set = oracle::random_set(rng, 80, 4, 3);
  const auto table = homogeneity_scores(set, 5);
  EXPECT_EQ(filter_by_threshold(set, table, {5, 0.0, 0}), set);
}

TEST(Filter, FullThresholdOnHomogeneousSet) {
  const auto set = homogeneous_11();
  EXPECT_EQ(filter_by_threshold(set, homogeneity_scores(set, 10), {10, 1.0, 0}), set);
}

TEST(Filter, ScoreEqualToThresholdSurvives) {
  const EmbeddingSet set(2, {"a"}, {{1, {1, 0}, 0}, {2, {0, 1}, 0}, {3, {1, 1}, 0}});
  const ScoreTable table(4, {1, 2, 3}, {0.25, 0.5, 0.75});
  const auto kept = filter_by_threshold(set, table, {4, 0.5, 0});
  EXPECT_EQ(id_set(kept), (std::set<std::uint64_t>{2, 3}));
}

TEST(Filter, FloorKeepsBestScoringThenLowestId) {
  const EmbeddingSet set(2, {"a", "b"},
                         {{5, {1, 0}, 0}, {3, {0, 1}, 0}, {4, {1, 1}, 0}, {9, {1, 2}, 1}, {8, {2, 1}, 1}});
  const ScoreTable table(4, {5, 3, 4, 9, 8}, {0.25, 0.25, 0.0, 1.0, 0.0});
  EXPECT_EQ(id_set(filter_by_threshold(set, table, {4, 0.5, 0})), (std::set<std::uint64_t>{9}));
  EXPECT_EQ(id_set(filter_by_threshold(set, table, {4, 0.5, 1})), (std::set<std::uint64_t>{3, 9}));
  EXPECT_EQ(id_set(filter_by_threshold(set, table, {4, 0.5, 2})), (std::set<std::uint64_t>{3, 5, 9, 8}));
  // Input order preserved.
  const auto kept = filter_by_threshold(set, table, {4, 0.5, 2});
  EXPECT_EQ(kept[0].id, 5u);
  EXPECT_EQ(kept[1].id, 3u);
}

TEST(Filter, MonotoneInThreshold) {
  Rng rng(10);
  const auto set = oracle::random_set(rng, 200, 5, 4);
  const auto table = homogeneity_scores(set, 8);
  std::set<std::uint64_t> previous = id_set(set);
  for (int step = 0; step <= 8; ++step) {
    const auto kept = id_set(filter_by_threshold(set, table, {8, step / 8.0, 0}));
    EXPECT_TRUE(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end()));
    previous = kept;
  }
}

TEST(Filter, RejectsMismatchedTables) {
  const auto set = homogeneous_11();
  const auto table = homogeneity_scores(set, 10);
  EXPECT_THROW(filter_by_threshold(set, table, {5, 0.5, 0}), ValidationError);
  EXPECT_THROW(filter_by_threshold(set, table, {10, 1.5, 0}), ValidationError);
  const ScoreTable partial(10, {set[0].id}, {1.0});
  EXPECT_THROW(filter_by_threshold(set, partial, {10, 0.5, 0}), ValidationError);
  EXPECT_THROW(ScoreTable(3, {1, 2}, {0.5, 1.5}), ValidationError);
  EXPECT_THROW(ScoreTable(3, {1, 1}, {0.5, 0.5}), ValidationError);
}

TEST(Filter, RemovalsAreMostlyNoise) {
  const auto data = noisy_synthetic(11);
  const auto table = homogeneity_scores(data.set, 10);
  const auto kept = id_set(filter_by_threshold(data.set, table, {10, 0.5, 0}));
  const std::set<std::uint64_t> noise(data.noise_ids.begin(), data.noise_ids.end());
  std::size_t removed = 0, removed_noise = 0;
  for (const auto& r : data.set.records()) {
    if (kept.contains(r.id)) continue;
    ++removed;
    removed_noise += noise.contains(r.id) ? 1 : 0;
  }
  ASSERT_GT(removed, 0u);
  EXPECT_GE(static_cast<double>(removed_noise) / static_cast<double>(removed), 0.9);
}

TEST(ScoreCsv, RoundTripsOntoTheGrid) {
  TempDir tmp;
  Rng rng(12);
  const auto set = oracle::random_set(rng, 60, 4, 3);
  const auto table = homogeneity_scores(set, 7);
  save_scores_csv(table, tmp.file("s.csv"));
  const auto text = detail::read_file(tmp.file("s.csv"));
  EXPECT_EQ(text.substr(0, 9), "id,score\n");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), set.size() + 1);
  const auto back = load_scores_csv(tmp.file("s.csv"), 7);
  EXPECT_EQ(back.ids(), table.ids());
  EXPECT_EQ(back.scores(), table.scores());
  detail::write_file(tmp.file("bad.csv"), "id,score\n1,0.3\n");
  EXPECT_THROW(load_scores_csv(tmp.file("bad.csv"), 7), FormatError);
}
