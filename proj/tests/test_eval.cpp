#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace repsel;

namespace {

/// Hit rate computed from scratch: rank every database record by cosine in
/// long double and look for the query's label in the first k.
double oracle_hit_rate(const EmbeddingSet& db, const EmbeddingSet& test, std::size_t k) {
  std::size_t hits = 0;
  for (const auto& q : test.records()) {
    std::vector<std::pair<long double, std::size_t>> ranked;
    for (std::size_t p = 0; p < db.size(); ++p) ranked.push_back({oracle::cosine_ld(q.vector, db[p].vector), p});
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return db[a.second].id < db[b.second].id;
    });
    bool hit = false;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) hit = hit || db[ranked[r].second].label == q.label;
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

TrainTest noiseless_benchmark(std::uint64_t seed, double view_spread = 0.1) {
  const auto data = generate_synthetic({10, 3, 20, 16, view_spread, 1.0, 0.0, seed});
  return split_per_class(data.set, 0.2, seed);
}

}  // namespace

TEST(TopK, SelfMatchIsAHitAtEveryK) {
  Rng rng(1);
  const auto set = oracle::random_set(rng, 50, 6, 5);
  const auto report = evaluate_topk(build_index(set), set, {1, 5, 20});
  for (const auto& [name, v] : report.metrics) EXPECT_EQ(v, 1.0) << name;
  EXPECT_EQ(report.db_size, 50u);
}

TEST(TopK, OneEntryPerClassAtTheQueries) {
  const EmbeddingSet db(3, {"a", "b", "c"}, {{1, {1, 0, 0}, 0}, {2, {0, 1, 0}, 1}, {3, {0, 0, 1}, 2}});
  const EmbeddingSet test(3, {"a", "b", "c"},
                          {{10, {2, 0, 0}, 0}, {11, {0, 3, 0}, 1}, {12, {0, 0, 0.5f}, 2}, {13, {1, 0.1f, 0}, 0}});
  const auto report = evaluate_topk(build_index(db), test, {1});
  EXPECT_EQ(report.metric(1), 1.0);
  EXPECT_EQ(report.per_class_top1.at("a"), 1.0);
  EXPECT_EQ(report.per_class_top1.size(), 3u);
}

TEST(TopK, MatchesIndependentRanking) {
  Rng rng(2);
  const auto db = oracle::random_set(rng, 500, 8, 6);
  const auto test = oracle::random_set(rng, 100, 8, 6);
  const auto report = evaluate_topk(build_index(db), test, {20, 1, 5}, 3);
  for (std::size_t k : {1, 5, 20}) EXPECT_DOUBLE_EQ(report.metric(k), oracle_hit_rate(db, test, k)) << k;
}

TEST(TopK, MonotoneInK) {
  Rng rng(3);
  const auto db = oracle::random_set(rng, 300, 5, 8);
  const auto test = oracle::random_set(rng, 80, 5, 8);
  const auto report = evaluate_topk(build_index(db), test, {1, 2, 3, 5, 8, 13, 21});
  double previous = 0.0;
  for (std::size_t k : {1, 2, 3, 5, 8, 13, 21}) {
    EXPECT_GE(report.metric(k), previous);
    previous = report.metric(k);
  }
}

TEST(TopK, RejectsBadInputs) {
  Rng rng(4);
  const auto db = oracle::random_set(rng, 20, 4, 2);
  EXPECT_THROW(evaluate_topk(build_index(db), oracle::random_set(rng, 5, 3, 2), {1}), ValidationError);
  EXPECT_THROW(evaluate_topk(build_index(db), EmbeddingSet(4, oracle::vocab(2), {}), {1}), ValidationError);
  EXPECT_THROW(evaluate_topk(VectorIndex(4), db, {1}), ValidationError);
  EXPECT_THROW(evaluate_topk(build_index(db), db, {0, 1}), ValidationError);
  EXPECT_THROW(evaluate_topk(build_index(db), db, {1}).metric(5), ValidationError);
}

TEST(Timing, LargerIndexIsNotFaster) {
  Rng rng(5);
  const auto set = oracle::random_set(rng, 2000, 32, 4);
  const auto queries = oracle::random_set(rng, 50, 32, 4);
  const auto curve = timing_curve(set, {1000, 2000}, queries, 5);
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_EQ(curve[1].size, 2000u);
  EXPECT_GE(curve[1].mean_query_micros + 2 * curve[1].stddev, curve[0].mean_query_micros - 2 * curve[0].stddev);
  EXPECT_GT(curve[0].median, 0.0);
  EXPECT_THROW(timing_curve(set, {0}, queries, 1), ValidationError);
  EXPECT_THROW(timing_curve(set, {2001}, queries, 1), ValidationError);
  EXPECT_THROW(timing_curve(set, {10}, queries, 0), ValidationError);
}

TEST(Timing, FitLineOnExactData) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{3, 5, 7, 9, 11};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  const std::vector<double> flat{4, 4, 4, 4, 4};
  EXPECT_NEAR(fit_line(x, flat).slope, 0.0, 1e-12);
}

TEST(Sweep, FullFractionUniformEqualsFullIndex) {
  const auto tt = noiseless_benchmark(1, 0.5);
  SweepSpec spec;
  spec.fractions = {1.0};
  spec.seeds = {3};
  const auto result = run_sweep(spec, tt.train, tt.test);
  ASSERT_EQ(result.cells.size(), 1u);
  const auto full = evaluate_topk(build_index(tt.train), tt.test, {1, 5, 20});
  EXPECT_EQ(result.cells[0].metrics, full.metrics);
  EXPECT_EQ(result.cells[0].db_size, tt.train.size());
}

TEST(Sweep, UniformIsNonDecreasingInFraction) {
  std::vector<double> mean(5, 0.0);
  const std::vector<double> fractions{0.1, 0.3, 0.5, 0.7, 1.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto tt = noiseless_benchmark(seed);
    SweepSpec spec;
    spec.fractions = fractions;
    spec.seeds = {seed};
    const auto result = run_sweep(spec, tt.train, tt.test);
    for (std::size_t i = 0; i < fractions.size(); ++i) mean[i] += result.summary[i].metric(1) / 5.0;
  }
  for (std::size_t i = 1; i < mean.size(); ++i) EXPECT_GE(mean[i], mean[i - 1]) << fractions[i];
}

TEST(Sweep, DeterministicAndReproducibleFromConfig) {
  const auto tt = noiseless_benchmark(2, 0.4);
  SweepSpec spec;
  spec.methods = {"uniform", "kcenter", "cs-kmeans", "cs-density"};
  spec.fractions = {0.2, 0.5};
  spec.thresholds = {0.3, 0.6};
  spec.seeds = {1, 2};
  const auto a = run_sweep(spec, tt.train, tt.test);
  spec.jobs = 4;
  const auto b = run_sweep(spec, tt.train, tt.test);
  EXPECT_EQ(sweep_to_csv(a.cells, false), sweep_to_csv(b.cells, false));

  for (std::size_t i = 0; i < a.cells.size(); i += 5) {
    const auto& cell = a.cells[i];
    const auto again = run_cell(selection_spec_from_json(cell.config), tt.train, tt.test, spec.ks);
    EXPECT_EQ(again.metrics, cell.metrics) << cell.config.dump();
    EXPECT_EQ(again.config, cell.config);
  }
  EXPECT_EQ(a.cells[0].config.at("train_digest"), hex64(digest(tt.train)));
}

TEST(Sweep, GridExpansion) {
  SweepSpec spec;
  spec.methods = {"uniform", "cs-uniform", "kmeans", "herding"};
  spec.fractions = {0.1, 0.2, 0.3};
  spec.cscore_neighbors = {5, 10};
  spec.thresholds = {0.2, 0.5, 0.8};
  spec.components = {0, 8};
  spec.repetitions = 2;
  // uniform, herding: 3 * 2 seeds; cs-uniform: 3 * 2 * 3 * 2 * 2; kmeans: 3 * 2 * 2.
  EXPECT_EQ(expand_cells(spec).size(), 6u + 6u + 72u + 12u);
  spec.methods = {"nonsense"};
  EXPECT_THROW(expand_cells(spec), ValidationError);
  spec.methods = {"uniform"};
  spec.fractions = {0.0};
  EXPECT_THROW(expand_cells(spec), ValidationError);
}

TEST(Sweep, CsvColumns) {
  const auto tt = noiseless_benchmark(3);
  SweepSpec spec;
  spec.methods = {"cs-uniform"};
  spec.fractions = {0.5};
  spec.seeds = {9};
  const auto csv = sweep_to_csv(run_sweep(spec, tt.train, tt.test).cells);
  const auto nl = csv.find('\n');
  EXPECT_EQ(csv.substr(0, nl),
            "method,fraction,n_neighbors,threshold,reducer,components,seed,db_size,top1,top5,top20,mean_query_micros");
  const auto row = csv.substr(nl + 1);
  EXPECT_EQ(row.substr(0, row.find(",", row.find(",", row.find(",", row.find(",") + 1) + 1) + 1)),
            "cs-uniform,0.5,10,0.5");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 11);
}

TEST(Sweep, EmptyInputsAreRejected) {
  const auto tt = noiseless_benchmark(4);
  EXPECT_THROW(run_sweep(SweepSpec{}, EmbeddingSet(16, tt.train.vocabulary(), {}), tt.test), ValidationError);
}
