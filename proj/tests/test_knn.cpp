#include <gtest/gtest.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <numeric>
#include <random>

#include "ltsar/knn.hpp"
#include "ltsar/synthgen.hpp"
#include "oracles.hpp"

using namespace ltsar;

namespace {

std::vector<float> random_query(std::mt19937_64& rng, std::size_t dim, int grid = 0) {
  std::normal_distribution<float> normal(0.0f, 1.2f);
  std::uniform_int_distribution<int> lattice(-grid, grid);
  std::vector<float> q(dim);
  for (auto& v : q) v = grid > 0 ? static_cast<float>(lattice(rng)) : normal(rng);
  return q;
}

void expect_matches_oracle(const NeighborIndex& index, const EmbeddingSet& set, const std::vector<std::size_t>& subset,
                           const std::vector<float>& q, std::size_t k) {
  const auto got = index.query(q, k);
  const auto want = oracle::knn(index.metric(), set, subset, q.data(), k);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got.ids[i], want[i].id);
    EXPECT_NEAR(got.distances[i], want[i].distance, 1e-9);
    EXPECT_EQ(got.labels[i], set.label(want[i].id));
  }
}

}  // namespace

TEST(NeighborIndex, SinglePointAnswersEverything) {
  const EmbeddingSet set(3, 2, {1, 2, 3, 4, 5, 6}, {0, 1});
  const std::vector<std::size_t> subset{1};
  const auto index = NeighborIndex::build(set, subset, Metric::Euclidean);
  const auto nb = index.query(std::vector<float>{0, 0, 0}, 3);
  ASSERT_EQ(nb.size(), 1u);
  EXPECT_EQ(nb.ids[0], 1u);
  EXPECT_EQ(nb.labels[0], 1u);
}

TEST(NeighborIndex, EmptySubsetRejected) {
  const EmbeddingSet set(1, 1, {0}, {0});
  EXPECT_THROW(NeighborIndex::build(set, std::vector<std::size_t>{}, Metric::Euclidean), DegenerateError);
}

TEST(NeighborIndex, OneNearestMatchesBruteForce) {
  std::mt19937_64 rng(1);
  const auto set = oracle::random_set(rng, 1000, 16, 5);
  const auto all = oracle::all_rows(set);
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  ASSERT_TRUE(index.uses_tree());
  for (int i = 0; i < 200; ++i) expect_matches_oracle(index, set, all, random_query(rng, 16), 1);
}

TEST(NeighborIndex, StoredPointComesFirst) {
  std::mt19937_64 rng(2);
  const auto set = oracle::random_set(rng, 100, 4, 3);
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  const auto nb = index.query(set.row(37), 2);
  EXPECT_EQ(nb.ids[0], 37u);
  EXPECT_EQ(nb.distances[0], 0.0);
}

TEST(NeighborIndex, KCappedAtSubsetSize) {
  std::mt19937_64 rng(3);
  const auto set = oracle::random_set(rng, 20, 3, 2);
  const std::vector<std::size_t> subset{3, 9, 1, 15};
  const auto index = NeighborIndex::build(set, subset, Metric::Euclidean);
  EXPECT_EQ(index.query(random_query(rng, 3), 10).size(), 4u);
}

TEST(NeighborIndex, SubsetQueriesMatchBruteForceBothMetrics) {
  std::mt19937_64 rng(4);
  const auto set = oracle::random_set(rng, 400, 8, 4);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < set.size(); i += 2) subset.push_back(i);
  for (Metric m : {Metric::Euclidean, Metric::Cosine}) {
    const auto index = NeighborIndex::build(set, subset, m, {4, 32});
    for (int i = 0; i < 50; ++i) expect_matches_oracle(index, set, subset, random_query(rng, 8), 3);
  }
}

TEST(NeighborIndex, LatticeTiesBreakByIndex) {
  std::mt19937_64 rng(5);
  const auto set = oracle::random_set(rng, 300, 3, 3, 2);  // many duplicate points
  const auto all = oracle::all_rows(set);
  for (Metric m : {Metric::Euclidean, Metric::Cosine}) {
    const auto index = NeighborIndex::build(set, m, {2, 32});
    for (int i = 0; i < 100; ++i) expect_matches_oracle(index, set, all, random_query(rng, 3, 2), 5);
  }
}

TEST(NeighborIndex, HighDimensionFallsBackToScan) {
  std::mt19937_64 rng(6);
  const auto set = oracle::random_set(rng, 150, 40, 3);
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  EXPECT_FALSE(index.uses_tree());
  const auto all = oracle::all_rows(set);
  for (int i = 0; i < 20; ++i) expect_matches_oracle(index, set, all, random_query(rng, 40), 3);
}

TEST(NeighborIndex, ExcludeSkipsSelf) {
  const EmbeddingSet set(1, 2, {0.0f, 0.0f, 3.0f}, {0, 1, 1});
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  const auto nb = index.query(set.row(0), 1, 0);
  EXPECT_EQ(nb.ids[0], 1u);  // coincident twin, not itself
}

TEST(NeighborIndex, DimensionMismatch) {
  const EmbeddingSet set(2, 1, {0, 0}, {0});
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  EXPECT_THROW(index.query(std::vector<float>{1, 2, 3}, 1), DimError);
  EXPECT_THROW(index.predict_proba(std::vector<float>{1}, 1), DimError);
}

TEST(PredictProba, CountsNeighbourLabels) {
  const EmbeddingSet set(1, 10, {0.1f, 0.2f, 0.3f, 5.0f}, {2, 2, 5, 1});
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  const auto p = index.predict_proba(std::vector<float>{0.0f}, 3);
  ASSERT_EQ(p.size(), 10u);
  EXPECT_DOUBLE_EQ(p[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(p[5], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(std::accumulate(p.begin(), p.end(), 0.0), 1.0);
  const auto one = index.predict_proba(std::vector<float>{4.0f}, 1);
  EXPECT_EQ(one[1], 1.0);
  EXPECT_EQ(std::accumulate(one.begin(), one.end(), 0.0), 1.0);
}

TEST(PredictProba, MatchesOracleCounting) {
  std::mt19937_64 rng(7);
  const auto set = oracle::random_set(rng, 300, 6, 4);
  const auto all = oracle::all_rows(set);
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  for (int i = 0; i < 100; ++i) {
    const auto q = random_query(rng, 6);
    const auto p = index.predict_proba(q, 3);
    std::vector<double> want(4, 0.0);
    for (const auto& h : oracle::knn(Metric::Euclidean, set, all, q.data(), 3)) want[set.label(h.id)] += 1.0 / 3.0;
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(p[c], want[c], 1e-12);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(NeighborIndex, SaveLoadPreservesAnswers) {
  std::mt19937_64 rng(8);
  const auto set = oracle::random_set(rng, 250, 5, 3, 3);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < set.size(); i += 3) subset.push_back(i);
  const auto index = NeighborIndex::build(set, subset, Metric::Cosine);
  const auto path = std::filesystem::temp_directory_path() / ("ltsar_knn_" + std::to_string(::getpid()) + ".ltix");
  index.save(path);
  const auto loaded = NeighborIndex::load(path, set.n_classes());
  EXPECT_EQ(loaded.metric(), Metric::Cosine);
  EXPECT_EQ(loaded.size(), index.size());
  for (int i = 0; i < 100; ++i) {
    const auto q = random_query(rng, 5, 3);
    const auto a = index.query(q, 4);
    const auto b = loaded.query(q, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_EQ(subset[b.ids[j]], a.ids[j]);  // loaded ids are row positions
      EXPECT_EQ(a.distances[j], b.distances[j]);
      EXPECT_EQ(a.labels[j], b.labels[j]);
    }
  }
  EXPECT_THROW(NeighborIndex::load(path, 0), ValidationError);
}

TEST(NeighborIndex, ThroughputOnClusteredData) {
  GeneratorConfig cfg;
  cfg.n_classes = 10;
  cfg.head_size = 5000;
  cfg.imbalance_ratio = 1.0;  // 10 x 5000 = 50K points
  cfg.dim = 16;
  cfg.seed = 3;
  const auto set = generate_longtail(cfg);
  ASSERT_EQ(set.size(), 50000u);
  const auto index = NeighborIndex::build(set, Metric::Euclidean);
  const auto queries = generate_balanced(cfg, 100, 99);
  for (std::size_t i = 0; i < 50; ++i) (void)index.query(queries.row(i), 3);

  const auto start = std::chrono::steady_clock::now();
  std::size_t sink = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) sink += index.query(queries.row(i), 3).ids[0];
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double qps = static_cast<double>(queries.size()) / secs;
  RecordProperty("queries_per_second", std::to_string(qps));
  std::printf("kd-tree throughput: %.0f queries/s (checksum %zu)\n", qps, sink);
  EXPECT_GE(qps, 1e4);
}
