#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "ltsar/ensemble.hpp"
#include "ltsar/synthgen.hpp"
#include "oracles.hpp"

using namespace ltsar;

namespace {

EnsembleModel random_model(std::mt19937_64& rng, const EmbeddingSet& set, std::size_t members, std::size_t k) {
  std::vector<NeighborIndex> idx;
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  for (std::size_t m = 0; m < members; ++m) {
    std::vector<std::size_t> subset;
    for (int i = 0; i < 60; ++i) subset.push_back(pick(rng));
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    idx.push_back(NeighborIndex::build(set, subset, Metric::Euclidean));
  }
  return EnsembleModel(std::move(idx), k);
}

}  // namespace

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
}

TEST(Ensemble, SingleMemberEqualsMember) {
  std::mt19937_64 rng(1);
  const auto set = oracle::random_set(rng, 200, 5, 4);
  const auto model = random_model(rng, set, 1, 3);
  for (int i = 0; i < 20; ++i) {
    const auto q = set.row(static_cast<std::size_t>(i) * 7);
    const auto p = ensemble_predict(model, q);
    EXPECT_EQ(p.proba, model.member(0).predict_proba(q, 3));
  }
}

TEST(Ensemble, TwoOneHotMembersTieToLowerClass) {
  const EmbeddingSet a(1, 5, {0.0f}, {1});
  const EmbeddingSet b(1, 5, {0.0f}, {3});
  std::vector<NeighborIndex> members;
  members.push_back(NeighborIndex::build(a, Metric::Euclidean));
  members.push_back(NeighborIndex::build(b, Metric::Euclidean));
  const EnsembleModel model(std::move(members), 1);
  const auto p = ensemble_predict(model, std::vector<float>{0.3f});
  EXPECT_EQ(p.proba, (std::vector<double>{0, 0.5, 0, 0.5, 0}));
  EXPECT_EQ(p.label, 1u);
}

TEST(Ensemble, SevenMembersMatchIndependentMean) {
  GeneratorConfig g;
  g.head_size = 400;
  g.imbalance_ratio = 20;
  g.dim = 8;
  g.seed = 4;
  const auto set = generate_longtail(g);
  std::mt19937_64 rng(2);
  const auto model = random_model(rng, set, 7, 3);
  const auto queries = generate_balanced(g, 5, 1);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto q = queries.row(i);
    std::vector<double> mean(g.n_classes, 0.0);
    for (std::size_t m = 0; m < 7; ++m) {
      const auto rows = model.member(m).to_embedding_set();
      const auto hits = oracle::knn(Metric::Euclidean, rows, oracle::all_rows(rows), q.data(), 3);
      for (const auto& h : hits) mean[rows.label(h.id)] += 1.0 / static_cast<double>(hits.size());
    }
    const auto p = ensemble_predict(model, q);
    double sum = 0.0;
    for (std::size_t c = 0; c < g.n_classes; ++c) {
      EXPECT_NEAR(p.proba[c], mean[c] / 7.0, 1e-12);
      sum += p.proba[c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_EQ(p.label, argmax(p.proba));
  }
}

TEST(Ensemble, MemberOrderDoesNotChangeLabel) {
  std::mt19937_64 rng(3);
  const auto set = oracle::random_set(rng, 200, 4, 3);
  std::mt19937_64 r1(9);
  auto model = random_model(r1, set, 4, 3);
  std::vector<NeighborIndex> reversed;
  for (std::size_t m = model.size(); m-- > 0;) reversed.push_back(model.member(m));
  const EnsembleModel rev(std::move(reversed), 3);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto a = ensemble_predict(model, set.row(i));
    const auto b = ensemble_predict(rev, set.row(i));
    EXPECT_EQ(a.label, b.label);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a.proba[c], b.proba[c], 1e-15);
  }
}

TEST(Ensemble, BatchMatchesSerialAndIsThreadInvariant) {
  std::mt19937_64 rng(4);
  const auto set = oracle::random_set(rng, 500, 6, 5);
  const auto model = random_model(rng, set, 7, 3);
  const auto queries = oracle::random_set(rng, 1000, 6, 5);
  const auto serial = ensemble_predict_batch(model, queries.vectors(), Threads{1});
  const auto parallel = ensemble_predict_batch(model, queries.vectors(), Threads{8});
  ASSERT_EQ(serial.size(), 1000u);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial[17], ensemble_predict(model, queries.row(17)));
  const auto one = ensemble_predict_batch(model, queries.row(3));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], serial[3]);

  // Permuting the batch permutes the results.
  std::vector<std::size_t> perm(queries.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto shuffled = ensemble_predict_batch(model, queries.select(perm).vectors(), Threads{3});
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(shuffled[i], serial[perm[i]]);
}

TEST(Ensemble, ValidationErrors) {
  const EmbeddingSet a(2, 3, {0, 0}, {0});
  const EmbeddingSet b(3, 3, {0, 0, 0}, {0});
  std::vector<NeighborIndex> mixed{NeighborIndex::build(a, Metric::Euclidean), NeighborIndex::build(b, Metric::Euclidean)};
  EXPECT_THROW(EnsembleModel(mixed, 3), ValidationError);
  EXPECT_THROW(EnsembleModel({}, 3), DegenerateError);
  const EnsembleModel model({NeighborIndex::build(a, Metric::Euclidean)}, 3);
  EXPECT_THROW(ensemble_predict(model, std::vector<float>{1, 2, 3}), DimError);
  EXPECT_THROW(ensemble_predict_batch(model, std::vector<float>{1, 2, 3}), DimError);
}

TEST(Manifest, RoundTripAndLoad) {
  std::mt19937_64 rng(5);
  const auto set = oracle::random_set(rng, 120, 3, 4);
  const auto model = random_model(rng, set, 3, 2);
  const auto dir = std::filesystem::temp_directory_path() / ("ltsar_manifest_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  ModelManifest m;
  m.k = 2;
  m.n_classes = 4;
  m.dim = 3;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto name = "m" + std::to_string(i) + ".ltix";
    model.member(i).save(dir / name);
    m.members.push_back(name);
  }
  const auto text = format_manifest(m);
  const auto parsed = parse_manifest(text);
  EXPECT_EQ(parsed.members, m.members);
  EXPECT_EQ(parsed.k, 2u);
  detail::write_text_file((dir / "model.ltem").string(), text);
  ModelManifest out;
  const auto loaded = load_model(dir / "model.ltem", &out);
  EXPECT_EQ(loaded.size(), 3u);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(ensemble_predict(loaded, set.row(i)), ensemble_predict(model, set.row(i)));
  }
  EXPECT_THROW(parse_manifest("LTEM2\n"), FormatError);
  EXPECT_THROW(parse_manifest("LTEM1\nk 3\n"), FormatError);
  EXPECT_THROW(parse_manifest("LTEM1\nk x\nn_classes 2\nmember a\n"), FormatError);
  EXPECT_THROW(load_model(dir / "absent.ltem"), IoError);
}

TEST(PredictionsCsv, RoundTripIsExact) {
  const std::vector<Prediction> preds{{{0.1, 0.2, 0.7}, 2}, {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0}};
  const auto text = format_predictions_csv(preds, 3);
  EXPECT_EQ(text.substr(0, text.find('\n')), "query_id,label,p_0,p_1,p_2");
  const auto table = parse_predictions_csv(text);
  EXPECT_EQ(table.n_classes, 3u);
  EXPECT_EQ(table.rows, preds);
  EXPECT_THROW(parse_predictions_csv("id,label\n"), FormatError);
  EXPECT_THROW(parse_predictions_csv("query_id,label,p_0\n0,0\n"), FormatError);
  EXPECT_THROW(parse_predictions_csv("query_id,label,p_0\n0,3,1\n"), ValidationError);
}
