// Brute-force reference implementations used only by the tests. They share
// the public data types with the library but none of its algorithms: every
// neighbour search here is a full O(n) scan, every sampling rule is applied
// by direct enumeration.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ltsar/distance.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/sampling.hpp"

namespace oracle {

using ltsar::EmbeddingSet;
using ltsar::Label;
using ltsar::Metric;

// Same arithmetic as the library's ranking key (double accumulation in
// dimension order), written out independently.
inline double key(Metric m, const EmbeddingSet& s, std::size_t i, const float* q) {
  const auto row = s.row(i);
  if (m == Metric::Euclidean) {
    double acc = 0.0;
    for (std::size_t d = 0; d < s.dim(); ++d) {
      const double diff = static_cast<double>(q[d]) - static_cast<double>(row[d]);
      acc += diff * diff;
    }
    return acc;
  }
  double nq = 0.0;
  double nr = 0.0;
  double dot = 0.0;
  for (std::size_t d = 0; d < s.dim(); ++d) nq += static_cast<double>(q[d]) * static_cast<double>(q[d]);
  for (std::size_t d = 0; d < s.dim(); ++d) nr += static_cast<double>(row[d]) * static_cast<double>(row[d]);
  nq = std::sqrt(nq);
  nr = std::sqrt(nr);
  if (nq == 0.0 || nr == 0.0) return 1.0;
  for (std::size_t d = 0; d < s.dim(); ++d) dot += static_cast<double>(q[d]) * static_cast<double>(row[d]);
  return std::clamp(1.0 - dot / (nq * nr), 0.0, 2.0);
}

inline double key_between(Metric m, const EmbeddingSet& s, std::size_t i, std::size_t j) {
  return key(m, s, i, s.row(j).data());
}

inline double to_distance(Metric m, double k) { return m == Metric::Euclidean ? std::sqrt(k) : k; }

struct Hit {
  std::size_t id;
  double distance;
};

/// k nearest of `candidates` to q, sorted by (key, id), optionally skipping one id.
inline std::vector<Hit> knn(Metric m, const EmbeddingSet& s, const std::vector<std::size_t>& candidates,
                            const float* q, std::size_t k, std::optional<std::size_t> exclude = std::nullopt) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t id : candidates) {
    if (exclude && id == *exclude) continue;
    all.emplace_back(key(m, s, id, q), id);
  }
  std::sort(all.begin(), all.end());
  std::vector<Hit> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back({all[i].second, to_distance(m, all[i].first)});
  return out;
}

inline std::vector<std::size_t> all_rows(const EmbeddingSet& s) {
  std::vector<std::size_t> v(s.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

inline std::vector<ltsar::TomekLink> tomek_links(const EmbeddingSet& s, Metric m) {
  const std::size_t n = s.size();
  std::vector<std::size_t> nn(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = key_between(m, s, j, i);
      if (d < best) {  // strict: the first (lowest) index wins ties
        best = d;
        arg = j;
      }
    }
    nn[i] = arg;
  }
  std::vector<ltsar::TomekLink> links;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (nn[a] == b && nn[b] == a && s.label(a) != s.label(b)) links.push_back({a, b});
    }
  }
  return links;
}

/// Indices kept after dropping the larger-class member of every link.
inline std::vector<std::size_t> tomek_kept(const EmbeddingSet& s, const std::vector<ltsar::TomekLink>& links) {
  std::vector<std::size_t> count(s.n_classes(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) count[s.label(i)]++;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool removed = false;
    for (const auto& l : links) {
      if (l.a != i && l.b != i) continue;
      const std::size_t other = l.a == i ? l.b : l.a;
      if (count[s.label(i)] > count[s.label(other)]) removed = true;
    }
    if (!removed) kept.push_back(i);
  }
  return kept;
}

/// NearMiss-3 by direct enumeration; returns kept row indices ascending.
inline std::vector<std::size_t> nearmiss3(const EmbeddingSet& s, const std::vector<std::size_t>& targets, Metric metric,
                                          std::size_t m, std::size_t k) {
  std::vector<bool> keep(s.size(), false);
  for (Label c = 0; c < s.n_classes(); ++c) {
    std::vector<std::size_t> maj;
    std::vector<std::size_t> mino;
    for (std::size_t i = 0; i < s.size(); ++i) (s.label(i) == c ? maj : mino).push_back(i);
    if (maj.size() <= targets[c]) {
      for (std::size_t i : maj) keep[i] = true;
      continue;
    }
    std::vector<bool> listed(s.size(), false);
    for (std::size_t j : mino) {
      for (const auto& h : knn(metric, s, maj, s.row(j).data(), m)) listed[h.id] = true;
    }
    std::size_t listed_count = 0;
    for (std::size_t i : maj) listed_count += listed[i] ? 1 : 0;
    for (std::size_t i : maj) {
      if (listed_count >= targets[c]) break;
      if (!listed[i]) {
        listed[i] = true;
        ++listed_count;
      }
    }
    std::vector<std::pair<double, std::size_t>> scored;  // (-score, index)
    for (std::size_t i : maj) {
      if (!listed[i]) continue;
      double score = 0.0;
      if (!mino.empty()) {
        const auto hits = knn(metric, s, mino, s.row(i).data(), k);
        double sum = 0.0;
        for (const auto& h : hits) sum += h.distance;
        score = sum / static_cast<double>(hits.size());
      }
      scored.emplace_back(-score, i);
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t r = 0; r < targets[c]; ++r) keep[scored[r].second] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (keep[i]) out.push_back(i);
  }
  return out;
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly, ties 1/2.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& pos) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Mean and population variance of a sample.
inline std::pair<double, double> mean_variance(const std::vector<double>& v) {
  long double sum = 0.0L;
  for (double x : v) sum += x;
  const long double mean = sum / static_cast<long double>(v.size());
  long double ss = 0.0L;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {static_cast<double>(mean), static_cast<double>(ss / static_cast<long double>(v.size()))};
}

/// Random labelled point cloud; `grid` > 0 snaps coordinates to a lattice so
/// exact distance ties are common.
inline EmbeddingSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t classes,
                               int grid = 0) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_int_distribution<int> lattice(-grid, grid);
  std::uniform_int_distribution<Label> label(0, static_cast<Label>(classes - 1));
  std::vector<float> v(n * dim);
  for (auto& x : v) x = grid > 0 ? static_cast<float>(lattice(rng)) : normal(rng);
  std::vector<Label> l(n);
  for (auto& x : l) x = label(rng);
  return EmbeddingSet(dim, classes, std::move(v), std::move(l));
}

}  // namespace oracle
