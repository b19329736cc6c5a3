#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/embeddings.hpp"
#include "ltsar/error.hpp"

namespace ltsar {

/// Gaussian-cluster long-tail generator settings. Defaults give ten classes
/// with a 1000x head/tail gap.
struct GeneratorConfig {
  std::size_t n_classes = 10;
  std::size_t head_size = 10000;
  double imbalance_ratio = 1000.0;
  std::size_t dim = 16;
  double cluster_spread = 1.0;
  double cluster_separation = 3.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) throw ConfigError("generator needs at least 2 classes");
    if (!(imbalance_ratio >= 1.0) || !std::isfinite(imbalance_ratio)) {
      throw ConfigError("imbalance ratio must be >= 1");
    }
    if (static_cast<double>(head_size) / imbalance_ratio < 1.0) {
      throw ConfigError("head_size / imbalance_ratio must be >= 1 so the tail class is non-empty");
    }
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (!(cluster_spread >= 0.0) || !(cluster_separation >= 0.0)) {
      throw ConfigError("spread and separation must be >= 0");
    }
  }
};

/// Geometric decay from head to tail: round(head * ratio^(-c / (C - 1))).
inline std::vector<std::size_t> longtail_counts(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> counts(cfg.n_classes);
  const double last = static_cast<double>(cfg.n_classes - 1);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const double v = static_cast<double>(cfg.head_size) * std::pow(cfg.imbalance_ratio, -static_cast<double>(c) / last);
    counts[c] = static_cast<std::size_t>(std::llround(v));
  }
  return counts;
}

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t extra = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                    static_cast<std::uint32_t>(extra), static_cast<std::uint32_t>(extra >> 32)};
  return std::mt19937_64(seq);
}

inline std::vector<double> class_centroids(const GeneratorConfig& cfg) {
  auto rng = stream(cfg.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centroids(cfg.n_classes * cfg.dim);
  for (double& v : centroids) v = cfg.cluster_separation * normal(rng);
  return centroids;
}

inline EmbeddingSet sample_clusters(const GeneratorConfig& cfg, const std::vector<std::size_t>& counts,
                                    std::mt19937_64& rng) {
  const auto centroids = class_centroids(cfg);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> vectors;
  std::vector<Label> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        vectors.push_back(static_cast<float>(centroids[c * cfg.dim + d] + cfg.cluster_spread * normal(rng)));
      }
      labels.push_back(static_cast<Label>(c));
    }
  }
  return EmbeddingSet(cfg.dim, cfg.n_classes, std::move(vectors), std::move(labels));
}

}  // namespace detail

/// Long-tail training set; rows are grouped by class in ascending order.
inline EmbeddingSet generate_longtail(const GeneratorConfig& cfg) {
  const auto counts = longtail_counts(cfg);
  auto rng = detail::stream(cfg.seed, 2);
  return detail::sample_clusters(cfg, counts, rng);
}

/// Balanced holdout drawn from the same class centroids as generate_longtail
/// with the same cfg.seed, using an independent sample stream.
inline EmbeddingSet generate_balanced(const GeneratorConfig& cfg, std::size_t per_class, std::uint64_t sample_seed) {
  cfg.validate();
  if (per_class == 0) throw ConfigError("per-class holdout size must be >= 1");
  auto rng = detail::stream(cfg.seed, 3, sample_seed);
  return detail::sample_clusters(cfg, std::vector<std::size_t>(cfg.n_classes, per_class), rng);
}

inline std::string format_counts_csv(std::span<const std::size_t> counts) {
  std::ostringstream out;
  out << "class,count\n";
  for (std::size_t c = 0; c < counts.size(); ++c) out << c << ',' << counts[c] << '\n';
  return out.str();
}

}  // namespace ltsar
