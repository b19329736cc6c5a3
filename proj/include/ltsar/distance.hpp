#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ltsar/error.hpp"

namespace ltsar {

enum class Metric : std::uint8_t { Euclidean = 0, Cosine = 1 };

inline std::string_view to_string(Metric m) { return m == Metric::Euclidean ? "euclidean" : "cosine"; }

inline Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "cosine") return Metric::Cosine;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected euclidean|cosine)");
}

inline double squared_euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

inline double l2_norm(std::span<const float> a) {
  double s = 0.0;
  for (float v : a) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

/// 1 - cos(a, b), clamped to [0, 2]. A zero vector is at distance 1 from everything.
inline double cosine_distance(std::span<const float> a, double norm_a, std::span<const float> b,
                              double norm_b) {
  if (norm_a == 0.0 || norm_b == 0.0) return 1.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return std::clamp(1.0 - dot / (norm_a * norm_b), 0.0, 2.0);
}

/// Ranking key: squared distance for Euclidean, the distance itself for cosine.
/// Keys order exactly like the true distances.
inline double metric_key(Metric m, std::span<const float> a, std::span<const float> b) {
  if (m == Metric::Euclidean) return squared_euclidean(a, b);
  return cosine_distance(a, l2_norm(a), b, l2_norm(b));
}

inline double key_to_distance(Metric m, double key) { return m == Metric::Euclidean ? std::sqrt(key) : key; }

inline double metric_distance(Metric m, std::span<const float> a, std::span<const float> b) {
  return key_to_distance(m, metric_key(m, a, b));
}

}  // namespace ltsar
