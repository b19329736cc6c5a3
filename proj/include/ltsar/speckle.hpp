#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "ltsar/error.hpp"
#include "ltsar/raster.hpp"

namespace ltsar {

namespace detail {

/// Reflect-101 border: -1 -> 1, n -> n - 2. Valid while the window half-width < n.
inline std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

struct WindowStats {
  double mean;
  double variance;
};

/// Two-pass population mean/variance of the window centred at (cx, cy).
inline WindowStats mirrored_window_stats(const Raster& r, std::size_t cx, std::size_t cy, int window,
                                         std::vector<double>& scratch) {
  const std::ptrdiff_t half = window / 2;
  scratch.clear();
  for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
    const auto y = mirror(static_cast<std::ptrdiff_t>(cy) + dy, r.height());
    for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
      scratch.push_back(r.at(mirror(static_cast<std::ptrdiff_t>(cx) + dx, r.width()), y));
    }
  }
  double sum = 0.0;
  for (double v : scratch) sum += v;
  const double mean = sum / static_cast<double>(scratch.size());
  double ss = 0.0;
  for (double v : scratch) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(scratch.size())};
}

inline void check_window_fits(const Raster& r, int window) {
  if (window < 1 || static_cast<std::size_t>(window) > std::min(r.width(), r.height())) {
    throw DimensionError("window " + std::to_string(window) + " does not fit a " +
                         std::to_string(r.width()) + "x" + std::to_string(r.height()) + " image");
  }
}

}  // namespace detail

/// Median of the population variances of every fully interior window (no
/// padding). Used as the noise floor when LeeConfig::noise_variance is unset.
inline double estimate_noise_variance(const Raster& r, int window) {
  detail::check_window_fits(r, window);
  const auto w = static_cast<std::size_t>(window);
  const std::ptrdiff_t half = window / 2;
  std::vector<double> variances;
  variances.reserve((r.width() - w + 1) * (r.height() - w + 1));
  std::vector<double> scratch;
  for (std::size_t y = static_cast<std::size_t>(half); y + half < r.height(); ++y) {
    for (std::size_t x = static_cast<std::size_t>(half); x + half < r.width(); ++x) {
      variances.push_back(detail::mirrored_window_stats(r, x, y, window, scratch).variance);
    }
  }
  std::sort(variances.begin(), variances.end());
  const std::size_t m = variances.size();
  return m % 2 == 1 ? variances[m / 2] : 0.5 * (variances[m / 2 - 1] + variances[m / 2]);
}

/// Additive-noise Lee filter: out = mean + W * (in - mean) with
/// W = max(0, var_w - var_n) / var_w (0 where var_w == 0). Borders are mirrored.
inline Raster lee_filter(const Raster& r, const LeeConfig& cfg) {
  cfg.validate();
  detail::check_window_fits(r, cfg.window);
  const double noise = cfg.noise_variance ? *cfg.noise_variance : estimate_noise_variance(r, cfg.window);

  Raster out(r.width(), r.height());
  std::vector<double> scratch;
  for (std::size_t y = 0; y < r.height(); ++y) {
    for (std::size_t x = 0; x < r.width(); ++x) {
      const auto [mean, var] = detail::mirrored_window_stats(r, x, y, cfg.window, scratch);
      const double in = r.at(x, y);
      const double gain = var > 0.0 ? std::max(0.0, var - noise) / var : 0.0;
      // gain == 1 must reproduce the input bit-for-bit.
      out.at(x, y) = gain >= 1.0 ? in : mean + gain * (in - mean);
    }
  }
  return out;
}

}  // namespace ltsar
