#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "ltsar/error.hpp"
#include "ltsar/raster.hpp"

namespace ltsar {

inline constexpr std::size_t kDefaultTargetSize = 56;

namespace detail {

struct SampleCoord {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Corner-aligned: output 0 maps to input 0 and output n_out-1 to input n_in-1.
// A single output sample maps to the input centre.
inline SampleCoord corner_aligned(std::size_t i, std::size_t n_out, std::size_t n_in) {
  double src = 0.0;
  if (n_out == 1) {
    src = 0.5 * static_cast<double>(n_in - 1);
  } else {
    src = static_cast<double>(i * (n_in - 1)) / static_cast<double>(n_out - 1);
  }
  const auto lo = std::min(static_cast<std::size_t>(std::floor(src)), n_in - 1);
  const auto hi = std::min(lo + 1, n_in - 1);
  return {lo, hi, std::clamp(src - static_cast<double>(lo), 0.0, 1.0)};
}

}  // namespace detail

inline Raster resize_bilinear(const Raster& r, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw DimensionError("resize target must be at least 1x1");
  if (r.empty()) throw DimensionError("cannot resize an empty raster");
  if (out_w == r.width() && out_h == r.height()) return r;

  Raster out(out_w, out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto sy = detail::corner_aligned(y, out_h, r.height());
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto sx = detail::corner_aligned(x, out_w, r.width());
      const double top = r.at(sx.lo, sy.lo) * (1.0 - sx.frac) + r.at(sx.hi, sy.lo) * sx.frac;
      const double bottom = r.at(sx.lo, sy.hi) * (1.0 - sx.frac) + r.at(sx.hi, sy.hi) * sx.frac;
      out.at(x, y) = top * (1.0 - sy.frac) + bottom * sy.frac;
    }
  }
  // Rounding in the blend can overshoot the source range by an ulp.
  const double lo = r.min_value();
  const double hi = r.max_value();
  for (double& v : out.data()) v = std::clamp(v, lo, hi);
  return out;
}

/// Resizes each input to target x target and stacks them in channel order
/// (original SAR, denoised SAR, translated EO).
inline CompositeRaster compose_channels(const Raster& sar, const Raster& denoised,
                                        const Raster& eo_translated,
                                        std::size_t target = kDefaultTargetSize) {
  if (target == 0) throw DimensionError("composite target size must be >= 1");
  return CompositeRaster(resize_bilinear(sar, target, target),
                         resize_bilinear(denoised, target, target),
                         resize_bilinear(eo_translated, target, target));
}

}  // namespace ltsar
