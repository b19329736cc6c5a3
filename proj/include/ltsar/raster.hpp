#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltsar/error.hpp"

namespace ltsar {

/// Single-channel image, row-major, intensities normally in [0, 1].
class Raster {
 public:
  Raster() = default;

  Raster(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {}

  Raster(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_) {
      throw DimensionError("raster data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(width_) + "x" + std::to_string(height_));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw ValidationError("raster contains a non-finite value");
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  double& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double min_value() const { return *std::min_element(data_.begin(), data_.end()); }
  double max_value() const { return *std::max_element(data_.begin(), data_.end()); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Lee filter parameters. An empty noise_variance means "estimate it from the image".
struct LeeConfig {
  int window = 7;
  std::optional<double> noise_variance;

  void validate() const {
    if (window < 3 || window > 15 || window % 2 == 0) {
      throw ConfigError("Lee window must be odd and in [3, 15], got " + std::to_string(window));
    }
    if (noise_variance && !(*noise_variance >= 0.0 && std::isfinite(*noise_variance))) {
      throw ConfigError("Lee noise variance must be a finite value >= 0");
    }
  }
};

enum class Channel : std::size_t { Sar = 0, DenoisedSar = 1, TranslatedEo = 2 };

/// Three equally sized channels in the fixed order (SAR, denoised SAR, translated EO).
class CompositeRaster {
 public:
  static constexpr std::size_t kChannels = 3;

  CompositeRaster(Raster sar, Raster denoised, Raster eo)
      : channels_{std::move(sar), std::move(denoised), std::move(eo)} {
    for (const auto& c : channels_) {
      if (c.width() != channels_[0].width() || c.height() != channels_[0].height()) {
        throw DimensionError("composite channels must share dimensions");
      }
    }
  }

  std::size_t width() const { return channels_[0].width(); }
  std::size_t height() const { return channels_[0].height(); }

  const Raster& channel(Channel c) const { return channels_[static_cast<std::size_t>(c)]; }
  const Raster& channel(std::size_t i) const { return channels_.at(i); }

  friend bool operator==(const CompositeRaster&, const CompositeRaster&) = default;

 private:
  std::array<Raster, kChannels> channels_;
};

}  // namespace ltsar
