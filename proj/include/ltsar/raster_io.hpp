#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/error.hpp"
#include "ltsar/raster.hpp"

namespace ltsar {

enum class RasterFormat { Pgm, PngGray };

/// Picks the format from the file extension (.pgm / .png, case-insensitive).
inline RasterFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return RasterFormat::Pgm;
  if (ext == ".png") return RasterFormat::PngGray;
  throw FormatError("unsupported raster extension '" + ext + "' for " + path.string());
}

namespace detail {

inline Raster decode_pgm(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) -> std::uint64_t {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError(std::string("PGM header: expected ") + field);
    }
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError(std::string("PGM header: ") + field + " too large");
      ++pos;
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a PGM file");
  if (bytes[1] != '5') throw FormatError("only binary grayscale PGM (P5) is supported");
  pos = 2;
  const auto width = read_uint("width");
  const auto height = read_uint("height");
  const auto maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM header: zero dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError("PGM header: maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("PGM header: missing separator before pixel data");
  }
  ++pos;

  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n * bytes_per_sample) throw FormatError("PGM pixel data truncated");

  std::vector<double> data(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  const auto max_value = static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t v = bytes_per_sample == 1 ? p[i] : (std::uint32_t{p[2 * i]} << 8) | p[2 * i + 1];
    if (v > maxval) throw FormatError("PGM sample exceeds maxval");
    data[i] = static_cast<double>(v) / max_value;
  }
  return Raster(width, height, std::move(data));
}

struct PngDecodeState {
  const std::vector<char>* bytes = nullptr;
  std::size_t pos = 0;
  char message[256] = {};
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  bool gray = false;
};

inline void png_error_to_longjmp(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngDecodeState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngDecodeState*>(png_get_io_ptr(png));
  if (st->bytes->size() - st->pos < n) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, st->bytes->data() + st->pos, n);
  st->pos += n;
}

// Holds no objects with destructors: libpng reports errors by longjmp into
// this frame. All mutable state lives in the caller-owned PngDecodeState.
inline bool png_decode_into(PngDecodeState* st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st, png_error_to_longjmp,
                                           png_ignore_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, st, png_read_from_memory);
  png_read_info(png, info);
  int color_type = 0;
  png_get_IHDR(png, info, &st->width, &st->height, &st->bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  st->gray = color_type == PNG_COLOR_TYPE_GRAY;
  if (st->gray) {
    if (st->bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    st->bit_depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    st->pixels.resize(row_bytes * st->height);
    st->rows.resize(st->height);
    for (png_uint_32 y = 0; y < st->height; ++y) st->rows[y] = st->pixels.data() + y * row_bytes;
    png_read_image(png, st->rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline Raster decode_png_gray(const std::vector<char>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw FormatError("not a PNG file");
  }
  PngDecodeState st;
  st.bytes = &bytes;
  if (!png_decode_into(&st)) throw FormatError(std::string("corrupt PNG: ") + st.message);
  if (!st.gray) throw FormatError("PNG is not single-channel grayscale");

  const std::size_t n = std::size_t{st.width} * st.height;
  std::vector<double> data(n);
  if (st.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t v = (std::uint32_t{st.pixels[2 * i]} << 8) | st.pixels[2 * i + 1];
      data[i] = static_cast<double>(v) / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(st.pixels[i]) / 255.0;
  }
  return Raster(st.width, st.height, std::move(data));
}

inline std::uint32_t quantize(double v, std::uint32_t maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::lround(c * maxval));
}

}  // namespace detail

/// Loads an 8- or 16-bit grayscale image, scaling samples to [0, 1] by the
/// format's maximum value.
inline Raster load_raster(const std::filesystem::path& path, RasterFormat format) {
  const auto bytes = detail::read_file(path.string());
  switch (format) {
    case RasterFormat::Pgm: return detail::decode_pgm(bytes);
    case RasterFormat::PngGray: return detail::decode_png_gray(bytes);
  }
  throw FormatError("unknown raster format");
}

inline Raster load_raster(const std::filesystem::path& path) {
  return load_raster(path, format_from_path(path));
}

/// Writes values clamped to [0, 1] and rescaled to the integer range.
/// PGM supports 8 and 16 bits; PNG output is 8-bit.
inline void save_raster(const Raster& r, const std::filesystem::path& path, RasterFormat format,
                        int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw FormatError("bit depth must be 8 or 16");
  if (format == RasterFormat::Pgm) {
    const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
    std::string header = "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) +
                         "\n" + std::to_string(maxval) + "\n";
    std::vector<char> out(header.begin(), header.end());
    for (double v : r.data()) {
      const auto q = detail::quantize(v, maxval);
      if (bit_depth == 16) out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    }
    detail::write_file(path.string(), out);
    return;
  }
  std::vector<unsigned char> pixels(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    pixels[i] = static_cast<unsigned char>(detail::quantize(r.data()[i], 255));
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(r.width());
  image.height = static_cast<png_uint_32>(r.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("PNG write failed for '" + path.string() + "': " + image.message);
  }
}

inline void save_raster(const Raster& r, const std::filesystem::path& path) {
  save_raster(r, path, format_from_path(path));
}

inline constexpr char kCompositeMagic[] = "LTCR1";

/// Raw composite layout: "LTCR1", u32 width, u32 height, u32 channels (=3),
/// then channels x height x width float32, row-major per channel.
inline std::vector<char> encode_composite(const CompositeRaster& c) {
  detail::ByteWriter w;
  w.magic(kCompositeMagic);
  w.u32(static_cast<std::uint32_t>(c.width()));
  w.u32(static_cast<std::uint32_t>(c.height()));
  w.u32(CompositeRaster::kChannels);
  for (std::size_t ch = 0; ch < CompositeRaster::kChannels; ++ch) {
    for (double v : c.channel(ch).data()) w.f32(static_cast<float>(v));
  }
  return w.bytes();
}

inline CompositeRaster decode_composite(std::span<const char> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kCompositeMagic);
  const std::size_t width = r.u32();
  const std::size_t height = r.u32();
  const std::size_t channels = r.u32();
  if (channels != CompositeRaster::kChannels) throw FormatError("composite must have 3 channels");
  if (width == 0 || height == 0) throw FormatError("composite has zero dimension");
  if (r.compare_payload(width, channels * height * sizeof(float)) != 0) {
    throw FormatError("composite payload size mismatch");
  }
  std::vector<Raster> planes;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    std::vector<float> buf(width * height);
    r.f32s(buf);
    planes.emplace_back(width, height, std::vector<double>(buf.begin(), buf.end()));
  }
  return CompositeRaster(std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
}

inline void write_composite(const CompositeRaster& c, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_composite(c));
}

inline CompositeRaster read_composite(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  return decode_composite(bytes);
}

}  // namespace ltsar
