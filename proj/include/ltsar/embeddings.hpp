#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/error.hpp"

namespace ltsar {

using Label = std::uint32_t;

/// Labelled feature vectors, n x dim float32, with a class vocabulary of
/// n_classes. Immutable once constructed; every constructor path validates.
class EmbeddingSet {
 public:
  EmbeddingSet(std::size_t dim, std::size_t n_classes, std::vector<float> vectors,
               std::vector<Label> labels)
      : dim_(dim), n_classes_(n_classes), vectors_(std::move(vectors)), labels_(std::move(labels)) {
    if (dim_ == 0) throw ValidationError("embedding dim must be >= 1");
    if (labels_.empty()) throw ValidationError("embedding set must hold at least one sample");
    if (vectors_.size() != labels_.size() * dim_) {
      throw ValidationError("vector storage does not match n x dim");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] >= n_classes_) {
        throw ValidationError("label " + std::to_string(labels_[i]) + " at record " + std::to_string(i) +
                              " is not < n_classes " + std::to_string(n_classes_));
      }
    }
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
      if (!std::isfinite(vectors_[i])) {
        throw ValidationError("non-finite component in record " + std::to_string(i / dim_));
      }
    }
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t n_classes() const { return n_classes_; }

  std::span<const float> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  Label label(std::size_t i) const { return labels_[i]; }

  std::span<const float> vectors() const { return vectors_; }
  std::span<const Label> labels() const { return labels_; }

  /// Rows at the given indices, in the given order.
  EmbeddingSet select(std::span<const std::size_t> indices) const {
    std::vector<float> v;
    std::vector<Label> l;
    v.reserve(indices.size() * dim_);
    l.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= size()) throw ValidationError("row index out of range");
      const auto r = row(i);
      v.insert(v.end(), r.begin(), r.end());
      l.push_back(labels_[i]);
    }
    return EmbeddingSet(dim_, n_classes_, std::move(v), std::move(l));
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes_, 0);
    for (Label l : labels_) ++counts[l];
    return counts;
  }

  /// Indices of class c, ascending.
  std::vector<std::size_t> indices_of(Label c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == c) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  std::size_t dim_;
  std::size_t n_classes_;
  std::vector<float> vectors_;
  std::vector<Label> labels_;
};

struct ClassHistogram {
  std::vector<std::size_t> counts;
  double imbalance_ratio = 1.0;
};

/// Per-class counts and max/min ratio; the minimum ranges over non-empty classes.
inline ClassHistogram class_histogram(std::span<const std::size_t> counts) {
  ClassHistogram h{{counts.begin(), counts.end()}, 1.0};
  std::size_t hi = 0;
  std::size_t lo = 0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    hi = std::max(hi, c);
    lo = lo == 0 ? c : std::min(lo, c);
  }
  if (lo > 0) h.imbalance_ratio = static_cast<double>(hi) / static_cast<double>(lo);
  return h;
}

inline ClassHistogram class_histogram(const EmbeddingSet& set) {
  const auto counts = set.class_counts();
  return class_histogram(counts);
}

inline constexpr char kEmbeddingMagic[] = "LTEB1";

/// "LTEB1", u32 n, u32 dim, u32 n_classes, then n x {u32 label, dim x f32}.
/// Little-endian, unpadded.
inline std::vector<char> encode_embedding_set(const EmbeddingSet& set) {
  detail::ByteWriter w;
  w.magic(kEmbeddingMagic);
  w.u32(static_cast<std::uint32_t>(set.size()));
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.u32(static_cast<std::uint32_t>(set.n_classes()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.u32(set.label(i));
    w.f32s(set.row(i));
  }
  return w.bytes();
}

inline EmbeddingSet decode_embedding_set(std::span<const char> bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kEmbeddingMagic);
  const std::uint64_t n = r.u32();
  const std::uint64_t dim = r.u32();
  const std::uint64_t n_classes = r.u32();
  if (n == 0) throw ValidationError("embedding file declares zero records");
  if (dim == 0) throw ValidationError("embedding file declares dim 0");
  const std::uint64_t record = 4 + 4 * dim;
  const int fit = r.compare_payload(n, record);
  if (fit < 0) throw FormatError("embedding payload truncated");
  if (fit > 0) throw FormatError("trailing bytes after embedding payload");

  std::vector<float> vectors(n * dim);
  std::vector<Label> labels(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    labels[i] = r.u32();
    r.f32s(std::span<float>(vectors.data() + i * dim, dim));
  }
  return EmbeddingSet(dim, n_classes, std::move(vectors), std::move(labels));
}

inline void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_embedding_set(set));
}

inline EmbeddingSet read_embedding_set(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  return decode_embedding_set(bytes);
}

}  // namespace ltsar
