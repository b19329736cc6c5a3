#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/distance.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/error.hpp"

namespace ltsar {

struct IndexOptions {
  std::size_t leaf_size = 32;
  /// Above this dimensionality the index scans linearly instead of using the tree.
  std::size_t brute_force_above_dim = 32;
};

/// The k nearest stored points, ascending by (distance, sample id).
struct Neighborhood {
  std::vector<std::size_t> ids;
  std::vector<double> distances;
  std::vector<Label> labels;

  std::size_t size() const { return ids.size(); }
};

/// Exact k-nearest-neighbour index over a subset of an EmbeddingSet.
///
/// A kd-tree with split-plane pruning accelerates queries; the tree is only
/// an accelerator, results equal a linear scan bit-for-bit. Candidates are
/// compared on the same key (squared Euclidean or cosine distance, in
/// double) a linear scan would compute, with ties resolved by ascending
/// sample id. Pruning bounds are conservative, so no candidate that could
/// enter the result is ever skipped.
///
/// Sample ids are the row indices of the source set. Rows are stored in
/// ascending id order before the tree permutes them, which keeps the
/// on-disk order (and with it the tie-break) stable across save/load.
class NeighborIndex {
 public:
  static NeighborIndex build(const EmbeddingSet& set, std::span<const std::size_t> subset, Metric metric,
                             IndexOptions opts = {}) {
    if (subset.empty()) throw DegenerateError("cannot build a neighbour index over an empty subset");
    std::vector<std::size_t> ids(subset.begin(), subset.end());
    std::sort(ids.begin(), ids.end());
    for (std::size_t id : ids) {
      if (id >= set.size()) throw ValidationError("subset index " + std::to_string(id) + " out of range");
    }
    std::vector<float> points;
    std::vector<Label> labels;
    points.reserve(ids.size() * set.dim());
    for (std::size_t id : ids) {
      const auto r = set.row(id);
      points.insert(points.end(), r.begin(), r.end());
      labels.push_back(set.label(id));
    }
    return NeighborIndex(set.dim(), set.n_classes(), metric, std::move(points), std::move(labels),
                         std::move(ids), opts);
  }

  static NeighborIndex build(const EmbeddingSet& set, Metric metric, IndexOptions opts = {}) {
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return build(set, all, metric, opts);
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t n_classes() const { return n_classes_; }
  Metric metric() const { return metric_; }
  bool uses_tree() const { return use_tree_; }

  /// Exact k nearest neighbours of q. `exclude` drops one sample id from the
  /// candidates (used for leave-self-out queries over the indexed set).
  Neighborhood query(std::span<const float> q, std::size_t k,
                     std::optional<std::size_t> exclude = std::nullopt) const {
    if (q.size() != dim_) {
      throw DimError("query has dim " + std::to_string(q.size()) + ", index has dim " + std::to_string(dim_));
    }
    if (k == 0) throw ConfigError("k must be >= 1");
    Search s{q, std::min(k, size()), exclude.value_or(kNoExclude), {}, 0.0, {}};
    if (metric_ == Metric::Cosine) s.query_norm = l2_norm(q);
    s.best.reserve(s.k + 1);
    if (use_tree_) {
      s.qd.assign(q.begin(), q.end());
      if (metric_ == Metric::Cosine && s.query_norm > 0.0) {
        for (double& v : s.qd) v /= s.query_norm;
      }
      if (metric_ == Metric::Cosine && s.query_norm == 0.0) std::fill(s.qd.begin(), s.qd.end(), 0.0);
      std::vector<double> offsets(dim_, 0.0);
      search_node(0, 0.0, offsets, s);
    } else {
      scan(0, size(), s);
    }
    Neighborhood out;
    for (const auto& c : s.best) {
      out.ids.push_back(ids_[c.pos]);
      out.distances.push_back(key_to_distance(metric_, c.key));
      out.labels.push_back(labels_[c.pos]);
    }
    return out;
  }

  /// Unweighted vote: p[c] = (neighbours with label c) / (neighbours returned).
  std::vector<double> predict_proba(std::span<const float> q, std::size_t k) const {
    const auto nb = query(q, k);
    std::vector<double> p(n_classes_, 0.0);
    for (Label l : nb.labels) p[l] += 1.0;
    const double denom = static_cast<double>(nb.size());
    for (double& v : p) v /= denom;
    return p;
  }

  /// Stored rows in ascending sample-id order.
  EmbeddingSet to_embedding_set() const {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
    std::vector<float> v;
    std::vector<Label> l;
    for (std::size_t p : order) {
      v.insert(v.end(), points_.begin() + p * dim_, points_.begin() + (p + 1) * dim_);
      l.push_back(labels_[p]);
    }
    return EmbeddingSet(dim_, n_classes_, std::move(v), std::move(l));
  }

  /// "LTIX1", u8 metric, u32 n, u32 dim, n x dim f32 vectors, n x u32 labels.
  /// The tree is rebuilt on load. Loaded sample ids are the row positions.
  void save(const std::filesystem::path& path) const {
    const auto rows = to_embedding_set();
    detail::ByteWriter w;
    w.magic(kMagic);
    w.u8(static_cast<std::uint8_t>(metric_));
    w.u32(static_cast<std::uint32_t>(rows.size()));
    w.u32(static_cast<std::uint32_t>(dim_));
    w.f32s(rows.vectors());
    for (Label l : rows.labels()) w.u32(l);
    detail::write_file(path.string(), w.bytes());
  }

  static NeighborIndex load(const std::filesystem::path& path, std::size_t n_classes, IndexOptions opts = {}) {
    const auto bytes = detail::read_file(path.string());
    detail::ByteReader r(bytes);
    r.expect_magic(kMagic);
    const auto metric_byte = r.u8();
    if (metric_byte > 1) throw FormatError("unknown metric byte in index file");
    const std::uint64_t n = r.u32();
    const std::uint64_t dim = r.u32();
    if (n == 0 || dim == 0) throw ValidationError("index file declares an empty index");
    if (r.compare_payload(n, 4 * dim + 4) != 0) throw FormatError("index payload size mismatch");
    std::vector<float> vectors(n * dim);
    r.f32s(vectors);
    std::vector<Label> labels(n);
    for (auto& l : labels) l = r.u32();
    const EmbeddingSet rows(dim, n_classes, std::move(vectors), std::move(labels));
    return build(rows, static_cast<Metric>(metric_byte), opts);
  }

 private:
  static constexpr char kMagic[] = "LTIX1";
  static constexpr std::size_t kNoExclude = std::numeric_limits<std::size_t>::max();
  // Cosine pruning compares a geometric bound against a separately rounded
  // key; this slack absorbs the rounding gap.
  static constexpr double kCosineSlack = 1e-9;

  struct Node {
    std::size_t begin;
    std::size_t end;
    std::int64_t left = -1;
    std::int64_t right = -1;
    std::size_t split_dim = 0;
    double split_value = 0.0;
  };

  struct Candidate {
    double key;
    std::size_t id;
    std::size_t pos;
  };

  struct Search {
    std::span<const float> q;
    std::size_t k;
    std::size_t exclude;
    std::vector<double> qd;
    double query_norm;
    std::vector<Candidate> best;

    bool full() const { return best.size() == k; }
  };

  NeighborIndex(std::size_t dim, std::size_t n_classes, Metric metric, std::vector<float> points,
                std::vector<Label> labels, std::vector<std::size_t> ids, IndexOptions opts)
      : dim_(dim),
        n_classes_(n_classes),
        metric_(metric),
        use_tree_(dim <= opts.brute_force_above_dim),
        points_(std::move(points)),
        labels_(std::move(labels)),
        ids_(std::move(ids)),
        screen_margin_(4.0 * static_cast<double>(dim + 2) * 0x1p-24) {
    norms_.resize(size());
    for (std::size_t i = 0; i < size(); ++i) norms_[i] = l2_norm(row(i));
    if (use_tree_) build_tree(std::max<std::size_t>(1, opts.leaf_size));
  }

  std::span<const float> row(std::size_t pos) const { return {points_.data() + pos * dim_, dim_}; }

  // Coordinates the tree partitions: raw for Euclidean, unit-normalised for cosine.
  double coord(std::size_t pos, std::size_t d) const {
    const double v = points_[pos * dim_ + d];
    if (metric_ == Metric::Euclidean) return v;
    return norms_[pos] > 0.0 ? v / norms_[pos] : 0.0;
  }

  void build_tree(std::size_t leaf_size) {
    std::vector<std::size_t> perm(size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    nodes_.clear();
    build_node(perm, 0, size(), leaf_size);

    // Apply the permutation so every leaf is a contiguous block.
    std::vector<float> points(points_.size());
    std::vector<Label> labels(size());
    std::vector<std::size_t> ids(size());
    std::vector<double> norms(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const std::size_t p = perm[i];
      std::copy_n(points_.begin() + p * dim_, dim_, points.begin() + i * dim_);
      labels[i] = labels_[p];
      ids[i] = ids_[p];
      norms[i] = norms_[p];
    }
    points_ = std::move(points);
    labels_ = std::move(labels);
    ids_ = std::move(ids);
    norms_ = std::move(norms);
  }

  std::int64_t build_node(std::vector<std::size_t>& perm, std::size_t begin, std::size_t end,
                          std::size_t leaf_size) {
    const auto node_id = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size) return node_id;

    std::vector<double> lo(dim_, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim_, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t d = 0; d < dim_; ++d) {
        const double v = coord(perm[i], d);
        lo[d] = std::min(lo[d], v);
        hi[d] = std::max(hi[d], v);
      }
    }
    std::size_t split_dim = 0;
    double spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      if (hi[d] - lo[d] > spread) {
        spread = hi[d] - lo[d];
        split_dim = d;
      }
    }
    if (spread <= 0.0) return node_id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                     perm.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       const double ca = coord(a, split_dim);
                       const double cb = coord(b, split_dim);
                       return ca < cb || (ca == cb && a < b);
                     });
    // Left holds coordinates <= split_value, right holds coordinates >= split_value.
    const double split_value = coord(perm[mid], split_dim);
    const auto left = build_node(perm, begin, mid, leaf_size);
    const auto right = build_node(perm, mid, end, leaf_size);
    Node& node = nodes_[static_cast<std::size_t>(node_id)];
    node.left = left;
    node.right = right;
    node.split_dim = split_dim;
    node.split_value = split_value;
    return node_id;
  }

  // `offsets` holds the query's per-dimension distance to the current cell
  // along split planes crossed so far; `gap` is their sum of squares, a lower
  // bound of the squared distance (in tree coordinates) to any point in it.
  bool prunable(double gap, const Search& s) const {
    if (!s.full()) return false;
    const double worst = s.best.back().key;
    // The incremental gap carries rounding error; the relative slack keeps the bound conservative.
    const double bound = gap * (1.0 - 1e-12);
    return metric_ == Metric::Euclidean ? bound > worst : 0.5 * bound > worst + kCosineSlack;
  }

  void search_node(std::int64_t node_id, double gap, std::vector<double>& offsets, Search& s) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
      scan(node.begin, node.end, s);
      return;
    }
    const double delta = s.qd[node.split_dim] - node.split_value;
    const std::int64_t near = delta < 0.0 ? node.left : node.right;
    const std::int64_t far = delta < 0.0 ? node.right : node.left;
    search_node(near, gap, offsets, s);
    const double old = offsets[node.split_dim];
    const double far_gap = gap - old * old + delta * delta;
    if (prunable(far_gap, s)) return;
    offsets[node.split_dim] = delta;
    search_node(far, far_gap, offsets, s);
    offsets[node.split_dim] = old;
  }

  void scan(std::size_t begin, std::size_t end, Search& s) const {
    for (std::size_t pos = begin; pos < end; ++pos) {
      const std::size_t id = ids_[pos];
      if (id == s.exclude) continue;
      double key;
      if (metric_ == Metric::Euclidean) {
        // Partial sums only grow, so abandoning once past the worst key is exact.
        const double limit = s.full() ? s.best.back().key : std::numeric_limits<double>::infinity();
        const float* p = points_.data() + pos * dim_;
        if (float_key_exceeds(s.q.data(), p, limit)) continue;
        key = euclidean_key_bounded(s.q.data(), p, limit);
        if (key > limit) continue;
      } else {
        key = cosine_distance(s.q, s.query_norm, row(pos), norms_[pos]);
      }
      offer({key, id, pos}, s);
    }
  }

  // Single-precision screen. Its relative error stays below (dim + 2) * 2^-24;
  // the margin is four times that, so a rejected point cannot reach the limit.
  bool float_key_exceeds(const float* q, const float* p, double limit) const {
    float acc[4] = {0.0f, 0.0f, 0.0f, 0.0f};
    std::size_t d = 0;
    for (; d + 4 <= dim_; d += 4) {
      for (std::size_t j = 0; j < 4; ++j) {
        const float diff = q[d + j] - p[d + j];
        acc[j] += diff * diff;
      }
    }
    for (; d < dim_; ++d) {
      const float diff = q[d] - p[d];
      acc[0] += diff * diff;
    }
    const double approx = static_cast<double>((acc[0] + acc[1]) + (acc[2] + acc[3]));
    return std::isfinite(approx) && approx > limit * (1.0 + screen_margin_) + 1e-30;
  }

  // Squared distance accumulated in the same order as squared_euclidean,
  // checked against the limit once per block of four dimensions.
  double euclidean_key_bounded(const float* q, const float* p, double limit) const {
    double key = 0.0;
    std::size_t d = 0;
    for (; d + 4 <= dim_; d += 4) {
      const double d0 = static_cast<double>(q[d]) - static_cast<double>(p[d]);
      const double d1 = static_cast<double>(q[d + 1]) - static_cast<double>(p[d + 1]);
      const double d2 = static_cast<double>(q[d + 2]) - static_cast<double>(p[d + 2]);
      const double d3 = static_cast<double>(q[d + 3]) - static_cast<double>(p[d + 3]);
      key += d0 * d0;
      key += d1 * d1;
      key += d2 * d2;
      key += d3 * d3;
      if (key > limit) return key;
    }
    for (; d < dim_; ++d) {
      const double diff = static_cast<double>(q[d]) - static_cast<double>(p[d]);
      key += diff * diff;
    }
    return key;
  }

  static bool before(const Candidate& a, const Candidate& b) {
    return a.key < b.key || (a.key == b.key && a.id < b.id);
  }

  static void offer(const Candidate& c, Search& s) {
    if (s.full() && !before(c, s.best.back())) return;
    auto it = std::upper_bound(s.best.begin(), s.best.end(), c, before);
    s.best.insert(it, c);
    if (s.best.size() > s.k) s.best.pop_back();
  }

  std::size_t dim_;
  std::size_t n_classes_;
  Metric metric_;
  bool use_tree_;
  std::vector<float> points_;
  std::vector<Label> labels_;
  std::vector<std::size_t> ids_;
  std::vector<double> norms_;
  std::vector<Node> nodes_;
  double screen_margin_;
};

}  // namespace ltsar
