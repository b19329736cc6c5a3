#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/distance.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/error.hpp"
#include "ltsar/knn.hpp"
#include "ltsar/parallel.hpp"

namespace ltsar {

struct SamplerConfig {
  Metric metric = Metric::Euclidean;
  std::size_t nearmiss_shortlist_m = 3;
  std::size_t nearmiss_k = 3;
  std::uint64_t seed = 0;
  IndexOptions index{};

  void validate() const {
    if (nearmiss_shortlist_m < 1) throw ConfigError("NearMiss shortlist size m must be >= 1");
    if (nearmiss_k < 1) throw ConfigError("NearMiss k must be >= 1");
  }
};

/// Mutual cross-class nearest neighbours, stored with a < b.
struct TomekLink {
  std::size_t a;
  std::size_t b;

  friend bool operator==(const TomekLink&, const TomekLink&) = default;
};

/// Result of a filtering stage: the surviving rows and, for each, its row
/// index in the stage's input.
struct Selection {
  EmbeddingSet set;
  std::vector<std::size_t> kept;
};

struct CleaningResult {
  EmbeddingSet set;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> removed_per_class;
};

/// Each sample's nearest other sample (self excluded, ties to the lowest index).
inline std::vector<std::size_t> nearest_other(const EmbeddingSet& set, const SamplerConfig& cfg,
                                              Threads threads = {}) {
  const auto index = NeighborIndex::build(set, cfg.metric, cfg.index);
  std::vector<std::size_t> nn(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) { nn[i] = index.query(set.row(i), 1, i).ids[0]; });
  return nn;
}

/// Every pair (a, b), a < b, of differently labelled mutual 1-NN samples,
/// sorted by a.
inline std::vector<TomekLink> find_tomek_links(const EmbeddingSet& set, const SamplerConfig& cfg,
                                               Threads threads = {}) {
  if (set.size() < 2) throw DegenerateError("Tomek links need at least two samples");
  const auto nn = nearest_other(set, cfg, threads);
  std::vector<TomekLink> links;
  for (std::size_t a = 0; a < set.size(); ++a) {
    const std::size_t b = nn[a];
    if (a < b && nn[b] == a && set.label(a) != set.label(b)) links.push_back({a, b});
  }
  return links;
}

/// Single pass: from each link drop the member whose class is strictly larger
/// in the input set. Equal class sizes keep both.
inline CleaningResult remove_tomek_majority(const EmbeddingSet& set, std::span<const TomekLink> links) {
  const auto counts = set.class_counts();
  std::vector<bool> drop(set.size(), false);
  for (const auto& link : links) {
    const auto ca = counts[set.label(link.a)];
    const auto cb = counts[set.label(link.b)];
    if (ca > cb) drop[link.a] = true;
    if (cb > ca) drop[link.b] = true;
  }
  std::vector<std::size_t> kept;
  std::vector<std::size_t> removed(set.n_classes(), 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (drop[i]) {
      ++removed[set.label(i)];
    } else {
      kept.push_back(i);
    }
  }
  auto cleaned = set.select(kept);
  return {std::move(cleaned), std::move(kept), std::move(removed)};
}

/// NearMiss-3, one class at a time. A class above its target plays the
/// majority against every other sample of the input set:
///   1. shortlist the m nearest majority samples of each minority sample
///      (padded with the lowest unlisted indices if it falls short of target);
///   2. keep the `target` shortlisted samples whose mean distance to their k
///      nearest minority samples is largest (ties to the lowest index).
/// Classes at or below target pass through untouched.
inline Selection nearmiss3_select(const EmbeddingSet& set, std::span<const std::size_t> targets,
                                  const SamplerConfig& cfg, Threads threads = {}) {
  cfg.validate();
  if (targets.size() != set.n_classes()) {
    throw TargetError("expected " + std::to_string(set.n_classes()) + " per-class targets, got " +
                      std::to_string(targets.size()));
  }
  const auto counts = set.class_counts();
  std::vector<bool> keep(set.size(), false);

  for (Label c = 0; c < set.n_classes(); ++c) {
    const auto majority = set.indices_of(c);
    if (counts[c] <= targets[c]) {
      for (std::size_t i : majority) keep[i] = true;
      continue;
    }
    if (targets[c] == 0) throw TargetError("target 0 would erase class " + std::to_string(c));

    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.label(i) != c) minority.push_back(i);
    }

    // Step 1: shortlist.
    std::vector<bool> listed(set.size(), false);
    if (!minority.empty()) {
      const auto majority_index = NeighborIndex::build(set, majority, cfg.metric, cfg.index);
      std::vector<std::vector<std::size_t>> near(minority.size());
      parallel_for(minority.size(), threads, [&](std::size_t j) {
        near[j] = majority_index.query(set.row(minority[j]), cfg.nearmiss_shortlist_m).ids;
      });
      for (const auto& ids : near) {
        for (std::size_t id : ids) listed[id] = true;
      }
    }
    std::vector<std::size_t> shortlist;
    for (std::size_t i : majority) {
      if (listed[i]) shortlist.push_back(i);
    }
    if (shortlist.size() < targets[c]) {
      for (std::size_t i : majority) {
        if (shortlist.size() >= targets[c]) break;
        if (!listed[i]) {
          listed[i] = true;
          shortlist.push_back(i);
        }
      }
      std::sort(shortlist.begin(), shortlist.end());
    }

    // Step 2: farthest-on-average from the nearest minority samples.
    std::vector<double> score(shortlist.size(), 0.0);
    if (!minority.empty()) {
      const auto minority_index = NeighborIndex::build(set, minority, cfg.metric, cfg.index);
      parallel_for(shortlist.size(), threads, [&](std::size_t s) {
        const auto nb = minority_index.query(set.row(shortlist[s]), cfg.nearmiss_k);
        double sum = 0.0;
        for (double d : nb.distances) sum += d;
        score[s] = sum / static_cast<double>(nb.size());
      });
    }
    std::vector<std::size_t> order(shortlist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t r = 0; r < targets[c]; ++r) keep[shortlist[order[r]]] = true;
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (keep[i]) kept.push_back(i);
  }
  auto selected = set.select(kept);
  return {std::move(selected), std::move(kept)};
}

/// N index lists into the set they were drawn from, each balanced per class.
struct SubsetPlan {
  std::vector<std::vector<std::size_t>> subsets;
  std::size_t per_class_target = 0;

  friend bool operator==(const SubsetPlan&, const SubsetPlan&) = default;
};

/// Smallest non-empty class size.
inline std::size_t min_class_size(const EmbeddingSet& set) {
  std::size_t lo = 0;
  for (std::size_t c : set.class_counts()) {
    if (c > 0) lo = lo == 0 ? c : std::min(lo, c);
  }
  return lo;
}

namespace detail {

inline std::mt19937_64 class_rng(std::uint64_t seed, Label c, std::uint64_t round) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(round),
                    static_cast<std::uint32_t>(round >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

/// Draws each class's samples without replacement from a seeded shuffled pool,
/// filling subsets in order. An exhausted pool is reshuffled under a fresh
/// derived seed, so the head classes are covered as fully as N x target allows.
/// Classes with at most `per_class_target` samples appear whole in every subset.
inline SubsetPlan build_balanced_subsets(const EmbeddingSet& set, std::size_t n_subsets,
                                         std::size_t per_class_target, const SamplerConfig& cfg) {
  if (n_subsets == 0) throw ConfigError("number of subsets must be >= 1");
  if (per_class_target == 0) throw TargetError("per-class target must be >= 1");
  const auto counts = set.class_counts();
  const std::size_t largest = *std::max_element(counts.begin(), counts.end());
  if (per_class_target > largest) {
    throw TargetError("per-class target " + std::to_string(per_class_target) +
                      " exceeds every class size (largest " + std::to_string(largest) + ")");
  }

  SubsetPlan plan{std::vector<std::vector<std::size_t>>(n_subsets), per_class_target};
  for (Label c = 0; c < set.n_classes(); ++c) {
    const auto members = set.indices_of(c);
    if (members.empty()) continue;
    if (members.size() <= per_class_target) {
      for (auto& subset : plan.subsets) subset.insert(subset.end(), members.begin(), members.end());
      continue;
    }
    std::uint64_t round = 0;
    auto rng = detail::class_rng(cfg.seed, c, round);
    std::vector<std::size_t> pool = members;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t next = 0;
    for (auto& subset : plan.subsets) {
      std::vector<std::size_t> drawn;
      drawn.reserve(per_class_target);
      while (drawn.size() < per_class_target) {
        if (next == pool.size()) {
          rng = detail::class_rng(cfg.seed, c, ++round);
          pool = members;
          std::shuffle(pool.begin(), pool.end(), rng);
          // Samples already drawn into this subset move to the back of the new pool.
          std::stable_partition(pool.begin(), pool.end(), [&](std::size_t i) {
            return std::find(drawn.begin(), drawn.end(), i) == drawn.end();
          });
          next = 0;
        }
        drawn.push_back(pool[next++]);
      }
      subset.insert(subset.end(), drawn.begin(), drawn.end());
    }
  }
  for (auto& subset : plan.subsets) std::sort(subset.begin(), subset.end());
  return plan;
}

/// "LTSP1 <N> <target>" then one line of space-separated indices per subset.
inline std::string format_subset_plan(const SubsetPlan& plan) {
  std::ostringstream out;
  out << "LTSP1 " << plan.subsets.size() << ' ' << plan.per_class_target << '\n';
  for (const auto& subset : plan.subsets) {
    for (std::size_t i = 0; i < subset.size(); ++i) out << (i ? " " : "") << subset[i];
    out << '\n';
  }
  return out.str();
}

inline SubsetPlan parse_subset_plan(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::size_t n = 0;
  SubsetPlan plan;
  if (!(in >> magic >> n >> plan.per_class_target) || magic != "LTSP1") {
    throw FormatError("subset manifest must start with 'LTSP1 <N> <target>'");
  }
  std::string line;
  std::getline(in, line);
  for (std::size_t s = 0; s < n; ++s) {
    if (!std::getline(in, line)) throw FormatError("subset manifest truncated");
    std::istringstream row(line);
    std::vector<std::size_t> subset;
    std::size_t v;
    while (row >> v) subset.push_back(v);
    if (!row.eof()) throw FormatError("non-numeric entry in subset manifest");
    plan.subsets.push_back(std::move(subset));
  }
  return plan;
}

inline void write_subset_plan(const SubsetPlan& plan, const std::filesystem::path& path) {
  detail::write_text_file(path.string(), format_subset_plan(plan));
}

inline SubsetPlan read_subset_plan(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  return parse_subset_plan(std::string(bytes.begin(), bytes.end()));
}

/// Per-class bookkeeping of the cleaning stages, written as CSV.
struct CleaningReport {
  std::size_t links_found = 0;
  std::vector<std::size_t> before;
  std::vector<std::size_t> tomek_removed;
  std::vector<std::size_t> after_tomek;
  std::vector<std::size_t> nearmiss_target;
  std::vector<std::size_t> after_nearmiss;
};

inline std::string format_cleaning_report(const CleaningReport& r) {
  std::ostringstream out;
  out << "class,before,tomek_removed,after_tomek,nearmiss_target,after_nearmiss\n";
  for (std::size_t c = 0; c < r.before.size(); ++c) {
    out << c << ',' << r.before[c] << ',' << r.tomek_removed[c] << ',' << r.after_tomek[c] << ','
        << r.nearmiss_target[c] << ',' << r.after_nearmiss[c] << '\n';
  }
  out << "# tomek_links_found," << r.links_found << '\n';
  return out.str();
}

}  // namespace ltsar
