#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/distance.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/ensemble.hpp"
#include "ltsar/error.hpp"
#include "ltsar/knn.hpp"
#include "ltsar/metrics.hpp"
#include "ltsar/parallel.hpp"
#include "ltsar/raster.hpp"
#include "ltsar/resize.hpp"
#include "ltsar/sampling.hpp"

namespace ltsar {

/// Settings for the whole balance-then-ensemble pipeline. Defaults: 7 subsets,
/// K = 3, 56 x 56 composites.
struct PipelineConfig {
  std::size_t n_subsets = 7;
  std::size_t k_neighbors = 3;
  std::size_t target_size = kDefaultTargetSize;
  LeeConfig lee{};
  SamplerConfig sampler{};
  bool normalize = false;
  AucAverage auc_average = AucAverage::Macro;
  std::uint64_t seed = 0;
  /// Samples per class per subset; empty = smallest class after Tomek cleaning.
  std::optional<std::size_t> per_class_target;
  /// NearMiss-3 keep count per class; empty = n_subsets * per_class_target.
  std::optional<std::size_t> nearmiss_target;

  void validate() const {
    if (n_subsets == 0) throw ConfigError("n_subsets must be >= 1");
    if (k_neighbors == 0) throw ConfigError("k_neighbors must be >= 1");
    if (target_size == 0) throw ConfigError("target_size must be >= 1");
    lee.validate();
    sampler.validate();
    if (per_class_target && *per_class_target == 0) throw TargetError("per_class_target must be >= 1");
    if (nearmiss_target && *nearmiss_target == 0) throw TargetError("nearmiss_target must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

inline std::string auc_average_name(AucAverage a) {
  switch (a) {
    case AucAverage::Macro: return "macro";
    case AucAverage::Weighted: return "weighted";
    case AucAverage::Micro: return "micro";
  }
  return "macro";
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are a ConfigError.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "n_subsets") {
    cfg.n_subsets = parse_u64(key, value);
  } else if (key == "k_neighbors") {
    cfg.k_neighbors = parse_u64(key, value);
  } else if (key == "target_size") {
    cfg.target_size = parse_u64(key, value);
  } else if (key == "lee_window") {
    cfg.lee.window = static_cast<int>(parse_u64(key, value));
  } else if (key == "lee_noise_variance") {
    cfg.lee.noise_variance = value == "auto" ? std::nullopt : std::optional<double>(parse_double(key, value));
  } else if (key == "metric") {
    cfg.sampler.metric = parse_metric(value);
  } else if (key == "nearmiss_m") {
    cfg.sampler.nearmiss_shortlist_m = parse_u64(key, value);
  } else if (key == "nearmiss_k") {
    cfg.sampler.nearmiss_k = parse_u64(key, value);
  } else if (key == "normalize") {
    cfg.normalize = parse_bool(key, value);
  } else if (key == "auc_average") {
    cfg.auc_average = parse_auc_average(value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "per_class_target") {
    cfg.per_class_target = value == "auto" ? std::nullopt : std::optional<std::size_t>(parse_u64(key, value));
  } else if (key == "nearmiss_target") {
    cfg.nearmiss_target = value == "auto" ? std::nullopt : std::optional<std::size_t>(parse_u64(key, value));
  } else if (key == "leaf_size") {
    cfg.sampler.index.leaf_size = parse_u64(key, value);
  } else if (key == "brute_force_above_dim") {
    cfg.sampler.index.brute_force_above_dim = parse_u64(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat `key = value` text; '#' starts a comment.
inline void apply_config_text(PipelineConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
    }
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  PipelineConfig cfg;
  apply_config_text(cfg, std::string(bytes.begin(), bytes.end()));
  return cfg;
}

/// Every setting, in a form apply_config_text reads back to the same config.
inline std::string format_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  auto opt = [](const auto& v) { return v ? std::to_string(*v) : std::string("auto"); };
  char noise[40] = "auto";
  if (cfg.lee.noise_variance) std::snprintf(noise, sizeof noise, "%.17g", *cfg.lee.noise_variance);
  out << "n_subsets = " << cfg.n_subsets << '\n'
      << "k_neighbors = " << cfg.k_neighbors << '\n'
      << "target_size = " << cfg.target_size << '\n'
      << "lee_window = " << cfg.lee.window << '\n'
      << "lee_noise_variance = " << noise << '\n'
      << "metric = " << to_string(cfg.sampler.metric) << '\n'
      << "nearmiss_m = " << cfg.sampler.nearmiss_shortlist_m << '\n'
      << "nearmiss_k = " << cfg.sampler.nearmiss_k << '\n'
      << "normalize = " << (cfg.normalize ? 1 : 0) << '\n'
      << "auc_average = " << detail::auc_average_name(cfg.auc_average) << '\n'
      << "seed = " << cfg.seed << '\n'
      << "per_class_target = " << opt(cfg.per_class_target) << '\n'
      << "nearmiss_target = " << opt(cfg.nearmiss_target) << '\n'
      << "leaf_size = " << cfg.sampler.index.leaf_size << '\n'
      << "brute_force_above_dim = " << cfg.sampler.index.brute_force_above_dim << '\n';
  return out.str();
}

/// Unit-length copy of every row (zero rows stay zero).
inline EmbeddingSet l2_normalized(const EmbeddingSet& set) {
  std::vector<float> v(set.vectors().begin(), set.vectors().end());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double norm = l2_norm(set.row(i));
    if (norm == 0.0) continue;
    for (std::size_t d = 0; d < set.dim(); ++d) {
      v[i * set.dim() + d] = static_cast<float>(static_cast<double>(v[i * set.dim() + d]) / norm);
    }
  }
  return EmbeddingSet(set.dim(), set.n_classes(), std::move(v), {set.labels().begin(), set.labels().end()});
}

struct FitResult {
  EnsembleModel model;
  /// Subset plan with indices into the rows of the fitted input set.
  SubsetPlan plan;
  CleaningReport report;
  std::size_t per_class_target = 0;
};

namespace detail {
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_with_context(e, std::string("stage '") + name + "'");
  }
}
}  // namespace detail

/// Tomek cleaning -> NearMiss-3 -> balanced subsets -> one KNN index per subset.
inline FitResult fit_pipeline(const EmbeddingSet& input, const PipelineConfig& cfg, Threads threads = {}) {
  cfg.validate();
  SamplerConfig sampler = cfg.sampler;
  sampler.seed = cfg.seed;
  const EmbeddingSet set = cfg.normalize ? l2_normalized(input) : input;

  CleaningReport report;
  report.before = set.class_counts();

  const auto links = detail::stage("tomek", [&] { return find_tomek_links(set, sampler, threads); });
  report.links_found = links.size();
  auto cleaned = detail::stage("tomek", [&] { return remove_tomek_majority(set, links); });
  report.tomek_removed = cleaned.removed_per_class;
  report.after_tomek = cleaned.set.class_counts();

  const std::size_t per_class = cfg.per_class_target.value_or(min_class_size(cleaned.set));
  const std::size_t keep = cfg.nearmiss_target.value_or(cfg.n_subsets * per_class);
  report.nearmiss_target.assign(set.n_classes(), keep);
  auto selected = detail::stage("nearmiss", [&] {
    return nearmiss3_select(cleaned.set, report.nearmiss_target, sampler, threads);
  });
  report.after_nearmiss = selected.set.class_counts();

  auto plan = detail::stage("subsets", [&] {
    return build_balanced_subsets(selected.set, cfg.n_subsets, per_class, sampler);
  });

  std::vector<NeighborIndex> members;
  detail::stage("index", [&] {
    for (const auto& subset : plan.subsets) {
      members.push_back(NeighborIndex::build(selected.set, subset, sampler.metric, sampler.index));
    }
    return 0;
  });

  // Re-express the plan in rows of the caller's set.
  SubsetPlan input_plan{{}, plan.per_class_target};
  for (const auto& subset : plan.subsets) {
    std::vector<std::size_t> rows;
    for (std::size_t i : subset) rows.push_back(cleaned.kept[selected.kept[i]]);
    input_plan.subsets.push_back(std::move(rows));
  }
  return {EnsembleModel(std::move(members), cfg.k_neighbors), std::move(input_plan), std::move(report), per_class};
}

/// Writes manifest.ltem, member_<i>.ltix, subset_plan.ltsp,
/// cleaning_report.csv and resolved_config.txt into `dir`.
inline std::filesystem::path save_fit(const FitResult& fit, const PipelineConfig& cfg,
                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory '" + dir.string() + "': " + ec.message());
  ModelManifest manifest;
  manifest.k = fit.model.k();
  manifest.n_classes = fit.model.n_classes();
  manifest.dim = fit.model.dim();
  manifest.metric = fit.model.metric();
  manifest.normalize = cfg.normalize;
  for (std::size_t m = 0; m < fit.model.size(); ++m) {
    const std::string name = "member_" + std::to_string(m) + ".ltix";
    fit.model.member(m).save(dir / name);
    manifest.members.push_back(name);
  }
  const auto manifest_path = dir / "manifest.ltem";
  detail::write_text_file(manifest_path.string(), format_manifest(manifest));
  write_subset_plan(fit.plan, dir / "subset_plan.ltsp");
  detail::write_text_file((dir / "cleaning_report.csv").string(), format_cleaning_report(fit.report));
  detail::write_text_file((dir / "resolved_config.txt").string(), format_config(cfg));
  return manifest_path;
}

/// Ensemble predictions for every row of `queries`, normalised first when
/// the model was fitted on normalised rows.
inline std::vector<Prediction> predict_set(const EnsembleModel& model, const EmbeddingSet& queries, bool normalize,
                                           Threads threads = {}) {
  if (queries.dim() != model.dim()) {
    throw DimError("embeddings have dim " + std::to_string(queries.dim()) + ", model expects " +
                   std::to_string(model.dim()));
  }
  const EmbeddingSet rows = normalize ? l2_normalized(queries) : queries;
  return ensemble_predict_batch(model, rows.vectors(), threads);
}

inline EvalReport evaluate_predictions(const PredictionTable& table, const EmbeddingSet& truth,
                                       AucAverage average = AucAverage::Macro) {
  if (table.rows.size() != truth.size()) {
    throw LengthError("predictions have " + std::to_string(table.rows.size()) + " rows, truth has " +
                      std::to_string(truth.size()));
  }
  if (table.n_classes != truth.n_classes()) throw ValidationError("prediction and truth class counts differ");
  std::vector<Label> labels;
  std::vector<double> proba;
  for (const auto& p : table.rows) {
    labels.push_back(p.label);
    proba.insert(proba.end(), p.proba.begin(), p.proba.end());
  }
  return evaluate(labels, proba, table.n_classes, truth.labels(), average);
}

}  // namespace ltsar
