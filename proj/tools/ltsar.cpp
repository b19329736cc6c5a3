// ltsar: command-line driver for the long-tail SAR classification pipeline.
//
//   ltsar gen       synthetic long-tail embedding file
//   ltsar denoise   Lee-filter a directory of grayscale rasters
//   ltsar compose   stack SAR / denoised SAR / translated EO into composites
//   ltsar fit       Tomek + NearMiss-3 balancing and the KNN ensemble
//   ltsar predict   ensemble predictions as CSV
//   ltsar evaluate  accuracy, AUC, total score, per-class recall
//
// Exit codes: 0 success, 1 contract error, 2 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/ltsar.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitIo = 2;

int exit_code_for(const ltsar::Error& e) { return e.kind() == ltsar::ErrorKind::Io ? kExitIo : kExitContract; }

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string metric;
};

ltsar::PipelineConfig resolve_config(const GlobalOptions& g) {
  ltsar::PipelineConfig cfg = g.config_path.empty() ? ltsar::PipelineConfig{} : ltsar::load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.metric.empty()) cfg.sampler.metric = ltsar::parse_metric(g.metric);
  cfg.validate();
  return cfg;
}

void write_snapshot(const ltsar::PipelineConfig& cfg, const fs::path& path) {
  ltsar::detail::write_text_file(path.string(), ltsar::format_config(cfg));
}

std::vector<fs::path> raster_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ltsar::IoError("not a directory: '" + dir.string() + "'");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    try {
      ltsar::format_from_path(entry.path());
      out.push_back(entry.path());
    } catch (const ltsar::FormatError&) {
      // not a raster; ignore
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string out;
  ltsar::GeneratorConfig gen;
  std::size_t balanced_per_class = 0;
  std::uint64_t holdout_seed = 1;
};

int cmd_gen(const GenOptions& o, const GlobalOptions& g) {
  auto cfg = o.gen;
  if (g.seed) cfg.seed = *g.seed;
  const auto set = o.balanced_per_class > 0 ? ltsar::generate_balanced(cfg, o.balanced_per_class, o.holdout_seed)
                                            : ltsar::generate_longtail(cfg);
  ltsar::write_embedding_set(set, o.out);
  const auto hist = ltsar::class_histogram(set);
  ltsar::detail::write_text_file(o.out + ".counts.csv", ltsar::format_counts_csv(hist.counts));
  std::ostringstream snap;
  snap << "n_classes = " << cfg.n_classes << "\nhead_size = " << cfg.head_size
       << "\nimbalance_ratio = " << cfg.imbalance_ratio << "\ndim = " << cfg.dim
       << "\ncluster_spread = " << cfg.cluster_spread << "\ncluster_separation = " << cfg.cluster_separation
       << "\nseed = " << cfg.seed << "\nbalanced_per_class = " << o.balanced_per_class
       << "\nholdout_seed = " << o.holdout_seed << '\n';
  ltsar::detail::write_text_file(o.out + ".config.txt", snap.str());
  std::cout << "wrote " << set.size() << " samples, dim " << set.dim() << ", " << set.n_classes()
            << " classes, imbalance " << hist.imbalance_ratio << "x -> " << o.out << '\n';
  return kExitOk;
}

struct DenoiseOptions {
  std::string in_dir;
  std::string out_dir;
  std::optional<int> window;
  std::string noise;
};

int cmd_denoise(const DenoiseOptions& o, const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  if (o.window) cfg.lee.window = *o.window;
  if (!o.noise.empty()) ltsar::apply_setting(cfg, "lee_noise_variance", o.noise);
  cfg.lee.validate();

  const auto files = raster_files(o.in_dir);
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw ltsar::IoError("cannot create '" + o.out_dir + "'");

  std::vector<int> status(files.size(), kExitOk);
  std::vector<std::string> messages(files.size());
  ltsar::parallel_for(files.size(), ltsar::Threads{g.threads}, [&](std::size_t i) {
    try {
      const auto format = ltsar::format_from_path(files[i]);
      const auto raster = ltsar::load_raster(files[i], format);
      ltsar::save_raster(ltsar::lee_filter(raster, cfg.lee), fs::path(o.out_dir) / files[i].filename(), format);
    } catch (const ltsar::Error& e) {
      status[i] = exit_code_for(e);
      messages[i] = e.what();
    }
  });
  int rc = kExitOk;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (status[i] == kExitOk) continue;
    ++failed;
    rc = std::max(rc, status[i]);
    std::cerr << files[i].string() << ": " << messages[i] << '\n';
  }
  write_snapshot(cfg, fs::path(o.out_dir) / "resolved_config.txt");
  std::cout << "denoised " << files.size() - failed << " of " << files.size() << " rasters";
  if (failed > 0) std::cout << " (" << failed << " failed)";
  std::cout << '\n';
  return rc;
}

struct ComposeOptions {
  std::string sar_dir;
  std::string denoised_dir;
  std::string eo_dir;
  std::string out_dir;
  std::optional<std::size_t> size;
};

int cmd_compose(const ComposeOptions& o, const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  if (o.size) cfg.target_size = *o.size;
  cfg.validate();

  std::map<std::string, std::array<std::optional<fs::path>, 3>> stems;
  const std::array<std::string, 3> dirs{o.sar_dir, o.denoised_dir, o.eo_dir};
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    for (const auto& f : raster_files(dirs[d])) stems[f.stem().string()][d] = f;
  }
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw ltsar::IoError("cannot create '" + o.out_dir + "'");

  int rc = kExitOk;
  std::size_t written = 0;
  for (const auto& [stem, paths] : stems) {
    if (!paths[0] || !paths[1] || !paths[2]) {
      std::cerr << "MissingPairError: " << stem << " missing from";
      for (std::size_t d = 0; d < 3; ++d) {
        if (!paths[d]) std::cerr << ' ' << dirs[d];
      }
      std::cerr << '\n';
      rc = std::max(rc, kExitContract);
      continue;
    }
    try {
      const auto composite = ltsar::compose_channels(ltsar::load_raster(*paths[0]), ltsar::load_raster(*paths[1]),
                                                     ltsar::load_raster(*paths[2]), cfg.target_size);
      ltsar::write_composite(composite, fs::path(o.out_dir) / (stem + ".ltcr"));
      ++written;
    } catch (const ltsar::Error& e) {
      std::cerr << stem << ": " << e.what() << '\n';
      rc = std::max(rc, exit_code_for(e));
    }
  }
  write_snapshot(cfg, fs::path(o.out_dir) / "resolved_config.txt");
  std::cout << "composed " << written << " of " << stems.size() << " stems at " << cfg.target_size << "x"
            << cfg.target_size << '\n';
  return rc;
}

struct FitOptions {
  std::string embeddings;
  std::string out_dir;
  std::optional<std::size_t> subsets;
  std::optional<std::size_t> k;
  std::optional<std::size_t> per_class_target;
  std::optional<std::size_t> nearmiss_target;
  bool normalize = false;
};

int cmd_fit(const FitOptions& o, const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  if (o.subsets) cfg.n_subsets = *o.subsets;
  if (o.k) cfg.k_neighbors = *o.k;
  if (o.per_class_target) cfg.per_class_target = *o.per_class_target;
  if (o.nearmiss_target) cfg.nearmiss_target = *o.nearmiss_target;
  if (o.normalize) cfg.normalize = true;
  cfg.validate();

  const auto set = ltsar::read_embedding_set(o.embeddings);
  const auto fit = ltsar::fit_pipeline(set, cfg, ltsar::Threads{g.threads});
  const auto manifest = ltsar::save_fit(fit, cfg, o.out_dir);

  std::size_t removed = 0;
  for (auto r : fit.report.tomek_removed) removed += r;
  std::cout << "tomek links " << fit.report.links_found << ", removed " << removed << "; per-class target "
            << fit.per_class_target << "; " << fit.model.size() << " members, K=" << fit.model.k() << " -> "
            << manifest.string() << '\n';
  return kExitOk;
}

struct PredictOptions {
  std::string manifest;
  std::string embeddings;
  std::string out;
};

int cmd_predict(const PredictOptions& o, const GlobalOptions& g) {
  ltsar::ModelManifest manifest;
  const auto model = ltsar::load_model(o.manifest, &manifest);
  const auto queries = ltsar::read_embedding_set(o.embeddings);
  const auto preds = ltsar::predict_set(model, queries, manifest.normalize, ltsar::Threads{g.threads});
  ltsar::detail::write_text_file(o.out, ltsar::format_predictions_csv(preds, model.n_classes()));
  write_snapshot(resolve_config(g), o.out + ".config.txt");
  std::cout << "predicted " << preds.size() << " samples -> " << o.out << '\n';
  return kExitOk;
}

struct EvaluateOptions {
  std::string predictions;
  std::string truth;
  std::string out_dir;
  std::string auc_average;
};

int cmd_evaluate(const EvaluateOptions& o, const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  if (!o.auc_average.empty()) cfg.auc_average = ltsar::parse_auc_average(o.auc_average);
  const auto bytes = ltsar::detail::read_file(o.predictions);
  const auto table = ltsar::parse_predictions_csv(std::string(bytes.begin(), bytes.end()));
  const auto truth = ltsar::read_embedding_set(o.truth);
  const auto report = ltsar::evaluate_predictions(table, truth, cfg.auc_average);
  std::cout << ltsar::format_report_table(report);
  if (!o.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec) throw ltsar::IoError("cannot create '" + o.out_dir + "'");
    const fs::path dir(o.out_dir);
    ltsar::detail::write_text_file((dir / "report.csv").string(), ltsar::format_report_csv(report));
    ltsar::detail::write_text_file((dir / "recall.csv").string(), ltsar::format_recall_csv(report));
    write_snapshot(cfg, dir / "resolved_config.txt");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tail SAR classification pipeline"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->default_val(1);
  app.add_option("--metric", g.metric, "distance metric")->check(CLI::IsMember({"euclidean", "cosine"}));

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic long-tail embedding file")->fallthrough();
  gen_cmd->add_option("--out", gen.out, "output .lteb path")->required();
  gen_cmd->add_option("--classes", gen.gen.n_classes)->default_val(gen.gen.n_classes);
  gen_cmd->add_option("--head", gen.gen.head_size, "samples in the largest class")->default_val(gen.gen.head_size);
  gen_cmd->add_option("--ratio", gen.gen.imbalance_ratio, "head/tail ratio")->default_val(gen.gen.imbalance_ratio);
  gen_cmd->add_option("--dim", gen.gen.dim)->default_val(gen.gen.dim);
  gen_cmd->add_option("--spread", gen.gen.cluster_spread, "within-class std dev")->default_val(gen.gen.cluster_spread);
  gen_cmd->add_option("--separation", gen.gen.cluster_separation, "centroid scale")
      ->default_val(gen.gen.cluster_separation);
  gen_cmd->add_option("--balanced-per-class", gen.balanced_per_class,
                      "write a balanced holdout with this many samples per class instead");
  gen_cmd->add_option("--holdout-seed", gen.holdout_seed, "sample stream for the holdout")->default_val(1);

  DenoiseOptions den;
  auto* den_cmd = app.add_subcommand("denoise", "Lee-filter every PGM/PNG in a directory")->fallthrough();
  den_cmd->add_option("--in", den.in_dir)->required();
  den_cmd->add_option("--out", den.out_dir)->required();
  den_cmd->add_option("--window", den.window, "odd window side in [3, 15]");
  den_cmd->add_option("--noise", den.noise, "noise variance or 'auto'");

  ComposeOptions com;
  auto* com_cmd = app.add_subcommand("compose", "build 3-channel composites from matching stems")->fallthrough();
  com_cmd->add_option("--sar", com.sar_dir)->required();
  com_cmd->add_option("--denoised", com.denoised_dir)->required();
  com_cmd->add_option("--eo", com.eo_dir)->required();
  com_cmd->add_option("--out", com.out_dir)->required();
  com_cmd->add_option("--size", com.size, "output side length");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "balance the embeddings and build the KNN ensemble")->fallthrough();
  fit_cmd->add_option("--embeddings", fit.embeddings)->required();
  fit_cmd->add_option("--out", fit.out_dir, "model directory")->required();
  fit_cmd->add_option("--subsets", fit.subsets);
  fit_cmd->add_option("--k", fit.k);
  fit_cmd->add_option("--per-class-target", fit.per_class_target);
  fit_cmd->add_option("--nearmiss-target", fit.nearmiss_target);
  fit_cmd->add_flag("--normalize", fit.normalize, "L2-normalise embeddings first");

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "write ensemble predictions as CSV")->fallthrough();
  pred_cmd->add_option("--model", pred.manifest, "manifest.ltem")->required();
  pred_cmd->add_option("--embeddings", pred.embeddings)->required();
  pred_cmd->add_option("--out", pred.out, "predictions CSV")->required();

  EvaluateOptions ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "score predictions against labelled embeddings")->fallthrough();
  ev_cmd->add_option("--predictions", ev.predictions)->required();
  ev_cmd->add_option("--truth", ev.truth)->required();
  ev_cmd->add_option("--out-dir", ev.out_dir, "write report.csv and recall.csv here");
  ev_cmd->add_option("--auc-average", ev.auc_average)->check(CLI::IsMember({"macro", "weighted", "micro"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitContract;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, g);
    if (*den_cmd) return cmd_denoise(den, g);
    if (*com_cmd) return cmd_compose(com, g);
    if (*fit_cmd) return cmd_fit(fit, g);
    if (*pred_cmd) return cmd_predict(pred, g);
    if (*ev_cmd) return cmd_evaluate(ev, g);
  } catch (const ltsar::Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "IoError: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitContract;
}
