#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/detail/binary_io.hpp"
#include "ltsar/embeddings.hpp"
#include "ltsar/error.hpp"
#include "ltsar/knn.hpp"
#include "ltsar/parallel.hpp"

namespace ltsar {

struct Prediction {
  std::vector<double> proba;
  Label label = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Lowest index among the maxima.
inline Label argmax(std::span<const double> p) {
  Label best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = static_cast<Label>(c);
  }
  return best;
}

/// N KNN members sharing dim, metric and class vocabulary, combined by an
/// equal-weight soft vote.
class EnsembleModel {
 public:
  EnsembleModel(std::vector<NeighborIndex> members, std::size_t k) : members_(std::move(members)), k_(k) {
    if (members_.empty()) throw DegenerateError("ensemble needs at least one member");
    if (k_ == 0) throw ConfigError("k must be >= 1");
    const auto& first = members_.front();
    for (const auto& m : members_) {
      if (m.dim() != first.dim() || m.metric() != first.metric() || m.n_classes() != first.n_classes()) {
        throw ValidationError("ensemble members disagree on dim, metric or class count");
      }
    }
  }

  std::size_t size() const { return members_.size(); }
  std::size_t k() const { return k_; }
  std::size_t dim() const { return members_.front().dim(); }
  std::size_t n_classes() const { return members_.front().n_classes(); }
  Metric metric() const { return members_.front().metric(); }
  const NeighborIndex& member(std::size_t i) const { return members_.at(i); }

 private:
  std::vector<NeighborIndex> members_;
  std::size_t k_;
};

/// Arithmetic mean of the members' class distributions, summed in member order.
inline Prediction ensemble_predict(const EnsembleModel& model, std::span<const float> q) {
  if (q.size() != model.dim()) {
    throw DimError("query has dim " + std::to_string(q.size()) + ", model has dim " + std::to_string(model.dim()));
  }
  Prediction out{std::vector<double>(model.n_classes(), 0.0), 0};
  for (std::size_t m = 0; m < model.size(); ++m) {
    const auto p = model.member(m).predict_proba(q, model.k());
    for (std::size_t c = 0; c < p.size(); ++c) out.proba[c] += p[c];
  }
  const double n = static_cast<double>(model.size());
  for (double& v : out.proba) v /= n;
  out.label = argmax(out.proba);
  return out;
}

/// One prediction per row of `queries` (row-major, model.dim() columns).
inline std::vector<Prediction> ensemble_predict_batch(const EnsembleModel& model, std::span<const float> queries,
                                                      Threads threads = {}) {
  if (queries.size() % model.dim() != 0) throw DimError("query matrix width does not match model dim");
  const std::size_t n = queries.size() / model.dim();
  std::vector<Prediction> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out[i] = ensemble_predict(model, queries.subspan(i * model.dim(), model.dim()));
  });
  return out;
}

/// Text manifest naming the member index files relative to the manifest.
struct ModelManifest {
  std::size_t k = 3;
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  Metric metric = Metric::Euclidean;
  bool normalize = false;
  std::vector<std::string> members;
};

inline std::string format_manifest(const ModelManifest& m) {
  std::ostringstream out;
  out << "LTEM1\n"
      << "k " << m.k << '\n'
      << "n_classes " << m.n_classes << '\n'
      << "dim " << m.dim << '\n'
      << "metric " << to_string(m.metric) << '\n'
      << "normalize " << (m.normalize ? 1 : 0) << '\n';
  for (const auto& p : m.members) out << "member " << p << '\n';
  return out.str();
}

inline ModelManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "LTEM1") throw FormatError("model manifest must start with LTEM1");
  ModelManifest m;
  bool have_k = false;
  bool have_classes = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string key;
    row >> key;
    std::string value;
    std::getline(row >> std::ws, value);
    try {
      if (key == "k") {
        m.k = std::stoul(value);
        have_k = true;
      } else if (key == "n_classes") {
        m.n_classes = std::stoul(value);
        have_classes = true;
      } else if (key == "dim") {
        m.dim = std::stoul(value);
      } else if (key == "metric") {
        m.metric = parse_metric(value);
      } else if (key == "normalize") {
        m.normalize = value == "1";
      } else if (key == "member") {
        m.members.push_back(value);
      } else {
        throw FormatError("unknown manifest key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw FormatError("bad value for manifest key '" + key + "'");
    }
  }
  if (!have_k || !have_classes || m.members.empty()) {
    throw FormatError("model manifest needs k, n_classes and at least one member");
  }
  return m;
}

inline EnsembleModel load_model(const std::filesystem::path& manifest_path, ModelManifest* manifest_out = nullptr,
                                IndexOptions opts = {}) {
  const auto bytes = detail::read_file(manifest_path.string());
  const auto manifest = parse_manifest(std::string(bytes.begin(), bytes.end()));
  std::vector<NeighborIndex> members;
  for (const auto& rel : manifest.members) {
    members.push_back(NeighborIndex::load(manifest_path.parent_path() / rel, manifest.n_classes, opts));
    if (members.back().metric() != manifest.metric) {
      throw ValidationError("member '" + rel + "' metric disagrees with the manifest");
    }
  }
  if (manifest_out != nullptr) *manifest_out = manifest;
  return EnsembleModel(std::move(members), manifest.k);
}

/// "query_id,label,p_0..p_{C-1}" with round-trippable probabilities.
inline std::string format_predictions_csv(std::span<const Prediction> preds, std::size_t n_classes) {
  std::string out = "query_id,label";
  for (std::size_t c = 0; c < n_classes; ++c) out += ",p_" + std::to_string(c);
  out += '\n';
  char buf[40];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out += std::to_string(i) + ',' + std::to_string(preds[i].label);
    for (double p : preds[i].proba) {
      std::snprintf(buf, sizeof buf, ",%.17g", p);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

struct PredictionTable {
  std::size_t n_classes = 0;
  std::vector<Prediction> rows;
};

inline PredictionTable parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("query_id,label", 0) != 0) {
    throw FormatError("predictions CSV must start with a query_id,label header");
  }
  PredictionTable table;
  for (char ch : line) table.n_classes += ch == ',' ? 1 : 0;
  if (table.n_classes < 2) throw FormatError("predictions CSV has no probability columns");
  table.n_classes -= 1;
  std::size_t expected_id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != table.n_classes + 2) throw FormatError("predictions CSV row has the wrong width");
    Prediction p;
    try {
      if (std::stoull(cells[0]) != expected_id++) throw FormatError("predictions CSV query ids out of order");
      p.label = static_cast<Label>(std::stoul(cells[1]));
      for (std::size_t c = 0; c < table.n_classes; ++c) p.proba.push_back(std::stod(cells[c + 2]));
    } catch (const std::logic_error&) {
      throw FormatError("non-numeric cell in predictions CSV");
    }
    if (p.label >= table.n_classes) throw ValidationError("predicted label out of range");
    table.rows.push_back(std::move(p));
  }
  return table;
}

}  // namespace ltsar
