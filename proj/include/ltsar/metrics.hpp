#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ltsar/embeddings.hpp"
#include "ltsar/error.hpp"

namespace ltsar {

inline double accuracy(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) throw LengthError("prediction and truth lengths differ");
  if (truth.empty()) throw EmptyError("accuracy of an empty evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Recall per class; empty for classes absent from the truth.
inline std::vector<std::optional<double>> per_class_recall(std::span<const Label> predicted,
                                                           std::span<const Label> truth, std::size_t n_classes) {
  if (predicted.size() != truth.size()) throw LengthError("prediction and truth lengths differ");
  std::vector<std::size_t> support(n_classes, 0);
  std::vector<std::size_t> hits(n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes) throw ValidationError("true label out of range");
    ++support[truth[i]];
    if (predicted[i] == truth[i]) ++hits[truth[i]];
  }
  std::vector<std::optional<double>> recall(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (support[c] > 0) recall[c] = static_cast<double>(hits[c]) / static_cast<double>(support[c]);
  }
  return recall;
}

/// Mean over the classes whose recall is defined.
inline double macro_recall(std::span<const std::optional<double>> recall) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : recall) {
    if (r) {
      sum += *r;
      ++n;
    }
  }
  if (n == 0) throw EmptyError("no class has a defined recall");
  return sum / static_cast<double>(n);
}

/// Mann-Whitney AUC with midranks for tied scores. Empty when either side
/// has no samples.
inline std::optional<double> try_binary_auc(std::span<const double> scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) throw LengthError("scores and labels lengths differ");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (bool p : positives) n_pos += p ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positives[order[t]]) positive_rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline double binary_auc(std::span<const double> scores, const std::vector<bool>& positives) {
  const auto auc = try_binary_auc(scores, positives);
  if (!auc) throw DegenerateError("AUC undefined: need at least one positive and one negative");
  return *auc;
}

enum class AucAverage { Macro, Weighted, Micro };

inline AucAverage parse_auc_average(const std::string& s) {
  if (s == "macro") return AucAverage::Macro;
  if (s == "weighted") return AucAverage::Weighted;
  if (s == "micro") return AucAverage::Micro;
  throw ConfigError("unknown AUC averaging '" + s + "' (expected macro|weighted|micro)");
}

struct MulticlassAuc {
  double value = 0.0;
  std::vector<std::optional<double>> per_class;
  std::vector<Label> excluded;
};

/// One-vs-rest AUC over an n x C probability matrix (row-major). Classes with
/// no positives or no negatives in `truth` are left out and listed in
/// `excluded`. Macro averages the remaining classes equally, Weighted by
/// their prevalence, Micro pools every (sample, class) score.
inline MulticlassAuc multiclass_auc(std::span<const double> proba, std::size_t n_classes,
                                    std::span<const Label> truth, AucAverage average = AucAverage::Macro) {
  if (n_classes == 0 || proba.size() != truth.size() * n_classes) {
    throw LengthError("probability matrix does not match n x C");
  }
  const std::size_t n = truth.size();
  MulticlassAuc out;
  out.per_class.resize(n_classes);
  std::vector<double> column(n);
  std::vector<bool> positive(n);
  std::vector<std::size_t> support(n_classes, 0);
  for (Label t : truth) {
    if (t >= n_classes) throw ValidationError("true label out of range");
    ++support[t];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = proba[i * n_classes + c];
      positive[i] = truth[i] == c;
    }
    out.per_class[c] = try_binary_auc(column, positive);
    if (!out.per_class[c]) out.excluded.push_back(static_cast<Label>(c));
  }
  if (out.excluded.size() == n_classes) throw DegenerateError("no class is scoreable for AUC");

  if (average == AucAverage::Micro) {
    std::vector<double> all(proba.begin(), proba.end());
    std::vector<bool> pos(all.size());
    for (std::size_t i = 0; i < n; ++i) pos[i * n_classes + truth[i]] = true;
    out.value = binary_auc(all, pos);
    return out;
  }
  double sum = 0.0;
  double weight = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (!out.per_class[c]) continue;
    const double w = average == AucAverage::Weighted ? static_cast<double>(support[c]) : 1.0;
    sum += w * *out.per_class[c];
    weight += w;
  }
  out.value = sum / weight;
  return out;
}

inline double macro_ovr_auc(std::span<const double> proba, std::size_t n_classes, std::span<const Label> truth) {
  return multiclass_auc(proba, n_classes, truth, AucAverage::Macro).value;
}

/// Competition total score: 0.75 * accuracy + 0.25 * AUC. The weights
/// reproduce every published top-10 leaderboard row at two decimals.
inline constexpr double kAccuracyWeight = 0.75;
inline constexpr double kAucWeight = 0.25;

inline double total_score(double acc, double auc) {
  if (!(acc >= 0.0 && acc <= 1.0) || !(auc >= 0.0 && auc <= 1.0)) {
    throw RangeError("accuracy and AUC must lie in [0, 1]");
  }
  return kAccuracyWeight * acc + kAucWeight * auc;
}

/// Two-decimal display form used on the leaderboard.
inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::optional<double>> auc_per_class;
  std::vector<Label> auc_excluded;
  double macro_auc = 0.0;
  double total_score = 0.0;
  std::vector<std::optional<double>> per_class_recall;
  std::vector<std::size_t> support;
  double macro_recall = 0.0;
  std::size_t n_eval = 0;
};

/// Full report from predicted labels, the n x C probability matrix and the truth.
inline EvalReport evaluate(std::span<const Label> predicted, std::span<const double> proba, std::size_t n_classes,
                           std::span<const Label> truth, AucAverage average = AucAverage::Macro) {
  EvalReport r;
  r.n_eval = truth.size();
  r.accuracy = accuracy(predicted, truth);
  auto auc = multiclass_auc(proba, n_classes, truth, average);
  r.macro_auc = auc.value;
  r.auc_per_class = std::move(auc.per_class);
  r.auc_excluded = std::move(auc.excluded);
  r.total_score = total_score(r.accuracy, r.macro_auc);
  r.per_class_recall = per_class_recall(predicted, truth, n_classes);
  r.macro_recall = macro_recall(r.per_class_recall);
  r.support.assign(n_classes, 0);
  for (Label t : truth) ++r.support[t];
  return r;
}

namespace detail {
inline std::string fmt_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
inline std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_metric(*v) : "undefined"; }
}  // namespace detail

inline std::string format_report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "metric,value\n"
      << "n_eval," << r.n_eval << '\n'
      << "accuracy," << detail::fmt_metric(r.accuracy) << '\n'
      << "macro_auc," << detail::fmt_metric(r.macro_auc) << '\n'
      << "total_score," << detail::fmt_metric(r.total_score) << '\n'
      << "macro_recall," << detail::fmt_metric(r.macro_recall) << '\n';
  for (std::size_t c = 0; c < r.auc_per_class.size(); ++c) {
    out << "auc_class_" << c << ',' << detail::fmt_optional(r.auc_per_class[c]) << '\n';
  }
  return out.str();
}

inline std::string format_recall_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "class,support,recall\n";
  for (std::size_t c = 0; c < r.per_class_recall.size(); ++c) {
    out << c << ',' << r.support[c] << ',' << detail::fmt_optional(r.per_class_recall[c]) << '\n';
  }
  return out.str();
}

inline std::string format_report_table(const EvalReport& r) {
  std::ostringstream out;
  out << "samples evaluated : " << r.n_eval << '\n'
      << "accuracy          : " << detail::fmt_metric(r.accuracy) << '\n'
      << "AUC               : " << detail::fmt_metric(r.macro_auc) << '\n'
      << "total score       : " << format_score(r.total_score) << " (" << detail::fmt_metric(r.total_score)
      << ")\n"
      << "macro recall      : " << detail::fmt_metric(r.macro_recall) << "\n\n"
      << "class  support  recall     auc\n";
  for (std::size_t c = 0; c < r.per_class_recall.size(); ++c) {
    char line[96];
    std::snprintf(line, sizeof line, "%5zu  %7zu  %-9s  %s\n", c, r.support[c],
                  detail::fmt_optional(r.per_class_recall[c]).c_str(),
                  detail::fmt_optional(r.auc_per_class[c]).c_str());
    out << line;
  }
  if (!r.auc_excluded.empty()) {
    out << "AUC excluded classes:";
    for (Label c : r.auc_excluded) out << ' ' << c;
    out << '\n';
  }
  return out.str();
}

}  // namespace ltsar
