#pragma once

// Stratified splitting, ranking and threshold metrics, and the structured
// false-negative profile.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspire/core/errors.hpp"
#include "aspire/core/random.hpp"
#include "aspire/dataset.hpp"
#include "aspire/domain.hpp"

namespace aspire::eval {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, round(n_class * train_fraction) rows go to train. Both index
/// lists are returned in ascending row order.
inline SplitIndices split_indices(std::span<const double> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("pipeline.train_fraction", "must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0.5 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DataError("split: dataset must contain both classes");

  SplitIndices out;
  Rng rng(seed);
  for (auto* group : {&neg, &pos}) {
    rng.shuffle(*group);
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(group->size()) * train_fraction));
    out.train.insert(out.train.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(k));
    out.test.insert(out.test.end(), group->begin() + static_cast<std::ptrdiff_t>(k), group->end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (d.rows() < 2) throw DataError("split: need at least two rows");
  const auto idx = split_indices(std::span<const double>(d.y.data(), d.rows()), train_fraction, seed);
  return {d.subset(idx.train), d.subset(idx.test)};
}

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("NaN score");
  }
}

}  // namespace detail

/// Mann-Whitney statistic with midranks for ties.
inline double auroc(std::span<const double> scores, std::span<const double> labels) {
  detail::check_scores(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auroc: labels must contain both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline double auroc(const Vector& scores, const Vector& labels) {
  return auroc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
               std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())));
}

struct RocPoint {
  double threshold;
  double tpr;
  double fpr;
};

/// One point per distinct score (descending), preceded by (+inf, 0, 0).
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> labels) {
  detail::check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double P = 0, N = 0;
  for (double l : labels) (l > 0.5 ? P : N) += 1.0;
  if (P == 0 || N == 0) throw DataError("roc_curve: labels must contain both classes");

  std::vector<RocPoint> out = {{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] > 0.5 ? tp : fp) += 1.0;
    out.push_back({s, tp / P, fp / N});
  }
  return out;
}

struct EvalReport {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double threshold = 0.5;
  double accuracy = 0, sensitivity = 0, specificity = 0;
  double auroc = std::numeric_limits<double>::quiet_NaN();

  std::int64_t total() const { return tp + fp + fn + tn; }
};

/// Predicted positive iff score >= threshold. Rates with an empty denominator are NaN.
inline EvalReport confusion(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5) {
  detail::check_scores(scores, labels);
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = labels[i] > 0.5;
    (truth ? (pred ? r.tp : r.fn) : (pred ? r.fp : r.tn)) += 1;
  }
  const auto ratio = [](std::int64_t a, std::int64_t b) {
    return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : std::numeric_limits<double>::quiet_NaN();
  };
  r.accuracy = ratio(r.tp + r.tn, r.total());
  r.sensitivity = ratio(r.tp, r.tp + r.fn);
  r.specificity = ratio(r.tn, r.tn + r.fp);
  return r;
}

/// Confusion at `threshold` plus AUROC when both classes are present.
inline EvalReport evaluate(const Vector& scores, const Vector& labels, double threshold = 0.5) {
  const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
  const std::span<const double> l(labels.data(), static_cast<std::size_t>(labels.size()));
  EvalReport r = confusion(s, l, threshold);
  if (r.tp + r.fn > 0 && r.tn + r.fp > 0) r.auroc = auroc(s, l);
  return r;
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"accuracy", number_or_null(r.accuracy)},
          {"sensitivity", number_or_null(r.sensitivity)},
          {"specificity", number_or_null(r.specificity)},
          {"auroc", number_or_null(r.auroc)},
          {"threshold", r.threshold},
          {"confusion", {{"TP", r.tp}, {"FP", r.fp}, {"FN", r.fn}, {"TN", r.tn}}},
          {"n", r.total()}};
}

// ---- false-negative profile ----

struct Summary {
  std::size_t n = 0;
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
};

/// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// NaN values are ignored.
inline Summary summarize(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  std::sort(values.begin(), values.end());
  Summary s;
  s.n = values.size();
  if (!values.empty()) {
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q3 = quantile_sorted(values, 0.75);
  }
  return s;
}

inline const std::vector<std::string>& fn_profile_features() {
  static const std::vector<std::string> names = {"max_daily_mme", "los_until_surgery", "los_until_discharge"};
  return names;
}

struct GroupProfile {
  std::size_t n = 0;
  std::vector<Summary> features;       // aligned with fn_profile_features()
  std::vector<double> site_percent;    // aligned with kSiteNames
};

struct FnProfile {
  bool empty = true;  // no false negatives
  double threshold = 0.5;
  GroupProfile positives;
  GroupProfile false_negatives;
};

namespace detail {

inline GroupProfile profile_rows(const Dataset& test, std::span<const double> los_discharge,
                                 const std::vector<std::size_t>& rows) {
  GroupProfile g;
  g.n = rows.size();
  const auto col = [&](std::string_view name) { return static_cast<Eigen::Index>(test.column(name)); };
  const Eigen::Index mme = col("max_daily_mme"), los = col("los_until_surgery");
  std::vector<double> a, b, c;
  for (auto r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    a.push_back(test.X(i, mme));
    b.push_back(test.X(i, los));
    c.push_back(los_discharge.empty() ? std::numeric_limits<double>::quiet_NaN() : los_discharge[r]);
  }
  g.features = {summarize(a), summarize(b), summarize(c)};

  // Percent of all site flags in the group; an admission with two sites contributes to both.
  std::vector<double> counts(kSiteCount, 0.0);
  for (std::size_t s = 0; s < kSiteCount; ++s) {
    const auto c_site = col("site:" + std::string(kSiteNames[s]));
    for (auto r : rows) counts[s] += test.X(static_cast<Eigen::Index>(r), c_site) > 0.5 ? 1.0 : 0.0;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  g.site_percent.assign(kSiteCount, 0.0);
  if (total > 0) {
    for (std::size_t s = 0; s < kSiteCount; ++s) g.site_percent[s] = 100.0 * counts[s] / total;
  }
  return g;
}

}  // namespace detail

/// `los_discharge` is aligned with the test rows (may be empty when unknown).
inline FnProfile false_negative_analysis(const Vector& scores, const Dataset& test, std::span<const double> los_discharge,
                                         double threshold = 0.5) {
  if (static_cast<std::size_t>(scores.size()) != test.rows()) throw DataError("fn analysis: score count differs from rows");
  if (!los_discharge.empty() && los_discharge.size() != test.rows()) {
    throw DataError("fn analysis: los_until_discharge length differs from rows");
  }
  std::vector<std::size_t> pos, fn;
  for (std::size_t r = 0; r < test.rows(); ++r) {
    if (test.y(static_cast<Eigen::Index>(r)) <= 0.5) continue;
    pos.push_back(r);
    if (scores(static_cast<Eigen::Index>(r)) < threshold) fn.push_back(r);
  }
  FnProfile p;
  p.threshold = threshold;
  p.empty = fn.empty();
  p.positives = detail::profile_rows(test, los_discharge, pos);
  p.false_negatives = detail::profile_rows(test, los_discharge, fn);
  return p;
}

inline nlohmann::json to_json(const FnProfile& p) {
  const auto group = [](const GroupProfile& g) {
    nlohmann::json j = {{"n", g.n}};
    for (std::size_t f = 0; f < g.features.size(); ++f) {
      const auto& s = g.features[f];
      j["features"][fn_profile_features()[f]] = {{"n", s.n}, {"q1", number_or_null(s.q1)},
                                                 {"median", number_or_null(s.median)}, {"q3", number_or_null(s.q3)}};
    }
    for (std::size_t s = 0; s < g.site_percent.size(); ++s) j["site_percent"][std::string(kSiteNames[s])] = g.site_percent[s];
    return j;
  };
  return {{"empty", p.empty}, {"threshold", p.threshold}, {"positives", group(p.positives)},
          {"false_negatives", group(p.false_negatives)}};
}

}  // namespace aspire::eval
