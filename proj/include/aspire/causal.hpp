#pragma once

// Doubly-robust (AIPW) effect estimation with tree nuisance models, clipped
// propensities and nonparametric bootstrap intervals.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspire/core/csv.hpp"
#include "aspire/core/errors.hpp"
#include "aspire/core/parallel.hpp"
#include "aspire/core/random.hpp"
#include "aspire/dataset.hpp"
#include "aspire/learn/tree.hpp"
#include "aspire/pipeline.hpp"
#include "aspire/treatments.hpp"

namespace aspire::causal {

inline constexpr double kClipLow = 0.001;
inline constexpr double kClipHigh = 0.999;

struct CausalFrame {
  std::string treatment;
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix X;
  Vector T;
  Vector Y;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }

  CausalFrame subset(std::span<const std::size_t> keep) const {
    CausalFrame f;
    f.treatment = treatment;
    f.columns = columns;
    f.X.resize(static_cast<Eigen::Index>(keep.size()), X.cols());
    f.T.resize(static_cast<Eigen::Index>(keep.size()));
    f.Y.resize(f.T.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(keep[k]);
      const auto i = static_cast<Eigen::Index>(k);
      f.X.row(i) = X.row(r);
      f.T(i) = T(r);
      f.Y(i) = Y(r);
      if (!ids.empty()) f.ids.push_back(ids[keep[k]]);
    }
    return f;
  }
};

/// Columns that define `t` and therefore leave the covariate set.
inline std::vector<std::string> treatment_columns(const Treatment& t) {
  if (t.kind == Treatment::Kind::medication) return pipeline::medication_columns(t.drug_class);
  return {t.name()};
}

inline Treatment require_treatment(std::string_view name) {
  if (auto t = parse_treatment(name)) return *t;
  std::string valid;
  for (const auto& n : treatment_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("causal.treatment", "unknown treatment '" + std::string(name) + "'; valid treatments: " + valid);
}

/// T is the treatment's any_given or site flag. For opioids, a dose threshold
/// instead sets T = 1 iff max_daily_mme >= threshold.
inline CausalFrame build_frame(const Dataset& d, const Treatment& t,
                               std::optional<double> opioid_dose_threshold = std::nullopt) {
  if (d.rows() == 0) throw DataError("build_frame: empty cohort");
  const auto drop = treatment_columns(t);
  for (const auto& c : drop) {
    if (!d.has_column(c)) throw DataError("build_frame: treatment column '" + c + "' absent");
  }
  Vector T(static_cast<Eigen::Index>(d.rows()));
  const bool by_dose = opioid_dose_threshold && t.kind == Treatment::Kind::medication && t.drug_class == DrugClass::opioid;
  const auto source = static_cast<Eigen::Index>(d.column(by_dose ? "max_daily_mme" : drop.front()));
  for (Eigen::Index i = 0; i < T.size(); ++i) {
    T(i) = by_dose ? (d.X(i, source) >= *opioid_dose_threshold ? 1.0 : 0.0) : (d.X(i, source) > 0.5 ? 1.0 : 0.0);
  }

  std::vector<Eigen::Index> keep;
  CausalFrame f;
  f.treatment = t.name();
  f.ids = d.ids;
  for (std::size_t c = 0; c < d.cols(); ++c) {
    if (std::find(drop.begin(), drop.end(), d.columns[c]) != drop.end()) continue;
    keep.push_back(static_cast<Eigen::Index>(c));
    f.columns.push_back(d.columns[c]);
  }
  f.X = d.X(Eigen::all, keep);
  f.T = std::move(T);
  f.Y = d.y;
  if (!f.X.allFinite()) throw DataError("build_frame: covariates contain missing values; impute first");
  return f;
}

// ---- propensity audit ----

struct PropensityAudit {
  std::atomic<std::uint64_t> checked{0};
  std::atomic<std::uint64_t> out_of_bounds{0};
};

/// Process-wide tally of every propensity that entered an estimate.
inline PropensityAudit& propensity_audit() {
  static PropensityAudit audit;
  return audit;
}

// ---- nuisance models ----

struct NuisanceParams {
  std::optional<std::size_t> max_depth;  // none: grow until leaves reach min_samples_leaf
  std::size_t min_samples_leaf = 20;
  std::size_t cross_fit_folds = 0;       // 0 or 1: fit and predict on the same rows
};

struct Nuisances {
  Vector e, mu1, mu0;
};

namespace detail {

inline void require_binary(const Vector& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i))) throw DataError(std::string("NaN in ") + what);
    if (v(i) != 0.0 && v(i) != 1.0) throw DataError(std::string(what) + " must be 0 or 1");
  }
}

inline learn::TreeParams tree_params(learn::SplitCriterion c, const NuisanceParams& p) {
  learn::TreeParams tp;
  tp.criterion = c;
  tp.max_depth = p.max_depth;
  tp.min_samples_leaf = std::max<std::size_t>(1, p.min_samples_leaf);
  tp.min_samples_split = 2 * tp.min_samples_leaf;
  return tp;
}

/// Fits on `fit_rows`, predicts for `predict_rows` (both index X).
inline void fit_predict(const CausalFrame& f, std::span<const std::size_t> fit_rows,
                        std::span<const std::size_t> predict_rows, const NuisanceParams& p,
                        const learn::ColumnOrder* order, Nuisances& out, std::span<const std::size_t> out_slots) {
  std::vector<std::size_t> treated, control;
  for (auto r : fit_rows) (f.T(static_cast<Eigen::Index>(r)) > 0.5 ? treated : control).push_back(r);
  if (treated.empty() || control.empty()) throw EstimationError("positivity violation: one treatment arm is empty");

  const auto prop = learn::fit_tree(f.X, f.T, fit_rows, tree_params(learn::SplitCriterion::gini, p), order);
  const auto m1 = learn::fit_tree(f.X, f.Y, treated, tree_params(learn::SplitCriterion::variance, p), order);
  const auto m0 = learn::fit_tree(f.X, f.Y, control, tree_params(learn::SplitCriterion::variance, p), order);
  for (std::size_t k = 0; k < predict_rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(predict_rows[k]);
    const auto s = static_cast<Eigen::Index>(out_slots[k]);
    out.e(s) = std::clamp(prop.predict_row(f.X, r), kClipLow, kClipHigh);
    out.mu1(s) = std::clamp(m1.predict_row(f.X, r), 0.0, 1.0);
    out.mu0(s) = std::clamp(m0.predict_row(f.X, r), 0.0, 1.0);
  }
}

}  // namespace detail

/// Nuisance predictions for each entry of `rows` (indices into the frame,
/// repeats allowed). With cross-fitting, positions are split into folds by
/// `seed` and each fold is predicted by models fitted on the others.
inline Nuisances fit_nuisances(const CausalFrame& f, std::span<const std::size_t> rows, const NuisanceParams& p,
                               std::uint64_t seed = 0, const learn::ColumnOrder* order = nullptr) {
  Nuisances out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.e.resize(n);
  out.mu1.resize(n);
  out.mu0.resize(n);
  if (p.cross_fit_folds <= 1) {
    std::vector<std::size_t> slots(rows.size());
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    detail::fit_predict(f, rows, rows, p, order, out, slots);
    return out;
  }
  std::vector<std::size_t> positions(rows.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(positions);
  const std::size_t K = p.cross_fit_folds;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> fit, predict, slots;
    for (std::size_t q = 0; q < positions.size(); ++q) {
      if (q % K == k) {
        predict.push_back(rows[positions[q]]);
        slots.push_back(positions[q]);
      } else {
        fit.push_back(rows[positions[q]]);
      }
    }
    detail::fit_predict(f, fit, predict, p, order, out, slots);
  }
  return out;
}

inline Nuisances fit_nuisances(const CausalFrame& f, const NuisanceParams& p = {}, std::uint64_t seed = 0) {
  std::vector<std::size_t> all(f.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_nuisances(f, all, p, seed);
}

/// Clipped tree propensity for every row.
inline Vector fit_propensity(const CausalFrame& f, const NuisanceParams& p = {}) { return fit_nuisances(f, p).e; }

// ---- estimator ----

/// Mean AIPW score. Propensities are clipped before use and tallied in the audit.
inline double aipw_point(std::span<const double> T, std::span<const double> Y, std::span<const double> e,
                         std::span<const double> mu1, std::span<const double> mu0) {
  const std::size_t n = T.size();
  if (n == 0) throw EstimationError("aipw: no rows");
  if (Y.size() != n || e.size() != n || mu1.size() != n || mu0.size() != n) throw DataError("aipw: length mismatch");
  auto& audit = propensity_audit();
  double sum = 0.0;
  std::uint64_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(T[i]) || std::isnan(Y[i]) || std::isnan(e[i]) || std::isnan(mu1[i]) || std::isnan(mu0[i])) {
      throw DataError("aipw: NaN input");
    }
    const double ei = std::clamp(e[i], kClipLow, kClipHigh);
    if (!(ei >= kClipLow && ei <= kClipHigh)) ++bad;
    sum += mu1[i] - mu0[i] + T[i] * (Y[i] - mu1[i]) / ei - (1.0 - T[i]) * (Y[i] - mu0[i]) / (1.0 - ei);
  }
  audit.checked += n;
  audit.out_of_bounds += bad;
  return sum / static_cast<double>(n);
}

inline double aipw_point(const Vector& T, const Vector& Y, const Vector& e, const Vector& mu1, const Vector& mu0) {
  const auto s = [](const Vector& v) { return std::span<const double>(v.data(), static_cast<std::size_t>(v.size())); };
  return aipw_point(s(T), s(Y), s(e), s(mu1), s(mu0));
}

namespace detail {

inline double estimate_on_rows(const CausalFrame& f, std::span<const std::size_t> rows, const NuisanceParams& p,
                               std::uint64_t seed, const learn::ColumnOrder* order) {
  const auto nu = fit_nuisances(f, rows, p, seed, order);
  Vector T(static_cast<Eigen::Index>(rows.size())), Y(T.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    T(static_cast<Eigen::Index>(k)) = f.T(static_cast<Eigen::Index>(rows[k]));
    Y(static_cast<Eigen::Index>(k)) = f.Y(static_cast<Eigen::Index>(rows[k]));
  }
  return aipw_point(T, Y, nu.e, nu.mu1, nu.mu0);
}

inline void check_frame(const CausalFrame& f) {
  if (f.rows() == 0) throw EstimationError("empty causal frame");
  if (f.T.size() != f.X.rows() || f.Y.size() != f.X.rows()) throw DataError("causal frame: row count mismatch");
  require_binary(f.T, "treatment");
  require_binary(f.Y, "outcome");
  if (!f.X.allFinite()) throw DataError("causal frame: NaN covariate");
  const double treated = f.T.sum();
  if (treated == 0.0 || treated == static_cast<double>(f.rows())) {
    throw EstimationError("positivity violation for '" + f.treatment + "': all rows are " +
                          (treated == 0.0 ? "untreated" : "treated"));
  }
}

}  // namespace detail

struct CausalEstimate {
  double point = 0.0;
  double half_width = 0.0;             // z * sd of replicates
  double percentile_half_width = 0.0;  // (ci_high - ci_low) / 2
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::vector<double> replicates;
  std::size_t n_boot = 0;
  std::size_t n = 0;
  std::size_t n_treated = 0;
  double clip_low = kClipLow;
  double clip_high = kClipHigh;

  bool significant() const { return ci_low > 0.0 || ci_high < 0.0; }
};

inline double aipw_ate(const CausalFrame& f, const NuisanceParams& p = {}, std::uint64_t seed = 0) {
  detail::check_frame(f);
  std::vector<std::size_t> all(f.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::estimate_on_rows(f, all, p, seed, nullptr);
}

/// Standard normal quantile, by bisection on erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Linear-interpolation percentile (q in [0, 1]).
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Fills the interval fields of `est` from its replicates.
inline void summarize_replicates(CausalEstimate& est) {
  const auto& r = est.replicates;
  if (r.size() < 2) throw std::invalid_argument("summarize_replicates: need at least two replicates");
  if (!(est.level > 0.0 && est.level < 1.0)) throw ConfigError("causal.level", "must lie in (0, 1)");
  est.n_boot = r.size();
  // Shifted by the first replicate so that identical replicates give exactly zero.
  double s = 0.0, ss = 0.0;
  for (double v : r) {
    s += v - r.front();
    ss += (v - r.front()) * (v - r.front());
  }
  const double m = static_cast<double>(r.size());
  const double sd = std::sqrt(std::max(0.0, (ss - s * s / m) / (m - 1.0)));
  const double alpha = 1.0 - est.level;
  est.half_width = normal_quantile(1.0 - alpha / 2.0) * sd;
  est.ci_low = percentile(r, alpha / 2.0);
  est.ci_high = percentile(r, 1.0 - alpha / 2.0);
  est.percentile_half_width = 0.5 * (est.ci_high - est.ci_low);
}

struct BootstrapParams {
  std::size_t n_boot = 1000;
  double level = 0.95;
  std::size_t max_redraws = 10;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  NuisanceParams nuisance;
};

/// Point estimate plus bootstrap replicates; replicate b uses seed
/// derive_seed(seed, b) so results do not depend on the thread count.
inline CausalEstimate estimate(const CausalFrame& f, const BootstrapParams& bp) {
  if (bp.n_boot < 2) throw ConfigError("causal.n_boot", "must be at least 2");
  detail::check_frame(f);
  const learn::ColumnOrder order(f.X);
  const std::size_t n = f.rows();

  CausalEstimate est;
  est.level = bp.level;
  est.n = n;
  est.n_treated = static_cast<std::size_t>(f.T.sum());
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  est.point = detail::estimate_on_rows(f, all, bp.nuisance, bp.seed, &order);

  est.replicates.assign(bp.n_boot, 0.0);
  parallel_for(bp.n_boot, bp.threads, [&](std::size_t b) {
    Rng rng(derive_seed(bp.seed, b));
    std::vector<std::size_t> sample(n);
    for (std::size_t attempt = 0;; ++attempt) {
      std::size_t treated = 0;
      for (auto& s : sample) {
        s = rng.index(n);
        treated += f.T(static_cast<Eigen::Index>(s)) > 0.5 ? 1 : 0;
      }
      if (treated > 0 && treated < n) break;
      if (attempt + 1 >= bp.max_redraws) {
        throw EstimationError("bootstrap replicate " + std::to_string(b) + " drew a single treatment arm " +
                              std::to_string(bp.max_redraws) + " times");
      }
    }
    est.replicates[b] = detail::estimate_on_rows(f, sample, bp.nuisance, rng.next(), &order);
  });
  summarize_replicates(est);
  return est;
}

struct GroupComparison {
  std::string group_column;
  std::map<std::string, CausalEstimate> groups;  // level name -> estimate
  std::string difference_label;                   // "<b> - <a>"
  CausalEstimate difference;
};

/// Separate estimates for rows with group_column == 0 and == 1. The difference
/// (level 1 minus level 0) uses elementwise replicate differences.
inline GroupComparison cate_by_group(const CausalFrame& f, const std::string& group_column,
                                     const std::array<std::string, 2>& level_names, const BootstrapParams& bp) {
  const auto it = std::find(f.columns.begin(), f.columns.end(), group_column);
  if (it == f.columns.end()) throw DataError("cate: group column '" + group_column + "' absent from frame");
  const auto c = static_cast<Eigen::Index>(it - f.columns.begin());
  std::array<std::vector<std::size_t>, 2> rows;
  for (std::size_t r = 0; r < f.rows(); ++r) rows[f.X(static_cast<Eigen::Index>(r), c) > 0.5 ? 1 : 0].push_back(r);

  GroupComparison out;
  out.group_column = group_column;
  std::array<CausalEstimate, 2> est;
  for (std::size_t g = 0; g < 2; ++g) {
    if (rows[g].empty()) throw EstimationError("cate: subgroup '" + level_names[g] + "' is empty");
    CausalFrame sub = f.subset(rows[g]);
    sub.treatment = f.treatment + " [" + level_names[g] + "]";
    BootstrapParams gp = bp;
    gp.seed = derive_seed(bp.seed, g);
    est[g] = estimate(sub, gp);
    out.groups[level_names[g]] = est[g];
  }
  out.difference_label = level_names[1] + " - " + level_names[0];
  out.difference.level = bp.level;
  out.difference.point = est[1].point - est[0].point;
  out.difference.n = f.rows();
  out.difference.replicates.resize(bp.n_boot);
  for (std::size_t b = 0; b < bp.n_boot; ++b) out.difference.replicates[b] = est[1].replicates[b] - est[0].replicates[b];
  summarize_replicates(out.difference);
  return out;
}

inline GroupComparison cate_by_gender(const CausalFrame& f, const BootstrapParams& bp) {
  return cate_by_group(f, "gender=male", {"female", "male"}, bp);
}

// ---- reporting ----

inline std::string format_estimate(const CausalEstimate& e, int digits = 2) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f \xC2\xB1 %.*f", digits, e.point, digits, e.half_width);
  return buf;
}

inline nlohmann::json to_json(const CausalEstimate& e) {
  return {{"point", e.point},
          {"half_width", e.half_width},
          {"percentile_half_width", e.percentile_half_width},
          {"ci_low", e.ci_low},
          {"ci_high", e.ci_high},
          {"level", e.level},
          {"significant", e.significant()},
          {"n", e.n},
          {"n_treated", e.n_treated},
          {"n_boot", e.n_boot},
          {"clip", {e.clip_low, e.clip_high}}};
}

struct AteRow {
  std::string treatment;
  CausalEstimate estimate;
};

inline const std::vector<std::string>& ate_csv_header() {
  static const std::vector<std::string> h = {"treatment", "point",    "half_width", "percentile_half_width",
                                             "ci_low",    "ci_high",  "significant", "n", "n_treated", "n_boot"};
  return h;
}

inline void write_ate_csv(const std::filesystem::path& path, std::span<const AteRow> rows) {
  csv::Writer out(path, ate_csv_header());
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    out.row({r.treatment, csv::format(e.point), csv::format(e.half_width), csv::format(e.percentile_half_width),
             csv::format(e.ci_low), csv::format(e.ci_high), e.significant() ? "1" : "0",
             std::to_string(e.n), std::to_string(e.n_treated), std::to_string(e.n_boot)});
  }
}

inline nlohmann::json ate_table_json(std::span<const AteRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    auto item = to_json(r.estimate);
    item["treatment"] = r.treatment;
    j.push_back(std::move(item));
  }
  return j;
}

inline nlohmann::json to_json(const GroupComparison& g) {
  nlohmann::json j = {{"group_column", g.group_column}};
  for (const auto& [name, e] : g.groups) j["groups"][name] = to_json(e);
  j["difference"] = to_json(g.difference);
  j["difference"]["label"] = g.difference_label;
  return j;
}

}  // namespace aspire::causal
