#pragma once

// Cohort construction: report labeling, surgical cohort selection with a
// post-operative window, the per-admission cutoff, and feature extraction from
// events at or before that cutoff.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspire/core/errors.hpp"
#include "aspire/core/random.hpp"
#include "aspire/dataset.hpp"
#include "aspire/domain.hpp"

namespace aspire::pipeline {

// ---------------------------------------------------------------------------
// Report labeling

class ReportLabeler {
 public:
  virtual ~ReportLabeler() = default;
  /// True iff the report documents aspiration. Throws LabelingError on failure.
  virtual bool label(std::string_view report_text) const = 0;
};

/// Phrase match on "aspiration" (covers "aspiration pneumonia") unless a
/// negation cue appears earlier in the same sentence.
class RuleLabeler final : public ReportLabeler {
 public:
  bool label(std::string_view report_text) const override {
    const std::string text = to_lower(report_text);
    std::size_t sentence_start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == '.' || text[i] == ';' || text[i] == '\n') {
        if (sentence_mentions_aspiration(std::string_view(text).substr(sentence_start, i - sentence_start))) {
          return true;
        }
        sentence_start = i + 1;
      }
    }
    return false;
  }

 private:
  static constexpr std::string_view kPhrase = "aspiration";
  static constexpr std::array<std::string_view, 6> kNegations = {"no", "not", "without", "negative", "free", "denies"};

  static bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

  static bool negated_before(std::string_view prefix) {
    std::size_t i = 0;
    while (i < prefix.size()) {
      while (i < prefix.size() && !is_word_char(prefix[i])) ++i;
      const std::size_t start = i;
      while (i < prefix.size() && is_word_char(prefix[i])) ++i;
      const std::string_view word = prefix.substr(start, i - start);
      if (std::find(kNegations.begin(), kNegations.end(), word) != kNegations.end()) return true;
    }
    return false;
  }

  static bool sentence_mentions_aspiration(std::string_view sentence) {
    for (std::size_t pos = sentence.find(kPhrase); pos != std::string_view::npos;
         pos = sentence.find(kPhrase, pos + 1)) {
      const bool word_start = pos == 0 || !is_word_char(sentence[pos - 1]);
      if (word_start && !negated_before(sentence.substr(0, pos))) return true;
    }
    return false;
  }
};

/// Labels one report. A label already attached to the report wins.
inline bool label_report(const RadiologyReport& report, const ReportLabeler& labeler) {
  if (report.label()) return *report.label();
  if (report.text.empty()) throw LabelingError("cannot label an empty report");
  return labeler.label(report.text);
}

// ---------------------------------------------------------------------------
// Morphine equivalents

/// MME (mg) of one opioid administration. mcg and mg are converted to the
/// table's unit before applying the factor.
inline double compute_mme(const MedicationEvent& event, const MmeTable& table) {
  if (event.drug_class != DrugClass::opioid) {
    throw DataError("compute_mme: '" + event.drug_name + "' is not an opioid");
  }
  auto it = table.find(to_lower(event.drug_name));
  if (it == table.end()) {
    throw DataError("no MME conversion factor for opioid '" + event.drug_name + "'");
  }
  const MmeFactor& f = it->second;
  double amount = event.dose;
  if (event.unit != f.unit) {
    if (event.unit == DoseUnit::mcg && f.unit == DoseUnit::mg) {
      amount /= 1000.0;
    } else if (event.unit == DoseUnit::mg && f.unit == DoseUnit::mcg) {
      amount *= 1000.0;
    } else {
      throw DataError("cannot convert " + std::string(to_string(event.unit)) + " of '" + event.drug_name +
                      "' to " + std::string(to_string(f.unit)));
    }
  }
  return amount * f.factor;
}

/// Largest calendar-day MME total over opioid events in [t_adm, t_cutoff].
inline double max_daily_mme(std::span<const MedicationEvent> events, Minutes t_adm, Minutes t_cutoff,
                            const MmeTable& table, Minutes tz_offset_minutes = 0) {
  std::map<std::int64_t, double> per_day;
  for (const auto& e : events) {
    if (e.drug_class != DrugClass::opioid || e.time > t_cutoff || e.time < t_adm) continue;
    per_day[calendar_day(e.time, tz_offset_minutes)] += compute_mme(e, table);
  }
  double best = 0.0;
  for (const auto& [day, total] : per_day) best = std::max(best, total);
  return best;
}

// ---------------------------------------------------------------------------
// Features

struct MedAggregate {
  bool any_given = false;
  double total_dose = 0.0;  // MME for opioids, class units otherwise
  double max_daily = 0.0;
  bool operator==(const MedAggregate&) const = default;
};

/// History flags used as features (prior_aspiration is a cohort filter, not a feature).
inline constexpr std::array<HistoryFlag, 6> kFeatureHistoryFlags = {
    HistoryFlag::stroke,  HistoryFlag::dyslipidemia, HistoryFlag::dysphagia,
    HistoryFlag::obesity, HistoryFlag::hypertension, HistoryFlag::diabetes};

struct FeatureVector {
  double age = std::numeric_limits<double>::quiet_NaN();
  Gender gender = Gender::female;
  std::string language;  // normalized level
  std::string race;      // normalized level
  double los_until_surgery = 0.0;  // days
  std::array<bool, kFeatureHistoryFlags.size()> history{};
  std::array<bool, kSiteCount> sites{};
  std::array<MedAggregate, kDrugClassCount> meds{};

  double max_daily_mme() const { return meds[static_cast<std::size_t>(DrugClass::opioid)].max_daily; }

  bool operator==(const FeatureVector& o) const {
    const bool same_age = (std::isnan(age) && std::isnan(o.age)) || age == o.age;
    return same_age && gender == o.gender && language == o.language && race == o.race &&
           los_until_surgery == o.los_until_surgery && history == o.history && sites == o.sites &&
           meds == o.meds;
  }
};

struct LabeledSample {
  std::string admission_id;
  FeatureVector features;
  bool label = false;
  Minutes t_cutoff = 0;
};

namespace detail {

inline double class_amount(const MedicationEvent& e) {
  return e.unit == DoseUnit::mcg ? e.dose / 1000.0 : e.dose;
}

}  // namespace detail

/// Aggregates events in [t_adm, t_cutoff]; later events never influence the result.
inline FeatureVector extract_features(const AdmissionBundle& bundle, Minutes t_cutoff, const MmeTable& table,
                                      Minutes tz_offset_minutes = 0) {
  if (t_cutoff < bundle.t_adm) {
    throw DataError(bundle.admission_id + ": cutoff precedes admission");
  }
  FeatureVector f;
  f.age = bundle.age ? static_cast<double>(*bundle.age) : std::numeric_limits<double>::quiet_NaN();
  f.gender = bundle.gender;
  f.language = normalize_level(bundle.language, kLanguageLevels);
  f.race = normalize_level(bundle.race, kRaceLevels);
  f.los_until_surgery = minutes_to_days(t_cutoff - bundle.t_adm);
  for (std::size_t k = 0; k < kFeatureHistoryFlags.size(); ++k) f.history[k] = bundle.history.has(kFeatureHistoryFlags[k]);
  for (const auto& s : bundle.surgeries) {
    if (s.time <= t_cutoff) f.sites[static_cast<std::size_t>(s.site)] = true;
  }

  std::array<std::map<std::int64_t, double>, kDrugClassCount> per_day;
  for (const auto& e : bundle.medications) {
    if (e.time > t_cutoff || e.time < bundle.t_adm) continue;
    const auto cls = static_cast<std::size_t>(e.drug_class);
    const double amount = e.drug_class == DrugClass::opioid ? compute_mme(e, table) : detail::class_amount(e);
    f.meds[cls].any_given = true;
    f.meds[cls].total_dose += amount;
    per_day[cls][calendar_day(e.time, tz_offset_minutes)] += amount;
  }
  for (std::size_t cls = 0; cls < kDrugClassCount; ++cls) {
    for (const auto& [day, total] : per_day[cls]) f.meds[cls].max_daily = std::max(f.meds[cls].max_daily, total);
  }
  return f;
}

/// Total length of stay in days; used only for error analysis, never as a feature.
inline double los_until_discharge(const AdmissionBundle& bundle) {
  return minutes_to_days(bundle.t_discharge - bundle.t_adm);
}

/// Fixed column order of the design matrix; categorical levels are lexicographic.
inline std::vector<std::string> feature_columns() {
  std::vector<std::string> cols = {"age"};
  for (auto g : kGenderNames) cols.push_back("gender=" + std::string(g));
  for (auto l : kLanguageLevels) cols.push_back("language=" + std::string(l));
  for (auto r : kRaceLevels) cols.push_back("race=" + std::string(r));
  cols.push_back("los_until_surgery");
  for (auto h : kFeatureHistoryFlags) cols.push_back("history:" + std::string(to_string(h)));
  for (auto s : kSiteNames) cols.push_back("site:" + std::string(s));
  for (std::size_t c = 0; c < kDrugClassCount; ++c) {
    const std::string name(kDrugClassNames[c]);
    if (static_cast<DrugClass>(c) == DrugClass::opioid) {
      cols.insert(cols.end(), {"opioid:any_given", "opioid:total_mme", "max_daily_mme"});
    } else {
      cols.insert(cols.end(), {name + ":any_given", name + ":total_dose", name + ":max_daily"});
    }
  }
  return cols;
}

/// Columns that describe medication class `cls` (removed from covariates when it is the treatment).
inline std::vector<std::string> medication_columns(DrugClass cls) {
  if (cls == DrugClass::opioid) return {"opioid:any_given", "opioid:total_mme", "max_daily_mme"};
  const std::string name(to_string(cls));
  return {name + ":any_given", name + ":total_dose", name + ":max_daily"};
}

inline std::vector<double> feature_row(const FeatureVector& f) {
  std::vector<double> row = {f.age};
  for (auto g : kGenderNames) row.push_back(to_string(f.gender) == g ? 1.0 : 0.0);
  const std::string language = normalize_level(f.language, kLanguageLevels);
  const std::string race = normalize_level(f.race, kRaceLevels);
  for (auto l : kLanguageLevels) row.push_back(language == l ? 1.0 : 0.0);
  for (auto r : kRaceLevels) row.push_back(race == r ? 1.0 : 0.0);
  row.push_back(f.los_until_surgery);
  for (bool h : f.history) row.push_back(h ? 1.0 : 0.0);
  for (bool s : f.sites) row.push_back(s ? 1.0 : 0.0);
  for (const auto& m : f.meds) {
    row.push_back(m.any_given ? 1.0 : 0.0);
    row.push_back(m.total_dose);
    row.push_back(m.max_daily);
  }
  return row;
}

/// Dense design matrix with one row per sample in input order.
inline Dataset assemble_dataset(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw DataError("assemble_dataset: no samples");
  Dataset d;
  d.columns = feature_columns();
  d.X.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d.columns.size()));
  d.y.resize(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto row = feature_row(samples[r].features);
    if (row.size() != d.columns.size()) {
      throw DataError("assemble_dataset: sample " + samples[r].admission_id + " does not match the feature schema");
    }
    for (std::size_t c = 0; c < row.size(); ++c) d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    d.y(static_cast<Eigen::Index>(r)) = samples[r].label ? 1.0 : 0.0;
    d.ids.push_back(samples[r].admission_id);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Cohort selection

enum class DownsampleMode { count, stratified };

struct CohortOptions {
  int window_days = 7;
  std::uint64_t seed = 42;
  DownsampleMode mode = DownsampleMode::count;
};

struct CohortEntry {
  std::size_t bundle_index = 0;
  std::string admission_id;
  bool label = false;
  Minutes t_cutoff = 0;
  std::optional<Minutes> t_cxr;  // positives only
};

struct Exclusion {
  std::string admission_id;
  std::string reason;
};

struct FlowCounts {
  std::size_t admissions = 0;
  std::size_t no_surgery = 0;
  std::size_t prior_aspiration = 0;
  std::size_t surgical_eligible = 0;
  std::size_t positives = 0;
  std::size_t out_of_window_reports = 0;
  std::size_t eligible_negatives = 0;
  std::size_t retained_negatives = 0;
};

struct CohortSelection {
  std::vector<CohortEntry> positives;
  std::vector<CohortEntry> negatives;
  std::vector<Exclusion> exclusions;
  FlowCounts counts;

  /// Positives and retained negatives ordered by admission_id.
  std::vector<CohortEntry> entries() const {
    std::vector<CohortEntry> all = positives;
    all.insert(all.end(), negatives.begin(), negatives.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.admission_id < b.admission_id; });
    return all;
  }
};

namespace detail {

inline int stratum(const AdmissionBundle& b) {
  const int decile = b.age ? std::min(*b.age / 10, 9) : -1;
  return (b.gender == Gender::male ? 100 : 0) + decile + 1;
}

inline std::vector<CohortEntry> downsample(std::vector<CohortEntry> negatives, const std::vector<CohortEntry>& positives,
                                           std::span<const AdmissionBundle> bundles, const CohortOptions& options) {
  const std::size_t target = positives.size();
  if (negatives.size() <= target) return negatives;
  Rng rng(derive_seed(options.seed, 0x646f776e));
  std::vector<CohortEntry> kept;

  if (options.mode == DownsampleMode::count) {
    rng.shuffle(negatives);
    kept.assign(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(target));
  } else {
    std::map<int, std::size_t> wanted;
    for (const auto& p : positives) ++wanted[stratum(bundles[p.bundle_index])];
    std::map<int, std::vector<CohortEntry>> pools;
    for (auto& n : negatives) pools[stratum(bundles[n.bundle_index])].push_back(n);
    std::vector<CohortEntry> leftover;
    for (auto& [key, pool] : pools) {
      rng.shuffle(pool);
      const std::size_t take = std::min(wanted[key], pool.size());
      kept.insert(kept.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
      leftover.insert(leftover.end(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end());
    }
    std::sort(leftover.begin(), leftover.end(), [](const auto& a, const auto& b) { return a.admission_id < b.admission_id; });
    rng.shuffle(leftover);
    for (std::size_t k = 0; kept.size() < target; ++k) kept.push_back(leftover[k]);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.admission_id < b.admission_id; });
  return kept;
}

}  // namespace detail

/// Builds the positive and negative cohorts.
///
/// An admission is positive when a report labeled positive falls within
/// `window_days` (inclusive) after its latest preceding surgery; that surgery
/// is the cutoff and later surgeries are dropped. Surgical admissions without
/// such a report are negatives with the last surgery as cutoff, then
/// downsampled to the number of positives.
inline CohortSelection select_cohort(std::span<const AdmissionBundle> bundles, const ReportLabeler& labeler,
                                     const CohortOptions& options = {}) {
  if (options.window_days <= 0) throw ConfigError("window_days", "must be positive");
  const Minutes window = static_cast<Minutes>(options.window_days) * kMinutesPerDay;

  std::vector<std::size_t> order(bundles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return bundles[a].admission_id < bundles[b].admission_id; });

  CohortSelection out;
  out.counts.admissions = bundles.size();
  std::vector<CohortEntry> eligible_negatives;
  for (std::size_t idx : order) {
    const AdmissionBundle& b = bundles[idx];
    if (b.surgeries.empty()) {
      out.exclusions.push_back({b.admission_id, "no_surgery"});
      ++out.counts.no_surgery;
      continue;
    }
    if (b.history.has(HistoryFlag::prior_aspiration)) {
      out.exclusions.push_back({b.admission_id, "prior_aspiration"});
      ++out.counts.prior_aspiration;
      continue;
    }
    ++out.counts.surgical_eligible;

    std::optional<CohortEntry> positive;
    bool out_of_window = false;
    std::vector<const RadiologyReport*> reports;
    for (const auto& r : b.reports) reports.push_back(&r);
    std::stable_sort(reports.begin(), reports.end(), [](auto* x, auto* y) { return x->time < y->time; });
    for (const RadiologyReport* r : reports) {
      if (!label_report(*r, labeler)) continue;
      std::optional<Minutes> last_before;
      for (const auto& s : b.surgeries) {
        if (s.time <= r->time) last_before = last_before ? std::max(*last_before, s.time) : s.time;
      }
      if (last_before && r->time - *last_before <= window) {
        positive = CohortEntry{idx, b.admission_id, true, *last_before, r->time};
        break;
      }
      out_of_window = true;
    }

    if (positive) {
      out.positives.push_back(*positive);
      continue;
    }
    if (out_of_window) ++out.counts.out_of_window_reports;
    Minutes last = b.surgeries.front().time;
    for (const auto& s : b.surgeries) last = std::max(last, s.time);
    eligible_negatives.push_back({idx, b.admission_id, false, last, std::nullopt});
  }

  out.counts.positives = out.positives.size();
  out.counts.eligible_negatives = eligible_negatives.size();
  const auto all_negatives = eligible_negatives;
  out.negatives = detail::downsample(std::move(eligible_negatives), out.positives, bundles, options);
  out.counts.retained_negatives = out.negatives.size();

  if (out.negatives.size() < all_negatives.size()) {
    std::size_t k = 0;
    for (const auto& n : all_negatives) {
      if (k < out.negatives.size() && out.negatives[k].admission_id == n.admission_id) {
        ++k;
      } else {
        out.exclusions.push_back({n.admission_id, "downsampled"});
      }
    }
  }
  std::stable_sort(out.exclusions.begin(), out.exclusions.end(),
                   [](const auto& a, const auto& b) { return a.admission_id < b.admission_id; });
  return out;
}

/// Feature extraction for every selected admission, ordered by admission_id.
inline std::vector<LabeledSample> build_samples(std::span<const AdmissionBundle> bundles, const CohortSelection& cohort,
                                                const MmeTable& table, Minutes tz_offset_minutes = 0) {
  std::vector<LabeledSample> out;
  for (const auto& e : cohort.entries()) {
    out.push_back({e.admission_id, extract_features(bundles[e.bundle_index], e.t_cutoff, table, tz_offset_minutes),
                   e.label, e.t_cutoff});
  }
  return out;
}

}  // namespace aspire::pipeline
