#pragma once

// Synthetic admissions from a structural causal model with known effects.
//
// For every surgical admission the model draws covariates, a latent opioid
// regimen and a uniform U, then:
//   P(T_c = 1)  = sigmoid(logit(prevalence_c) + sum_k confounder_k * z_k)   for each medication class c
//   risk        = base_i + sum_t tau_t * T_t + tau_mme * min(max_daily_mme, cap) / 100 * T_opioid
//                 + sum_k effect_k * z_k
//   Y(treatments) = 1[U < clamp(risk, 0, 1)]
// base_i is base_risk scaled by a mean-one lognormal factor. Potential outcomes
// toggle one treatment while holding every other draw fixed, so away from the
// clamp the average of Y(1) - Y(0) is exactly tau_t.
//
// Aspirations are reported by a chest X-ray some exponential delay after the
// last surgery; the report text comes from a fixed phrase bank.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "aspire/core/csv.hpp"
#include "aspire/core/errors.hpp"
#include "aspire/core/matrix.hpp"
#include "aspire/core/parallel.hpp"
#include "aspire/core/random.hpp"
#include "aspire/domain.hpp"
#include "aspire/domain_io.hpp"
#include "aspire/treatments.hpp"

namespace aspire::synth {

/// Covariates that may drive treatment assignment or outcome risk.
inline constexpr std::array<std::string_view, 10> kCovariateKeys = {
    "age", "male", "los", "english", "stroke", "dyslipidemia", "dysphagia", "obesity", "hypertension",
    "diabetes"};

/// Effect key for the opioid dose term (risk per 100 MME of max daily dose).
inline constexpr std::string_view kMmeEffectKey = "max_daily_mme";

inline const std::vector<std::string> kPositivePhrases = {
    "Findings consistent with aspiration pneumonia.",
    "New right lower lobe opacity, concerning for aspiration.",
    "Bibasilar airspace disease likely reflecting aspiration.",
};
inline const std::vector<std::string> kNegativePhrases = {
    "No acute cardiopulmonary process.",
    "No evidence of aspiration. Lungs are clear.",
    "Stable cardiomediastinal silhouette. No acute cardiopulmonary process.",
};

struct GeneratorConfig {
  std::size_t n_admissions = 40000;
  std::uint64_t seed = 42;
  double surgery_rate = 0.15;
  double base_risk = 0.02;
  double noise_sd = 0.3;  // sd of the log-scale multiplier on base_risk
  double prior_aspiration_rate = 0.02;
  double negative_report_rate = 0.4;
  double aspiration_delay_mean_days = 1.8;
  double gender_opioid_multiplier = 2.0;
  double mme_cap = 300.0;
  Minutes tz_offset_minutes = 0;
  std::map<std::string, double> treatment_prevalence;  // medication class -> P(T=1) at z = 0
  std::map<std::string, double> confounder_strengths;  // covariate -> logit coefficient
  std::map<std::string, double> effect_coefficients;   // treatment | covariate | max_daily_mme -> risk
  std::array<double, kSiteCount> site_weights{};
};

/// Profile tuned so that 40,000 admissions (a tenth of the original hospital
/// volume) give roughly 826 in-window aspirations after surgery.
inline GeneratorConfig paper_profile() {
  GeneratorConfig c;
  c.treatment_prevalence = {{"opioid", 0.45},       {"non_opioid_analgesic", 0.5}, {"insulin", 0.15},
                            {"saline_flush", 0.6},  {"antiemetic", 0.35}};
  c.confounder_strengths = {{"age", 0.3}, {"male", 0.4}, {"los", 0.15}, {"dysphagia", 0.3}, {"diabetes", 0.2}};
  c.effect_coefficients = {{"opioid", 0.02},        {"max_daily_mme", 0.45},   {"site:neck", 0.1},
                           {"site:head", 0.08},     {"site:upper_abdomen", 0.06}, {"site:spine", 0.05},
                           {"site:thorax", 0.04},   {"age", 0.02},            {"male", 0.01},
                           {"los", 0.01},           {"dysphagia", 0.1},       {"stroke", 0.05}};
  c.base_risk = 0.01;
  c.surgery_rate = 0.087;
  c.site_weights = {0.06, 0.07, 0.12, 0.08, 0.12, 0.14, 0.09, 0.08, 0.16, 0.08};
  return c;
}

namespace detail {

inline void require_probability(double p, const char* field) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "must be a probability in [0, 1]");
}

inline bool is_covariate(std::string_view key) {
  return std::find(kCovariateKeys.begin(), kCovariateKeys.end(), key) != kCovariateKeys.end();
}

inline bool is_medication_treatment(std::string_view key) {
  return std::any_of(kTreatmentDrugClasses.begin(), kTreatmentDrugClasses.end(),
                     [&](DrugClass c) { return to_string(c) == key; });
}

}  // namespace detail

inline void validate(const GeneratorConfig& c) {
  detail::require_probability(c.surgery_rate, "surgery_rate");
  detail::require_probability(c.base_risk, "base_risk");
  detail::require_probability(c.prior_aspiration_rate, "prior_aspiration_rate");
  detail::require_probability(c.negative_report_rate, "negative_report_rate");
  if (!(c.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be non-negative");
  if (!(c.aspiration_delay_mean_days > 0.0)) throw ConfigError("aspiration_delay_mean_days", "must be positive");
  if (!(c.gender_opioid_multiplier > 0.0)) throw ConfigError("gender_opioid_multiplier", "must be positive");
  if (!(c.mme_cap > 0.0)) throw ConfigError("mme_cap", "must be positive");
  for (const auto& [key, p] : c.treatment_prevalence) {
    if (!detail::is_medication_treatment(key)) throw ConfigError("treatment_prevalence." + key, "unknown medication class");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("treatment_prevalence." + key, "must lie in (0, 1)");
  }
  for (const auto& [key, v] : c.confounder_strengths) {
    if (!detail::is_covariate(key)) throw ConfigError("confounder_strengths." + key, "unknown covariate");
    if (!std::isfinite(v)) throw ConfigError("confounder_strengths." + key, "must be finite");
  }
  for (const auto& [key, v] : c.effect_coefficients) {
    if (!parse_treatment(key) && !detail::is_covariate(key) && key != kMmeEffectKey) {
      throw ConfigError("effect_coefficients." + key, "unknown treatment or covariate");
    }
    if (!std::isfinite(v)) throw ConfigError("effect_coefficients." + key, "must be finite");
  }
  double total = 0.0;
  for (double w : c.site_weights) {
    if (!(w >= 0.0)) throw ConfigError("site_weights", "must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("site_weights", "must not all be zero");
}

/// Potential outcomes of one admission in the causal population (surgical admissions).
struct UnitOutcomes {
  std::string admission_id;
  std::vector<std::uint8_t> y1, y0;  // indexed like GroundTruth::treatments
  std::vector<double> p1, p0;        // clamped risks behind y1 / y0
};

struct GroundTruth {
  std::vector<std::string> treatments;
  std::vector<UnitOutcomes> units;
  std::vector<double> analytic_ate;  // mean over units of p1 - p0
  /// Admissions (any history) whose aspiration report falls within `window_days` of the last surgery.
  std::set<std::string> in_window_aspirations;
  int window_days = 7;

  std::size_t treatment_index(std::string_view name) const {
    for (std::size_t j = 0; j < treatments.size(); ++j) {
      if (treatments[j] == name) return j;
    }
    throw ConfigError("treatment", "unknown treatment '" + std::string(name) + "'");
  }

  /// Mean of Y(1) - Y(0) over the population.
  double mean_potential_difference(std::size_t j) const {
    if (units.empty()) return 0.0;
    long long sum = 0;
    for (const auto& u : units) sum += static_cast<int>(u.y1[j]) - static_cast<int>(u.y0[j]);
    return static_cast<double>(sum) / static_cast<double>(units.size());
  }
};

struct SyntheticCohort {
  std::vector<AdmissionBundle> bundles;
  GroundTruth truth;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

inline double value_or(const std::map<std::string, double>& m, std::string_view key, double fallback = 0.0) {
  auto it = m.find(std::string(key));
  return it == m.end() ? fallback : it->second;
}

struct OpioidDose {
  Minutes time;
  std::string drug;
  double dose;
  DoseUnit unit;
  double mme;
};

struct AdmissionDraw {
  AdmissionBundle bundle;
  bool in_population = false;
  bool in_window = false;
  UnitOutcomes outcomes;
};

inline std::string padded_id(char prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 8) digits.insert(0, 8 - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

inline double round_to(double v, double step) { return std::round(v / step) * step; }

struct OtherDrug {
  DrugClass cls;
  const char* name;
  double dose;
  DoseUnit unit;
};

inline OtherDrug other_drug(DrugClass cls, Rng& rng) {
  switch (cls) {
    case DrugClass::non_opioid_analgesic:
      return {cls, "acetaminophen", rng.bernoulli(0.5) ? 650.0 : 1000.0, DoseUnit::mg};
    case DrugClass::insulin:
      return {cls, "insulin regular", static_cast<double>(rng.integer(2, 10)), DoseUnit::units};
    case DrugClass::antiemetic:
      return {cls, "ondansetron", rng.bernoulli(0.8) ? 4.0 : 8.0, DoseUnit::mg};
    case DrugClass::antidiabetic:
      return {cls, "metformin", rng.bernoulli(0.5) ? 500.0 : 1000.0, DoseUnit::mg};
    case DrugClass::saline_flush:
      return {cls, "sodium chloride 0.9% flush", rng.bernoulli(0.5) ? 3.0 : 10.0, DoseUnit::ml};
    case DrugClass::opioid:
      break;
  }
  throw std::logic_error("other_drug: opioid has no fixed regimen");
}

struct OpioidChoice {
  const char* name;
  double mme_per_unit;
  DoseUnit unit;
  double weight;
};

inline constexpr std::array<OpioidChoice, 4> kOpioids = {{
    {"morphine", 1.0, DoseUnit::mg, 0.4},
    {"oxycodone", 1.5, DoseUnit::mg, 0.25},
    {"hydromorphone", 4.0, DoseUnit::mg, 0.2},
    {"fentanyl", 0.1, DoseUnit::mcg, 0.15},
}};

inline OpioidDose draw_opioid(Rng& rng, Minutes time, double scale) {
  std::array<double, kOpioids.size()> weights{};
  for (std::size_t i = 0; i < kOpioids.size(); ++i) weights[i] = kOpioids[i].weight;
  const auto& drug = kOpioids[rng.categorical(weights)];
  const double target_mme = std::exp(rng.normal(std::log(15.0), 0.6)) * scale;
  const double step = drug.unit == DoseUnit::mcg ? 1.0 : 0.01;
  const double dose = std::max(step, round_to(target_mme / drug.mme_per_unit, step));
  return {time, drug.name, dose, drug.unit, dose * drug.mme_per_unit};
}

inline double max_daily(const std::vector<OpioidDose>& doses, Minutes tz) {
  std::map<std::int64_t, double> per_day;
  for (const auto& d : doses) per_day[calendar_day(d.time, tz)] += d.mme;
  double best = 0.0;
  for (const auto& [day, total] : per_day) best = std::max(best, total);
  return best;
}

template <std::size_t N>
std::string pick(Rng& rng, const std::array<const char*, N>& values, const std::array<double, N>& weights) {
  return values[rng.categorical(weights)];
}

/// Draws one admission. Every random draw happens in a fixed order that does
/// not depend on realized treatments, so potential outcomes share all noise.
inline AdmissionDraw draw_admission(const GeneratorConfig& c, std::size_t index,
                                    const std::vector<Treatment>& treatments, int window_days) {
  Rng rng(derive_seed(c.seed, index));
  AdmissionDraw out;
  AdmissionBundle& b = out.bundle;
  b.subject_id = padded_id('S', index);
  b.admission_id = padded_id('A', index);
  b.t_adm = static_cast<Minutes>(rng.integer(0, 365 * kMinutesPerDay));
  b.age = static_cast<int>(std::clamp(std::round(rng.normal(62.0, 16.0)), 18.0, 95.0));
  b.gender = rng.bernoulli(0.5) ? Gender::male : Gender::female;
  b.language = pick<4>(rng, {"ENGLISH", "SPANISH", "PORTUGUESE", "?"}, {0.9, 0.05, 0.02, 0.03});
  b.race = pick<6>(rng, {"WHITE", "BLACK", "HISPANIC", "ASIAN", "UNKNOWN", "PACIFIC ISLANDER"},
                   {0.64, 0.15, 0.08, 0.05, 0.06, 0.02});

  const double age_z = (*b.age - 62.0) / 16.0;
  const std::array<double, 6> flag_rates = {0.06 + 0.03 * std::max(0.0, age_z), 0.30, 0.05, 0.18, 0.40, 0.22};
  b.history.set(HistoryFlag::prior_aspiration, rng.bernoulli(c.prior_aspiration_rate));
  for (std::size_t f = 0; f < flag_rates.size(); ++f) {
    b.history.set(static_cast<HistoryFlag>(f + 1), rng.bernoulli(std::clamp(flag_rates[f], 0.0, 1.0)));
  }

  const bool surgical = rng.bernoulli(c.surgery_rate);
  if (!surgical) {
    const Minutes stay = 60 + static_cast<Minutes>(rng.exponential(3.0 * kMinutesPerDay));
    b.t_discharge = b.t_adm + stay;
    const int n_meds = static_cast<int>(rng.integer(0, 3));
    for (int k = 0; k < n_meds; ++k) {
      const Minutes t = b.t_adm + static_cast<Minutes>(rng.integer(0, stay));
      const auto cls = static_cast<DrugClass>(rng.integer(1, kDrugClassCount - 1));
      const auto drug = other_drug(cls, rng);
      b.medications.push_back({t, cls, drug.name, drug.dose, drug.unit});
    }
    if (rng.bernoulli(c.negative_report_rate)) {
      b.reports.push_back({});
      b.reports.back().time = b.t_adm + static_cast<Minutes>(rng.integer(0, stay));
      b.reports.back().text = kNegativePhrases[rng.index(kNegativePhrases.size())];
    }
    std::stable_sort(b.medications.begin(), b.medications.end(),
                     [](const auto& x, const auto& y) { return x.time < y.time; });
    return out;
  }

  // Surgeries.
  const Minutes los_minutes = 30 + static_cast<Minutes>(rng.exponential(1.5 * kMinutesPerDay));
  const std::size_t n_surgeries = 1 + rng.categorical(std::array<double, 3>{0.75, 0.18, 0.07});
  Minutes t = b.t_adm + los_minutes;
  std::array<bool, kSiteCount> site_flags{};
  for (std::size_t s = 0; s < n_surgeries; ++s) {
    if (s > 0) t += 60 + static_cast<Minutes>(rng.exponential(2.0 * kMinutesPerDay));
    const auto site = static_cast<SurgerySite>(rng.categorical(c.site_weights));
    b.surgeries.push_back({t, site});
    site_flags[static_cast<std::size_t>(site)] = true;
  }
  const Minutes t_last = b.surgeries.back().time;

  std::map<std::string, double> z = {{"age", age_z},
                                     {"male", b.gender == Gender::male ? 1.0 : 0.0},
                                     {"los", minutes_to_days(los_minutes)},
                                     {"english", normalize_level(b.language, kLanguageLevels) == "english"}};
  for (std::size_t f = 1; f < kHistoryFlagCount; ++f) {
    z[std::string(kHistoryFlagNames[f])] = b.history.has(static_cast<HistoryFlag>(f)) ? 1.0 : 0.0;
  }

  double confounding = 0.0;
  for (const auto& [key, coef] : c.confounder_strengths) confounding += coef * z.at(key);

  // Latent opioid regimen, drawn for everyone.
  const double opioid_scale = b.gender == Gender::male ? c.gender_opioid_multiplier : 1.0;
  const int n_opioid = static_cast<int>(rng.integer(1, 5));
  std::vector<OpioidDose> opioids;
  for (int k = 0; k < n_opioid; ++k) {
    const Minutes when = b.t_adm + static_cast<Minutes>(rng.integer(0, t_last - b.t_adm));
    opioids.push_back(draw_opioid(rng, when, opioid_scale));
  }
  const double latent_max_daily = max_daily(opioids, c.tz_offset_minutes);

  // Medication exposure before the last surgery.
  std::array<bool, kDrugClassCount> exposed{};
  for (std::size_t cls = 0; cls < kDrugClassCount; ++cls) {
    const auto drug_class = static_cast<DrugClass>(cls);
    const double u = rng.uniform();
    double p;
    if (drug_class == DrugClass::antidiabetic) {
      p = z.at("diabetes") > 0.0 ? 0.7 : 0.02;
    } else {
      const double prevalence = value_or(c.treatment_prevalence, to_string(drug_class), 0.3);
      p = sigmoid(logit(prevalence) + confounding);
    }
    exposed[cls] = u < p;
  }
  for (std::size_t cls = 0; cls < kDrugClassCount; ++cls) {
    const auto drug_class = static_cast<DrugClass>(cls);
    if (drug_class == DrugClass::opioid) continue;
    const int n = static_cast<int>(rng.integer(1, 4));
    for (int k = 0; k < n; ++k) {
      const Minutes when = b.t_adm + static_cast<Minutes>(rng.integer(0, t_last - b.t_adm));
      const auto drug = other_drug(drug_class, rng);
      if (exposed[cls]) b.medications.push_back({when, drug_class, drug.name, drug.dose, drug.unit});
    }
  }
  if (exposed[static_cast<std::size_t>(DrugClass::opioid)]) {
    for (const auto& d : opioids) b.medications.push_back({d.time, DrugClass::opioid, d.drug, d.dose, d.unit});
  }

  // Post-operative medications; they never enter the risk model.
  const int n_post = static_cast<int>(rng.integer(0, 3));
  Minutes latest = t_last;
  for (int k = 0; k < n_post; ++k) {
    const Minutes when = t_last + 1 + static_cast<Minutes>(rng.integer(0, 3 * kMinutesPerDay));
    latest = std::max(latest, when);
    if (rng.bernoulli(0.5)) {
      const auto d = draw_opioid(rng, when, opioid_scale);
      b.medications.push_back({when, DrugClass::opioid, d.drug, d.dose, d.unit});
    } else {
      const auto cls = static_cast<DrugClass>(rng.integer(1, kDrugClassCount - 1));
      const auto drug = other_drug(cls, rng);
      b.medications.push_back({when, cls, drug.name, drug.dose, drug.unit});
    }
  }
  std::stable_sort(b.medications.begin(), b.medications.end(),
                   [](const auto& x, const auto& y) { return x.time < y.time; });

  // Outcome model.
  const double noise = c.noise_sd > 0.0 ? std::exp(rng.normal(0.0, c.noise_sd) - 0.5 * c.noise_sd * c.noise_sd) : 1.0;
  const double u_outcome = rng.uniform();
  const double dose_term =
      value_or(c.effect_coefficients, kMmeEffectKey) * std::min(latent_max_daily, c.mme_cap) / 100.0;

  auto contribution = [&](const Treatment& tr, bool on) {
    if (!on) return 0.0;
    double v = value_or(c.effect_coefficients, tr.name());
    if (tr.kind == Treatment::Kind::medication && tr.drug_class == DrugClass::opioid) v += dose_term;
    return v;
  };
  auto is_on = [&](const Treatment& tr) {
    return tr.kind == Treatment::Kind::medication ? exposed[static_cast<std::size_t>(tr.drug_class)]
                                                  : site_flags[static_cast<std::size_t>(tr.site)];
  };

  double risk = c.base_risk * noise;
  for (const auto& [key, coef] : c.effect_coefficients) {
    if (detail::is_covariate(key)) risk += coef * z.at(key);
  }
  for (const auto& tr : treatments) risk += contribution(tr, is_on(tr));

  out.in_population = true;
  UnitOutcomes& po = out.outcomes;
  po.admission_id = b.admission_id;
  for (const auto& tr : treatments) {
    const double without = risk - contribution(tr, is_on(tr));
    const double p1 = clamp01(without + contribution(tr, true));
    const double p0 = clamp01(without);
    po.p1.push_back(p1);
    po.p0.push_back(p0);
    po.y1.push_back(u_outcome < p1);
    po.y0.push_back(u_outcome < p0);
  }
  const bool aspirated = u_outcome < clamp01(risk);

  // Reports.
  const Minutes delay = static_cast<Minutes>(std::llround(rng.exponential(c.aspiration_delay_mean_days * kMinutesPerDay)));
  const std::size_t positive_phrase = rng.index(kPositivePhrases.size());
  const bool negative_report = rng.bernoulli(c.negative_report_rate);
  const Minutes negative_time = b.t_adm + static_cast<Minutes>(rng.integer(0, t_last - b.t_adm + 2 * kMinutesPerDay));
  const std::size_t negative_phrase = rng.index(kNegativePhrases.size());
  if (negative_report) {
    RadiologyReport r;
    r.time = negative_time;
    r.text = kNegativePhrases[negative_phrase];
    b.reports.push_back(std::move(r));
    latest = std::max(latest, negative_time);
  }
  if (aspirated) {
    RadiologyReport r;
    r.time = t_last + delay;
    r.text = kPositivePhrases[positive_phrase];
    b.reports.push_back(std::move(r));
    latest = std::max(latest, r.time);
    out.in_window = delay <= static_cast<Minutes>(window_days) * kMinutesPerDay;
  }
  std::stable_sort(b.reports.begin(), b.reports.end(), [](const auto& x, const auto& y) { return x.time < y.time; });
  b.t_discharge = latest + 60 + static_cast<Minutes>(rng.exponential(3.0 * kMinutesPerDay));
  return out;
}

}  // namespace detail

/// Generates `config.n_admissions` admissions. Output order is by admission
/// index and does not depend on `threads`.
inline SyntheticCohort generate(const GeneratorConfig& config, unsigned threads = 1, int window_days = 7) {
  validate(config);
  const auto treatments = all_treatments();
  std::vector<detail::AdmissionDraw> draws(config.n_admissions);
  parallel_for(config.n_admissions, threads,
               [&](std::size_t i) { draws[i] = detail::draw_admission(config, i, treatments, window_days); });

  SyntheticCohort out;
  out.truth.treatments = treatment_names();
  out.truth.window_days = window_days;
  out.truth.analytic_ate.assign(treatments.size(), 0.0);
  for (auto& d : draws) {
    if (d.in_population) {
      for (std::size_t j = 0; j < treatments.size(); ++j) {
        out.truth.analytic_ate[j] += d.outcomes.p1[j] - d.outcomes.p0[j];
      }
      if (d.in_window) out.truth.in_window_aspirations.insert(d.bundle.admission_id);
      out.truth.units.push_back(std::move(d.outcomes));
    }
    out.bundles.push_back(std::move(d.bundle));
  }
  if (!out.truth.units.empty()) {
    for (double& v : out.truth.analytic_ate) v /= static_cast<double>(out.truth.units.size());
  }
  return out;
}

/// Monte-Carlo population ATE of `treatment`: the mean of clamp(p1) - clamp(p0)
/// over `n_mc` fresh surgical units. Standard error is at most 1/sqrt(n_mc).
inline double true_ate(const GeneratorConfig& config, std::string_view treatment, std::size_t n_mc,
                       unsigned threads = 1) {
  validate(config);
  if (!parse_treatment(treatment)) {
    std::string valid;
    for (const auto& n : treatment_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("treatment", "unknown treatment '" + std::string(treatment) + "' (valid: " + valid + ")");
  }
  if (n_mc == 0) throw ConfigError("n_mc", "must be positive");
  GeneratorConfig mc = config;
  mc.surgery_rate = 1.0;
  mc.seed = derive_seed(config.seed, 0x7275655f617465ULL);
  const auto treatments = all_treatments();
  std::size_t j = 0;
  while (treatments[j].name() != treatment) ++j;
  std::vector<double> diffs(n_mc);
  parallel_for(n_mc, threads, [&](std::size_t i) {
    const auto d = detail::draw_admission(mc, i, treatments, 7);
    diffs[i] = d.outcomes.p1[j] - d.outcomes.p0[j];
  });
  double sum = 0.0;
  for (double v : diffs) sum += v;
  return sum / static_cast<double>(n_mc);
}

inline void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  csv::Writer out(path, {"admission_id", "treatment", "y1", "y0"});
  for (const auto& u : truth.units) {
    for (std::size_t j = 0; j < truth.treatments.size(); ++j) {
      out.row({u.admission_id, truth.treatments[j], std::to_string(u.y1[j]), std::to_string(u.y0[j])});
    }
  }
}

// ---------------------------------------------------------------------------
// Covariate-level SCM for estimator studies. No admissions or pipeline: draws
// (X, T, Y) directly and keeps the true nuisance functions for oracle checks.

struct FrameScmConfig {
  std::size_t n = 5000;
  std::uint64_t seed = 1;
  double tau = 0.2;
  double base = 0.35;
  double treatment_rate = 0.5;
  double assignment_strength = 0.0;  // logit coefficient of the confounder score on T
  double outcome_strength = 0.05;    // risk per unit of the confounder score
};

struct SimulatedFrame {
  std::vector<std::string> columns;
  Matrix X;
  Vector T, Y;
  Vector propensity, mu1, mu0;  // true e(x), E[Y(1)|x], E[Y(0)|x]
  double sample_ate = 0.0;      // mean of mu1 - mu0
};

inline SimulatedFrame simulate_frame(const FrameScmConfig& c) {
  if (!(c.treatment_rate > 0.0 && c.treatment_rate < 1.0)) throw ConfigError("treatment_rate", "must lie in (0, 1)");
  SimulatedFrame f;
  f.columns = {"age", "gender=male", "los_until_surgery", "history:stroke", "history:dysphagia", "history:diabetes"};
  f.X.resize(static_cast<Eigen::Index>(c.n), static_cast<Eigen::Index>(f.columns.size()));
  f.T.resize(static_cast<Eigen::Index>(c.n));
  f.Y.resize(f.T.size());
  f.propensity.resize(f.T.size());
  f.mu1.resize(f.T.size());
  f.mu0.resize(f.T.size());
  double ate = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    Rng rng(derive_seed(c.seed, i));
    const auto r = static_cast<Eigen::Index>(i);
    const double age = static_cast<double>(rng.integer(18, 90));
    const double male = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double los = std::min(detail::round_to(rng.exponential(1.5), 0.1), 10.0);
    const double stroke = rng.bernoulli(0.1) ? 1.0 : 0.0;
    const double dysphagia = rng.bernoulli(0.08) ? 1.0 : 0.0;
    const double diabetes = rng.bernoulli(0.2) ? 1.0 : 0.0;
    f.X.row(r) << age, male, los, stroke, dysphagia, diabetes;

    const double score = (age - 54.0) / 20.8 + 0.75 * (2.0 * male - 1.0) + 0.3 * (std::min(los, 5.0) - 1.5);
    const double e = detail::sigmoid(detail::logit(c.treatment_rate) + c.assignment_strength * score);
    const double risk0 = c.base + c.outcome_strength * score + 0.05 * stroke + 0.08 * dysphagia;
    const double p1 = detail::clamp01(risk0 + c.tau);
    const double p0 = detail::clamp01(risk0);
    const bool treated = rng.uniform() < e;
    const double u = rng.uniform();
    f.T(r) = treated ? 1.0 : 0.0;
    f.Y(r) = u < (treated ? p1 : p0) ? 1.0 : 0.0;
    f.propensity(r) = e;
    f.mu1(r) = p1;
    f.mu0(r) = p0;
    ate += p1 - p0;
  }
  f.sample_ate = c.n ? ate / static_cast<double>(c.n) : 0.0;
  return f;
}

}  // namespace aspire::synth
