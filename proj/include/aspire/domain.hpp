#pragma once

// Admission records shared by every stage: demographics, history flags and the
// timed surgery / medication / radiology events of one hospital stay.

#include <algorithm>
#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aspire/core/errors.hpp"

namespace aspire {

/// Minutes since an arbitrary epoch.
using Minutes = std::int64_t;

inline constexpr Minutes kMinutesPerDay = 1440;

/// Calendar day index of `t` in a fixed-offset reference timezone.
constexpr std::int64_t calendar_day(Minutes t, Minutes tz_offset_minutes = 0) {
  const Minutes local = t + tz_offset_minutes;
  return local >= 0 ? local / kMinutesPerDay : -((-local + kMinutesPerDay - 1) / kMinutesPerDay);
}

constexpr double minutes_to_days(Minutes m) { return static_cast<double>(m) / kMinutesPerDay; }

// ---------------------------------------------------------------------------
// Enumerations and their canonical spellings

enum class Gender : std::uint8_t { female, male };
inline constexpr std::array<std::string_view, 2> kGenderNames = {"female", "male"};

enum class SurgerySite : std::uint8_t {
  head,
  neck,
  spine,
  thorax,
  upper_abdomen,
  lower_abdomen,
  pelvis,
  upper_limbs,
  lower_limbs,
  skin,
};
inline constexpr std::size_t kSiteCount = 10;
inline constexpr std::array<std::string_view, kSiteCount> kSiteNames = {
    "head",          "neck",   "spine",       "thorax",      "upper_abdomen",
    "lower_abdomen", "pelvis", "upper_limbs", "lower_limbs", "skin"};

enum class DrugClass : std::uint8_t {
  opioid,
  non_opioid_analgesic,
  insulin,
  antiemetic,
  antidiabetic,
  saline_flush,
};
inline constexpr std::size_t kDrugClassCount = 6;
inline constexpr std::array<std::string_view, kDrugClassCount> kDrugClassNames = {
    "opioid", "non_opioid_analgesic", "insulin", "antiemetic", "antidiabetic", "saline_flush"};

enum class DoseUnit : std::uint8_t { mg, mcg, ml, units };
inline constexpr std::array<std::string_view, 4> kDoseUnitNames = {"mg", "mcg", "ml", "units"};

enum class HistoryFlag : std::uint8_t {
  prior_aspiration,
  stroke,
  dyslipidemia,
  dysphagia,
  obesity,
  hypertension,
  diabetes,
};
inline constexpr std::size_t kHistoryFlagCount = 7;
inline constexpr std::array<std::string_view, kHistoryFlagCount> kHistoryFlagNames = {
    "prior_aspiration", "stroke", "dyslipidemia", "dysphagia", "obesity", "hypertension", "diabetes"};

/// Known categorical levels; anything else is folded into "other".
inline constexpr std::array<std::string_view, 3> kLanguageLevels = {"english", "other", "spanish"};
inline constexpr std::array<std::string_view, 5> kRaceLevels = {"asian", "black", "hispanic", "other",
                                                                "white"};

template <class Enum, std::size_t N>
constexpr std::string_view to_string(Enum value, const std::array<std::string_view, N>& names) {
  return names[static_cast<std::size_t>(value)];
}

inline std::string_view to_string(Gender g) { return to_string(g, kGenderNames); }
inline std::string_view to_string(SurgerySite s) { return to_string(s, kSiteNames); }
inline std::string_view to_string(DrugClass c) { return to_string(c, kDrugClassNames); }
inline std::string_view to_string(DoseUnit u) { return to_string(u, kDoseUnitNames); }
inline std::string_view to_string(HistoryFlag f) { return to_string(f, kHistoryFlagNames); }

template <class Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view text, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

template <class Enum, std::size_t N>
Enum parse_enum_or_throw(std::string_view text, const std::array<std::string_view, N>& names,
                         std::string_view what) {
  if (auto value = parse_enum<Enum>(text, names)) return *value;
  std::string valid;
  for (auto n : names) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw DataError("unknown " + std::string(what) + " '" + std::string(text) + "' (expected one of: " +
                  valid + ")");
}

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Maps a raw categorical value onto `levels`, using "other" for unknown values.
template <std::size_t N>
std::string normalize_level(std::string_view raw, const std::array<std::string_view, N>& levels) {
  const std::string lowered = to_lower(raw);
  for (auto level : levels) {
    if (level == lowered) return lowered;
  }
  return "other";
}

// ---------------------------------------------------------------------------
// Records

struct SurgeryEvent {
  Minutes time = 0;
  SurgerySite site = SurgerySite::head;
  bool operator==(const SurgeryEvent&) const = default;
};

struct MedicationEvent {
  Minutes time = 0;
  DrugClass drug_class = DrugClass::opioid;
  std::string drug_name;
  double dose = 0.0;
  DoseUnit unit = DoseUnit::mg;
  bool operator==(const MedicationEvent&) const = default;
};

class RadiologyReport {
 public:
  Minutes time = 0;
  std::string text;

  const std::optional<bool>& label() const { return label_; }

  /// Labels are write-once; relabeling with a different value is an error.
  void assign_label(bool value) {
    if (label_ && *label_ != value) {
      throw LabelingError("report label already set and cannot change");
    }
    label_ = value;
  }

  bool operator==(const RadiologyReport&) const = default;

 private:
  std::optional<bool> label_;
};

class HistoryFlags {
 public:
  bool has(HistoryFlag f) const { return bits_.test(static_cast<std::size_t>(f)); }
  void set(HistoryFlag f, bool value = true) { bits_.set(static_cast<std::size_t>(f), value); }
  bool operator==(const HistoryFlags&) const = default;

 private:
  std::bitset<kHistoryFlagCount> bits_;
};

struct AdmissionBundle {
  std::string subject_id;
  std::string admission_id;
  Minutes t_adm = 0;
  Minutes t_discharge = 0;
  std::optional<int> age;  // missing ages are imputed downstream
  Gender gender = Gender::female;
  std::string language = "english";
  std::string race = "other";
  HistoryFlags history;
  std::vector<SurgeryEvent> surgeries;
  std::vector<MedicationEvent> medications;
  std::vector<RadiologyReport> reports;

  bool operator==(const AdmissionBundle&) const = default;
};

// ---------------------------------------------------------------------------
// Morphine-equivalent conversion table

struct MmeFactor {
  DoseUnit unit = DoseUnit::mg;
  double factor = 1.0;  // MME per one `unit` of drug
};

using MmeTable = std::map<std::string, MmeFactor, std::less<>>;

/// Conventional oral-morphine conversion factors.
inline MmeTable default_mme_table() {
  return {
      {"morphine", {DoseUnit::mg, 1.0}},     {"oxycodone", {DoseUnit::mg, 1.5}},
      {"hydromorphone", {DoseUnit::mg, 4.0}}, {"hydrocodone", {DoseUnit::mg, 1.0}},
      {"fentanyl", {DoseUnit::mcg, 0.1}},
  };
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string field;
  std::string rule;
  bool operator==(const Violation&) const = default;
};

/// Checks the record invariants. Pure; an empty result means the bundle is valid.
/// When `mme_table` is given, opioid names must appear in it.
inline std::vector<Violation> validate_bundle(const AdmissionBundle& bundle,
                                              const MmeTable* mme_table = nullptr) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };

  if (bundle.t_discharge < bundle.t_adm) add("t_discharge", "discharge before admission");
  if (bundle.age && *bundle.age < 0) add("age", "age must be non-negative");

  auto check_time = [&](std::string field, Minutes t) {
    if (t < bundle.t_adm) add(field, "event before admission");
    if (t > bundle.t_discharge) add(std::move(field), "event after discharge");
  };

  for (std::size_t i = 0; i < bundle.surgeries.size(); ++i) {
    const std::string field = "surgeries[" + std::to_string(i) + "].time";
    check_time(field, bundle.surgeries[i].time);
    if (i > 0 && bundle.surgeries[i].time < bundle.surgeries[i - 1].time) {
      add(field, "ordering: surgeries not sorted by time");
    }
  }
  for (std::size_t i = 0; i < bundle.medications.size(); ++i) {
    const auto& m = bundle.medications[i];
    const std::string prefix = "medications[" + std::to_string(i) + "]";
    check_time(prefix + ".time", m.time);
    if (i > 0 && m.time < bundle.medications[i - 1].time) {
      add(prefix + ".time", "ordering: medications not sorted by time");
    }
    if (!(m.dose >= 0.0)) add(prefix + ".dose", "dose must be non-negative");
    if (mme_table && m.drug_class == DrugClass::opioid && !mme_table->contains(to_lower(m.drug_name))) {
      add(prefix + ".drug_name", "opioid '" + m.drug_name + "' missing from MME table");
    }
  }
  for (std::size_t i = 0; i < bundle.reports.size(); ++i) {
    check_time("reports[" + std::to_string(i) + "].time", bundle.reports[i].time);
  }
  return out;
}

}  // namespace aspire
