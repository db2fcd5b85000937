#pragma once

// Treatments whose effects can be estimated: five medication classes given as
// "any exposure before cutoff" and the ten surgical sites.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aspire/domain.hpp"

namespace aspire {

struct Treatment {
  enum class Kind { medication, site };
  Kind kind = Kind::medication;
  DrugClass drug_class = DrugClass::opioid;
  SurgerySite site = SurgerySite::head;

  std::string name() const {
    return kind == Kind::medication ? std::string(to_string(drug_class))
                                    : "site:" + std::string(to_string(site));
  }
  bool operator==(const Treatment&) const = default;
};

inline constexpr std::array<DrugClass, 5> kTreatmentDrugClasses = {
    DrugClass::opioid, DrugClass::non_opioid_analgesic, DrugClass::insulin, DrugClass::saline_flush,
    DrugClass::antiemetic};

inline std::vector<Treatment> all_treatments() {
  std::vector<Treatment> out;
  for (DrugClass c : kTreatmentDrugClasses) out.push_back({Treatment::Kind::medication, c, {}});
  for (std::size_t s = 0; s < kSiteCount; ++s) {
    out.push_back({Treatment::Kind::site, {}, static_cast<SurgerySite>(s)});
  }
  return out;
}

inline std::vector<std::string> treatment_names() {
  std::vector<std::string> out;
  for (const auto& t : all_treatments()) out.push_back(t.name());
  return out;
}

inline std::optional<Treatment> parse_treatment(std::string_view name) {
  for (const auto& t : all_treatments()) {
    if (t.name() == name) return t;
  }
  return std::nullopt;
}

}  // namespace aspire
