#pragma once

// CSV ingestion and emission for admission bundles:
//   admissions.csv  subject_id,admission_id,t_adm,t_discharge,age,gender,language,race
//   history.csv     subject_id,flag
//   surgeries.csv   admission_id,time,site
//   medications.csv admission_id,time,drug_class,drug_name,dose,unit
//   reports.csv     admission_id,time,text
//   mme_table.csv   drug_name,unit,factor

#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "aspire/core/csv.hpp"
#include "aspire/domain.hpp"

namespace aspire::io {

namespace fs = std::filesystem;

inline const std::vector<std::string> kAdmissionsHeader = {
    "subject_id", "admission_id", "t_adm", "t_discharge", "age", "gender", "language", "race"};
inline const std::vector<std::string> kHistoryHeader = {"subject_id", "flag"};
inline const std::vector<std::string> kSurgeriesHeader = {"admission_id", "time", "site"};
inline const std::vector<std::string> kMedicationsHeader = {"admission_id", "time", "drug_class",
                                                            "drug_name",    "dose", "unit"};
inline const std::vector<std::string> kReportsHeader = {"admission_id", "time", "text"};
inline const std::vector<std::string> kMmeHeader = {"drug_name", "unit", "factor"};

inline void write_bundles(const fs::path& dir, const std::vector<AdmissionBundle>& bundles) {
  fs::create_directories(dir);
  csv::Writer admissions(dir / "admissions.csv", kAdmissionsHeader);
  csv::Writer history(dir / "history.csv", kHistoryHeader);
  csv::Writer surgeries(dir / "surgeries.csv", kSurgeriesHeader);
  csv::Writer medications(dir / "medications.csv", kMedicationsHeader);
  csv::Writer reports(dir / "reports.csv", kReportsHeader);

  std::set<std::string> subjects_written;
  for (const auto& b : bundles) {
    admissions.row({b.subject_id, b.admission_id, csv::format(b.t_adm), csv::format(b.t_discharge),
                    b.age ? std::to_string(*b.age) : std::string(), std::string(to_string(b.gender)),
                    b.language, b.race});
    if (subjects_written.insert(b.subject_id).second) {
      for (std::size_t f = 0; f < kHistoryFlagCount; ++f) {
        if (b.history.has(static_cast<HistoryFlag>(f))) {
          history.row({b.subject_id, std::string(kHistoryFlagNames[f])});
        }
      }
    }
    for (const auto& s : b.surgeries) {
      surgeries.row({b.admission_id, csv::format(s.time), std::string(to_string(s.site))});
    }
    for (const auto& m : b.medications) {
      medications.row({b.admission_id, csv::format(m.time), std::string(to_string(m.drug_class)),
                       m.drug_name, csv::format(m.dose), std::string(to_string(m.unit))});
    }
    for (const auto& r : b.reports) {
      reports.row({b.admission_id, csv::format(r.time), r.text});
    }
  }
}

namespace detail {

inline csv::Table read_required(const fs::path& dir, const char* name,
                                const std::vector<std::string>& header) {
  const fs::path path = dir / name;
  if (!fs::exists(path)) throw DataError(std::string("missing input file ") + name + " in " + dir.string());
  return csv::read_with_header(path, header);
}

}  // namespace detail

/// Loads bundles in admissions.csv row order. Events keep their file order so
/// that ordering violations remain visible to validate_bundle.
inline std::vector<AdmissionBundle> read_bundles(const fs::path& dir) {
  const auto admissions = detail::read_required(dir, "admissions.csv", kAdmissionsHeader);
  const auto history = detail::read_required(dir, "history.csv", kHistoryHeader);
  const auto surgeries = detail::read_required(dir, "surgeries.csv", kSurgeriesHeader);
  const auto medications = detail::read_required(dir, "medications.csv", kMedicationsHeader);
  const auto reports = detail::read_required(dir, "reports.csv", kReportsHeader);

  std::vector<AdmissionBundle> bundles;
  bundles.reserve(admissions.rows.size());
  std::unordered_map<std::string, std::size_t> by_admission;
  for (const auto& row : admissions.rows) {
    AdmissionBundle b;
    b.subject_id = row[0];
    b.admission_id = row[1];
    b.t_adm = csv::parse_int(row[2], "admissions.t_adm");
    b.t_discharge = csv::parse_int(row[3], "admissions.t_discharge");
    if (!row[4].empty()) b.age = static_cast<int>(csv::parse_int(row[4], "admissions.age"));
    b.gender = parse_enum_or_throw<Gender>(row[5], kGenderNames, "gender");
    b.language = row[6];
    b.race = row[7];
    if (!by_admission.emplace(b.admission_id, bundles.size()).second) {
      throw DataError("admissions.csv: duplicate admission_id " + b.admission_id);
    }
    bundles.push_back(std::move(b));
  }

  std::unordered_map<std::string, HistoryFlags> flags_by_subject;
  for (const auto& row : history.rows) {
    flags_by_subject[row[0]].set(parse_enum_or_throw<HistoryFlag>(row[1], kHistoryFlagNames, "history flag"));
  }
  for (auto& b : bundles) {
    if (auto it = flags_by_subject.find(b.subject_id); it != flags_by_subject.end()) b.history = it->second;
  }

  auto owner = [&](const std::string& id, const char* file) -> AdmissionBundle& {
    auto it = by_admission.find(id);
    if (it == by_admission.end()) {
      throw DataError(std::string(file) + ": unknown admission_id " + id);
    }
    return bundles[it->second];
  };

  for (const auto& row : surgeries.rows) {
    owner(row[0], "surgeries.csv")
        .surgeries.push_back({csv::parse_int(row[1], "surgeries.time"),
                              parse_enum_or_throw<SurgerySite>(row[2], kSiteNames, "surgery site")});
  }
  for (const auto& row : medications.rows) {
    MedicationEvent m;
    m.time = csv::parse_int(row[1], "medications.time");
    m.drug_class = parse_enum_or_throw<DrugClass>(row[2], kDrugClassNames, "drug class");
    m.drug_name = row[3];
    m.dose = csv::parse_double(row[4], "medications.dose");
    m.unit = parse_enum_or_throw<DoseUnit>(row[5], kDoseUnitNames, "dose unit");
    owner(row[0], "medications.csv").medications.push_back(std::move(m));
  }
  for (const auto& row : reports.rows) {
    RadiologyReport r;
    r.time = csv::parse_int(row[1], "reports.time");
    r.text = row[2];
    owner(row[0], "reports.csv").reports.push_back(std::move(r));
  }
  return bundles;
}

inline void write_mme_table(const fs::path& path, const MmeTable& table) {
  csv::Writer out(path, kMmeHeader);
  for (const auto& [name, f] : table) {
    out.row({name, std::string(to_string(f.unit)), csv::format(f.factor)});
  }
}

inline MmeTable read_mme_table(const fs::path& path) {
  const auto table = csv::read_with_header(path, kMmeHeader);
  MmeTable out;
  for (const auto& row : table.rows) {
    const double factor = csv::parse_double(row[2], "mme_table.factor");
    if (!(factor >= 0.0)) throw DataError("mme_table.csv: factor for " + row[0] + " must be non-negative");
    out[to_lower(row[0])] = {parse_enum_or_throw<DoseUnit>(row[1], kDoseUnitNames, "dose unit"), factor};
  }
  return out;
}

}  // namespace aspire::io
