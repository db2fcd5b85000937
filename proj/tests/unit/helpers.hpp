#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "aspire/domain.hpp"

namespace testing_helpers {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("aspire_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline constexpr aspire::Minutes kDay = aspire::kMinutesPerDay;

/// One surgical admission: admitted at day 0, discharged at day 30.
inline aspire::AdmissionBundle surgical_bundle(const std::string& id = "A1") {
  aspire::AdmissionBundle b;
  b.subject_id = "S" + id;
  b.admission_id = id;
  b.t_adm = 0;
  b.t_discharge = 30 * kDay;
  b.age = 60;
  b.gender = aspire::Gender::male;
  b.language = "english";
  b.race = "white";
  return b;
}

inline aspire::RadiologyReport report(aspire::Minutes t, std::string text) {
  aspire::RadiologyReport r;
  r.time = t;
  r.text = std::move(text);
  return r;
}

}  // namespace testing_helpers
