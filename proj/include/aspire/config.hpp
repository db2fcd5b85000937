#pragma once

// Run configuration: sectioned "key = value" text. Every key has a default, so
// an empty file is a complete configuration. The canonical echo lists every
// effective value in a fixed order and is what the config hash covers.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aspire/causal.hpp"
#include "aspire/core/csv.hpp"
#include "aspire/core/errors.hpp"
#include "aspire/core/random.hpp"
#include "aspire/learn/model_io.hpp"
#include "aspire/pipeline.hpp"
#include "aspire/synth.hpp"
#include "aspire/treatments.hpp"

namespace aspire {

struct RunConfig {
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: all hardware threads

  std::string generator_profile = "paper";
  synth::GeneratorConfig generator = synth::paper_profile();

  int window_days = 7;
  pipeline::DownsampleMode downsample = pipeline::DownsampleMode::count;
  double train_fraction = 0.7;
  std::string labeler = "rule";
  std::string labeler_url;
  std::string labeler_path = "/label";
  std::int64_t labeler_timeout_ms = 30000;

  learn::ModelFamily model_family = learn::ModelFamily::forest;
  double threshold = 0.5;
  learn::ForestParams forest;
  learn::GbtParams gbt;
  learn::MlpParams mlp;

  std::size_t n_boot = 1000;
  double level = 0.95;
  std::vector<std::string> treatments = treatment_names();
  std::string cate_treatment = "opioid";
  causal::NuisanceParams nuisance;
  std::optional<double> opioid_dose_threshold;

  // Per-stage seeds, all derived from `seed`.
  std::uint64_t cohort_seed() const { return derive_seed(seed, 1); }
  std::uint64_t split_seed() const { return derive_seed(seed, 2); }
  std::uint64_t model_seed() const { return derive_seed(seed, 3); }
  std::uint64_t causal_seed() const { return derive_seed(seed, 4); }

  synth::GeneratorConfig generator_config() const {
    auto g = generator;
    g.seed = seed;
    return g;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "invalid number '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  const double d = parse_number<double>(key, v);
  if (!std::isfinite(d)) throw ConfigError(key, "must be finite");
  return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::optional<std::size_t> parse_optional_size(const std::string& key, const std::string& v) {
  if (v == "none") return std::nullopt;
  return parse_number<std::size_t>(key, v);
}

inline std::string show(double v) { return csv::format(v); }
inline std::string show(bool v) { return v ? "true" : "false"; }
inline std::string show(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "none"; }

struct Entry {
  std::string key;  // section.name
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define ASPIRE_REAL(K, F) \
  {K, [](RunConfig& c, const std::string& v) { c.F = parse_real(K, v); }, [](const RunConfig& c) { return show(c.F); }}
#define ASPIRE_INT(K, F, T)                                                         \
  {K, [](RunConfig& c, const std::string& v) { c.F = parse_number<T>(K, v); }, \
   [](const RunConfig& c) { return std::to_string(c.F); }}
#define ASPIRE_BOOL(K, F) \
  {K, [](RunConfig& c, const std::string& v) { c.F = parse_bool(K, v); }, [](const RunConfig& c) { return show(c.F); }}
#define ASPIRE_OPT(K, F)                                                                   \
  {K, [](RunConfig& c, const std::string& v) { c.F = parse_optional_size(K, v); }, \
   [](const RunConfig& c) { return show(c.F); }}

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      ASPIRE_INT("general.seed", seed, std::uint64_t),
      ASPIRE_INT("general.threads", threads, unsigned),

      {"generator.profile",
       [](RunConfig& c, const std::string& v) {
         if (v == "paper") {
           c.generator = synth::paper_profile();
         } else if (v == "null") {
           c.generator = synth::paper_profile();
           c.generator.effect_coefficients.clear();
           c.generator.confounder_strengths.clear();
         } else {
           throw ConfigError("generator.profile", "expected paper or null, got '" + v + "'");
         }
         c.generator_profile = v;
       },
       [](const RunConfig& c) { return c.generator_profile; }},
      ASPIRE_INT("generator.n_admissions", generator.n_admissions, std::size_t),
      ASPIRE_REAL("generator.surgery_rate", generator.surgery_rate),
      ASPIRE_REAL("generator.base_risk", generator.base_risk),
      ASPIRE_REAL("generator.noise_sd", generator.noise_sd),
      ASPIRE_REAL("generator.prior_aspiration_rate", generator.prior_aspiration_rate),
      ASPIRE_REAL("generator.negative_report_rate", generator.negative_report_rate),
      ASPIRE_REAL("generator.aspiration_delay_mean_days", generator.aspiration_delay_mean_days),
      ASPIRE_REAL("generator.gender_opioid_multiplier", generator.gender_opioid_multiplier),
      ASPIRE_REAL("generator.mme_cap", generator.mme_cap),
      ASPIRE_INT("generator.tz_offset_minutes", generator.tz_offset_minutes, Minutes),

      ASPIRE_INT("pipeline.window_days", window_days, int),
      {"pipeline.downsample",
       [](RunConfig& c, const std::string& v) {
         if (v == "count") {
           c.downsample = pipeline::DownsampleMode::count;
         } else if (v == "stratified") {
           c.downsample = pipeline::DownsampleMode::stratified;
         } else {
           throw ConfigError("pipeline.downsample", "expected count or stratified, got '" + v + "'");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.downsample == pipeline::DownsampleMode::count ? "count" : "stratified");
       }},
      ASPIRE_REAL("pipeline.train_fraction", train_fraction),
      {"pipeline.labeler",
       [](RunConfig& c, const std::string& v) {
         if (v != "rule" && v != "remote") throw ConfigError("pipeline.labeler", "expected rule or remote, got '" + v + "'");
         c.labeler = v;
       },
       [](const RunConfig& c) { return c.labeler; }},
      {"pipeline.labeler_url", [](RunConfig& c, const std::string& v) { c.labeler_url = v; },
       [](const RunConfig& c) { return c.labeler_url; }},
      {"pipeline.labeler_path", [](RunConfig& c, const std::string& v) { c.labeler_path = v; },
       [](const RunConfig& c) { return c.labeler_path; }},
      ASPIRE_INT("pipeline.labeler_timeout_ms", labeler_timeout_ms, std::int64_t),

      {"model.family", [](RunConfig& c, const std::string& v) { c.model_family = learn::parse_family(v); },
       [](const RunConfig& c) { return learn::to_string(c.model_family); }},
      ASPIRE_REAL("model.threshold", threshold),
      ASPIRE_INT("model.forest.n_estimators", forest.n_estimators, std::size_t),
      ASPIRE_INT("model.forest.min_samples_split", forest.min_samples_split, std::size_t),
      ASPIRE_INT("model.forest.min_samples_leaf", forest.min_samples_leaf, std::size_t),
      ASPIRE_OPT("model.forest.max_depth", forest.max_depth),
      {"model.forest.max_features",
       [](RunConfig& c, const std::string& v) {
         c.forest.max_features = v == "sqrt" ? std::nullopt : std::optional(parse_number<std::size_t>("model.forest.max_features", v));
       },
       [](const RunConfig& c) { return c.forest.max_features ? std::to_string(*c.forest.max_features) : std::string("sqrt"); }},
      ASPIRE_BOOL("model.forest.bootstrap", forest.bootstrap),
      ASPIRE_REAL("model.gbt.learning_rate", gbt.learning_rate),
      ASPIRE_INT("model.gbt.n_rounds", gbt.n_rounds, std::size_t),
      ASPIRE_INT("model.gbt.max_depth", gbt.max_depth, std::size_t),
      ASPIRE_REAL("model.gbt.lambda", gbt.lambda),
      ASPIRE_REAL("model.gbt.min_child_weight", gbt.min_child_weight),
      ASPIRE_INT("model.mlp.hidden", mlp.hidden, std::size_t),
      ASPIRE_INT("model.mlp.max_epochs", mlp.max_epochs, std::size_t),
      ASPIRE_INT("model.mlp.batch_size", mlp.batch_size, std::size_t),
      ASPIRE_REAL("model.mlp.learning_rate", mlp.learning_rate),
      ASPIRE_REAL("model.mlp.alpha", mlp.alpha),
      ASPIRE_REAL("model.mlp.tol", mlp.tol),
      ASPIRE_INT("model.mlp.n_iter_no_change", mlp.n_iter_no_change, std::size_t),
      ASPIRE_BOOL("model.mlp.standardize", mlp.standardize),

      ASPIRE_INT("causal.n_boot", n_boot, std::size_t),
      ASPIRE_REAL("causal.level", level),
      {"causal.treatments",
       [](RunConfig& c, const std::string& v) {
         c.treatments.clear();
         if (v == "all") {
           c.treatments = treatment_names();
           return;
         }
         std::stringstream ss(v);
         for (std::string item; std::getline(ss, item, ',');) {
           item = trim(item);
           if (item.empty()) continue;
           c.treatments.push_back(causal::require_treatment(item).name());
         }
         if (c.treatments.empty()) throw ConfigError("causal.treatments", "empty treatment list");
       },
       [](const RunConfig& c) {
         if (c.treatments == treatment_names()) return std::string("all");
         std::string out;
         for (const auto& t : c.treatments) out += (out.empty() ? "" : ",") + t;
         return out;
       }},
      {"causal.cate_treatment",
       [](RunConfig& c, const std::string& v) { c.cate_treatment = causal::require_treatment(v).name(); },
       [](const RunConfig& c) { return c.cate_treatment; }},
      ASPIRE_OPT("causal.max_depth", nuisance.max_depth),
      ASPIRE_INT("causal.min_samples_leaf", nuisance.min_samples_leaf, std::size_t),
      ASPIRE_INT("causal.cross_fit_folds", nuisance.cross_fit_folds, std::size_t),
      {"causal.opioid_dose_threshold",
       [](RunConfig& c, const std::string& v) {
         c.opioid_dose_threshold =
             v == "none" ? std::nullopt : std::optional(parse_real("causal.opioid_dose_threshold", v));
       },
       [](const RunConfig& c) { return c.opioid_dose_threshold ? show(*c.opioid_dose_threshold) : std::string("none"); }},
  };
  return table;
}

#undef ASPIRE_REAL
#undef ASPIRE_INT
#undef ASPIRE_BOOL
#undef ASPIRE_OPT

/// generator.effect.<k>, generator.prevalence.<k>, generator.confounder.<k>, generator.site_weight.<site>
inline bool set_generator_map(RunConfig& c, const std::string& key, const std::string& value) {
  const auto with = [&](std::string_view prefix) -> std::optional<std::string> {
    if (key.rfind(prefix, 0) == 0 && key.size() > prefix.size()) return key.substr(prefix.size());
    return std::nullopt;
  };
  if (auto k = with("generator.effect.")) {
    c.generator.effect_coefficients[*k] = parse_real(key, value);
  } else if (auto k = with("generator.prevalence.")) {
    c.generator.treatment_prevalence[*k] = parse_real(key, value);
  } else if (auto k = with("generator.confounder.")) {
    c.generator.confounder_strengths[*k] = parse_real(key, value);
  } else if (auto k = with("generator.site_weight.")) {
    const auto site = parse_enum<SurgerySite>(*k, kSiteNames);
    if (!site) throw ConfigError(key, "unknown surgery site");
    c.generator.site_weights[static_cast<std::size_t>(*site)] = parse_real(key, value);
  } else {
    return false;
  }
  return true;
}

}  // namespace config_detail

/// Checks cross-field constraints; throws ConfigError naming the key.
inline void validate(const RunConfig& c) {
  try {
    synth::validate(c.generator);
  } catch (const ConfigError& e) {
    throw ConfigError("generator." + e.key(), std::string(e.what()).substr(e.key().size() + 2));
  }
  if (c.window_days <= 0) throw ConfigError("pipeline.window_days", "must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("pipeline.train_fraction", "must lie in (0, 1)");
  if (c.labeler == "remote" && c.labeler_url.empty()) throw ConfigError("pipeline.labeler_url", "required for the remote labeler");
  if (c.labeler_timeout_ms <= 0) throw ConfigError("pipeline.labeler_timeout_ms", "must be positive");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw ConfigError("model.threshold", "must lie in [0, 1]");
  if (c.forest.n_estimators == 0) throw ConfigError("model.forest.n_estimators", "must be positive");
  if (c.forest.min_samples_split < 2) throw ConfigError("model.forest.min_samples_split", "must be at least 2");
  if (c.forest.min_samples_leaf < 1) throw ConfigError("model.forest.min_samples_leaf", "must be at least 1");
  if (c.forest.max_features && *c.forest.max_features == 0) throw ConfigError("model.forest.max_features", "must be positive");
  if (!(c.gbt.learning_rate > 0.0)) throw ConfigError("model.gbt.learning_rate", "must be positive");
  if (!(c.gbt.lambda >= 0.0)) throw ConfigError("model.gbt.lambda", "must be non-negative");
  if (c.mlp.hidden == 0) throw ConfigError("model.mlp.hidden", "must be positive");
  if (c.mlp.batch_size == 0) throw ConfigError("model.mlp.batch_size", "must be positive");
  if (!(c.mlp.learning_rate > 0.0)) throw ConfigError("model.mlp.learning_rate", "must be positive");
  if (c.n_boot < 2) throw ConfigError("causal.n_boot", "must be at least 2");
  if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("causal.level", "must lie in (0, 1)");
  if (c.nuisance.min_samples_leaf < 1) throw ConfigError("causal.min_samples_leaf", "must be at least 1");
}

/// Applies `text` on top of the defaults.
inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::string section;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  std::vector<std::pair<std::string, std::string>> pending;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    std::string line = config_detail::trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = config_detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    const std::string name = config_detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = config_detail::trim(std::string_view(line).substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    if (key == "generator.profile") {
      pending.insert(pending.begin(), {key, value});
    } else {
      pending.push_back({key, value});
    }
  }
  // The profile resets all generator values, so it is applied first.
  for (const auto& [key, value] : pending) {
    const auto& table = config_detail::entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.key == key; });
    if (it != table.end()) {
      it->set(c, value);
    } else if (!config_detail::set_generator_map(c, key, value)) {
      throw ConfigError(key, "unknown configuration key");
    }
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every effective value, one "key = value" per line under its section.
/// Parsing the echo yields the same configuration.
inline std::string canonical_echo(const RunConfig& c) {
  std::string out;
  std::string current;
  const auto emit = [&](const std::string& key, const std::string& value) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section != current) {
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
      current = section;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  };
  for (const auto& e : config_detail::entries()) {
    emit(e.key, e.get(c));
    if (e.key == "generator.tz_offset_minutes") {
      for (const auto& [k, v] : c.generator.treatment_prevalence) emit("generator.prevalence." + k, config_detail::show(v));
      for (const auto& [k, v] : c.generator.confounder_strengths) emit("generator.confounder." + k, config_detail::show(v));
      for (const auto& [k, v] : c.generator.effect_coefficients) emit("generator.effect." + k, config_detail::show(v));
      for (std::size_t s = 0; s < kSiteCount; ++s) {
        emit("generator.site_weight." + std::string(kSiteNames[s]), config_detail::show(c.generator.site_weights[s]));
      }
    }
  }
  return out;
}

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Hash of the canonical echo. The thread count is left out because it never
/// changes any output.
inline std::string config_hash(const RunConfig& c) {
  RunConfig normalized = c;
  normalized.threads = 0;
  return fnv1a_hex(canonical_echo(normalized));
}

}  // namespace aspire
