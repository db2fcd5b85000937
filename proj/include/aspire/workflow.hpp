#pragma once

// End-to-end stages behind the command line: generate, pipeline, train,
// evaluate, ate, cate and fn-analysis. Each stage writes its artifacts plus a
// manifest into the output directory and reads only from its input directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspire/causal.hpp"
#include "aspire/config.hpp"
#include "aspire/core/csv.hpp"
#include "aspire/dataset.hpp"
#include "aspire/domain_io.hpp"
#include "aspire/eval.hpp"
#include "aspire/learn/model_io.hpp"
#include "aspire/pipeline.hpp"
#include "aspire/remote_labeler.hpp"
#include "aspire/synth.hpp"

namespace aspire::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// ---- file helpers ----

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline json read_json(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("missing input file " + p.string());
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

/// Records what a stage read and wrote, with content hashes, next to a
/// verbatim copy of the effective configuration.
class Manifest {
 public:
  Manifest(const fs::path& out_dir, std::string command, const RunConfig& cfg)
      : out_dir_(out_dir), command_(std::move(command)), cfg_(cfg) {
    fs::create_directories(out_dir_);
  }

  void input(const fs::path& p) { inputs_.push_back(p); }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_dir_ / name;
  }

  void write() const {
    write_text(out_dir_ / "config.ini", canonical_echo(cfg_));
    json j = {{"tool", "aspire"},
              {"version", kVersion},
              {"command", command_},
              {"seed", cfg_.seed},
              {"threads", resolve_threads(cfg_.threads)},
              {"config_hash", config_hash(cfg_)},
              {"config_file", "config.ini"}};
    j["inputs"] = json::array();
    for (const auto& p : inputs_) j["inputs"].push_back({{"path", p.string()}, {"fnv1a", fnv1a_hex(read_file(p))}});
    j["outputs"] = json::array();
    for (const auto& name : outputs_) {
      j["outputs"].push_back({{"path", name}, {"fnv1a", fnv1a_hex(read_file(out_dir_ / name))}});
    }
    write_json(out_dir_ / ("manifest_" + command_ + ".json"), j);
  }

 private:
  fs::path out_dir_;
  std::string command_;
  RunConfig cfg_;
  std::vector<fs::path> inputs_;
  std::vector<std::string> outputs_;
};

// ---- generate ----

inline void generate(const RunConfig& cfg, const fs::path& out) {
  Manifest m(out, "generate", cfg);
  const auto gen = cfg.generator_config();
  const auto cohort = synth::generate(gen, cfg.threads, cfg.window_days);
  io::write_bundles(out, cohort.bundles);
  for (const char* f : {"admissions.csv", "history.csv", "surgeries.csv", "medications.csv", "reports.csv"}) m.output(f);
  io::write_mme_table(m.output("mme_table.csv"), default_mme_table());
  synth::write_ground_truth(m.output("ground_truth.csv"), cohort.truth);

  csv::Writer ate(m.output("true_ate.csv"), {"treatment", "sample_ate"});
  for (std::size_t j = 0; j < cohort.truth.treatments.size(); ++j) {
    ate.row({cohort.truth.treatments[j], csv::format(cohort.truth.analytic_ate[j])});
  }
  m.write();
}

// ---- pipeline ----

struct PipelineOutput {
  Dataset features;
  std::vector<double> los_until_discharge;  // aligned with features rows
};

inline std::unique_ptr<pipeline::ReportLabeler> make_labeler(const RunConfig& cfg) {
  if (cfg.labeler == "remote") {
    return std::make_unique<pipeline::RemoteLabeler>(cfg.labeler_url, cfg.labeler_path,
                                                     std::chrono::milliseconds(cfg.labeler_timeout_ms));
  }
  return std::make_unique<pipeline::RuleLabeler>();
}

inline MmeTable load_mme_table(const fs::path& in, Manifest& m) {
  const auto p = in / "mme_table.csv";
  if (!fs::exists(p)) return default_mme_table();
  m.input(p);
  return io::read_mme_table(p);
}

/// Writes violations.csv and fails if any bundle is invalid.
inline void check_bundles(const std::vector<AdmissionBundle>& bundles, const MmeTable& table, const fs::path& out) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& b : bundles) {
    for (const auto& v : validate_bundle(b, &table)) rows.push_back({b.admission_id, v.field, v.rule});
  }
  if (rows.empty()) return;
  csv::Writer w(out / "violations.csv", {"admission_id", "field", "rule"});
  for (const auto& r : rows) w.row(r);
  throw DataError(std::to_string(rows.size()) + " input validation violation(s); see " + (out / "violations.csv").string());
}

/// Delay from the last preceding surgery to the first positive report, in
/// whole days, over eligible admissions (before applying the window).
inline std::map<std::int64_t, std::size_t> cxr_delay_histogram(std::span<const AdmissionBundle> bundles,
                                                               const pipeline::ReportLabeler& labeler) {
  std::map<std::int64_t, std::size_t> hist;
  for (const auto& b : bundles) {
    if (b.surgeries.empty() || b.history.has(HistoryFlag::prior_aspiration)) continue;
    std::vector<const RadiologyReport*> reports;
    for (const auto& r : b.reports) reports.push_back(&r);
    std::stable_sort(reports.begin(), reports.end(), [](auto* x, auto* y) { return x->time < y->time; });
    for (const auto* r : reports) {
      std::optional<Minutes> last;
      for (const auto& s : b.surgeries) {
        if (s.time <= r->time) last = last ? std::max(*last, s.time) : s.time;
      }
      if (!last || !pipeline::label_report(*r, labeler)) continue;
      ++hist[(r->time - *last) / kMinutesPerDay];
      break;
    }
  }
  return hist;
}

inline PipelineOutput run_pipeline(const RunConfig& cfg, const fs::path& in, const fs::path& out) {
  Manifest m(out, "pipeline", cfg);
  for (const char* f : {"admissions.csv", "history.csv", "surgeries.csv", "medications.csv", "reports.csv"}) {
    if (fs::exists(in / f)) m.input(in / f);
  }
  const auto bundles = io::read_bundles(in);
  const auto table = load_mme_table(in, m);
  check_bundles(bundles, table, out);

  const auto labeler = make_labeler(cfg);
  pipeline::CohortOptions opts;
  opts.window_days = cfg.window_days;
  opts.seed = cfg.cohort_seed();
  opts.mode = cfg.downsample;
  const auto cohort = pipeline::select_cohort(bundles, *labeler, opts);
  if (cohort.positives.empty()) throw DataError("cohort has no positive admissions");
  const auto samples = pipeline::build_samples(bundles, cohort, table, cfg.generator.tz_offset_minutes);

  PipelineOutput result;
  result.features = pipeline::assemble_dataset(samples);
  {
    csv::Writer w(m.output("cohort.csv"), {"admission_id", "label", "t_cutoff", "t_cxr", "los_until_discharge"});
    for (const auto& e : cohort.entries()) {
      const double los = pipeline::los_until_discharge(bundles[e.bundle_index]);
      result.los_until_discharge.push_back(los);
      w.row({e.admission_id, e.label ? "1" : "0", csv::format(e.t_cutoff), e.t_cxr ? csv::format(*e.t_cxr) : "",
             csv::format(los)});
    }
  }
  write_dataset(m.output("features.csv"), result.features);
  {
    csv::Writer w(m.output("exclusions.csv"), {"admission_id", "reason"});
    for (const auto& x : cohort.exclusions) w.row({x.admission_id, x.reason});
  }
  {
    const auto& c = cohort.counts;
    csv::Writer w(m.output("fig_flowchart.csv"), {"stage", "count"});
    for (const auto& [name, v] : std::vector<std::pair<std::string, std::size_t>>{
             {"admissions", c.admissions},
             {"excluded_no_surgery", c.no_surgery},
             {"excluded_prior_aspiration", c.prior_aspiration},
             {"surgical_eligible", c.surgical_eligible},
             {"positives_in_window", c.positives},
             {"positive_report_out_of_window", c.out_of_window_reports},
             {"eligible_negatives", c.eligible_negatives},
             {"retained_negatives", c.retained_negatives}}) {
      w.row({name, std::to_string(v)});
    }
  }
  {
    const auto hist = cxr_delay_histogram(bundles, *labeler);
    std::size_t total = 0;
    for (const auto& [d, n] : hist) total += n;
    csv::Writer w(m.output("fig_cxr_delay.csv"), {"day", "count", "cumulative_percent"});
    std::size_t running = 0;
    for (const auto& [d, n] : hist) {
      running += n;
      w.row({std::to_string(d), std::to_string(n), csv::format(100.0 * static_cast<double>(running) / static_cast<double>(total))});
    }
  }
  {
    // Gender breakdown over the eligible surgical population and the cohort.
    std::array<std::size_t, 2> eligible{}, positive{};
    std::set<std::string> positives;
    for (const auto& p : cohort.positives) positives.insert(p.admission_id);
    for (const auto& b : bundles) {
      if (b.surgeries.empty() || b.history.has(HistoryFlag::prior_aspiration)) continue;
      const auto g = static_cast<std::size_t>(b.gender);
      ++eligible[g];
      if (positives.count(b.admission_id)) ++positive[g];
    }
    const auto& d = result.features;
    const auto male = static_cast<Eigen::Index>(d.column("gender=male"));
    const auto mme = static_cast<Eigen::Index>(d.column("max_daily_mme"));
    const auto any = static_cast<Eigen::Index>(d.column("opioid:any_given"));
    csv::Writer w(m.output("fig_gender.csv"), {"gender", "surgical_eligible", "positives", "aspiration_rate",
                                               "cohort_opioid_exposed", "median_max_daily_mme", "mean_max_daily_mme"});
    for (std::size_t g = 0; g < 2; ++g) {
      std::vector<double> doses;
      for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
        if ((d.X(r, male) > 0.5) == (g == 1) && d.X(r, any) > 0.5) doses.push_back(d.X(r, mme));
      }
      const double mean = doses.empty() ? std::nan("") : std::accumulate(doses.begin(), doses.end(), 0.0) / static_cast<double>(doses.size());
      w.row({std::string(kGenderNames[g]), std::to_string(eligible[g]), std::to_string(positive[g]),
             csv::format(eligible[g] ? static_cast<double>(positive[g]) / static_cast<double>(eligible[g]) : std::nan("")),
             std::to_string(doses.size()), csv::format(eval::summarize(doses).median), csv::format(mean)});
    }
  }
  m.write();
  return result;
}

/// features.csv plus los_until_discharge from cohort.csv (when present).
inline PipelineOutput load_pipeline_output(const fs::path& in, Manifest& m) {
  PipelineOutput p;
  m.input(in / "features.csv");
  p.features = read_dataset(in / "features.csv", pipeline::feature_columns());
  const auto cohort_path = in / "cohort.csv";
  p.los_until_discharge.assign(p.features.rows(), std::nan(""));
  if (fs::exists(cohort_path)) {
    m.input(cohort_path);
    const auto t = csv::read(cohort_path);
    const auto id = t.column("admission_id");
    const auto los = t.column("los_until_discharge");
    std::map<std::string, double> by_id;
    for (const auto& row : t.rows) by_id[row[id]] = csv::parse_double(row[los], "los_until_discharge");
    for (std::size_t r = 0; r < p.features.rows(); ++r) {
      auto it = by_id.find(p.features.ids[r]);
      if (it != by_id.end()) p.los_until_discharge[r] = it->second;
    }
  }
  return p;
}

// ---- train ----

struct ModelBundle {
  MedianImputer imputer;
  learn::TrainedModel model;
};

inline json imputer_json(const MedianImputer& imp) {
  return {{"source_columns", imp.source_columns()}, {"medians", imp.medians()}, {"indicators", imp.indicator_columns()}};
}

inline void save_bundle(const fs::path& p, const ModelBundle& b) {
  json j = learn::model_to_json(b.model);
  j["imputer"] = imputer_json(b.imputer);
  write_json(p, j);
}

inline ModelBundle load_bundle(const fs::path& p) {
  const json j = read_json(p);
  ModelBundle b;
  b.model = learn::model_from_json(j);
  try {
    const auto& imp = j.at("imputer");
    b.imputer = MedianImputer::restore(imp.at("source_columns").get<std::vector<std::string>>(),
                                       imp.at("medians").get<std::vector<double>>(),
                                       imp.at("indicators").get<std::vector<std::size_t>>());
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": malformed imputer: " + e.what());
  }
  return b;
}

inline Vector predict(const ModelBundle& b, const Dataset& d) {
  const Dataset x = b.imputer.transform(d);
  if (x.columns != b.model.columns) throw DataError("model columns differ from the feature file");
  return b.model.predict_proba(x.X);
}

/// Split membership by admission id, written as split.csv.
struct SplitResult {
  Dataset train, test;
  std::vector<double> test_los;
};

inline SplitResult split_data(const RunConfig& cfg, const PipelineOutput& p) {
  const auto& d = p.features;
  const auto idx = eval::split_indices(std::span<const double>(d.y.data(), d.rows()), cfg.train_fraction, cfg.split_seed());
  SplitResult s{d.subset(idx.train), d.subset(idx.test), {}};
  for (auto r : idx.test) s.test_los.push_back(p.los_until_discharge[r]);
  return s;
}

inline std::vector<double> model_importance(const learn::TrainedModel& m) {
  if (const auto* f = std::get_if<learn::ForestModel>(&m.model)) return learn::feature_importance(*f);
  if (const auto* g = std::get_if<learn::GbtModel>(&m.model)) {
    std::vector<double> total(g->n_features(), 0.0);
    for (const auto& t : g->trees()) {
      const auto dec = t.impurity_decrease();
      for (std::size_t k = 0; k < total.size(); ++k) total[k] += dec[k];
    }
    const double sum = std::accumulate(total.begin(), total.end(), 0.0);
    if (sum > 0) {
      for (double& v : total) v /= sum;
    }
    return total;
  }
  return {};
}

inline ModelBundle run_train(const RunConfig& cfg, const PipelineOutput& p, const fs::path& out, Manifest* parent = nullptr) {
  Manifest own(out, "train", cfg);
  Manifest& m = parent ? *parent : own;
  const auto s = split_data(cfg, p);
  {
    std::set<std::string> test_ids(s.test.ids.begin(), s.test.ids.end());
    csv::Writer w(m.output("split.csv"), {"admission_id", "set"});
    for (const auto& id : p.features.ids) w.row({id, test_ids.count(id) ? "test" : "train"});
  }

  ModelBundle b;
  b.imputer.fit(s.train);
  const Dataset train = b.imputer.transform(s.train);
  b.model.columns = train.columns;
  switch (cfg.model_family) {
    case learn::ModelFamily::forest: {
      auto fp = cfg.forest;
      fp.seed = cfg.model_seed();
      b.model.model = learn::fit_forest(train.X, train.y, fp, cfg.threads);
      break;
    }
    case learn::ModelFamily::gbt: {
      auto gp = cfg.gbt;
      gp.seed = cfg.model_seed();
      b.model.model = learn::fit_gbt(train.X, train.y, gp);
      break;
    }
    case learn::ModelFamily::mlp: {
      auto mp = cfg.mlp;
      mp.seed = cfg.model_seed();
      b.model.model = learn::fit_mlp(train.X, train.y, mp);
      break;
    }
  }
  save_bundle(m.output("model.json"), b);

  const auto importance = model_importance(b.model);
  if (!importance.empty()) {
    std::vector<std::size_t> order(importance.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto c) { return importance[a] > importance[c]; });
    csv::Writer w(m.output("importance.csv"), {"feature", "score", "rank"});
    for (std::size_t k = 0; k < order.size(); ++k) {
      w.row({b.model.columns[order[k]], csv::format(importance[order[k]]), std::to_string(k + 1)});
    }
  }
  if (!parent) own.write();
  return b;
}

// ---- evaluate ----

inline eval::EvalReport run_evaluate(const RunConfig& cfg, const PipelineOutput& p, const ModelBundle& b,
                                     const fs::path& out, Manifest* parent = nullptr) {
  Manifest own(out, "evaluate", cfg);
  Manifest& m = parent ? *parent : own;
  const auto s = split_data(cfg, p);
  const Vector scores = predict(b, s.test);
  const auto report = eval::evaluate(scores, s.test.y, cfg.threshold);

  json j = eval::to_json(report);
  j["model_family"] = learn::to_string(b.model.family());
  j["n_train"] = s.train.rows();
  j["n_test"] = s.test.rows();
  write_json(m.output("metrics.json"), j);
  {
    csv::Writer w(m.output("predictions.csv"), {"admission_id", "label", "score", "predicted"});
    for (std::size_t r = 0; r < s.test.rows(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      w.row({s.test.ids[r], s.test.y(i) > 0.5 ? "1" : "0", csv::format(scores(i)), scores(i) >= cfg.threshold ? "1" : "0"});
    }
  }
  if (report.tp + report.fn > 0 && report.tn + report.fp > 0) {
    const auto roc = eval::roc_curve(std::span<const double>(scores.data(), s.test.rows()),
                                     std::span<const double>(s.test.y.data(), s.test.rows()));
    csv::Writer w(m.output("roc_curve.csv"), {"threshold", "tpr", "fpr"});
    for (const auto& pt : roc) {
      w.row({std::isinf(pt.threshold) ? "inf" : csv::format(pt.threshold), csv::format(pt.tpr), csv::format(pt.fpr)});
    }
  }
  {
    csv::Writer w(m.output("fig_confusion.csv"), {"actual", "predicted", "count"});
    w.row({"1", "1", std::to_string(report.tp)});
    w.row({"1", "0", std::to_string(report.fn)});
    w.row({"0", "1", std::to_string(report.fp)});
    w.row({"0", "0", std::to_string(report.tn)});
  }
  if (!parent) own.write();
  return report;
}

// ---- false-negative analysis ----

inline eval::FnProfile run_fn_analysis(const RunConfig& cfg, const PipelineOutput& p, const ModelBundle& b,
                                       const fs::path& out, Manifest* parent = nullptr) {
  Manifest own(out, "fn-analysis", cfg);
  Manifest& m = parent ? *parent : own;
  const auto s = split_data(cfg, p);
  const Vector scores = predict(b, s.test);
  const auto profile = eval::false_negative_analysis(scores, s.test, s.test_los, cfg.threshold);
  write_json(m.output("fn_profile.json"), eval::to_json(profile));
  {
    csv::Writer w(m.output("fig_fn_features.csv"), {"group", "feature", "n", "q1", "median", "q3"});
    for (const auto& [name, g] : {std::pair{"positives", &profile.positives}, std::pair{"false_negatives", &profile.false_negatives}}) {
      for (std::size_t f = 0; f < g->features.size(); ++f) {
        const auto& su = g->features[f];
        w.row({name, eval::fn_profile_features()[f], std::to_string(su.n), csv::format(su.q1), csv::format(su.median),
               csv::format(su.q3)});
      }
    }
  }
  {
    csv::Writer w(m.output("fig_fn_sites.csv"), {"group", "site", "percent"});
    for (const auto& [name, g] : {std::pair{"positives", &profile.positives}, std::pair{"false_negatives", &profile.false_negatives}}) {
      for (std::size_t k = 0; k < g->site_percent.size(); ++k) {
        w.row({name, std::string(kSiteNames[k]), csv::format(g->site_percent[k])});
      }
    }
  }
  if (!parent) own.write();
  return profile;
}

// ---- causal ----

/// Whole-cohort covariates with median imputation (causal analysis does not split).
inline Dataset causal_dataset(const PipelineOutput& p) {
  MedianImputer imp;
  imp.fit(p.features);
  return imp.transform(p.features);
}

inline causal::BootstrapParams bootstrap_params(const RunConfig& cfg, std::uint64_t stream) {
  causal::BootstrapParams bp;
  bp.n_boot = cfg.n_boot;
  bp.level = cfg.level;
  bp.seed = derive_seed(cfg.causal_seed(), stream);
  bp.threads = cfg.threads;
  bp.nuisance = cfg.nuisance;
  return bp;
}

inline std::uint64_t treatment_stream(const std::string& name) {
  const auto names = treatment_names();
  return static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

inline std::string format_table(const std::vector<causal::AteRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-26s %-18s %-22s %s\n", "treatment", "estimate", "95% CI", "significant");
  out += line;
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    char ci[64];
    std::snprintf(ci, sizeof ci, "[%.3f, %.3f]", e.ci_low, e.ci_high);
    std::snprintf(line, sizeof line, "%-26s %-18s %-22s %s\n", r.treatment.c_str(), causal::format_estimate(e).c_str(), ci,
                  e.significant() ? "yes" : "no");
    out += line;
  }
  return out;
}

inline std::vector<causal::AteRow> run_ate(const RunConfig& cfg, const PipelineOutput& p,
                                           const std::vector<std::string>& treatments, const fs::path& out,
                                           Manifest* parent = nullptr) {
  Manifest own(out, "ate", cfg);
  Manifest& m = parent ? *parent : own;
  const Dataset d = causal_dataset(p);
  std::vector<causal::AteRow> rows;
  for (const auto& name : treatments) {
    const auto t = causal::require_treatment(name);
    const auto frame = causal::build_frame(d, t, cfg.opioid_dose_threshold);
    rows.push_back({name, causal::estimate(frame, bootstrap_params(cfg, treatment_stream(name)))});
  }
  write_json(m.output("ate_table.json"), causal::ate_table_json(rows));
  causal::write_ate_csv(m.output("ate_table.csv"), rows);
  std::vector<causal::AteRow> sites;
  for (const auto& r : rows) {
    if (r.treatment.rfind("site:", 0) == 0) sites.push_back(r);
  }
  if (!sites.empty()) causal::write_ate_csv(m.output("site_ate.csv"), sites);
  if (!parent) own.write();
  return rows;
}

inline causal::GroupComparison run_cate(const RunConfig& cfg, const PipelineOutput& p, const std::string& treatment,
                                        const fs::path& out, Manifest* parent = nullptr) {
  Manifest own(out, "cate", cfg);
  Manifest& m = parent ? *parent : own;
  const Dataset d = causal_dataset(p);
  const auto frame = causal::build_frame(d, causal::require_treatment(treatment), cfg.opioid_dose_threshold);
  const auto g = causal::cate_by_gender(frame, bootstrap_params(cfg, 100 + treatment_stream(treatment)));
  json j = causal::to_json(g);
  j["treatment"] = treatment;
  write_json(m.output("cate_table.json"), j);
  std::vector<causal::AteRow> rows;
  for (const auto& [name, e] : g.groups) rows.push_back({"gender=" + name, e});
  rows.push_back({"difference " + g.difference_label, g.difference});
  causal::write_ate_csv(m.output("cate_table.csv"), rows);
  if (!parent) own.write();
  return g;
}

// ---- run ----

inline void run_all(const RunConfig& cfg, const fs::path& in, const fs::path& out, std::ostream& log) {
  const auto p = run_pipeline(cfg, in, out);
  log << "pipeline: " << p.features.rows() << " cohort rows\n";
  Manifest m(out, "run", cfg);
  m.input(out / "features.csv");
  const auto b = run_train(cfg, p, out, &m);
  const auto report = run_evaluate(cfg, p, b, out, &m);
  log << "evaluate: AUROC " << csv::format(report.auroc) << "\n";
  run_fn_analysis(cfg, p, b, out, &m);
  const auto rows = run_ate(cfg, p, cfg.treatments, out, &m);
  log << format_table(rows);
  const auto g = run_cate(cfg, p, cfg.cate_treatment, out, &m);
  for (const auto& [name, e] : g.groups) log << "cate " << cfg.cate_treatment << " " << name << ": " << causal::format_estimate(e) << "\n";
  m.write();
}

}  // namespace aspire::workflow
