#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aspire/workflow.hpp"

namespace fs = std::filesystem;
using namespace aspire;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  std::string in;
  std::string treatment;
  std::string group = "gender";
};

RunConfig load(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

fs::path require_dir(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(flag, "required");
  return value;
}

void audit(const Options& o, const std::string& message) {
  if (o.out.empty()) return;
  std::error_code ec;
  fs::create_directories(o.out, ec);
  std::ofstream log(fs::path(o.out) / "audit.log", std::ios::app);
  if (log) log << "error: " << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-operative aspiration cohort, prediction and treatment-effect toolkit"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Configuration file (sectioned key = value)");
  app.add_option("--seed", o.seed, "Seed overriding general.seed");
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it");
  app.add_option("--out", o.out, "Output directory");

  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort with ground truth");
  auto* run = app.add_subcommand("run", "pipeline, train, evaluate, ate, cate and fn-analysis in one go");
  auto* pipe = app.add_subcommand("pipeline", "Select the cohort and extract features");
  auto* train = app.add_subcommand("train", "Split features and fit the configured model");
  auto* evaluate = app.add_subcommand("evaluate", "Score the held-out split");
  auto* ate = app.add_subcommand("ate", "Estimate average treatment effects");
  auto* cate = app.add_subcommand("cate", "Estimate subgroup treatment effects");
  auto* fn = app.add_subcommand("fn-analysis", "Profile false negatives on the held-out split");
  for (auto* sub : {run, pipe, train, evaluate, ate, cate, fn}) {
    sub->add_option("--in", o.in, "Input directory")->required();
  }
  ate->add_option("--treatment", o.treatment, "Treatment name (default: all configured treatments)");
  cate->add_option("--treatment", o.treatment, "Treatment name (default: causal.cate_treatment)");
  cate->add_option("--group", o.group, "Subgroup partition")->check(CLI::IsMember({"gender"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = load(o);
    if (!o.treatment.empty()) causal::require_treatment(o.treatment);
    // Stage commands default to writing next to their inputs.
    if (o.out.empty() && !o.in.empty()) o.out = o.in;
    const fs::path out = require_dir(o.out, "--out");
    const fs::path in = o.in;

    if (gen->parsed()) {
      workflow::generate(cfg, out);
      std::cout << "wrote synthetic cohort to " << out.string() << "\n";
    } else if (run->parsed()) {
      workflow::run_all(cfg, in, out, std::cout);
    } else if (pipe->parsed()) {
      const auto p = workflow::run_pipeline(cfg, in, out);
      std::cout << "cohort rows: " << p.features.rows() << "\n";
    } else {
      workflow::Manifest reader(out, "load", cfg);
      const auto p = workflow::load_pipeline_output(in, reader);
      if (train->parsed()) {
        workflow::run_train(cfg, p, out);
        std::cout << "model written to " << (out / "model.json").string() << "\n";
      } else if (evaluate->parsed()) {
        const auto b = workflow::load_bundle(in / "model.json");
        const auto r = workflow::run_evaluate(cfg, p, b, out);
        std::cout << eval::to_json(r).dump(2) << "\n";
      } else if (fn->parsed()) {
        const auto b = workflow::load_bundle(in / "model.json");
        const auto prof = workflow::run_fn_analysis(cfg, p, b, out);
        std::cout << (prof.empty ? "no false negatives\n" : eval::to_json(prof).dump(2) + "\n");
      } else if (ate->parsed()) {
        const auto names = o.treatment.empty() ? cfg.treatments : std::vector<std::string>{o.treatment};
        for (const auto& n : names) causal::require_treatment(n);
        std::cout << workflow::format_table(workflow::run_ate(cfg, p, names, out));
      } else if (cate->parsed()) {
        const std::string t = o.treatment.empty() ? cfg.cate_treatment : causal::require_treatment(o.treatment).name();
        const auto g = workflow::run_cate(cfg, p, t, out);
        std::vector<causal::AteRow> rows;
        for (const auto& [name, e] : g.groups) rows.push_back({t + " [" + name + "]", e});
        rows.push_back({"difference " + g.difference_label, g.difference});
        std::cout << workflow::format_table(rows);
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    audit(o, e.what());
    return 1;
  }
}
