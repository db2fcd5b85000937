#pragma once

// Self-describing JSON model files: family, feature columns, hyperparameters
// and the full fitted state. Doubles round-trip exactly.

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspire/core/errors.hpp"
#include "aspire/learn/forest.hpp"
#include "aspire/learn/gbt.hpp"
#include "aspire/learn/mlp.hpp"

namespace aspire::learn {

inline constexpr int kModelFormatVersion = 1;

enum class ModelFamily { forest, gbt, mlp };

inline std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::forest: return "forest";
    case ModelFamily::gbt: return "gbt";
    case ModelFamily::mlp: return "mlp";
  }
  return "?";
}

inline ModelFamily parse_family(const std::string& name) {
  if (name == "forest") return ModelFamily::forest;
  if (name == "gbt") return ModelFamily::gbt;
  if (name == "mlp") return ModelFamily::mlp;
  throw ConfigError("model.family", "unknown model family '" + name + "' (expected forest, gbt or mlp)");
}

/// A fitted model of any family together with the columns it was trained on.
struct TrainedModel {
  std::vector<std::string> columns;
  std::variant<ForestModel, GbtModel, MlpModel> model;

  ModelFamily family() const { return static_cast<ModelFamily>(model.index()); }

  Vector predict_proba(const Matrix& X) const {
    return std::visit([&](const auto& m) { return m.predict_proba(X); }, model);
  }
};

namespace detail {

using nlohmann::json;

inline const char* criterion_name(SplitCriterion c) {
  switch (c) {
    case SplitCriterion::gini: return "gini";
    case SplitCriterion::variance: return "variance";
    case SplitCriterion::newton: return "newton";
  }
  return "?";
}

inline SplitCriterion parse_criterion(const std::string& s) {
  if (s == "gini") return SplitCriterion::gini;
  if (s == "variance") return SplitCriterion::variance;
  if (s == "newton") return SplitCriterion::newton;
  throw DataError("model file: unknown split criterion '" + s + "'");
}

inline json tree_to_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes()) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.impurity, n.n_samples});
  }
  return {{"criterion", criterion_name(t.criterion())}, {"n_features", t.n_features()}, {"nodes", nodes}};
}

inline DecisionTree tree_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& a : j.at("nodes")) {
    TreeNode n;
    n.feature = a.at(0).get<int>();
    n.threshold = a.at(1).get<double>();
    n.left = a.at(2).get<int>();
    n.right = a.at(3).get<int>();
    n.value = a.at(4).get<double>();
    n.impurity = a.at(5).get<double>();
    n.n_samples = a.at(6).get<double>();
    nodes.push_back(n);
  }
  const auto n_nodes = static_cast<int>(nodes.size());
  for (const auto& n : nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= n_nodes || n.right >= n_nodes)) {
      throw DataError("model file: corrupt tree node references");
    }
  }
  return DecisionTree(parse_criterion(j.at("criterion").get<std::string>()), j.at("n_features").get<std::size_t>(),
                      std::move(nodes));
}

inline json optional_size(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<std::size_t> read_optional_size(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::size_t>();
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& m) {
  using detail::json;
  json j = {{"format", "aspire-model"}, {"version", kModelFormatVersion}, {"family", to_string(m.family())},
            {"columns", m.columns}};
  if (const auto* f = std::get_if<ForestModel>(&m.model)) {
    const auto& p = f->params();
    j["params"] = {{"n_estimators", p.n_estimators},     {"min_samples_split", p.min_samples_split},
                   {"min_samples_leaf", p.min_samples_leaf}, {"max_depth", detail::optional_size(p.max_depth)},
                   {"max_features", detail::optional_size(p.max_features)}, {"bootstrap", p.bootstrap},
                   {"seed", p.seed}};
    j["n_features"] = f->n_features();
    j["tree_seeds"] = f->tree_seeds();
    j["trees"] = json::array();
    for (const auto& t : f->trees()) j["trees"].push_back(detail::tree_to_json(t));
  } else if (const auto* g = std::get_if<GbtModel>(&m.model)) {
    const auto& p = g->params();
    j["params"] = {{"learning_rate", p.learning_rate}, {"n_rounds", p.n_rounds}, {"max_depth", p.max_depth},
                   {"lambda", p.lambda}, {"min_child_weight", p.min_child_weight},
                   {"max_abs_log_odds", p.max_abs_log_odds}, {"seed", p.seed}};
    j["n_features"] = g->n_features();
    j["initial_log_odds"] = g->initial_log_odds();
    j["trees"] = json::array();
    for (const auto& t : g->trees()) j["trees"].push_back(detail::tree_to_json(t));
  } else {
    const auto& mlp = std::get<MlpModel>(m.model);
    const auto& p = mlp.params();
    j["params"] = {{"hidden", p.hidden}, {"max_epochs", p.max_epochs}, {"batch_size", p.batch_size},
                   {"learning_rate", p.learning_rate}, {"alpha", p.alpha}, {"tol", p.tol},
                   {"n_iter_no_change", p.n_iter_no_change}, {"standardize", p.standardize}, {"seed", p.seed}};
    const auto& w = mlp.weights();
    j["mean"] = detail::vector_to_json(mlp.mean());
    j["scale"] = detail::vector_to_json(mlp.scale());
    j["w1"] = std::vector<double>(w.w1.data(), w.w1.data() + w.w1.size());
    j["w1_shape"] = {w.w1.rows(), w.w1.cols()};
    j["b1"] = detail::vector_to_json(w.b1);
    j["w2"] = detail::vector_to_json(w.w2);
    j["b2"] = w.b2;
    j["loss_curve"] = mlp.loss_curve();
  }
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "aspire-model") throw DataError("not an aspire model file");
    if (j.at("version").get<int>() != kModelFormatVersion) throw DataError("unsupported model file version");
    TrainedModel m;
    m.columns = j.at("columns").get<std::vector<std::string>>();
    const auto& p = j.at("params");
    switch (parse_family(j.at("family").get<std::string>())) {
      case ModelFamily::forest: {
        ForestParams fp;
        fp.n_estimators = p.at("n_estimators");
        fp.min_samples_split = p.at("min_samples_split");
        fp.min_samples_leaf = p.at("min_samples_leaf");
        fp.max_depth = detail::read_optional_size(p.at("max_depth"));
        fp.max_features = detail::read_optional_size(p.at("max_features"));
        fp.bootstrap = p.at("bootstrap");
        fp.seed = p.at("seed");
        std::vector<DecisionTree> trees;
        for (const auto& t : j.at("trees")) trees.push_back(detail::tree_from_json(t));
        m.model = ForestModel(fp, j.at("n_features"), std::move(trees), j.at("tree_seeds").get<std::vector<std::uint64_t>>());
        break;
      }
      case ModelFamily::gbt: {
        GbtParams gp;
        gp.learning_rate = p.at("learning_rate");
        gp.n_rounds = p.at("n_rounds");
        gp.max_depth = p.at("max_depth");
        gp.lambda = p.at("lambda");
        gp.min_child_weight = p.at("min_child_weight");
        gp.max_abs_log_odds = p.at("max_abs_log_odds");
        gp.seed = p.at("seed");
        std::vector<DecisionTree> trees;
        for (const auto& t : j.at("trees")) trees.push_back(detail::tree_from_json(t));
        m.model = GbtModel(gp, j.at("n_features"), j.at("initial_log_odds"), std::move(trees));
        break;
      }
      case ModelFamily::mlp: {
        MlpParams mp;
        mp.hidden = p.at("hidden");
        mp.max_epochs = p.at("max_epochs");
        mp.batch_size = p.at("batch_size");
        mp.learning_rate = p.at("learning_rate");
        mp.alpha = p.at("alpha");
        mp.tol = p.at("tol");
        mp.n_iter_no_change = p.at("n_iter_no_change");
        mp.standardize = p.at("standardize");
        mp.seed = p.at("seed");
        MlpWeights w;
        const auto shape = j.at("w1_shape").get<std::vector<Eigen::Index>>();
        const auto w1 = j.at("w1").get<std::vector<double>>();
        if (shape.size() != 2 || static_cast<std::size_t>(shape[0] * shape[1]) != w1.size()) {
          throw DataError("model file: w1 shape mismatch");
        }
        w.w1 = Eigen::Map<const Matrix>(w1.data(), shape[0], shape[1]);
        w.b1 = detail::vector_from_json(j.at("b1"));
        w.w2 = detail::vector_from_json(j.at("w2"));
        w.b2 = j.at("b2");
        m.model = MlpModel(mp, detail::vector_from_json(j.at("mean")), detail::vector_from_json(j.at("scale")),
                           std::move(w), j.at("loss_curve").get<std::vector<double>>());
        break;
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_json(m).dump(1) << '\n';
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace aspire::learn
