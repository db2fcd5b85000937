#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "aspire/core/parallel.hpp"
#include "aspire/core/random.hpp"
#include "aspire/learn/tree.hpp"

namespace aspire::learn {

struct ForestParams {
  std::size_t n_estimators = 100;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> max_depth;
  std::optional<std::size_t> max_features;  // none: floor(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 42;
};

/// Bagged gini trees; P(class 1) is the mean of the trees' leaf fractions.
class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(ForestParams params, std::size_t n_features, std::vector<DecisionTree> trees,
              std::vector<std::uint64_t> tree_seeds)
      : params_(params), n_features_(n_features), trees_(std::move(trees)), tree_seeds_(std::move(tree_seeds)) {}

  const ForestParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const std::vector<std::uint64_t>& tree_seeds() const { return tree_seeds_; }
  bool trained() const { return !trees_.empty(); }

  Vector predict_proba(const Matrix& X) const {
    if (!trained()) throw std::logic_error("ForestModel: not trained");
    Vector sum = Vector::Zero(X.rows());
    for (const auto& t : trees_) sum += t.predict(X);  // fixed tree order
    return sum / static_cast<double>(trees_.size());
  }

 private:
  ForestParams params_;
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<std::uint64_t> tree_seeds_;
};

inline std::size_t sqrt_features(std::size_t d) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
}

/// Tree t uses seed derive_seed(seed, t) for its bootstrap draw and feature
/// subsampling, so the model does not depend on `threads`.
inline ForestModel fit_forest(const Matrix& X, const Vector& y, const ForestParams& params, unsigned threads = 1) {
  if (params.n_estimators == 0) throw std::invalid_argument("fit_forest: n_estimators must be positive");
  if (X.rows() == 0 || X.cols() == 0) throw DataError("fit_forest: empty training data");
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t d = static_cast<std::size_t>(X.cols());
  const ColumnOrder order(X);

  std::vector<DecisionTree> trees(params.n_estimators);
  std::vector<std::uint64_t> seeds(params.n_estimators);
  for (std::size_t t = 0; t < seeds.size(); ++t) seeds[t] = derive_seed(params.seed, t);

  parallel_for(params.n_estimators, threads, [&](std::size_t t) {
    Rng rng(seeds[t]);
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = rng.index(n);
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    TreeParams tp;
    tp.criterion = SplitCriterion::gini;
    tp.min_samples_split = params.min_samples_split;
    tp.min_samples_leaf = params.min_samples_leaf;
    tp.max_depth = params.max_depth;
    tp.max_features = params.max_features ? *params.max_features : sqrt_features(d);
    tp.seed = rng.next();
    trees[t] = fit_tree(X, y, sample, tp, &order);
  });
  return ForestModel(params, d, std::move(trees), std::move(seeds));
}

/// Mean decrease in impurity: per-tree weighted decreases averaged over trees,
/// then normalized to sum to one. All zeros if no tree ever split.
inline std::vector<double> feature_importance(const ForestModel& model) {
  if (!model.trained()) throw std::logic_error("feature_importance: model is not trained");
  std::vector<double> total(model.n_features(), 0.0);
  for (const auto& tree : model.trees()) {
    const auto dec = tree.impurity_decrease();
    for (std::size_t f = 0; f < total.size(); ++f) total[f] += dec[f];
  }
  for (double& v : total) v /= static_cast<double>(model.trees().size());
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : total) v /= sum;
  } else if (total.size() == 1) {
    total[0] = 1.0;
  }
  return total;
}

}  // namespace aspire::learn
