#pragma once

// Gradient-boosted trees for binary logistic loss. Each round fits a Newton
// tree to g = p - y and h = p (1 - p); leaf weight -G / (H + lambda), scaled by
// the learning rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aspire/learn/tree.hpp"

namespace aspire::learn {

struct GbtParams {
  double learning_rate = 0.3;
  std::size_t n_rounds = 100;
  std::size_t max_depth = 6;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  double max_abs_log_odds = 15.0;  // bound on the initial log-odds
  std::uint64_t seed = 42;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Mean binary cross-entropy with probabilities clipped away from 0 and 1.
inline double log_loss(const Vector& p, const Vector& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p(i), 1e-15, 1.0 - 1e-15);
    total -= y(i) > 0.5 ? std::log(q) : std::log1p(-q);
  }
  return y.size() ? total / static_cast<double>(y.size()) : 0.0;
}

class GbtModel {
 public:
  GbtModel() = default;
  GbtModel(GbtParams params, std::size_t n_features, double initial_log_odds, std::vector<DecisionTree> trees)
      : params_(params), n_features_(n_features), initial_log_odds_(initial_log_odds), trees_(std::move(trees)) {}

  const GbtParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }
  double initial_log_odds() const { return initial_log_odds_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  bool trained() const { return n_features_ > 0; }

  /// Raw log-odds using the first `rounds` trees (all when rounds exceeds the count).
  Vector margin(const Matrix& X, std::size_t rounds = static_cast<std::size_t>(-1)) const {
    if (!trained()) throw std::logic_error("GbtModel: not trained");
    Vector m = Vector::Constant(X.rows(), initial_log_odds_);
    const std::size_t k = std::min(rounds, trees_.size());
    for (std::size_t t = 0; t < k; ++t) m += params_.learning_rate * trees_[t].predict(X);
    return m;
  }

  Vector predict_proba(const Matrix& X, std::size_t rounds = static_cast<std::size_t>(-1)) const {
    return margin(X, rounds).unaryExpr([](double v) { return sigmoid(v); });
  }

  /// Log loss after 0, 1, ..., n rounds.
  std::vector<double> staged_log_loss(const Matrix& X, const Vector& y) const {
    std::vector<double> out;
    Vector m = Vector::Constant(X.rows(), initial_log_odds_);
    out.push_back(log_loss(m.unaryExpr([](double v) { return sigmoid(v); }), y));
    for (const auto& t : trees_) {
      m += params_.learning_rate * t.predict(X);
      out.push_back(log_loss(m.unaryExpr([](double v) { return sigmoid(v); }), y));
    }
    return out;
  }

 private:
  GbtParams params_;
  std::size_t n_features_ = 0;
  double initial_log_odds_ = 0.0;
  std::vector<DecisionTree> trees_;
};

inline GbtModel fit_gbt(const Matrix& X, const Vector& y, const GbtParams& params) {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("fit_gbt: empty training data");
  if (y.size() != X.rows()) throw DataError("fit_gbt: target length differs from rows");
  if (!X.allFinite()) throw DataError("fit_gbt: non-finite feature value");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("fit_gbt: targets must be 0 or 1");
  }
  const double rate = y.mean();
  const double bound = params.max_abs_log_odds;
  double initial = rate <= 0.0 ? -bound : rate >= 1.0 ? bound : std::log(rate / (1.0 - rate));
  initial = std::clamp(initial, -bound, bound);

  const std::size_t n = static_cast<std::size_t>(X.rows());
  Vector margin = Vector::Constant(X.rows(), initial);
  std::vector<double> g(n), h(n);
  std::vector<DecisionTree> trees;
  TreeParams tp;
  tp.criterion = SplitCriterion::newton;
  tp.max_depth = params.max_depth;
  tp.lambda = params.lambda;
  tp.min_child_weight = params.min_child_weight;
  tp.min_samples_split = 2;
  tp.min_samples_leaf = 1;
  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin(static_cast<Eigen::Index>(i)));
      g[i] = p - y(static_cast<Eigen::Index>(i));
      h[i] = p * (1.0 - p);
    }
    tp.seed = derive_seed(params.seed, round);
    trees.push_back(fit_newton_tree(X, g, h, tp));
    margin += params.learning_rate * trees.back().predict(X);
  }
  return GbtModel(params, static_cast<std::size_t>(X.cols()), initial, std::move(trees));
}

}  // namespace aspire::learn
