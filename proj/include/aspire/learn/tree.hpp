#pragma once

// CART decision trees.
//
// One builder serves three split criteria:
//   gini      classification on 0/1 targets, node cost n * (1 - p0^2 - p1^2)
//   variance  regression, node cost = sum of squared deviations
//   newton    boosting stage on (gradient, hessian) pairs, node cost = -G^2 / (H + lambda)
// A node is split on the candidate with the lowest summed child cost. Candidate
// thresholds are midpoints between consecutive distinct values. Candidates are
// scanned by increasing feature index and then increasing threshold, and only a
// strictly better cost replaces the incumbent, so ties resolve to the lowest
// feature and then the lowest threshold.
//
// The builder keeps, for every feature, the node's samples sorted by that
// feature and partitions those lists stably at each split, so growing a level
// costs O(samples * features) after the initial sort.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aspire/core/errors.hpp"
#include "aspire/core/matrix.hpp"
#include "aspire/core/random.hpp"

namespace aspire::learn {

enum class SplitCriterion { gini, variance, newton };

struct TreeParams {
  SplitCriterion criterion = SplitCriterion::gini;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> max_depth;     // none: grow until pure or too small
  std::optional<std::size_t> max_features;  // none: all features
  std::uint64_t seed = 0;                   // drives feature subsampling
  double lambda = 1.0;                      // newton only: L2 penalty on leaf weights
  double min_child_weight = 1.0;            // newton only: minimum hessian sum per child
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;     // gini: P(class 1); variance: mean target; newton: leaf weight
  double impurity = 0.0;  // gini index / variance per sample; newton: node cost
  double n_samples = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Row order of every column of a matrix, computed once and reused by many
/// fits on (resamples of) the same rows.
class ColumnOrder {
 public:
  ColumnOrder() = default;
  explicit ColumnOrder(const Matrix& X) : rows_(static_cast<std::size_t>(X.rows())) {
    order_.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
      auto& o = order_[static_cast<std::size_t>(f)];
      o.resize(rows_);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    }
  }

  std::size_t rows() const { return rows_; }
  const std::vector<std::uint32_t>& column(std::size_t f) const { return order_[f]; }

 private:
  std::size_t rows_ = 0;
  std::vector<std::vector<std::uint32_t>> order_;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(SplitCriterion criterion, std::size_t n_features, std::vector<TreeNode> nodes)
      : criterion_(criterion), n_features_(n_features), nodes_(std::move(nodes)) {}

  SplitCriterion criterion() const { return criterion_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }

  template <class Row>
  const TreeNode& leaf_for(const Row& row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(row(static_cast<Eigen::Index>(n.feature)) <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
  }

  double predict_row(const Matrix& X, Eigen::Index r) const {
    return leaf_for([&](Eigen::Index f) { return X(r, f); }).value;
  }

  /// Leaf value per row: P(class 1) for classifiers, mean target for regressors.
  Vector predict(const Matrix& X) const {
    if (nodes_.empty()) throw std::logic_error("DecisionTree::predict: tree is not trained");
    if (static_cast<std::size_t>(X.cols()) != n_features_) {
      throw DataError("DecisionTree::predict: expected " + std::to_string(n_features_) + " features");
    }
    Vector out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X, r);
    return out;
  }

  /// Per-feature sum of impurity decrease weighted by the node's share of the
  /// root sample count. Not normalized.
  std::vector<double> impurity_decrease() const {
    std::vector<double> out(n_features_, 0.0);
    if (nodes_.empty()) return out;
    const double root = nodes_.front().n_samples;
    for (const auto& n : nodes_) {
      if (n.is_leaf()) continue;
      const auto& l = nodes_[static_cast<std::size_t>(n.left)];
      const auto& r = nodes_[static_cast<std::size_t>(n.right)];
      const double decrease = n.n_samples * n.impurity - l.n_samples * l.impurity - r.n_samples * r.impurity;
      out[static_cast<std::size_t>(n.feature)] += std::max(0.0, decrease) / root;
    }
    return out;
  }

  std::size_t depth() const {
    if (nodes_.empty()) return 0;
    std::vector<std::size_t> depth(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      best = std::max(best, depth[i]);
      if (!nodes_[i].is_leaf()) {
        depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
      }
    }
    return best;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
  }

 private:
  SplitCriterion criterion_ = SplitCriterion::gini;
  std::size_t n_features_ = 0;
  std::vector<TreeNode> nodes_;
};

namespace detail {

struct Stats {
  double n = 0.0;
  double s1 = 0.0;  // gini: ones; variance: sum y; newton: sum g
  double s2 = 0.0;  // variance: sum y^2; newton: sum h

  void add(double n_, double a, double b) {
    n += n_;
    s1 += a;
    s2 += b;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const std::size_t> sample, std::span<const double> t1,
              std::span<const double> t2, const TreeParams& params, const ColumnOrder* presorted)
      : X_(X), params_(params), m_(sample.size()), d_(static_cast<std::size_t>(X.cols())), t1_(t1), t2_(t2),
        rng_(params.seed) {
    values_.resize(d_ * m_);
    for (std::size_t f = 0; f < d_; ++f) {
      for (std::size_t p = 0; p < m_; ++p) {
        values_[f * m_ + p] = X(static_cast<Eigen::Index>(sample[p]), static_cast<Eigen::Index>(f));
      }
    }
    lists_.resize(d_ * m_);
    if (presorted && presorted->rows() == static_cast<std::size_t>(X.rows())) {
      // Counting pass: positions of each row, then walk each global column order.
      std::vector<std::uint32_t> start(static_cast<std::size_t>(X.rows()) + 1, 0);
      for (std::size_t p = 0; p < m_; ++p) ++start[sample[p] + 1];
      std::partial_sum(start.begin(), start.end(), start.begin());
      std::vector<std::uint32_t> positions(m_);
      std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
      for (std::size_t p = 0; p < m_; ++p) positions[fill[sample[p]]++] = static_cast<std::uint32_t>(p);
      for (std::size_t f = 0; f < d_; ++f) {
        std::uint32_t* out = &lists_[f * m_];
        for (std::uint32_t row : presorted->column(f)) {
          for (std::uint32_t k = start[row]; k < start[row + 1]; ++k) *out++ = positions[k];
        }
      }
    } else {
      for (std::size_t f = 0; f < d_; ++f) {
        std::uint32_t* list = &lists_[f * m_];
        std::iota(list, list + m_, 0u);
        const double* v = &values_[f * m_];
        std::stable_sort(list, list + m_, [v](std::uint32_t a, std::uint32_t b) { return v[a] < v[b]; });
      }
    }
    buffer_.resize(m_);
    goes_left_.resize(m_);
    feature_pool_.resize(d_);
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0u);
  }

  DecisionTree build() {
    std::vector<TreeNode> nodes;
    struct Pending {
      std::size_t node, begin, end, depth;
    };
    std::vector<Pending> stack;
    nodes.push_back({});
    stack.push_back({0, 0, m_, 0});
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      Stats total;
      const std::uint32_t* list = &lists_[0];
      for (std::size_t k = job.begin; k < job.end; ++k) {
        const auto p = list[k];
        total.add(1.0, t1_[p], t2_[p]);
      }
      const double parent_cost = cost(total);
      TreeNode& node = nodes[job.node];
      node.n_samples = total.n;
      node.value = leaf_value(total);
      node.impurity = params_.criterion == SplitCriterion::newton ? parent_cost : parent_cost / total.n;

      const std::size_t count = job.end - job.begin;
      const bool depth_reached = params_.max_depth && job.depth >= *params_.max_depth;
      const bool pure = params_.criterion != SplitCriterion::newton && parent_cost <= 0.0;
      if (count < params_.min_samples_split || count < 2 * params_.min_samples_leaf || depth_reached || pure) continue;

      const auto split = find_split(job.begin, job.end, total, parent_cost);
      if (!split) continue;

      const std::size_t n_left = partition(job.begin, job.end, split->feature, split->threshold);
      const std::size_t left = nodes.size();
      nodes.push_back({});
      nodes.push_back({});
      TreeNode& parent = nodes[job.node];
      parent.feature = static_cast<int>(split->feature);
      parent.threshold = split->threshold;
      parent.left = static_cast<int>(left);
      parent.right = static_cast<int>(left + 1);
      // Right first so the left subtree is numbered first (pre-order).
      stack.push_back({left + 1, job.begin + n_left, job.end, job.depth + 1});
      stack.push_back({left, job.begin, job.begin + n_left, job.depth + 1});
    }
    SplitCriterion c = params_.criterion;
    return DecisionTree(c, d_, std::move(nodes));
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
    double cost;
  };

  double cost(const Stats& s) const {
    switch (params_.criterion) {
      case SplitCriterion::gini:
        return s.n > 0.0 ? 2.0 * s.s1 * (s.n - s.s1) / s.n : 0.0;
      case SplitCriterion::variance:
        return s.n > 0.0 ? std::max(0.0, s.s2 - s.s1 * s.s1 / s.n) : 0.0;
      case SplitCriterion::newton:
        return -s.s1 * s.s1 / (s.s2 + params_.lambda);
    }
    return 0.0;
  }

  double leaf_value(const Stats& s) const {
    switch (params_.criterion) {
      case SplitCriterion::gini:
      case SplitCriterion::variance:
        return s.n > 0.0 ? s.s1 / s.n : 0.0;
      case SplitCriterion::newton:
        return -s.s1 / (s.s2 + params_.lambda);
    }
    return 0.0;
  }

  bool child_allowed(const Stats& s) const {
    if (s.n < static_cast<double>(params_.min_samples_leaf)) return false;
    if (params_.criterion == SplitCriterion::newton && s.s2 < params_.min_child_weight) return false;
    return true;
  }

  bool constant_in_node(std::size_t f, std::size_t begin, std::size_t end) const {
    const std::uint32_t* list = &lists_[f * m_];
    const double* v = &values_[f * m_];
    return v[list[begin]] == v[list[end - 1]];
  }

  std::vector<std::size_t> candidate_features(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> chosen;
    const std::size_t want = params_.max_features ? std::min(*params_.max_features, d_) : d_;
    if (want >= d_) {
      for (std::size_t f = 0; f < d_; ++f) {
        if (!constant_in_node(f, begin, end)) chosen.push_back(f);
      }
      return chosen;
    }
    // Draw features without replacement until `want` non-constant ones are found.
    for (std::size_t k = 0; k < d_ && chosen.size() < want; ++k) {
      const std::size_t j = k + rng_.index(d_ - k);
      std::swap(feature_pool_[k], feature_pool_[j]);
      const std::size_t f = feature_pool_[k];
      if (!constant_in_node(f, begin, end)) chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  std::optional<Split> find_split(std::size_t begin, std::size_t end, const Stats& total, double parent_cost) {
    std::optional<Split> best;
    for (std::size_t f : candidate_features(begin, end)) {
      const std::uint32_t* list = &lists_[f * m_];
      const double* v = &values_[f * m_];
      Stats left;
      for (std::size_t k = begin; k + 1 < end; ++k) {
        const auto p = list[k];
        left.add(1.0, t1_[p], t2_[p]);
        const double here = v[p];
        const double next = v[list[k + 1]];
        if (!(here < next)) continue;
        const Stats right{total.n - left.n, total.s1 - left.s1, total.s2 - left.s2};
        if (!child_allowed(left) || !child_allowed(right)) continue;
        const double c = cost(left) + cost(right);
        if (!best || c < best->cost) {
          double threshold = 0.5 * (here + next);
          if (!(threshold < next)) threshold = here;
          best = Split{f, threshold, c};
        }
      }
    }
    if (!best) return std::nullopt;
    const double slack = 1e-12 * std::max(1.0, std::abs(parent_cost));
    if (params_.criterion == SplitCriterion::newton) {
      if (!(best->cost < parent_cost - slack)) return std::nullopt;  // gain must exceed gamma = 0
    } else if (best->cost > parent_cost + slack) {
      return std::nullopt;
    }
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, std::size_t feature, double threshold) {
    const double* v = &values_[feature * m_];
    std::size_t n_left = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto p = lists_[feature * m_ + k];
      goes_left_[p] = v[p] <= threshold;
      n_left += goes_left_[p];
    }
    for (std::size_t f = 0; f < d_; ++f) {
      std::uint32_t* list = &lists_[f * m_];
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto p = list[k];
        if (goes_left_[p]) {
          list[l++] = p;
        } else {
          buffer_[r++] = p;
        }
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), list + l);
    }
    return n_left;
  }

  const Matrix& X_;
  TreeParams params_;
  std::size_t m_;
  std::size_t d_;
  std::span<const double> t1_;
  std::span<const double> t2_;
  Rng rng_;
  std::vector<double> values_;
  std::vector<std::uint32_t> lists_;
  std::vector<std::uint32_t> buffer_;
  std::vector<char> goes_left_;
  std::vector<std::size_t> feature_pool_;
};

inline void check_inputs(const Matrix& X, std::size_t n_targets, std::span<const std::size_t> sample) {
  if (X.rows() == 0 || X.cols() == 0 || sample.empty()) throw DataError("fit_tree: empty training data");
  if (static_cast<std::size_t>(X.rows()) != n_targets) throw DataError("fit_tree: target length differs from rows");
  for (std::size_t r : sample) {
    if (r >= static_cast<std::size_t>(X.rows())) throw DataError("fit_tree: sample row out of range");
  }
  if (!X.allFinite()) throw DataError("fit_tree: non-finite feature value");
}

}  // namespace detail

/// Fits a gini or variance tree on `sample` (row indices of X, repeats allowed).
/// `presorted`, when given, must be the ColumnOrder of this X.
inline DecisionTree fit_tree(const Matrix& X, const Vector& y, std::span<const std::size_t> sample,
                             const TreeParams& params, const ColumnOrder* presorted = nullptr) {
  detail::check_inputs(X, static_cast<std::size_t>(y.size()), sample);
  if (params.criterion == SplitCriterion::newton) throw std::invalid_argument("fit_tree: use fit_newton_tree");
  if (!y.allFinite()) throw DataError("fit_tree: non-finite target");
  std::vector<double> t1(sample.size()), t2(sample.size());
  for (std::size_t p = 0; p < sample.size(); ++p) {
    const double v = y(static_cast<Eigen::Index>(sample[p]));
    if (params.criterion == SplitCriterion::gini && v != 0.0 && v != 1.0) {
      throw DataError("fit_tree: classification targets must be 0 or 1");
    }
    t1[p] = v;
    t2[p] = v * v;
  }
  return detail::TreeBuilder(X, sample, t1, t2, params, presorted).build();
}

inline DecisionTree fit_tree(const Matrix& X, const Vector& y, const TreeParams& params) {
  std::vector<std::size_t> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_tree(X, y, all, params);
}

/// Second-order boosting stage: gradient and hessian per row of X.
inline DecisionTree fit_newton_tree(const Matrix& X, std::span<const double> gradient, std::span<const double> hessian,
                                    TreeParams params) {
  std::vector<std::size_t> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  detail::check_inputs(X, gradient.size(), all);
  if (hessian.size() != gradient.size()) throw DataError("fit_newton_tree: gradient/hessian size mismatch");
  params.criterion = SplitCriterion::newton;
  return detail::TreeBuilder(X, all, gradient, hessian, params, nullptr).build();
}

}  // namespace aspire::learn
