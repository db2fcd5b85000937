#pragma once

// Single-hidden-layer perceptron for binary classification: z-scored inputs,
// ReLU hidden layer, sigmoid output, cross-entropy with L2 penalty, trained by
// mini-batch Adam with early stopping on the training loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "aspire/core/errors.hpp"
#include "aspire/core/matrix.hpp"
#include "aspire/core/random.hpp"

namespace aspire::learn {

struct MlpParams {
  std::size_t hidden = 250;
  std::size_t max_epochs = 500;
  std::size_t batch_size = 200;
  double learning_rate = 1e-3;
  double alpha = 1e-4;  // L2 penalty
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tol = 1e-4;
  std::size_t n_iter_no_change = 10;
  bool standardize = true;
  bool zero_init = false;
  std::uint64_t seed = 42;
};

struct MlpWeights {
  Matrix w1;  // d x hidden
  Vector b1;  // hidden
  Vector w2;  // hidden
  double b2 = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + 1); }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), w1.data(), w1.data() + w1.size());
    out.insert(out.end(), b1.data(), b1.data() + b1.size());
    out.insert(out.end(), w2.data(), w2.data() + w2.size());
    out.push_back(b2);
    return out;
  }

  void assign(const std::vector<double>& flat) {
    if (flat.size() != size()) throw std::invalid_argument("MlpWeights::assign: size mismatch");
    auto it = flat.begin();
    std::copy(it, it + w1.size(), w1.data());
    it += w1.size();
    std::copy(it, it + b1.size(), b1.data());
    it += b1.size();
    std::copy(it, it + w2.size(), w2.data());
    it += w2.size();
    b2 = *it;
  }
};

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace detail

/// Penalized mean cross-entropy of a batch and, if `grad` is non-null, its
/// gradient in the same layout as `weights`.
inline double mlp_loss(const MlpWeights& weights, const Matrix& X, const Vector& y, double alpha,
                       MlpWeights* grad = nullptr) {
  const auto n = static_cast<double>(X.rows());
  const Matrix z1 = (X * weights.w1).rowwise() + weights.b1.transpose();
  const Matrix a1 = z1.cwiseMax(0.0);
  const Vector z2 = (a1 * weights.w2).array() + weights.b2;

  double loss = 0.0;
  for (Eigen::Index i = 0; i < z2.size(); ++i) {
    loss += y(i) > 0.5 ? detail::softplus(-z2(i)) : detail::softplus(z2(i));
  }
  loss /= n;
  loss += 0.5 * alpha * (weights.w1.squaredNorm() + weights.w2.squaredNorm()) / n;

  if (grad) {
    const Vector p = z2.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    const Vector dz2 = (p - y) / n;
    grad->w2 = a1.transpose() * dz2 + (alpha / n) * weights.w2;
    grad->b2 = dz2.sum();
    Matrix dz1 = dz2 * weights.w2.transpose();
    dz1.array() *= (z1.array() > 0.0).cast<double>();
    grad->w1 = X.transpose() * dz1 + (alpha / n) * weights.w1;
    grad->b1 = dz1.colwise().sum().transpose();
  }
  return loss;
}

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(MlpParams params, Vector mean, Vector scale, MlpWeights weights, std::vector<double> loss_curve)
      : params_(params), mean_(std::move(mean)), scale_(std::move(scale)), weights_(std::move(weights)),
        loss_curve_(std::move(loss_curve)) {}

  const MlpParams& params() const { return params_; }
  const MlpWeights& weights() const { return weights_; }
  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }
  std::size_t n_features() const { return static_cast<std::size_t>(weights_.w1.rows()); }
  bool trained() const { return weights_.w1.size() > 0; }

  Matrix standardize(const Matrix& X) const {
    return (X.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
  }

  Vector predict_proba(const Matrix& X) const {
    if (!trained()) throw std::logic_error("MlpModel: not trained");
    if (static_cast<std::size_t>(X.cols()) != n_features()) throw DataError("MlpModel: feature count mismatch");
    const Matrix Z = standardize(X);
    const Matrix a1 = ((Z * weights_.w1).rowwise() + weights_.b1.transpose()).cwiseMax(0.0);
    const Vector z2 = (a1 * weights_.w2).array() + weights_.b2;
    return z2.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }

 private:
  MlpParams params_;
  Vector mean_, scale_;
  MlpWeights weights_;
  std::vector<double> loss_curve_;
};

/// Glorot-uniform initialization (gain 6 for the ReLU layer, 2 for the sigmoid output).
inline MlpWeights init_mlp_weights(std::size_t d, const MlpParams& params) {
  MlpWeights w;
  const auto D = static_cast<Eigen::Index>(d);
  const auto H = static_cast<Eigen::Index>(params.hidden);
  w.w1 = Matrix::Zero(D, H);
  w.b1 = Vector::Zero(H);
  w.w2 = Vector::Zero(H);
  w.b2 = 0.0;
  if (params.zero_init) return w;
  Rng rng(params.seed);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(d + params.hidden));
  const double bound2 = std::sqrt(2.0 / static_cast<double>(params.hidden + 1));
  for (Eigen::Index j = 0; j < H; ++j) {
    for (Eigen::Index i = 0; i < D; ++i) w.w1(i, j) = rng.uniform(-bound1, bound1);
  }
  for (Eigen::Index j = 0; j < H; ++j) w.b1(j) = rng.uniform(-bound1, bound1);
  for (Eigen::Index j = 0; j < H; ++j) w.w2(j) = rng.uniform(-bound2, bound2);
  w.b2 = rng.uniform(-bound2, bound2);
  return w;
}

inline MlpModel fit_mlp(const Matrix& X, const Vector& y, const MlpParams& params) {
  if (X.rows() == 0 || X.cols() == 0) throw DataError("fit_mlp: empty training data");
  if (y.size() != X.rows()) throw DataError("fit_mlp: target length differs from rows");
  if (!X.allFinite() || !y.allFinite()) throw DataError("fit_mlp: non-finite input");
  if (params.hidden == 0 || params.batch_size == 0) throw std::invalid_argument("fit_mlp: hidden and batch_size must be positive");

  const auto n = X.rows();
  const auto d = X.cols();
  Vector mean = Vector::Zero(d);
  Vector scale = Vector::Ones(d);
  if (params.standardize) {
    mean = X.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt((X.col(j).array() - mean(j)).square().mean());
      scale(j) = sd > 0.0 ? sd : 1.0;
    }
  }
  const Matrix Z = (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

  MlpWeights w = init_mlp_weights(static_cast<std::size_t>(d), params);
  std::vector<double> theta = w.flatten();
  std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0);
  MlpWeights grad = w;
  Rng rng(derive_seed(params.seed, 1));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = std::min<Eigen::Index>(static_cast<Eigen::Index>(params.batch_size), n);

  std::vector<double> curve;
  double best = std::numeric_limits<double>::infinity();
  std::size_t no_improvement = 0;
  std::size_t step = 0;
  Matrix xb;
  Vector yb;
  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index size = std::min(batch, n - start);
      xb.resize(size, d);
      yb.resize(size);
      for (Eigen::Index k = 0; k < size; ++k) {
        xb.row(k) = Z.row(order[static_cast<std::size_t>(start + k)]);
        yb(k) = y(order[static_cast<std::size_t>(start + k)]);
      }
      epoch_loss += mlp_loss(w, xb, yb, params.alpha, &grad) * static_cast<double>(size);
      const std::vector<double> g = grad.flatten();
      ++step;
      const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
      const double lr = params.learning_rate * std::sqrt(c2) / c1;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m1[k] = params.beta1 * m1[k] + (1.0 - params.beta1) * g[k];
        m2[k] = params.beta2 * m2[k] + (1.0 - params.beta2) * g[k] * g[k];
        theta[k] -= lr * m1[k] / (std::sqrt(m2[k]) + params.epsilon);
      }
      w.assign(theta);
    }
    epoch_loss /= static_cast<double>(n);
    curve.push_back(epoch_loss);
    if (epoch_loss > best - params.tol) {
      ++no_improvement;
    } else {
      no_improvement = 0;
    }
    best = std::min(best, epoch_loss);
    if (no_improvement > params.n_iter_no_change) break;
  }
  if (!w.w1.allFinite() || !w.w2.allFinite()) throw DataError("fit_mlp: training diverged");
  return MlpModel(params, std::move(mean), std::move(scale), std::move(w), std::move(curve));
}

}  // namespace aspire::learn
