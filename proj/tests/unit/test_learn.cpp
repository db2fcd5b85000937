#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "aspire/learn/forest.hpp"
#include "aspire/learn/gbt.hpp"
#include "aspire/learn/mlp.hpp"
#include "aspire/learn/model_io.hpp"
#include "aspire/learn/tree.hpp"
#include "helpers.hpp"

using namespace aspire;
using namespace aspire::learn;

namespace {

double accuracy(const Vector& p, const Vector& y) {
  int hit = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) hit += (p(i) >= 0.5) == (y(i) > 0.5);
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

// Two Gaussian blobs separated along the first axis, plus noise columns.
std::pair<Matrix, Vector> blobs(std::size_t n, std::size_t noise_cols, double gap, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 + noise_cols));
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const bool pos = i % 2 == 0;
    y(i) = pos ? 1.0 : 0.0;
    X(i, 0) = rng.normal(pos ? gap : -gap, 1.0);
    X(i, 1) = rng.normal(pos ? gap : -gap, 1.0);
    for (Eigen::Index j = 2; j < X.cols(); ++j) X(i, j) = rng.normal();
  }
  return {X, y};
}

// Label depends on feature 0 only through a noisy logistic link.
std::pair<Matrix, Vector> one_signal(std::size_t n, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal();
    y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-2.0 * X(i, 0))) ? 1.0 : 0.0;
  }
  return {X, y};
}

}  // namespace

TEST(Tree, PureRootIsSingleLeaf) {
  Matrix X(3, 1);
  X << 1, 2, 3;
  const auto t = fit_tree(X, Vector::Ones(3), TreeParams{});
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.predict(X), Vector::Ones(3));
}

TEST(Tree, SeparableDataGivesStump) {
  Matrix X(6, 1);
  X << 1, 2, 3, 10, 11, 12;
  Vector y(6);
  y << 0, 0, 0, 1, 1, 1;
  const auto t = fit_tree(X, y, TreeParams{});
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes()[0].threshold, 6.5);
  EXPECT_EQ(accuracy(t.predict(X), y), 1.0);
}

TEST(Tree, FourPointXor) {
  Matrix X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  Vector y(4);
  y << 0, 1, 1, 0;
  TreeParams p;
  p.max_features = 2;
  const auto t = fit_tree(X, y, p);
  EXPECT_GE(t.depth(), 2u);
  EXPECT_EQ(accuracy(t.predict(X), y), 1.0);
  // Every root split has zero gain, so the tie goes to feature 0.
  EXPECT_EQ(t.nodes()[0].feature, 0);
}

TEST(Tree, GiniNodeImpurityIsBounded) {
  const auto [X, y] = one_signal(400, 3, 2);
  const auto t = fit_tree(X, y, TreeParams{});
  for (const auto& n : t.nodes()) {
    EXPECT_GE(n.impurity, 0.0);
    EXPECT_LE(n.impurity, 0.5 + 1e-12);
  }
  EXPECT_EQ(accuracy(t.predict(X), y), 1.0);  // fully grown
}

TEST(Tree, VarianceLeavesAreMeans) {
  Matrix X(4, 1);
  X << 1, 2, 3, 4;
  Vector y(4);
  y << 1, 3, 10, 14;
  TreeParams p;
  p.criterion = SplitCriterion::variance;
  p.max_depth = 1;
  const auto t = fit_tree(X, y, p);
  EXPECT_DOUBLE_EQ(t.predict_row(X, 0), 2.0);
  EXPECT_DOUBLE_EQ(t.predict_row(X, 3), 12.0);
}

TEST(Tree, RejectsBadInput) {
  Matrix X(2, 1);
  X << 1, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_tree(X, Vector::Zero(2), TreeParams{}), DataError);
  EXPECT_THROW(fit_tree(Matrix(0, 1), Vector(0), TreeParams{}), DataError);
}

TEST(Forest, SeparableHeldOutAccuracy) {
  const auto [X, y] = blobs(400, 3, 2.0, 1);
  const auto [Xt, yt] = blobs(400, 3, 2.0, 2);
  ForestParams p;
  const auto m = fit_forest(X, y, p);
  EXPECT_GE(accuracy(m.predict_proba(Xt), yt), 0.95);
  const Vector pr = m.predict_proba(Xt);
  EXPECT_TRUE((pr.array() >= 0.0).all() && (pr.array() <= 1.0).all());
}

TEST(Forest, SingleTreeWithoutBaggingEqualsFitTree) {
  const auto [X, y] = one_signal(300, 4, 3);
  ForestParams p;
  p.n_estimators = 1;
  p.bootstrap = false;
  p.max_features = 4;
  const auto m = fit_forest(X, y, p);
  TreeParams tp;
  tp.max_features = 4;
  tp.seed = m.tree_seeds()[0];
  EXPECT_EQ(m.predict_proba(X), fit_tree(X, y, tp).predict(X));
}

TEST(Forest, ThreadCountDoesNotMatter) {
  const auto [X, y] = one_signal(300, 6, 4);
  ForestParams p;
  p.n_estimators = 20;
  EXPECT_EQ(fit_forest(X, y, p, 1).predict_proba(X), fit_forest(X, y, p, 4).predict_proba(X));
}

TEST(Forest, ImportanceExamples) {
  {
    const auto [X, y] = one_signal(600, 5, 5);
    ForestParams p;
    p.n_estimators = 50;
    const auto imp = feature_importance(fit_forest(X, y, p));
    EXPECT_EQ(std::max_element(imp.begin(), imp.end()) - imp.begin(), 0);
    EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-9);
    for (double v : imp) EXPECT_GE(v, 0.0);
  }
  {
    const auto [X, y] = one_signal(100, 1, 6);
    EXPECT_EQ(feature_importance(fit_forest(X, y, ForestParams{})), std::vector<double>{1.0});
  }
  {
    // A stump on feature 2 puts all importance there.
    Matrix X(6, 3);
    X << 0, 5, 1, 1, 0, 2, 0, 3, 3, 1, 2, 10, 0, 4, 11, 1, 1, 12;
    Vector y(6);
    y << 0, 0, 0, 1, 1, 1;
    ForestParams p;
    p.n_estimators = 1;
    p.bootstrap = false;
    p.max_features = 3;
    p.max_depth = 1;
    const auto imp = feature_importance(fit_forest(X, y, p));
    EXPECT_EQ(imp, (std::vector<double>{0.0, 0.0, 1.0}));
  }
}

TEST(Forest, MoreTreesReduceSeedVariance) {
  const auto [X, y] = one_signal(300, 5, 7);
  const auto [Xq, yq] = one_signal(20, 5, 8);
  auto spread = [&](std::size_t trees) {
    std::vector<Vector> preds;
    for (std::uint64_t s = 0; s < 15; ++s) {
      ForestParams p;
      p.n_estimators = trees;
      p.seed = s;
      preds.push_back(fit_forest(X, y, p).predict_proba(Xq));
    }
    double var = 0.0;
    for (Eigen::Index q = 0; q < Xq.rows(); ++q) {
      double m = 0.0, ss = 0.0;
      for (const auto& v : preds) m += v(q);
      m /= static_cast<double>(preds.size());
      for (const auto& v : preds) ss += (v(q) - m) * (v(q) - m);
      var += ss / static_cast<double>(preds.size() - 1);
    }
    return var / static_cast<double>(Xq.rows());
  };
  EXPECT_LT(spread(100), spread(10));
}

TEST(Gbt, TrainingLossNeverIncreases) {
  const auto [X, y] = one_signal(400, 4, 9);
  GbtParams p;
  p.n_rounds = 60;
  const auto curve = fit_gbt(X, y, p).staged_log_loss(X, y);
  ASSERT_EQ(curve.size(), 61u);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LE(curve[k], curve[k - 1] + 1e-12) << k;
}

TEST(Gbt, ConstantTargetIsCapped) {
  const auto [X, y] = one_signal(50, 2, 10);
  const auto m = fit_gbt(X, Vector::Ones(y.size()), GbtParams{});
  EXPECT_DOUBLE_EQ(m.initial_log_odds(), 15.0);
  EXPECT_GE(m.predict_proba(X).minCoeff(), 0.99);
}

TEST(Gbt, ZeroRoundsPredictBaseRate) {
  const auto [X, y] = one_signal(200, 2, 11);
  GbtParams p;
  p.n_rounds = 0;
  const Vector pr = fit_gbt(X, y, p).predict_proba(X);
  EXPECT_NEAR(pr(0), y.mean(), 1e-12);
  EXPECT_EQ(pr.maxCoeff(), pr.minCoeff());
}

TEST(Gbt, SeparableDataFitsQuickly) {
  const auto [X, y] = blobs(300, 0, 3.0, 12);
  GbtParams p;
  p.n_rounds = 50;
  const auto m = fit_gbt(X, y, p);
  EXPECT_LT(log_loss(m.predict_proba(X), y), 0.1);
}

TEST(Mlp, ZeroWeightsZeroEpochsGiveHalf) {
  const auto [X, y] = one_signal(20, 3, 13);
  MlpParams p;
  p.zero_init = true;
  p.max_epochs = 0;
  const Vector pr = fit_mlp(X, y, p).predict_proba(X);
  for (Eigen::Index i = 0; i < pr.size(); ++i) EXPECT_EQ(pr(i), 0.5);
}

TEST(Mlp, LearnsAnd) {
  Matrix X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  Vector y(4);
  y << 0, 0, 0, 1;
  MlpParams p;
  p.hidden = 16;
  p.max_epochs = 500;
  p.learning_rate = 0.01;
  p.tol = 0.0;
  EXPECT_EQ(accuracy(fit_mlp(X, y, p).predict_proba(X), y), 1.0);
}

TEST(Mlp, SameSeedSameWeights) {
  const auto [X, y] = one_signal(100, 3, 14);
  MlpParams p;
  p.hidden = 8;
  p.max_epochs = 20;
  const auto a = fit_mlp(X, y, p);
  const auto b = fit_mlp(X, y, p);
  EXPECT_EQ(a.weights().flatten(), b.weights().flatten());
  p.seed = 7;
  EXPECT_NE(a.weights().flatten(), fit_mlp(X, y, p).weights().flatten());
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto [X, y] = one_signal(5, 4, 15);
  MlpParams p;
  p.hidden = 6;
  const auto w = init_mlp_weights(4, p);
  MlpWeights g;
  mlp_loss(w, X, y, 1e-2, &g);
  const auto analytic = g.flatten();
  auto flat = w.flatten();
  MlpWeights probe = w;
  const double h = 1e-6;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double keep = flat[k];
    flat[k] = keep + h;
    probe.assign(flat);
    const double up = mlp_loss(probe, X, y, 1e-2);
    flat[k] = keep - h;
    probe.assign(flat);
    const double down = mlp_loss(probe, X, y, 1e-2);
    flat[k] = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - analytic[k]) / std::max(1e-8, std::abs(numeric) + std::abs(analytic[k]));
    EXPECT_LE(rel, 1e-4) << "parameter " << k;
  }
}

TEST(ModelIo, RoundTripPreservesPredictions) {
  const auto [X, y] = one_signal(200, 3, 16);
  const std::vector<std::string> cols = {"a", "b", "c"};
  ForestParams fp;
  fp.n_estimators = 10;
  GbtParams gp;
  gp.n_rounds = 10;
  MlpParams mp;
  mp.hidden = 5;
  mp.max_epochs = 5;
  testing_helpers::TempDir dir("model");
  for (const TrainedModel& m : {TrainedModel{cols, fit_forest(X, y, fp)}, TrainedModel{cols, fit_gbt(X, y, gp)},
                                TrainedModel{cols, fit_mlp(X, y, mp)}}) {
    const auto path = dir.path() / (to_string(m.family()) + ".json");
    save_model(path, m);
    const auto back = load_model(path);
    EXPECT_EQ(back.family(), m.family());
    EXPECT_EQ(back.columns, cols);
    EXPECT_EQ(back.predict_proba(X), m.predict_proba(X)) << to_string(m.family());
  }
  EXPECT_THROW(model_from_json(nlohmann::json{{"format", "other"}}), DataError);
  EXPECT_THROW(parse_family("svm"), ConfigError);
}
