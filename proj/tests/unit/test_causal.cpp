#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "aspire/causal.hpp"
#include "aspire/pipeline.hpp"
#include "aspire/synth.hpp"

using namespace aspire;
using namespace aspire::causal;

namespace {

CausalFrame frame_from(const synth::SimulatedFrame& s) {
  CausalFrame f;
  f.treatment = "t";
  f.columns = s.columns;
  f.X = s.X;
  f.T = s.T;
  f.Y = s.Y;
  return f;
}

CausalFrame tiny(const Matrix& X, std::initializer_list<double> t, std::initializer_list<double> y) {
  CausalFrame f;
  f.treatment = "t";
  for (Eigen::Index c = 0; c < X.cols(); ++c) f.columns.push_back("x" + std::to_string(c));
  f.X = X;
  f.T = Eigen::Map<const Vector>(t.begin(), static_cast<Eigen::Index>(t.size()));
  f.Y = Eigen::Map<const Vector>(y.begin(), static_cast<Eigen::Index>(y.size()));
  return f;
}

Dataset cohort_dataset(std::size_t n_admissions) {
  auto cfg = synth::paper_profile();
  cfg.n_admissions = n_admissions;
  const auto cohort = synth::generate(cfg);
  const auto sel = pipeline::select_cohort(cohort.bundles, pipeline::RuleLabeler{});
  const auto samples = pipeline::build_samples(cohort.bundles, sel, default_mme_table());
  auto d = pipeline::assemble_dataset(samples);
  MedianImputer imp;
  imp.fit(d);
  return imp.transform(d);
}

}  // namespace

TEST(Aipw, HandExample) {
  const std::vector<double> T = {1, 1, 0, 0}, Y = {1, 0, 1, 0}, e(4, 0.5), zero(4, 0.0);
  EXPECT_DOUBLE_EQ(aipw_point(T, Y, e, zero, zero), 0.0);
  // Contributions are +2, 0, -2, 0; shifting only the first row's outcome moves the mean by 2/4.
  const std::vector<double> Y2 = {1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(aipw_point(T, Y2, e, zero, zero), 0.5);
}

TEST(Aipw, NullEffectWithExactModels) {
  const std::vector<double> T = {1, 0, 1, 0, 1}, Y = {1, 1, 0, 0, 1}, e = {0.3, 0.6, 0.5, 0.2, 0.9};
  EXPECT_DOUBLE_EQ(aipw_point(T, Y, e, Y, Y), 0.0);
}

TEST(Aipw, NanInputIsRejected) {
  const std::vector<double> T = {1, 0}, Y = {1, 0}, e = {0.5, std::nan("")}, m = {0, 0};
  EXPECT_THROW(aipw_point(T, Y, e, m, m), DataError);
}

TEST(Aipw, PropensitiesAreClippedAndAudited) {
  const auto before = propensity_audit().checked.load();
  const std::vector<double> T = {1, 0}, Y = {1, 1}, e = {1.0, 0.0}, m = {0, 0};
  // Clipped to 0.999 / 0.001: 1/0.999 - 1/0.999.
  EXPECT_NEAR(aipw_point(T, Y, e, m, m), 0.5 * (1.0 / 0.999 - 1.0 / 0.999), 1e-12);
  EXPECT_EQ(propensity_audit().checked.load(), before + 2);
  EXPECT_EQ(propensity_audit().out_of_bounds.load(), 0u);
}

TEST(Propensity, PureLeavesClipAndMixedLeafIsFraction) {
  Matrix X(6, 1);
  X << 0, 0, 0, 0, 1, 1;
  // x = 0: 3 treated / 1 control; x = 1: all treated... plus one control so both arms exist.
  const auto f = tiny(X, {1, 1, 1, 0, 1, 1}, {0, 1, 0, 1, 1, 0});
  NuisanceParams p;
  p.min_samples_leaf = 1;
  const Vector e = fit_propensity(f, p);
  EXPECT_DOUBLE_EQ(e(0), 0.75);
  EXPECT_DOUBLE_EQ(e(4), kClipHigh);
}

TEST(Propensity, UninformativeStumpIsNearHalf) {
  // Binary covariate unrelated to a fair-coin treatment: both stump leaves sit near 0.5.
  Rng rng(4);
  CausalFrame f;
  f.treatment = "t";
  f.columns = {"x"};
  f.X.resize(2000, 1);
  f.T.resize(2000);
  f.Y.resize(2000);
  for (Eigen::Index i = 0; i < 2000; ++i) {
    f.X(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    f.T(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    f.Y(i) = rng.bernoulli(0.3) ? 1.0 : 0.0;
  }
  NuisanceParams p;
  p.max_depth = 1;
  const Vector e = fit_propensity(f, p);
  EXPECT_LT((e.array() - 0.5).abs().maxCoeff(), 0.05);
}

TEST(Outcomes, ConstantArmsGiveConstantModels) {
  Matrix X = Matrix::Zero(14, 1);
  for (int i = 0; i < 4; ++i) X(i, 0) = i;  // treated rows vary in x
  const auto f = tiny(X, {1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0});
  const auto nu = fit_nuisances(f);
  EXPECT_TRUE((nu.mu1.array() == 1.0).all());
  for (Eigen::Index i = 4; i < 14; ++i) EXPECT_NEAR(nu.mu0(i), 0.3, 1e-12);
  EXPECT_TRUE((nu.mu0.array() >= 0.0).all() && (nu.mu0.array() <= 1.0).all());
}

TEST(Positivity, SingleArmAndNonBinaryInputsFail) {
  Matrix X(3, 1);
  X << 1, 2, 3;
  EXPECT_THROW(aipw_ate(tiny(X, {1, 1, 1}, {0, 1, 0})), EstimationError);
  EXPECT_THROW(aipw_ate(tiny(X, {1, 0, 2}, {0, 1, 0})), DataError);
  EXPECT_THROW(aipw_ate(tiny(X, {1, 0, 1}, {0, 0.5, 0})), DataError);
}

TEST(Bootstrap, InjectedReplicatesGiveNormalHalfWidth) {
  Rng rng(3);
  CausalEstimate e;
  for (int b = 0; b < 1000; ++b) e.replicates.push_back(rng.normal(0.25, 0.03));
  summarize_replicates(e);
  EXPECT_NEAR(e.half_width, 0.0588, 0.004);
  EXPECT_NEAR(e.percentile_half_width, 0.0588, 0.006);
  EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-6);
}

TEST(Bootstrap, ConstantReplicatesGiveZeroWidth) {
  CausalEstimate e;
  e.point = 0.2;
  e.replicates.assign(50, 0.2);
  summarize_replicates(e);
  EXPECT_EQ(e.half_width, 0.0);
  EXPECT_EQ(e.ci_low, 0.2);
  EXPECT_EQ(e.ci_high, 0.2);
  EXPECT_EQ(format_estimate(e), "0.20 \xC2\xB1 0.00");
}

TEST(Bootstrap, DeterministicAcrossRunsAndThreads) {
  synth::FrameScmConfig c;
  c.n = 400;
  const auto f = frame_from(synth::simulate_frame(c));
  BootstrapParams bp;
  bp.n_boot = 30;
  bp.seed = 9;
  const auto a = estimate(f, bp);
  bp.threads = 3;
  const auto b = estimate(f, bp);
  EXPECT_EQ(a.replicates, b.replicates);
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.replicates.size(), 30u);
  EXPECT_LE(a.ci_low, a.ci_high);
  bp.seed = 10;
  EXPECT_NE(estimate(f, bp).replicates, a.replicates);
  bp.n_boot = 1;
  EXPECT_THROW(estimate(f, bp), ConfigError);
}

TEST(Estimator, RandomizedRecovery) {
  synth::FrameScmConfig c;
  c.n = 5000;
  c.seed = 17;
  c.tau = 0.2;
  const auto s = synth::simulate_frame(c);
  EXPECT_NEAR(aipw_ate(frame_from(s)), 0.2, 0.05);
}

TEST(Estimator, CrossFittingRuns) {
  synth::FrameScmConfig c;
  c.n = 3000;
  c.tau = 0.2;
  NuisanceParams p;
  p.cross_fit_folds = 2;
  p.min_samples_leaf = 50;
  EXPECT_NEAR(aipw_ate(frame_from(synth::simulate_frame(c)), p, 1), 0.2, 0.06);
}

TEST(Frame, OpioidColumnsLeaveCovariates) {
  const auto d = cohort_dataset(8000);
  const auto f = build_frame(d, require_treatment("opioid"));
  for (const auto& col : pipeline::medication_columns(DrugClass::opioid)) {
    EXPECT_EQ(std::find(f.columns.begin(), f.columns.end(), col), f.columns.end()) << col;
  }
  EXPECT_EQ(f.T, d.X.col(static_cast<Eigen::Index>(d.column("opioid:any_given"))));
  EXPECT_EQ(f.columns.size(), d.columns.size() - 3);

  const auto neck = build_frame(d, require_treatment("site:neck"));
  EXPECT_EQ(neck.T, d.X.col(static_cast<Eigen::Index>(d.column("site:neck"))));
  EXPECT_EQ(std::find(neck.columns.begin(), neck.columns.end(), "site:neck"), neck.columns.end());
}

TEST(Frame, UnknownTreatmentListsAll) {
  try {
    require_treatment("aspirin");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "causal.treatment");
    EXPECT_EQ(treatment_names().size(), 15u);
    for (const auto& n : treatment_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos) << n;
  }
}

TEST(Cate, ExchangeableGroupsAgree) {
  synth::FrameScmConfig c;
  c.n = 3000;
  c.tau = 0.2;
  c.seed = 5;
  const auto f = frame_from(synth::simulate_frame(c));
  BootstrapParams bp;
  bp.n_boot = 100;
  const auto g = cate_by_gender(f, bp);
  ASSERT_EQ(g.groups.size(), 2u);
  EXPECT_EQ(g.difference_label, "male - female");
  // Difference sd is about 0.04 at this size.
  EXPECT_LT(std::abs(g.difference.point), 0.12);
  EXPECT_LE(g.difference.ci_low, g.difference.point);
  EXPECT_GE(g.difference.ci_high, g.difference.point);
  EXPECT_NEAR(g.difference.point, g.groups.at("male").point - g.groups.at("female").point, 1e-12);
  EXPECT_EQ(g.difference.replicates.size(), 100u);
}

TEST(Cate, SubgroupWithoutTreatedRowsFails) {
  synth::FrameScmConfig c;
  c.n = 400;
  auto f = frame_from(synth::simulate_frame(c));
  for (Eigen::Index i = 0; i < f.X.rows(); ++i) {
    if (f.X(i, 1) > 0.5) f.T(i) = 0.0;
  }
  BootstrapParams bp;
  bp.n_boot = 5;
  EXPECT_THROW(cate_by_gender(f, bp), EstimationError);
}
