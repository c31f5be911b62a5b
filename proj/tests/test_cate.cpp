#include "survhte/cate.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "survhte/rng.hpp"

using namespace survhte;

namespace {

struct Synth {
  Eigen::MatrixXd X;
  std::vector<int> w;
  Eigen::VectorXd y;
};

Synth linear_rct(int n, std::uint64_t seed) {
  // y = x1 + w * (1 + x2), no noise; tau(x) = 1 + x2
  rng::Stream stream(seed, 0, 0);
  Synth s;
  s.X.resize(n, 3);
  s.w.resize(n);
  s.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) s.X(i, j) = stream.uniform();
    s.w[i] = stream.bernoulli(0.5) ? 1 : 0;
    s.y[i] = s.X(i, 0) + s.w[i] * (1.0 + s.X(i, 1));
  }
  return s;
}

double rmse_vs(const CateModel& model, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& tau_true) {
  const Eigen::VectorXd tau_hat = model.predict(X);
  return std::sqrt((tau_hat - tau_true).squaredNorm() / X.rows());
}

CateOptions fast_lasso() {
  CateOptions opt;
  opt.base_learner = BaseLearner::Lasso;
  return opt;
}

}  // namespace

TEST_CASE("single-model variant on a constant outcome predicts zero effect") {
  auto s = linear_rct(200, 1);
  s.y.setConstant(4.0);
  auto model = fit_imputed_meta(CateVariant::S, s.X, s.w, s.y, fast_lasso());
  for (int i = 0; i < 20; ++i) {
    CHECK(model.predict_one(s.X.row(i).transpose()) == doctest::Approx(0.0));
  }
}

TEST_CASE("meta-learners recover a noiseless linear effect") {
  auto s = linear_rct(2000, 2);
  Eigen::VectorXd tau_true = 1.0 + s.X.col(1).array();
  for (auto variant : {CateVariant::T, CateVariant::S, CateVariant::X, CateVariant::Dr}) {
    auto model = fit_imputed_meta(variant, s.X, s.w, s.y, fast_lasso());
    const double rmse = rmse_vs(model, s.X, tau_true);
    CHECK(rmse < (variant == CateVariant::T ? 0.05 : 0.1));
  }
}

TEST_CASE("residualized linear estimator") {
  SUBCASE("recovers a constant effect in a randomized design") {
    rng::Stream stream(3, 0, 0);
    const int n = 5000;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> w(n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = stream.uniform();
      X(i, 1) = stream.uniform();
      w[i] = stream.bernoulli(0.5) ? 1 : 0;
      y[i] = X(i, 0) + 2.0 * w[i] + 0.1 * stream.normal();
    }
    auto model = fit_double_ml(X, w, y, fast_lasso());
    CHECK(model.ate == doctest::Approx(2.0).epsilon(0.025));
    CHECK(model.ate_ci_lo < 2.0);
    CHECK(model.ate_ci_hi > 2.0);
  }

  SUBCASE("null effect interval covers zero") {
    rng::Stream stream(4, 0, 0);
    const int n = 3000;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> w(n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = stream.uniform();
      X(i, 1) = stream.uniform();
      w[i] = stream.bernoulli(0.5) ? 1 : 0;
      y[i] = X(i, 0) + stream.normal();
    }
    auto model = fit_double_ml(X, w, y, fast_lasso());
    CHECK(model.ate_ci_lo < 0.0);
    CHECK(model.ate_ci_hi > 0.0);
  }

  SUBCASE("removes observed confounding where the naive contrast fails") {
    rng::Stream stream(5, 0, 0);
    const int n = 5000;
    Eigen::MatrixXd X(n, 1);
    std::vector<int> w(n);
    Eigen::VectorXd y(n);
    double sum1 = 0, sum0 = 0;
    int n1 = 0, n0 = 0;
    for (int i = 0; i < n; ++i) {
      X(i, 0) = stream.uniform();
      w[i] = X(i, 0) + 0.3 * stream.normal() > 0.5 ? 1 : 0;
      y[i] = 3.0 * X(i, 0) + 1.0 * w[i] + 0.1 * stream.normal();
      (w[i] ? sum1 : sum0) += y[i];
      (w[i] ? n1 : n0) += 1;
    }
    const double naive = sum1 / n1 - sum0 / n0;
    CHECK(naive - 1.0 > 0.5);
    auto model = fit_double_ml(X, w, y, fast_lasso());
    CHECK(model.ate == doctest::Approx(1.0).epsilon(0.1));
  }

  SUBCASE("fold counts 2 and 5 agree within bootstrap error") {
    auto s = linear_rct(3000, 6);
    auto opt2 = fast_lasso();
    auto opt5 = fast_lasso();
    opt5.n_folds = 5;
    auto m2 = fit_double_ml(s.X, s.w, s.y, opt2);
    auto m5 = fit_double_ml(s.X, s.w, s.y, opt5);
    const double se = (m2.ate_ci_hi - m2.ate_ci_lo) / (2.0 * 1.96);
    CHECK(std::abs(m2.ate - m5.ate) < 3.0 * std::max(se, 1e-3));
  }
}

namespace {

struct SurvSynth {
  Eigen::MatrixXd X;
  std::vector<int> w;
  std::vector<double> times;
  std::vector<std::uint8_t> events;
};

SurvSynth null_survival(int n, std::uint64_t seed) {
  rng::Stream stream(seed, 0, 0);
  SurvSynth s;
  s.X.resize(n, 2);
  s.w.resize(n);
  s.times.resize(n);
  s.events.resize(n);
  for (int i = 0; i < n; ++i) {
    s.X(i, 0) = stream.uniform();
    s.X(i, 1) = stream.uniform();
    s.w[i] = stream.bernoulli(0.5) ? 1 : 0;
    const double t = stream.exponential(1.0);
    const double c = stream.exponential(0.2);
    s.times[i] = std::min(t, c);
    s.events[i] = t <= c ? 1 : 0;
  }
  return s;
}

CateOptions surv_options(int trees, double h) {
  CateOptions opt;
  opt.rsf.n_estimators = trees;
  opt.rsf.seed = 77;
  opt.horizon = h;
  return opt;
}

}  // namespace

TEST_CASE("survival variants report no effect on an arm-independent outcome") {
  auto s = null_survival(2000, 7);
  auto opt = surv_options(100, 3.0);
  opt.rsf.min_split = 400;
  opt.rsf.min_leaf = 200;
  opt.matching_k = 20;
  for (auto variant : {CateVariant::S, CateVariant::T, CateVariant::Matching}) {
    auto model = fit_survival_meta(variant, s.X, s.w, s.times, s.events, opt);
    double mean_abs = 0.0;
    for (int i = 0; i < 200; ++i)
      mean_abs += std::abs(model.predict_one(s.X.row(i).transpose()));
    mean_abs /= 200.0;
    CHECK(mean_abs < 0.1);
  }
  // survival-probability estimand stays in [-1, 1]
  opt.estimand = Estimand::SurvProb;
  auto model = fit_survival_meta(CateVariant::S, s.X, s.w, s.times, s.events, opt);
  for (int i = 0; i < 50; ++i) {
    const double tau = model.predict_one(s.X.row(i).transpose());
    CHECK(tau >= -1.0);
    CHECK(tau <= 1.0);
  }
}

TEST_CASE("nearest-neighbour matching on exact twins") {
  // every covariate value appears once per arm
  const int pairs = 40;
  rng::Stream stream(8, 0, 0);
  SurvSynth s;
  s.X.resize(2 * pairs, 2);
  for (int p = 0; p < pairs; ++p) {
    const double x1 = (p + 0.5) / pairs;
    const double x2 = stream.uniform();
    for (int a = 0; a < 2; ++a) {
      const int i = 2 * p + a;
      s.X(i, 0) = x1;
      s.X(i, 1) = x2;
      s.w.push_back(a);
      s.times.push_back(stream.exponential(a == 1 ? 0.5 : 1.5));
      s.events.push_back(1);
    }
  }
  auto opt = surv_options(10, 4.0);
  opt.matching_k = 1;
  auto model = fit_survival_meta(CateVariant::Matching, s.X, s.w, s.times, s.events, opt);
  for (int p = 0; p < pairs; ++p) {
    const int ic = 2 * p, it = 2 * p + 1;
    const double f0 = rmst(predict_survival_curve(
                               model.surv, (Eigen::VectorXd(3) << s.X(ic, 0), s.X(ic, 1), 0.0).finished()),
                           opt.horizon);
    const double f1 = rmst(predict_survival_curve(
                               model.surv, (Eigen::VectorXd(3) << s.X(it, 0), s.X(it, 1), 1.0).finished()),
                           opt.horizon);
    CHECK(model.match_tau[it] == doctest::Approx(f1 - f0).epsilon(1e-9));
    CHECK(model.match_tau[ic] == doctest::Approx(f1 - f0).epsilon(1e-9));
  }

  // an oversized neighbourhood is clamped to the opposite arm size
  opt.matching_k = 100000;
  CHECK_NOTHROW(fit_survival_meta(CateVariant::Matching, s.X, s.w, s.times, s.events, opt));
}

TEST_CASE("swapping arm labels negates the estimated effect") {
  auto s = linear_rct(300, 9);
  rng::Stream noise(10, 0, 0);
  for (int i = 0; i < 300; ++i) s.y[i] += 0.2 * noise.normal();
  std::vector<int> w_swapped(s.w.size());
  for (std::size_t i = 0; i < s.w.size(); ++i) w_swapped[i] = 1 - s.w[i];
  auto queries = s.X.topRows(25);

  for (auto variant : {CateVariant::T, CateVariant::X, CateVariant::Dr}) {
    auto a = fit_imputed_meta(variant, s.X, s.w, s.y, fast_lasso());
    auto b = fit_imputed_meta(variant, s.X, w_swapped, s.y, fast_lasso());
    for (int i = 0; i < queries.rows(); ++i) {
      const Eigen::VectorXd x = queries.row(i).transpose();
      CHECK(b.predict_one(x) == doctest::Approx(-a.predict_one(x)).epsilon(1e-9));
    }
  }

  auto sv = null_survival(300, 11);
  std::vector<int> sv_swapped(sv.w.size());
  for (std::size_t i = 0; i < sv.w.size(); ++i) sv_swapped[i] = 1 - sv.w[i];
  auto opt = surv_options(15, 3.0);
  for (auto variant : {CateVariant::T, CateVariant::Matching}) {
    auto a = fit_survival_meta(variant, sv.X, sv.w, sv.times, sv.events, opt);
    auto b = fit_survival_meta(variant, sv.X, sv_swapped, sv.times, sv.events, opt);
    for (int i = 0; i < 25; ++i) {
      const Eigen::VectorXd x = sv.X.row(i).transpose();
      CHECK(b.predict_one(x) == doctest::Approx(-a.predict_one(x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("degenerate arms are rejected with the arm named") {
  auto s = linear_rct(100, 12);
  std::vector<int> all_treated(100, 1);
  CHECK_THROWS_WITH_AS(fit_imputed_meta(CateVariant::T, s.X, all_treated, s.y, fast_lasso()),
                       "cate: control arm is empty", std::invalid_argument);
  CHECK_THROWS(fit_double_ml(s.X, all_treated, s.y, fast_lasso()));
}
