#include "survhte/baselearn.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "survhte/rng.hpp"

using namespace survhte;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  rng::Stream stream(seed, 0, 0);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = stream.normal();
  return X;
}

void standardize(Eigen::MatrixXd& X) {
  const auto n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    X.col(j).array() -= X.col(j).mean();
    X.col(j) /= std::sqrt(X.col(j).squaredNorm() / n);
  }
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       double intercept, const Eigen::VectorXd& beta, double alpha) {
  const auto n = static_cast<double>(X.rows());
  const double rss = (y.array() - intercept - (X * beta).array()).square().sum();
  return rss / (2.0 * n) + alpha * beta.lpNorm<1>();
}

// Independent first-order solver (proximal gradient with fixed step) for the
// same objective on centered data; used only as a reference optimum.
Eigen::VectorXd ista_lasso(const Eigen::MatrixXd& Z, const Eigen::VectorXd& yc,
                           double alpha, int iters) {
  const auto n = static_cast<double>(Z.rows());
  const Eigen::MatrixXd G = Z.transpose() * Z / n;
  const double L = G.selfadjointView<Eigen::Lower>()
                       .eigenvalues()
                       .maxCoeff();
  const double step = 1.0 / L;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(Z.cols());
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd grad = Z.transpose() * (Z * beta - yc) / n;
    Eigen::VectorXd next = beta - step * grad;
    for (Eigen::Index j = 0; j < next.size(); ++j) {
      const double g = step * alpha;
      next[j] = next[j] > g ? next[j] - g : (next[j] < -g ? next[j] + g : 0.0);
    }
    beta = next;
  }
  return beta;
}

double pair_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (labels[i] == 1 && labels[j] == 0) {
        pairs += 1.0;
        if (scores[i] > scores[j]) wins += 1.0;
        else if (scores[i] == scores[j]) wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("lasso recovers a noiseless linear signal at alpha 0") {
  auto X = random_matrix(100, 1, 3);
  Eigen::VectorXd y = 2.0 * X.col(0).array() + 1.0;
  auto model = fit_lasso(X, y, 0.0);
  CHECK(model.coefficients[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(model.intercept == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("large alpha shrinks every coefficient to zero") {
  auto X = random_matrix(80, 4, 5);
  Eigen::VectorXd y = X.col(0) + X.col(2);
  const Eigen::VectorXd yc = y.array() - y.mean();
  Eigen::MatrixXd Z = X;
  standardize(Z);
  const double alpha_max = (Z.transpose() * yc).cwiseAbs().maxCoeff() / X.rows();
  auto model = fit_lasso(X, y, alpha_max * 1.001);
  CHECK(model.coefficients.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(model.intercept == doctest::Approx(y.mean()));
}

TEST_CASE("lasso objective matches an independent solver") {
  Eigen::MatrixXd X = random_matrix(40, 3, 11);
  standardize(X);
  rng::Stream noise(12, 0, 0);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i)
    y[i] = 1.5 * X(i, 0) - 0.7 * X(i, 2) + 0.3 * noise.normal();
  const double alpha = 0.1;
  auto model = fit_lasso(X, y, alpha);
  const double obj_cd = lasso_objective(X, y, model.intercept, model.coefficients, alpha);

  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::VectorXd beta_ref = ista_lasso(X, yc, alpha, 20000);
  const double obj_ref = lasso_objective(X, y, y.mean(), beta_ref, alpha);
  CHECK(obj_cd == doctest::Approx(obj_ref).epsilon(1e-6));
}

TEST_CASE("lasso satisfies the zero-coefficient stationarity bound") {
  Eigen::MatrixXd X = random_matrix(60, 6, 21);
  standardize(X);
  rng::Stream noise(22, 0, 0);
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) y[i] = X(i, 0) + 0.5 * noise.normal();
  const double alpha = 0.15;
  auto model = fit_lasso(X, y, alpha);
  const Eigen::VectorXd r = y - model.predict(X);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (model.coefficients[j] == 0.0) {
      CHECK(std::abs(X.col(j).dot(r)) / X.rows() <= alpha + 1e-6);
    }
  }
}

TEST_CASE("cross-validated alpha selection returns a usable model") {
  Eigen::MatrixXd X = random_matrix(200, 5, 31);
  rng::Stream noise(32, 0, 0);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) y[i] = 2.0 * X(i, 1) + 0.2 * noise.normal();
  auto model = fit_lasso_cv(X, y, {0.001, 0.01, 0.1, 1.0, 10.0}, 5, 7);
  const double mse = (y - model.predict(X)).squaredNorm() / 200.0;
  CHECK(mse < 0.1);
}

TEST_CASE("random forest") {
  RfParams params;
  params.n_trees = 20;
  params.seed = 9;

  SUBCASE("constant target collapses to a constant prediction") {
    auto X = random_matrix(50, 3, 41);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(50, 3.25);
    auto model = fit_random_forest(X, y, params);
    for (int i = 0; i < 10; ++i)
      CHECK(model.predict_one(X.row(i).transpose()) == doctest::Approx(3.25));
  }

  SUBCASE("a single depth-1 tree resolves a step function") {
    rng::Stream stream(42, 0, 0);
    Eigen::MatrixXd X(200, 1);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
      X(i, 0) = stream.uniform();
      y[i] = X(i, 0) > 0.5 ? 1.0 : 0.0;
    }
    RfParams stump = params;
    stump.n_trees = 1;
    stump.max_depth = 1;
    auto model = fit_random_forest(X, y, stump);
    const double mse = (y - model.predict(X)).squaredNorm() / 200.0;
    CHECK(mse < 0.01);
  }

  SUBCASE("deterministic in the seed and bounded by the target range") {
    auto X = random_matrix(150, 4, 43);
    rng::Stream noise(44, 0, 0);
    Eigen::VectorXd y(150);
    for (int i = 0; i < 150; ++i) y[i] = X(i, 0) * X(i, 1) + noise.normal();
    auto a = fit_random_forest(X, y, params);
    auto b = fit_random_forest(X, y, params);
    auto Xq = random_matrix(30, 4, 45);
    for (int i = 0; i < 30; ++i) {
      const double pa = a.predict_one(Xq.row(i).transpose());
      CHECK(pa == b.predict_one(Xq.row(i).transpose()));
      CHECK(pa >= y.minCoeff());
      CHECK(pa <= y.maxCoeff());
    }
  }
}

TEST_CASE("logistic regression") {
  SUBCASE("labels independent of features give a flat half probability") {
    auto X = random_matrix(100000, 2, 51);
    std::vector<int> labels(100000);
    rng::Stream coin(52, 0, 0);
    for (auto& l : labels) l = coin.bernoulli(0.5) ? 1 : 0;
    auto model = fit_logistic(X, labels);
    auto p = model.predict(X);
    CHECK(p.minCoeff() > 0.48);
    CHECK(p.maxCoeff() < 0.52);
  }

  SUBCASE("separable labels stay clipped and rank perfectly") {
    rng::Stream stream(53, 0, 0);
    Eigen::MatrixXd X(400, 1);
    std::vector<int> labels(400);
    for (int i = 0; i < 400; ++i) {
      X(i, 0) = stream.uniform();
      labels[i] = X(i, 0) > 0.5 ? 1 : 0;
    }
    auto model = fit_logistic(X, labels);
    auto p = model.predict(X);
    CHECK(p.minCoeff() >= 0.01);
    CHECK(p.maxCoeff() <= 0.99);
    CHECK(pair_auc(p, labels) > 0.99);
  }

  SUBCASE("single-class input gives the clipped constant") {
    auto X = random_matrix(50, 2, 54);
    std::vector<int> labels(50, 1);
    auto model = fit_logistic(X, labels);
    for (int i = 0; i < 10; ++i)
      CHECK(model.predict_one(X.row(i).transpose()) == doctest::Approx(0.99));
  }
}

TEST_CASE("regressor wrapper dispatches to both learners") {
  auto X = random_matrix(120, 3, 61);
  Eigen::VectorXd y = X.col(0) * 2.0;
  RegressorOptions fast;
  fast.tune = false;
  fast.forest_trees = {10};
  fast.forest_depths = {0};
  auto lin = fit_regressor(BaseLearner::Lasso, X, y, 1, fast);
  auto rf = fit_regressor(BaseLearner::Forest, X, y, 1, fast);
  CHECK((y - lin.predict(X)).cwiseAbs().maxCoeff() < 0.1);
  CHECK((y - rf.predict(X)).squaredNorm() / 120.0 < 1.0);
}
