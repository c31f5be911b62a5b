#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace survhte {

// L1-penalized linear regression, objective
// (1/2n) ||y - b0 - X b||^2 + alpha ||b||_1.
struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double alpha = 0.0;

  double predict_one(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

LinearModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);

// k-fold cross-validated alpha selection; ties prefer the larger alpha.
LinearModel fit_lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<double>& alphas, int k_folds,
                         std::uint64_t seed);

struct RfParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unbounded
  int min_split = 2;
  int min_leaf = 1;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict_one(const Eigen::VectorXd& x) const;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  RfParams params;

  double predict_one(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

ForestModel fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const RfParams& params);

ForestModel fit_random_forest_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<RfParams>& grid, int k_folds,
                                 std::uint64_t seed);

// Logistic regression with clipped predictions, fit by damped Newton steps.
struct PropensityModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double clip_lo = 0.01;
  double clip_hi = 0.99;

  double predict_one(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

PropensityModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             double clip_lo = 0.01, double clip_hi = 0.99);

// Generic regressor used by the effect estimators. Hyperparameters are tuned
// by cross-validation over the published grids unless tune is disabled.
enum class BaseLearner { Lasso, Forest };

std::string to_string(BaseLearner b);
BaseLearner base_learner_from_string(const std::string& s);

struct RegressorOptions {
  bool tune = true;
  int cv_folds = 5;
  std::vector<double> lasso_alphas = {0.001, 0.01, 0.1, 1.0, 10.0};
  std::vector<int> forest_trees = {50, 100};
  std::vector<int> forest_depths = {3, 5, 0};
};

struct Regressor {
  BaseLearner kind = BaseLearner::Lasso;
  LinearModel linear;
  ForestModel forest;

  double predict_one(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

Regressor fit_regressor(BaseLearner kind, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& y, std::uint64_t seed,
                        const RegressorOptions& options = {});

}  // namespace survhte
