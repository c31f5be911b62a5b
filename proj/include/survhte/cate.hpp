#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "survhte/baselearn.hpp"
#include "survhte/datagen.hpp"
#include "survhte/rsf.hpp"

namespace survhte {

enum class CateFamily { ImputedMeta, DoubleMl, SurvMeta };
enum class CateVariant { S, T, X, Dr, Matching };

std::string to_string(CateFamily f);
std::string to_string(CateVariant v);
CateFamily cate_family_from_string(const std::string& s);
CateVariant cate_variant_from_string(const std::string& s);

struct CateOptions {
  BaseLearner base_learner = BaseLearner::Lasso;
  RegressorOptions regressor;
  int n_folds = 2;        // cross-fitting folds for nuisances
  int matching_k = 5;
  double clip_lo = 0.01;  // propensity clip
  double clip_hi = 0.99;
  RsfParams rsf;
  Estimand estimand = Estimand::Rmst;
  double horizon = 1.0;  // used by survival variants
  int bootstrap_resamples = 100;
  std::uint64_t seed = 0;
};

// Fitted effect estimator; the populated members depend on family/variant.
struct CateModel {
  CateFamily family = CateFamily::ImputedMeta;
  CateVariant variant = CateVariant::S;
  CateOptions options;

  // imputed meta-learners
  Regressor mu;         // S: outcome model on (X, w)
  Regressor mu0, mu1;   // T / X / DR per-arm outcome models
  Regressor tau0, tau1; // X effect models
  Regressor tau_final;  // DR final-stage regression
  PropensityModel propensity;

  // residualized linear effect model
  Eigen::VectorXd theta;  // [theta0, theta_x]
  double ate = 0.0;
  double ate_ci_lo = 0.0;
  double ate_ci_hi = 0.0;

  // survival variants
  RsfModel surv;         // S: on (X, w); Matching: pooled on X
  RsfModel surv0, surv1; // T per-arm

  // matching state
  Eigen::MatrixXd match_x;     // standardized training covariates
  Eigen::VectorXd match_mean, match_sd;
  std::vector<double> match_tau;

  double predict_one(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Meta-learners over fully observed surrogate outcomes.
CateModel fit_imputed_meta(CateVariant variant, const Eigen::MatrixXd& X,
                           const std::vector<int>& w, const Eigen::VectorXd& y,
                           const CateOptions& options = {});

// Partially linear residualization estimator with cross-fitted nuisances and
// a bootstrap ATE interval.
CateModel fit_double_ml(const Eigen::MatrixXd& X, const std::vector<int>& w,
                        const Eigen::VectorXd& y, const CateOptions& options = {});

// Survival meta-learners over censored outcomes (variant S, T, or Matching).
CateModel fit_survival_meta(CateVariant variant, const Eigen::MatrixXd& X,
                            const std::vector<int>& w, const std::vector<double>& times,
                            const std::vector<std::uint8_t>& events,
                            const CateOptions& options = {});

}  // namespace survhte
