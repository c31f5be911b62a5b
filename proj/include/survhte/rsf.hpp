#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "survhte/survcurve.hpp"

namespace survhte {

struct RsfParams {
  int n_estimators = 100;
  int min_split = 10;
  int min_leaf = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;
};

struct SurvTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  SurvivalCurve curve;  // populated at leaves only
};

struct SurvivalTree {
  std::vector<SurvTreeNode> nodes;
  const SurvivalCurve& leaf_curve(const Eigen::VectorXd& x) const;
};

// Ensemble of survival trees grown with two-sample log-rank splitting;
// prediction is the pointwise average of leaf curves over time_grid.
struct RsfModel {
  std::vector<SurvivalTree> trees;
  RsfParams params;
  std::vector<double> time_grid;  // sorted distinct training event times (capped)
  double t_max = 0.0;
};

RsfModel fit_rsf(const Eigen::MatrixXd& X, const std::vector<double>& times,
                 const std::vector<std::uint8_t>& events, const RsfParams& params);

SurvivalCurve predict_survival_curve(const RsfModel& model, const Eigen::VectorXd& x);

}  // namespace survhte
