#include "survhte/baselearn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "survhte/rng.hpp"

namespace survhte {

namespace {

constexpr std::uint64_t kStreamBootstrap = 101;
constexpr std::uint64_t kStreamFolds = 102;

constexpr double kLassoTol = 1e-7;
constexpr int kLassoMaxSweeps = 10000;
constexpr double kNewtonGradTol = 1e-8;
constexpr double kNewtonJitter = 1e-8;
constexpr int kNewtonMaxIter = 100;

void check_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw std::invalid_argument("fit: empty design matrix");
  if (X.rows() != y.size()) throw std::invalid_argument("fit: X/y length mismatch");
  if (!X.allFinite() || !y.allFinite())
    throw std::invalid_argument("fit: non-finite input");
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng::Stream stream(seed, 0, kStreamFolds);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = stream.next_u64() % i;
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % k);
  return fold;
}

template <typename FitFn>
double cv_mse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
              std::uint64_t seed, FitFn&& fit) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto fold = fold_assignment(n, k, seed);
  double total_sq = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, val;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? val : train).push_back(i);
    if (train.empty() || val.empty()) continue;
    Eigen::MatrixXd Xt(train.size(), X.cols());
    Eigen::VectorXd yt(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      Xt.row(i) = X.row(train[i]);
      yt[i] = y[train[i]];
    }
    auto model = fit(Xt, yt);
    for (std::size_t i : val) {
      const double e = model.predict_one(X.row(i).transpose()) - y[i];
      total_sq += e * e;
    }
  }
  return total_sq / static_cast<double>(n);
}

}  // namespace

double LinearModel::predict_one(const Eigen::VectorXd& x) const {
  return intercept + coefficients.dot(x);
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  return (X * coefficients).array() + intercept;
}

LinearModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  check_finite(X, y);
  if (alpha < 0.0) throw std::invalid_argument("fit_lasso: alpha must be >= 0");
  const auto n = static_cast<double>(X.rows());
  const auto d = X.cols();

  Eigen::VectorXd mean = X.colwise().mean();
  Eigen::VectorXd sd(d);
  Eigen::MatrixXd Z = X.rowwise() - mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    sd[j] = std::sqrt(Z.col(j).squaredNorm() / n);
    if (sd[j] > 0.0) Z.col(j) /= sd[j];
  }
  const double y_mean = y.mean();
  Eigen::VectorXd r = y.array() - y_mean;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);

  for (int sweep = 0; sweep < kLassoMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (sd[j] <= 0.0) continue;
      const double rho = Z.col(j).dot(r) / n + beta[j];
      const double next = soft_threshold(rho, alpha);
      if (next != beta[j]) {
        r -= Z.col(j) * (next - beta[j]);
        max_change = std::max(max_change, std::abs(next - beta[j]));
        beta[j] = next;
      }
    }
    if (max_change < kLassoTol) break;
  }

  LinearModel model;
  model.alpha = alpha;
  model.coefficients = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j)
    if (sd[j] > 0.0) model.coefficients[j] = beta[j] / sd[j];
  model.intercept = y_mean - model.coefficients.dot(mean);
  return model;
}

LinearModel fit_lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<double>& alphas, int k_folds,
                         std::uint64_t seed) {
  if (alphas.empty()) throw std::invalid_argument("fit_lasso_cv: empty alpha grid");
  std::vector<double> sorted = alphas;
  std::sort(sorted.begin(), sorted.end());
  double best_alpha = sorted.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double a : sorted) {
    const double mse = cv_mse(X, y, k_folds, seed, [a](const auto& Xt, const auto& yt) {
      return fit_lasso(Xt, yt, a);
    });
    // <= prefers the larger alpha on ties
    if (mse <= best_mse) {
      best_mse = mse;
      best_alpha = a;
    }
  }
  return fit_lasso(X, y, best_alpha);
}

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& y;
  const RfParams& params;
  rng::Stream& stream;
  RegressionTree& tree;
  int mtry;

  int build(std::vector<std::size_t>& idx, int depth) {
    const auto node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i : idx) {
      sum += y[i];
      sum_sq += y[i] * y[i];
    }
    const double m = static_cast<double>(idx.size());
    tree.nodes[node_id].value = sum / m;
    const double node_ss = sum_sq - sum * sum / m;

    const bool can_split =
        idx.size() >= static_cast<std::size_t>(params.min_split) &&
        (params.max_depth == 0 || depth < params.max_depth) && node_ss > 1e-12;
    if (!can_split) return node_id;

    // sample mtry distinct features
    std::vector<int> features(static_cast<std::size_t>(X.cols()));
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry; ++k) {
      const auto j = k + static_cast<int>(stream.next_u64() % (features.size() - k));
      std::swap(features[k], features[j]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> vals(idx.size());
    for (int k = 0; k < mtry; ++k) {
      const int f = features[k];
      for (std::size_t i = 0; i < idx.size(); ++i)
        vals[i] = {X(idx[i], f), y[idx[i]]};
      std::sort(vals.begin(), vals.end());
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left_sum += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        const auto nl = static_cast<double>(i + 1);
        const auto nr = m - nl;
        if (nl < params.min_leaf || nr < params.min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
    }
    if (left.empty() || right.empty()) return node_id;
    idx.clear();
    idx.shrink_to_fit();
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int l = build(left, depth + 1);
    tree.nodes[node_id].left = l;
    const int r = build(right, depth + 1);
    tree.nodes[node_id].right = r;
    return node_id;
  }
};

}  // namespace

double RegressionTree::predict_one(const Eigen::VectorXd& x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                           : nodes[node].right;
  }
  return nodes[node].value;
}

double ForestModel::predict_one(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (const auto& tree : trees) total += tree.predict_one(x);
  return total / static_cast<double>(trees.size());
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_one(X.row(i).transpose());
  return out;
}

ForestModel fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const RfParams& params) {
  check_finite(X, y);
  if (params.n_trees < 1 || params.min_leaf < 1 || params.min_split < 2)
    throw std::invalid_argument("fit_random_forest: invalid parameters");
  const auto n = static_cast<std::size_t>(X.rows());
  ForestModel model;
  model.params = params;
  model.trees.resize(params.n_trees);
  const int mtry = std::max(
      1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(X.cols())))));
  for (int t = 0; t < params.n_trees; ++t) {
    rng::Stream stream(params.seed, static_cast<std::uint64_t>(t), kStreamBootstrap);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = stream.next_u64() % n;
    TreeBuilder builder{X, y, params, stream, model.trees[t], mtry};
    builder.build(idx, 0);
  }
  return model;
}

ForestModel fit_random_forest_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<RfParams>& grid, int k_folds,
                                 std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("fit_random_forest_cv: empty grid");
  const RfParams* best = &grid.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (const auto& params : grid) {
    const double mse =
        cv_mse(X, y, k_folds, seed, [&params](const auto& Xt, const auto& yt) {
          return fit_random_forest(Xt, yt, params);
        });
    if (mse < best_mse) {
      best_mse = mse;
      best = &params;
    }
  }
  return fit_random_forest(X, y, *best);
}

double PropensityModel::predict_one(const Eigen::VectorXd& x) const {
  const double p = 1.0 / (1.0 + std::exp(-(intercept + coefficients.dot(x))));
  return std::clamp(p, clip_lo, clip_hi);
}

Eigen::VectorXd PropensityModel::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_one(X.row(i).transpose());
  return out;
}

PropensityModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             double clip_lo, double clip_hi) {
  if (static_cast<std::size_t>(X.rows()) != labels.size())
    throw std::invalid_argument("fit_logistic: X/labels length mismatch");
  if (!(0.0 < clip_lo && clip_lo < clip_hi && clip_hi < 1.0))
    throw std::invalid_argument("fit_logistic: invalid clip bounds");
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0) throw std::invalid_argument("fit_logistic: empty input");

  PropensityModel model;
  model.clip_lo = clip_lo;
  model.clip_hi = clip_hi;
  model.coefficients = Eigen::VectorXd::Zero(X.cols());

  const auto positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == n) {
    // degenerate class: constant model at the clipped empirical rate
    const double p =
        std::clamp(static_cast<double>(positives) / static_cast<double>(n), clip_lo, clip_hi);
    model.intercept = std::log(p / (1.0 - p));
    return model;
  }

  Eigen::MatrixXd Xa(n, X.cols() + 1);
  Xa.col(0).setOnes();
  Xa.rightCols(X.cols()) = X;
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = labels[i] == 1 ? 1.0 : 0.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(Xa.cols());
  auto loglik = [&](const Eigen::VectorXd& th) {
    const Eigen::ArrayXd eta = (Xa * th).array();
    // log sigma(eta)*y + log(1-sigma(eta))*(1-y), stably
    return (yv.array() * eta - (1.0 + eta.exp()).log()).sum();
  };
  double ll = loglik(theta);
  for (int iter = 0; iter < kNewtonMaxIter; ++iter) {
    const Eigen::ArrayXd p = 1.0 / (1.0 + (-(Xa * theta).array()).exp());
    const Eigen::VectorXd grad = Xa.transpose() * (yv.array() - p).matrix();
    if (grad.norm() < kNewtonGradTol) break;
    const Eigen::ArrayXd wgt = (p * (1.0 - p)).max(1e-12);
    Eigen::MatrixXd H = Xa.transpose() * wgt.matrix().asDiagonal() * Xa;
    H.diagonal().array() += kNewtonJitter;
    const Eigen::VectorXd delta = H.ldlt().solve(grad);
    double step = 1.0;
    Eigen::VectorXd next = theta + delta;
    double next_ll = loglik(next);
    int halvings = 0;
    while (next_ll < ll && halvings < 40) {
      step *= 0.5;
      next = theta + step * delta;
      next_ll = loglik(next);
      ++halvings;
    }
    if (next_ll < ll) break;
    const bool converged = next_ll - ll < 1e-12;
    theta = next;
    ll = next_ll;
    if (converged) break;
  }
  model.intercept = theta[0];
  model.coefficients = theta.tail(X.cols());
  return model;
}

double Regressor::predict_one(const Eigen::VectorXd& x) const {
  return kind == BaseLearner::Lasso ? linear.predict_one(x) : forest.predict_one(x);
}

Eigen::VectorXd Regressor::predict(const Eigen::MatrixXd& X) const {
  return kind == BaseLearner::Lasso ? linear.predict(X) : forest.predict(X);
}

Regressor fit_regressor(BaseLearner kind, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& y, std::uint64_t seed,
                        const RegressorOptions& options) {
  Regressor reg;
  reg.kind = kind;
  if (kind == BaseLearner::Lasso) {
    reg.linear = options.tune
                     ? fit_lasso_cv(X, y, options.lasso_alphas, options.cv_folds, seed)
                     : fit_lasso(X, y, options.lasso_alphas.front());
    return reg;
  }
  std::vector<RfParams> grid;
  for (int trees : options.forest_trees) {
    for (int depth : options.forest_depths) {
      RfParams p;
      p.n_trees = trees;
      p.max_depth = depth;
      p.min_split = 10;
      p.min_leaf = 5;
      p.seed = seed;
      grid.push_back(p);
    }
  }
  reg.forest = options.tune && grid.size() > 1
                   ? fit_random_forest_cv(X, y, grid, options.cv_folds, seed)
                   : fit_random_forest(X, y, grid.front());
  return reg;
}

std::string to_string(BaseLearner b) {
  return b == BaseLearner::Lasso ? "lasso" : "forest";
}

BaseLearner base_learner_from_string(const std::string& s) {
  if (s == "lasso") return BaseLearner::Lasso;
  if (s == "forest") return BaseLearner::Forest;
  throw std::invalid_argument("unknown base learner: " + s);
}

}  // namespace survhte
