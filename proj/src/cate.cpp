#include "survhte/cate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "survhte/rng.hpp"

namespace survhte {

namespace {

constexpr std::uint64_t kStreamCrossFit = 301;
constexpr std::uint64_t kStreamBootstrap = 302;

void check_inputs(const Eigen::MatrixXd& X, const std::vector<int>& w,
                  const Eigen::VectorXd* y) {
  if (X.rows() == 0) throw std::invalid_argument("cate: empty design matrix");
  if (static_cast<std::size_t>(X.rows()) != w.size())
    throw std::invalid_argument("cate: X/w length mismatch");
  if (y && X.rows() != y->size())
    throw std::invalid_argument("cate: X/y length mismatch");
}

std::vector<std::size_t> arm_rows(const std::vector<int>& w, int arm) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < w.size(); ++i)
    if ((w[i] == 1 ? 1 : 0) == arm) rows.push_back(i);
  return rows;
}

void require_both_arms(const std::vector<int>& w) {
  if (arm_rows(w, 1).empty()) throw std::invalid_argument("cate: treated arm is empty");
  if (arm_rows(w, 0).empty()) throw std::invalid_argument("cate: control arm is empty");
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(rows.size(), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd elems_of(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
  return out;
}

Eigen::MatrixXd append_treatment(const Eigen::MatrixXd& X, const std::vector<int>& w) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.leftCols(X.cols()) = X;
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i, X.cols()) = w[i] == 1 ? 1.0 : 0.0;
  return out;
}

Eigen::VectorXd with_treatment(const Eigen::VectorXd& x, double w) {
  Eigen::VectorXd out(x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = w;
  return out;
}

std::vector<int> fold_of(std::size_t n, int k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng::Stream stream(seed, 0, kStreamCrossFit);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = stream.next_u64() % i;
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % k);
  return fold;
}

double curve_functional(const SurvivalCurve& curve, Estimand estimand, double h) {
  return estimand == Estimand::Rmst ? rmst(curve, h) : eval_curve(curve, h);
}

// Features (X, w, w*X): a linear fit can then express effects that vary
// with the covariates.
Eigen::MatrixXd s_features(const Eigen::MatrixXd& X, const std::vector<int>& w) {
  Eigen::MatrixXd out(X.rows(), 2 * X.cols() + 1);
  out.leftCols(X.cols()) = X;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double wi = w[i] == 1 ? 1.0 : 0.0;
    out(i, X.cols()) = wi;
    out.row(i).tail(X.cols()) = wi * X.row(i);
  }
  return out;
}

Eigen::VectorXd s_features_one(const Eigen::VectorXd& x, double w) {
  Eigen::VectorXd out(2 * x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = w;
  out.tail(x.size()) = w * x;
  return out;
}

void fit_imputed_s(CateModel& model, const Eigen::MatrixXd& X, const std::vector<int>& w,
                   const Eigen::VectorXd& y, const CateOptions& opt) {
  model.mu = fit_regressor(opt.base_learner, s_features(X, w), y, opt.seed,
                           opt.regressor);
}

void fit_imputed_t(CateModel& model, const Eigen::MatrixXd& X, const std::vector<int>& w,
                   const Eigen::VectorXd& y, const CateOptions& opt) {
  require_both_arms(w);
  const auto treated = arm_rows(w, 1);
  const auto control = arm_rows(w, 0);
  // identical seeds per arm keep the fit symmetric under label swaps
  model.mu1 = fit_regressor(opt.base_learner, rows_of(X, treated), elems_of(y, treated),
                            opt.seed, opt.regressor);
  model.mu0 = fit_regressor(opt.base_learner, rows_of(X, control), elems_of(y, control),
                            opt.seed, opt.regressor);
}

void fit_imputed_x(CateModel& model, const Eigen::MatrixXd& X, const std::vector<int>& w,
                   const Eigen::VectorXd& y, const CateOptions& opt) {
  fit_imputed_t(model, X, w, y, opt);
  const auto treated = arm_rows(w, 1);
  const auto control = arm_rows(w, 0);
  const Eigen::MatrixXd X1 = rows_of(X, treated);
  const Eigen::MatrixXd X0 = rows_of(X, control);
  const Eigen::VectorXd d1 = elems_of(y, treated) - model.mu0.predict(X1);
  const Eigen::VectorXd d0 = model.mu1.predict(X0) - elems_of(y, control);
  model.tau1 = fit_regressor(opt.base_learner, X1, d1, opt.seed + 2, opt.regressor);
  model.tau0 = fit_regressor(opt.base_learner, X0, d0, opt.seed + 2, opt.regressor);
  model.propensity = fit_logistic(X, w, opt.clip_lo, opt.clip_hi);
}

void fit_imputed_dr(CateModel& model, const Eigen::MatrixXd& X, const std::vector<int>& w,
                    const Eigen::VectorXd& y, const CateOptions& opt) {
  require_both_arms(w);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto fold = fold_of(n, opt.n_folds, opt.seed);
  Eigen::VectorXd pseudo(n);
  for (int f = 0; f < opt.n_folds; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : train).push_back(i);
    if (held.empty()) continue;
    std::vector<int> w_train;
    w_train.reserve(train.size());
    for (std::size_t i : train) w_train.push_back(w[i]);
    require_both_arms(w_train);
    const auto treated = arm_rows(w_train, 1);
    const auto control = arm_rows(w_train, 0);
    const Eigen::MatrixXd Xt = rows_of(X, train);
    const Eigen::VectorXd yt = elems_of(y, train);
    const Regressor mu1 = fit_regressor(opt.base_learner, rows_of(Xt, treated),
                                        elems_of(yt, treated), opt.seed + 10 + f,
                                        opt.regressor);
    const Regressor mu0 = fit_regressor(opt.base_learner, rows_of(Xt, control),
                                        elems_of(yt, control), opt.seed + 10 + f,
                                        opt.regressor);
    const PropensityModel g = fit_logistic(Xt, w_train, opt.clip_lo, opt.clip_hi);
    for (std::size_t i : held) {
      const Eigen::VectorXd x = X.row(i).transpose();
      const double p1 = g.predict_one(x);
      const double p0 = std::clamp(1.0 - p1, opt.clip_lo, opt.clip_hi);
      const double m1 = mu1.predict_one(x);
      const double m0 = mu0.predict_one(x);
      const double y1 = m1 + (w[i] == 1 ? (y[i] - m1) / p1 : 0.0);
      const double y0 = m0 + (w[i] == 1 ? 0.0 : (y[i] - m0) / p0);
      pseudo[i] = y1 - y0;
    }
  }
  model.tau_final = fit_regressor(opt.base_learner, X, pseudo, opt.seed + 30,
                                  opt.regressor);
}

}  // namespace

CateModel fit_imputed_meta(CateVariant variant, const Eigen::MatrixXd& X,
                           const std::vector<int>& w, const Eigen::VectorXd& y,
                           const CateOptions& options) {
  check_inputs(X, w, &y);
  CateModel model;
  model.family = CateFamily::ImputedMeta;
  model.variant = variant;
  model.options = options;
  switch (variant) {
    case CateVariant::S: fit_imputed_s(model, X, w, y, options); break;
    case CateVariant::T: fit_imputed_t(model, X, w, y, options); break;
    case CateVariant::X: fit_imputed_x(model, X, w, y, options); break;
    case CateVariant::Dr: fit_imputed_dr(model, X, w, y, options); break;
    case CateVariant::Matching:
      throw std::invalid_argument("fit_imputed_meta: matching is a survival variant");
  }
  return model;
}

CateModel fit_double_ml(const Eigen::MatrixXd& X, const std::vector<int>& w,
                        const Eigen::VectorXd& y, const CateOptions& options) {
  check_inputs(X, w, &y);
  require_both_arms(w);
  if (options.n_folds < 2) throw std::invalid_argument("fit_double_ml: n_folds must be >= 2");
  const auto n = static_cast<std::size_t>(X.rows());
  const auto fold = fold_of(n, options.n_folds, options.seed);

  Eigen::VectorXd y_res(n), w_res(n);
  for (int f = 0; f < options.n_folds; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? held : train).push_back(i);
    if (held.empty()) continue;
    std::vector<int> w_train;
    for (std::size_t i : train) w_train.push_back(w[i]);
    const Regressor q = fit_regressor(options.base_learner, rows_of(X, train),
                                      elems_of(y, train), options.seed + 40 + f,
                                      options.regressor);
    const PropensityModel g =
        fit_logistic(rows_of(X, train), w_train, options.clip_lo, options.clip_hi);
    for (std::size_t i : held) {
      const Eigen::VectorXd x = X.row(i).transpose();
      y_res[i] = y[i] - q.predict_one(x);
      w_res[i] = (w[i] == 1 ? 1.0 : 0.0) - g.predict_one(x);
    }
  }

  if (w_res.squaredNorm() / static_cast<double>(n) < 1e-8)
    throw std::runtime_error("fit_double_ml: treatment residuals have no variance");

  const auto d = X.cols() + 1;
  auto solve_theta = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd xt(d);
    for (std::size_t i : rows) {
      xt[0] = 1.0;
      xt.tail(X.cols()) = X.row(i).transpose();
      const double wr = w_res[i];
      A.noalias() += (wr * wr) * (xt * xt.transpose());
      b.noalias() += wr * y_res[i] * xt;
    }
    A.diagonal().array() += 1e-10;
    return Eigen::VectorXd(A.ldlt().solve(b));
  };
  auto mean_effect = [&](const Eigen::VectorXd& theta,
                         const std::vector<std::size_t>& rows) {
    double total = 0.0;
    for (std::size_t i : rows)
      total += theta[0] + theta.tail(X.cols()).dot(X.row(i).transpose());
    return total / static_cast<double>(rows.size());
  };

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  CateModel model;
  model.family = CateFamily::DoubleMl;
  model.variant = CateVariant::S;
  model.options = options;
  model.theta = solve_theta(all);
  model.ate = mean_effect(model.theta, all);

  rng::Stream boot(options.seed, 0, kStreamBootstrap);
  std::vector<double> ates;
  ates.reserve(options.bootstrap_resamples);
  std::vector<std::size_t> sample(n);
  for (int b = 0; b < options.bootstrap_resamples; ++b) {
    for (auto& i : sample) i = boot.next_u64() % n;
    ates.push_back(mean_effect(solve_theta(sample), sample));
  }
  std::sort(ates.begin(), ates.end());
  if (!ates.empty()) {
    const auto B = ates.size();
    model.ate_ci_lo = ates[static_cast<std::size_t>(std::floor(0.025 * (B - 1)))];
    model.ate_ci_hi = ates[static_cast<std::size_t>(std::ceil(0.975 * (B - 1)))];
  }
  return model;
}

namespace {

void fit_surv_t(CateModel& model, const Eigen::MatrixXd& X, const std::vector<int>& w,
                const std::vector<double>& times, const std::vector<std::uint8_t>& events,
                const CateOptions& opt) {
  require_both_arms(w);
  for (int arm : {0, 1}) {
    const auto rows = arm_rows(w, arm);
    std::vector<double> t;
    std::vector<std::uint8_t> e;
    bool any_event = false;
    for (std::size_t i : rows) {
      t.push_back(times[i]);
      e.push_back(events[i]);
      any_event = any_event || events[i];
    }
    if (!any_event)
      throw std::invalid_argument(arm == 1 ? "cate: treated arm has no events"
                                           : "cate: control arm has no events");
    (arm == 1 ? model.surv1 : model.surv0) = fit_rsf(rows_of(X, rows), t, e, opt.rsf);
  }
}

void fit_surv_matching(CateModel& model, const Eigen::MatrixXd& X,
                       const std::vector<int>& w, const std::vector<double>& times,
                       const std::vector<std::uint8_t>& events, const CateOptions& opt) {
  require_both_arms(w);
  // pooled fit with treatment as a feature so twins in opposite arms get
  // distinct factual estimates
  model.surv = fit_rsf(append_treatment(X, w), times, events, opt.rsf);
  const auto n = static_cast<std::size_t>(X.rows());

  std::vector<double> factual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto curve = predict_survival_curve(
        model.surv, with_treatment(X.row(i).transpose(), w[i] == 1 ? 1.0 : 0.0));
    factual[i] = curve_functional(curve, opt.estimand, opt.horizon);
  }

  model.match_mean = X.colwise().mean();
  model.match_sd.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var =
        (X.col(j).array() - model.match_mean[j]).square().sum() / X.rows();
    model.match_sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  model.match_x = (X.rowwise() - model.match_mean.transpose()).array().rowwise() /
                  model.match_sd.transpose().array();

  const auto treated = arm_rows(w, 1);
  const auto control = arm_rows(w, 0);
  model.match_tau.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = w[i] == 1 ? control : treated;
    const auto k = std::min(static_cast<std::size_t>(opt.matching_k), pool.size());
    // K nearest opposite-arm units by standardized euclidean distance
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(pool.size());
    for (std::size_t j : pool) {
      dist.emplace_back((model.match_x.row(i) - model.match_x.row(j)).squaredNorm(), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double counterfactual = 0.0;
    for (std::size_t m = 0; m < k; ++m) counterfactual += factual[dist[m].second];
    counterfactual /= static_cast<double>(k);
    const double sign = w[i] == 1 ? 1.0 : -1.0;
    model.match_tau[i] = sign * (factual[i] - counterfactual);
  }
}

}  // namespace

CateModel fit_survival_meta(CateVariant variant, const Eigen::MatrixXd& X,
                            const std::vector<int>& w, const std::vector<double>& times,
                            const std::vector<std::uint8_t>& events,
                            const CateOptions& options) {
  check_inputs(X, w, nullptr);
  if (times.size() != w.size() || events.size() != w.size())
    throw std::invalid_argument("fit_survival_meta: length mismatch");
  CateModel model;
  model.family = CateFamily::SurvMeta;
  model.variant = variant;
  model.options = options;
  switch (variant) {
    case CateVariant::S:
      model.surv = fit_rsf(append_treatment(X, w), times, events, options.rsf);
      break;
    case CateVariant::T:
      fit_surv_t(model, X, w, times, events, options);
      break;
    case CateVariant::Matching:
      fit_surv_matching(model, X, w, times, events, options);
      break;
    default:
      throw std::invalid_argument("fit_survival_meta: unsupported variant");
  }
  return model;
}

double CateModel::predict_one(const Eigen::VectorXd& x) const {
  switch (family) {
    case CateFamily::ImputedMeta:
      switch (variant) {
        case CateVariant::S:
          return mu.predict_one(s_features_one(x, 1.0)) -
                 mu.predict_one(s_features_one(x, 0.0));
        case CateVariant::T:
          return mu1.predict_one(x) - mu0.predict_one(x);
        case CateVariant::X: {
          const double g = propensity.predict_one(x);
          return g * tau0.predict_one(x) + (1.0 - g) * tau1.predict_one(x);
        }
        case CateVariant::Dr:
          return tau_final.predict_one(x);
        default:
          break;
      }
      break;
    case CateFamily::DoubleMl:
      return theta[0] + theta.tail(theta.size() - 1).dot(x);
    case CateFamily::SurvMeta:
      switch (variant) {
        case CateVariant::S:
          return curve_functional(predict_survival_curve(surv, with_treatment(x, 1.0)),
                                  options.estimand, options.horizon) -
                 curve_functional(predict_survival_curve(surv, with_treatment(x, 0.0)),
                                  options.estimand, options.horizon);
        case CateVariant::T:
          return curve_functional(predict_survival_curve(surv1, x), options.estimand,
                                  options.horizon) -
                 curve_functional(predict_survival_curve(surv0, x), options.estimand,
                                  options.horizon);
        case CateVariant::Matching: {
          // nearest training unit in standardized space
          const Eigen::RowVectorXd z =
              ((x - match_mean).array() / match_sd.array()).transpose();
          Eigen::Index best = 0;
          double best_d = std::numeric_limits<double>::infinity();
          for (Eigen::Index i = 0; i < match_x.rows(); ++i) {
            const double d = (match_x.row(i) - z).squaredNorm();
            if (d < best_d) {
              best_d = d;
              best = i;
            }
          }
          return match_tau[static_cast<std::size_t>(best)];
        }
        default:
          break;
      }
      break;
  }
  throw std::logic_error("CateModel::predict_one: invalid family/variant");
}

Eigen::VectorXd CateModel::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_one(X.row(i).transpose());
  return out;
}

std::string to_string(CateFamily f) {
  switch (f) {
    case CateFamily::ImputedMeta: return "imputed-meta";
    case CateFamily::DoubleMl: return "double-ml";
    case CateFamily::SurvMeta: return "surv-meta";
  }
  return "?";
}

std::string to_string(CateVariant v) {
  switch (v) {
    case CateVariant::S: return "S";
    case CateVariant::T: return "T";
    case CateVariant::X: return "X";
    case CateVariant::Dr: return "DR";
    case CateVariant::Matching: return "matching";
  }
  return "?";
}

CateFamily cate_family_from_string(const std::string& s) {
  if (s == "imputed-meta") return CateFamily::ImputedMeta;
  if (s == "double-ml") return CateFamily::DoubleMl;
  if (s == "surv-meta") return CateFamily::SurvMeta;
  throw std::invalid_argument("unknown estimator family: " + s);
}

CateVariant cate_variant_from_string(const std::string& s) {
  if (s == "S") return CateVariant::S;
  if (s == "T") return CateVariant::T;
  if (s == "X") return CateVariant::X;
  if (s == "DR") return CateVariant::Dr;
  if (s == "matching") return CateVariant::Matching;
  throw std::invalid_argument("unknown estimator variant: " + s);
}

}  // namespace survhte
