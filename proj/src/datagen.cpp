#include "survhte/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "survhte/rng.hpp"

namespace survhte {

namespace {

// rng purpose tags
constexpr std::uint64_t kStreamCovariates = 1;
constexpr std::uint64_t kStreamTreatment = 2;
constexpr std::uint64_t kStreamArm0 = 3;
constexpr std::uint64_t kStreamArm1 = 4;
constexpr std::uint64_t kStreamCensor = 5;

constexpr double kMinPoissonRate = 1e-6;
constexpr double kInfCensorBaseRate = 0.1;
constexpr double kInfCensorSlope = 0.05;
constexpr std::uint64_t kAteSeed = 0x5A7E57EDULL;  // reserved for ATE references

double beta_pdf_2_4(double x) { return 20.0 * x * (1.0 - x) * (1.0 - x) * (1.0 - x); }

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double confounding_shift(const CausalConfig& config, const UnitLatents& unit) {
  return config.confounded() ? 0.5 * (unit.u[0] - unit.x[1]) : 0.0;
}

// Linear predictors of the event-time laws.

double cox_a_linpred(const UnitLatents& unit, int w, double eps) {
  return unit.x[0] + (-0.5 + unit.x[1]) * w + eps;
}

double aft_b_location(const UnitLatents& unit, int w, double eps) {
  const double lo = unit.x[0] < 0.5 ? 1.0 : 0.0;
  const double sx2 = std::sqrt(unit.x[1]);
  return -1.85 - 0.8 * lo + 0.7 * sx2 + 0.2 * unit.x[2] +
         (0.7 - 0.4 * lo - 0.4 * sx2) * w + eps;
}

double aft_d_location(const UnitLatents& unit, int w, double eps) {
  const double lo = unit.x[0] < 0.5 ? 1.0 : 0.0;
  const double sx2 = std::sqrt(unit.x[1]);
  return 0.3 - 0.5 * lo + 0.5 * sx2 + 0.2 * unit.x[2] +
         (1.0 - 0.8 * lo - 0.8 * sx2) * w + eps;
}

double poisson_rate(Scenario scenario, const UnitLatents& unit, int w, double eps) {
  const double base = scenario == Scenario::C ? 6.0 : 7.0;
  const double rate = unit.x[1] * unit.x[1] + unit.x[2] + base +
                      2.0 * (std::sqrt(unit.x[0]) - 0.3) * w + eps;
  return std::max(rate, kMinPoissonRate);
}

double draw_event_time(Scenario scenario, const UnitLatents& unit, int w,
                       double eps, rng::Stream& stream) {
  switch (scenario) {
    case Scenario::A: {
      // S(t) = exp(-sqrt(t) * e^{bz}); inverse transform t = (-ln U / e^{bz})^2
      const double e = std::exp(cox_a_linpred(unit, w, eps));
      const double r = -std::log(stream.uniform()) / e;
      return r * r;
    }
    case Scenario::B:
      return std::exp(aft_b_location(unit, w, eps) + stream.normal());
    case Scenario::D:
      return std::exp(aft_d_location(unit, w, eps) + stream.normal());
    case Scenario::C:
    case Scenario::E:
      return static_cast<double>(stream.poisson(poisson_rate(scenario, unit, w, eps)));
  }
  throw std::logic_error("draw_event_time: unknown scenario");
}

double censoring_cox_linpred(Scenario scenario, const UnitLatents& unit, int w) {
  const double lo = unit.x[0] < 0.5 ? 1.0 : 0.0;
  const double sx2 = std::sqrt(unit.x[1]);
  const double treat = (1.15 + 0.5 * lo - 0.3 * sx2) * w;
  if (scenario == Scenario::B)
    return -1.75 - 0.5 * sx2 + 0.2 * unit.x[2] + treat;
  return -0.9 + 2.0 * sx2 + 2.0 * unit.x[2] + treat;  // Scenario D
}

// Poisson survival P(T > k) for integer k >= -1.
double poisson_sf(double lambda, long k) {
  if (k < 0) return 1.0;
  double p = std::exp(-lambda);
  double cdf = p;
  for (long j = 1; j <= k; ++j) {
    p *= lambda / static_cast<double>(j);
    cdf += p;
  }
  return std::max(0.0, 1.0 - cdf);
}

// E[min(T,h)] for integer-valued T: integral of P(T > t) over [0,h].
double poisson_restricted_mean(double lambda, double h) {
  const double whole = std::floor(h);
  double total = 0.0;
  double p = std::exp(-lambda);
  double cdf = p;  // P(T <= 0)
  long k = 0;
  while (k < static_cast<long>(whole)) {
    total += 1.0 - cdf;  // P(T > k) over [k, k+1)
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
    if (1.0 - cdf < 1e-15 && k > static_cast<long>(lambda)) {
      return total;  // tail exhausted
    }
  }
  total += (h - whole) * (1.0 - cdf);  // survival is flat on [floor(h), h)
  return total;
}

constexpr int kSimpsonPanels = 2048;

// Composite Simpson of a survival function on [0, h].
template <typename F>
double simpson_rmst(F&& survival, double h) {
  const int n = kSimpsonPanels;  // even
  const double dt = h / n;
  double sum = survival(0.0) + survival(h);
  for (int i = 1; i < n; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * survival(i * dt);
  }
  return sum * dt / 3.0;
}

double arm_mean_outcome(Scenario scenario, const UnitLatents& unit, int w,
                        double eps, Estimand estimand, double h) {
  switch (scenario) {
    case Scenario::A: {
      const double e = std::exp(cox_a_linpred(unit, w, eps));
      if (estimand == Estimand::SurvProb) return std::exp(-std::sqrt(h) * e);
      return simpson_rmst([e](double t) { return std::exp(-std::sqrt(t) * e); }, h);
    }
    case Scenario::B:
    case Scenario::D: {
      const double mu = scenario == Scenario::B ? aft_b_location(unit, w, eps)
                                                : aft_d_location(unit, w, eps);
      auto survival = [mu](double t) {
        if (t <= 0.0) return 1.0;
        return 1.0 - norm_cdf(std::log(t) - mu);
      };
      if (estimand == Estimand::SurvProb) return survival(h);
      return simpson_rmst(survival, h);
    }
    case Scenario::C:
    case Scenario::E: {
      const double lambda = poisson_rate(scenario, unit, w, eps);
      if (estimand == Estimand::SurvProb)
        return poisson_sf(lambda, static_cast<long>(std::floor(h)));
      return poisson_restricted_mean(lambda, h);
    }
  }
  throw std::logic_error("arm_mean_outcome: unknown scenario");
}

}  // namespace

void CausalConfig::validate() const {
  const bool rct = kind == CausalKind::Rct50 || kind == CausalKind::Rct5;
  if (informative_censoring && rct)
    throw std::invalid_argument("informative censoring is not defined for RCT configurations");
  if (latent_censoring && (kind != CausalKind::ObsUconf || informative_censoring))
    throw std::invalid_argument(
        "latent censoring requires OBS-UConf without informative censoring");
}

HorizonRule HorizonRule::fixed(double h) {
  if (h <= 0.0) throw std::invalid_argument("fixed horizon must be > 0");
  return {Kind::Fixed, h};
}

std::vector<UnitLatents> sample_covariates(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_covariates: n must be >= 1");
  std::vector<UnitLatents> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream stream(seed, i, kStreamCovariates);
    for (double& v : out[i].x) v = stream.uniform();
    for (double& v : out[i].u) v = stream.uniform();
  }
  return out;
}

double propensity_score(const CausalConfig& config, const UnitLatents& unit) {
  switch (config.kind) {
    case CausalKind::Rct50:
      return 0.5;
    case CausalKind::Rct5:
      return 0.05;
    case CausalKind::ObsCps:
      return (1.0 + beta_pdf_2_4(unit.x[0])) / 4.0;
    case CausalKind::ObsUconf:
      return (1.0 + beta_pdf_2_4(0.3 * unit.x[0] + 0.7 * unit.u[0])) / 4.0;
    case CausalKind::ObsNopos:
      if (unit.x[0] > 0.8) return 1.0;
      if (unit.x[0] < 0.2) return 0.0;
      return 0.5;
  }
  throw std::logic_error("propensity_score: unknown kind");
}

std::pair<double, double> generate_potential_outcomes(Scenario scenario,
                                                      const CausalConfig& config,
                                                      const UnitLatents& unit,
                                                      std::uint64_t seed,
                                                      std::size_t unit_index) {
  const double eps = confounding_shift(config, unit);
  rng::Stream s0(seed, unit_index, kStreamArm0);
  rng::Stream s1(seed, unit_index, kStreamArm1);
  return {draw_event_time(scenario, unit, 0, eps, s0),
          draw_event_time(scenario, unit, 1, eps, s1)};
}

double generate_censoring(Scenario scenario, const CausalConfig& config,
                          const UnitLatents& unit, double t_event,
                          std::uint64_t seed, std::size_t unit_index) {
  if (t_event < 0.0) throw std::invalid_argument("generate_censoring: t_event must be >= 0");
  rng::Stream stream(seed, unit_index, kStreamCensor);
  if (config.latent_censoring) {
    if (unit.u[0] <= 0.6) return kNeverCensored;
    return 1.0 + (unit.x[3] < 0.5 ? 1.0 : 0.0);
  }
  if (config.informative_censoring) {
    return stream.exponential(kInfCensorBaseRate + kInfCensorSlope * t_event);
  }
  // treatment-dependent censoring laws condition on the realized assignment
  rng::Stream wstream(seed, unit_index, kStreamTreatment);
  const int w = wstream.bernoulli(propensity_score(config, unit)) ? 1 : 0;
  switch (scenario) {
    case Scenario::A:
      return stream.uniform(0.0, 3.0);
    case Scenario::B:
    case Scenario::D: {
      // Cox with Weibull baseline: Lambda0(t) = t^2, t = sqrt(-ln U / e^{nu})
      const double e = std::exp(censoring_cox_linpred(scenario, unit, w));
      return std::sqrt(-std::log(stream.uniform()) / e);
    }
    case Scenario::C:
      if (stream.bernoulli(0.6)) return kNeverCensored;
      return 1.0 + (unit.x[3] < 0.5 ? 1.0 : 0.0);
    case Scenario::E: {
      const double rate = 3.0 + std::log1p(std::exp(2.0 * unit.x[1] + unit.x[2]));
      return static_cast<double>(stream.poisson(rate));
    }
  }
  throw std::logic_error("generate_censoring: unknown scenario");
}

double true_cate(Scenario scenario, const CausalConfig& config,
                 const UnitLatents& unit, Estimand estimand, double horizon,
                 bool marginalize_u) {
  if (horizon <= 0.0) throw std::invalid_argument("true_cate: horizon must be > 0");
  if (!marginalize_u || !config.confounded()) {
    const double eps = confounding_shift(config, unit);
    return arm_mean_outcome(scenario, unit, 1, eps, estimand, horizon) -
           arm_mean_outcome(scenario, unit, 0, eps, estimand, horizon);
  }
  // integrate U1 out with 32-node Gauss-Legendre on [0,1]
  static constexpr int kNodes = 32;
  double total = 0.0;
  for (int i = 0; i < kNodes; ++i) {
    // Chebyshev-like midpoint rule is enough at this smoothness; uniform grid
    const double u1 = (i + 0.5) / kNodes;
    const double eps = 0.5 * (u1 - unit.x[1]);
    total += arm_mean_outcome(scenario, unit, 1, eps, estimand, horizon) -
             arm_mean_outcome(scenario, unit, 0, eps, estimand, horizon);
  }
  return total / kNodes;
}

SyntheticDataset build_dataset(const DatasetSpec& spec) {
  spec.config.validate();
  if (spec.n == 0) throw std::invalid_argument("build_dataset: n must be >= 1");
  if (spec.horizon_rule.kind == HorizonRule::Kind::Fixed && spec.horizon_rule.value <= 0.0)
    throw std::invalid_argument("build_dataset: fixed horizon must be > 0");

  SyntheticDataset ds;
  ds.scenario = spec.scenario;
  ds.config = spec.config;
  ds.seed = spec.seed;
  ds.estimand = spec.estimand;
  ds.units.resize(spec.n);

  const auto latents = sample_covariates(spec.n, spec.seed);
  double max_observed = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    Unit& unit = ds.units[i];
    unit.latents = latents[i];
    rng::Stream wstream(spec.seed, i, kStreamTreatment);
    unit.w = wstream.bernoulli(propensity_score(spec.config, unit.latents)) ? 1 : 0;
    const auto [t0, t1] =
        generate_potential_outcomes(spec.scenario, spec.config, unit.latents, spec.seed, i);
    unit.t0 = t0;
    unit.t1 = t1;
    const double factual = unit.w == 1 ? t1 : t0;
    const double censor =
        generate_censoring(spec.scenario, spec.config, unit.latents, factual, spec.seed, i);
    unit.obs_time = std::min(factual, censor);
    unit.event = factual <= censor;
    max_observed = std::max(max_observed, unit.obs_time);
  }

  ds.horizon = spec.horizon_rule.kind == HorizonRule::Kind::Fixed
                   ? spec.horizon_rule.value
                   : max_observed;
  for (Unit& unit : ds.units) {
    unit.cate_true =
        true_cate(spec.scenario, spec.config, unit.latents, spec.estimand, ds.horizon);
  }
  return ds;
}

double true_ate(Scenario scenario, const CausalConfig& config, Estimand estimand,
                double horizon, std::size_t n) {
  config.validate();
  const auto latents = sample_covariates(n, kAteSeed);
  double total = 0.0;
  for (const auto& unit : latents) {
    total += true_cate(scenario, config, unit, estimand, horizon);
  }
  return total / static_cast<double>(n);
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
    case Scenario::D: return "D";
    case Scenario::E: return "E";
  }
  return "?";
}

std::string to_string(const CausalConfig& c) {
  std::string base;
  switch (c.kind) {
    case CausalKind::Rct50: base = "RCT-50"; break;
    case CausalKind::Rct5: base = "RCT-5"; break;
    case CausalKind::ObsCps: base = "OBS-CPS"; break;
    case CausalKind::ObsUconf: base = "OBS-UConf"; break;
    case CausalKind::ObsNopos: base = "OBS-NoPos"; break;
  }
  if (c.informative_censoring) base += "-InfC";
  if (c.latent_censoring) base += "-LatentC";
  return base;
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "A") return Scenario::A;
  if (s == "B") return Scenario::B;
  if (s == "C") return Scenario::C;
  if (s == "D") return Scenario::D;
  if (s == "E") return Scenario::E;
  throw std::invalid_argument("unknown scenario: " + s);
}

CausalConfig causal_config_from_string(const std::string& s) {
  CausalConfig c;
  std::string base = s;
  auto strip_suffix = [&base](const std::string& suffix) {
    if (base.size() >= suffix.size() &&
        base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
      base.resize(base.size() - suffix.size());
      return true;
    }
    return false;
  };
  c.latent_censoring = strip_suffix("-LatentC");
  c.informative_censoring = strip_suffix("-InfC");
  if (base == "RCT-50") c.kind = CausalKind::Rct50;
  else if (base == "RCT-5") c.kind = CausalKind::Rct5;
  else if (base == "OBS-CPS") c.kind = CausalKind::ObsCps;
  else if (base == "OBS-UConf") c.kind = CausalKind::ObsUconf;
  else if (base == "OBS-NoPos") c.kind = CausalKind::ObsNopos;
  else throw std::invalid_argument("unknown causal configuration: " + s);
  c.validate();
  return c;
}

}  // namespace survhte
