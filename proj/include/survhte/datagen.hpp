#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace survhte {

enum class CausalKind { Rct50, Rct5, ObsCps, ObsUconf, ObsNopos };
enum class Scenario { A, B, C, D, E };
enum class Estimand { Rmst, SurvProb };

constexpr double kNeverCensored = std::numeric_limits<double>::infinity();

struct CausalConfig {
  CausalKind kind = CausalKind::Rct50;
  bool informative_censoring = false;
  bool latent_censoring = false;

  void validate() const;
  bool confounded() const { return kind == CausalKind::ObsUconf; }
};

struct UnitLatents {
  std::array<double, 5> x{};  // X1..X5, each in [0,1]
  std::array<double, 2> u{};  // U1, U2, each in [0,1]
};

struct Unit {
  UnitLatents latents;
  int w = 0;
  double obs_time = 0.0;  // min(T(w), C)
  bool event = false;     // T(w) <= C
  double t0 = 0.0;
  double t1 = 0.0;
  double cate_true = 0.0;
};

struct HorizonRule {
  enum class Kind { MaxObserved, Fixed };
  Kind kind = Kind::MaxObserved;
  double value = 0.0;  // used when kind == Fixed

  static HorizonRule max_observed() { return {}; }
  static HorizonRule fixed(double h);
};

struct DatasetSpec {
  Scenario scenario = Scenario::A;
  CausalConfig config;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  Estimand estimand = Estimand::Rmst;
  HorizonRule horizon_rule;
};

struct SyntheticDataset {
  std::vector<Unit> units;
  Scenario scenario = Scenario::A;
  CausalConfig config;
  std::uint64_t seed = 0;
  Estimand estimand = Estimand::Rmst;
  double horizon = 0.0;
};

std::vector<UnitLatents> sample_covariates(std::size_t n, std::uint64_t seed);

double propensity_score(const CausalConfig& config, const UnitLatents& unit);

// Both potential event times for one unit. The per-arm idiosyncratic noise
// comes from independent counter-based substreams keyed by
// (seed, unit index, purpose).
std::pair<double, double> generate_potential_outcomes(Scenario scenario,
                                                      const CausalConfig& config,
                                                      const UnitLatents& unit,
                                                      std::uint64_t seed,
                                                      std::size_t unit_index);

// Censoring time; kNeverCensored when the unit is never censored.
double generate_censoring(Scenario scenario, const CausalConfig& config,
                          const UnitLatents& unit, double t_event,
                          std::uint64_t seed, std::size_t unit_index);

// E[y(T(1))|x,u] - E[y(T(0))|x,u] with y(t)=min(t,h) (Rmst) or y(t)=1(t>h)
// (SurvProb), conditioning on both X and U. marginalize_u integrates U1 out
// numerically instead.
double true_cate(Scenario scenario, const CausalConfig& config,
                 const UnitLatents& unit, Estimand estimand, double horizon,
                 bool marginalize_u = false);

SyntheticDataset build_dataset(const DatasetSpec& spec);

// Population ATE reference: mean true_cate over a large generated sample at
// a reserved seed (the "very large sample" convention).
double true_ate(Scenario scenario, const CausalConfig& config, Estimand estimand,
                double horizon, std::size_t n = 50000);

std::string to_string(Scenario s);
std::string to_string(const CausalConfig& c);
Scenario scenario_from_string(const std::string& s);
CausalConfig causal_config_from_string(const std::string& s);

}  // namespace survhte
