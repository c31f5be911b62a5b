#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "survhte/survcurve.hpp"

namespace survhte {

enum class ImputeMethod { Margin, IpcwT, PseudoObs };

std::string to_string(ImputeMethod m);
ImputeMethod impute_method_from_string(const std::string& s);

// Surrogate event time for one unit. floored is true iff the raw formula
// output fell below the observed time and was raised to it.
struct ImputedOutcome {
  std::size_t unit_id = 0;
  double surrogate = 0.0;
  ImputeMethod method = ImputeMethod::Margin;
  bool floored = false;
};

struct ImputeOptions {
  bool floor_all = false;     // floor uncensored pseudo-values too
  bool per_arm_km = false;    // fit the survival curve separately per arm
  bool pseudo_replace_uncensored = false;  // substitute pseudo-values for
                                           // uncensored units as well
};

// Censored outcome sample. w is consulted only when per_arm_km is set.
struct CensoredSample {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<int> w;
};

// Censored units get the conditional residual mean of the pooled
// product-limit curve at their censoring time; uncensored units keep their
// observed times.
std::vector<ImputedOutcome> impute_margin(const CensoredSample& sample,
                                          const ImputeOptions& options = {});

// Censored units get the mean of the strictly later uncensored event times;
// when no such time exists the observed time is kept.
std::vector<ImputedOutcome> impute_ipcw_t(const CensoredSample& sample,
                                          const ImputeOptions& options = {});

// Jackknife pseudo-values N*theta - (N-1)*theta_loo of the product-limit
// mean, substituted for censored units (and optionally all units).
std::vector<ImputedOutcome> impute_pseudo_obs(const CensoredSample& sample,
                                              const ImputeOptions& options = {});

std::vector<ImputedOutcome> impute(ImputeMethod method, const CensoredSample& sample,
                                   const ImputeOptions& options = {});

}  // namespace survhte
