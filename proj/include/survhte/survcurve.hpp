#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace survhte {

// Right-continuous step function S(t): value at t is probs[k] for the last
// grid[k] <= t, and 1 for t before grid[0]. t_max records the largest
// observed time backing the curve; fit_km sets it past the last event time
// when the data end in a censored plateau.
struct SurvivalCurve {
  std::vector<double> grid;   // strictly increasing times >= 0
  std::vector<double> probs;  // non-increasing, in [0,1]
  double t_max = 0.0;
};

// Product-limit estimator. Tied events at a timestamp are processed before
// tied censorings (standard KM convention).
SurvivalCurve fit_km(std::span<const double> times, std::span<const std::uint8_t> events);

// Convenience for bit-packed event vectors.
SurvivalCurve fit_km(std::span<const double> times, const std::vector<bool>& events);

double eval_curve(const SurvivalCurve& curve, double t);

// Exact area under the step curve on [0, h]; the plateau after the last
// grid point extends to h.
double rmst(const SurvivalCurve& curve, double h);

// t0 + area(curve on [t0, t_max]) / S(t0). The curve is treated as 0 beyond
// t_max. Returns t0 when S(t0) = 0.
double conditional_residual_mean(const SurvivalCurve& curve, double t0);

}  // namespace survhte
