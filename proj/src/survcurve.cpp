#include "survhte/survcurve.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace survhte {

SurvivalCurve fit_km(std::span<const double> times, const std::vector<bool>& events) {
  std::vector<std::uint8_t> flags(events.begin(), events.end());
  return fit_km(times, std::span<const std::uint8_t>(flags));
}

SurvivalCurve fit_km(std::span<const double> times, std::span<const std::uint8_t> events) {
  if (times.empty()) throw std::invalid_argument("fit_km: empty input");
  if (times.size() != events.size())
    throw std::invalid_argument("fit_km: times/events length mismatch");

  const std::size_t n = times.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  SurvivalCurve curve;
  double survival = 1.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = times[order[i]];
    std::size_t deaths = 0;
    std::size_t ties = 0;
    while (i + ties < n && times[order[i + ties]] == t) {
      if (events[order[i + ties]]) ++deaths;
      ++ties;
    }
    const std::size_t at_risk = n - i;
    if (deaths > 0) {
      survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.grid.push_back(t);
      curve.probs.push_back(survival);
    }
    i += ties;
  }
  curve.t_max = times[order[n - 1]];
  if (curve.grid.empty()) {
    // all observations censored: S stays 1 through t_max
    curve.grid.push_back(curve.t_max);
    curve.probs.push_back(1.0);
  }
  return curve;
}

double eval_curve(const SurvivalCurve& curve, double t) {
  const auto it = std::upper_bound(curve.grid.begin(), curve.grid.end(), t);
  if (it == curve.grid.begin()) return 1.0;
  return curve.probs[static_cast<std::size_t>(it - curve.grid.begin()) - 1];
}

namespace {

// Area under the step curve on [a, b] with the plateau extended past the
// last grid point.
double step_area(const SurvivalCurve& curve, double a, double b) {
  if (b <= a) return 0.0;
  double area = 0.0;
  double prev_t = a;
  double prev_s = eval_curve(curve, a);
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    const double t = curve.grid[k];
    if (t <= a) continue;
    if (t >= b) break;
    area += prev_s * (t - prev_t);
    prev_t = t;
    prev_s = curve.probs[k];
  }
  area += prev_s * (b - prev_t);
  return area;
}

}  // namespace

double rmst(const SurvivalCurve& curve, double h) {
  if (h <= 0.0) throw std::invalid_argument("rmst: h must be > 0");
  return step_area(curve, 0.0, h);
}

double conditional_residual_mean(const SurvivalCurve& curve, double t0) {
  if (t0 < 0.0) throw std::invalid_argument("conditional_residual_mean: t0 must be >= 0");
  if (t0 >= curve.t_max) return t0;
  const double s0 = eval_curve(curve, t0);
  if (s0 <= 0.0) return t0;
  return t0 + step_area(curve, t0, curve.t_max) / s0;
}

}  // namespace survhte
