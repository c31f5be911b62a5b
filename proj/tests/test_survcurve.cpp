#include "survhte/survcurve.hpp"

#include <vector>

#include "doctest.h"

using namespace survhte;

namespace {

SurvivalCurve km(std::vector<double> times, std::vector<bool> events) {
  return fit_km(times, std::vector<bool>(events));
}

}  // namespace

TEST_CASE("km all events is the empirical survivor complement") {
  auto curve = km({1, 2, 3}, {true, true, true});
  CHECK(curve.grid == std::vector<double>{1, 2, 3});
  CHECK(eval_curve(curve, 1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(eval_curve(curve, 2.5) == doctest::Approx(1.0 / 3.0));
  CHECK(eval_curve(curve, 3.0) == doctest::Approx(0.0));
  CHECK(eval_curve(curve, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("km with one censoring keeps risk-set accounting") {
  auto curve = km({1, 2, 3}, {true, false, true});
  CHECK(eval_curve(curve, 1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(eval_curve(curve, 2.9) == doctest::Approx(2.0 / 3.0));
  CHECK(eval_curve(curve, 3.0) == doctest::Approx(0.0));
}

TEST_CASE("km ecdf equivalence without censoring") {
  std::vector<double> times{0.4, 1.7, 0.9, 2.2, 3.1, 0.1};
  auto curve = fit_km(times, std::vector<bool>(times.size(), true));
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double expected = 1.0 - static_cast<double>(k + 1) / sorted.size();
    CHECK(eval_curve(curve, sorted[k]) == doctest::Approx(expected));
  }
}

TEST_CASE("km rejects empty input") {
  CHECK_THROWS(fit_km(std::vector<double>{}, std::vector<bool>{}));
}

TEST_CASE("eval_curve step semantics") {
  SurvivalCurve curve{{1.0, 2.0}, {0.5, 0.25}, 2.0};
  CHECK(eval_curve(curve, 0.0) == doctest::Approx(1.0));
  CHECK(eval_curve(curve, 1.5) == doctest::Approx(0.5));
  CHECK(eval_curve(curve, 10.0) == doctest::Approx(0.25));
}

TEST_CASE("rmst hand examples") {
  SurvivalCurve ones{{0.0}, {1.0}, 0.0};
  CHECK(rmst(ones, 7.5) == doctest::Approx(7.5));

  SurvivalCurve unit_mass{{1.0}, {0.0}, 1.0};
  CHECK(rmst(unit_mass, 3.0) == doctest::Approx(1.0));

  SurvivalCurve steps{{1, 2, 3, 4}, {0.75, 0.5, 0.25, 0.0}, 4.0};
  CHECK(rmst(steps, 4.0) == doctest::Approx(2.5));
}

TEST_CASE("rmst is monotone in h and bounded by h") {
  auto curve = km({0.5, 1.2, 2.0, 2.5}, {true, false, true, true});
  double prev = 0.0;
  for (double h = 0.25; h <= 5.0; h += 0.25) {
    const double v = rmst(curve, h);
    CHECK(v >= prev - 1e-12);
    CHECK(v <= h + 1e-12);
    prev = v;
  }
}

TEST_CASE("conditional residual mean") {
  auto curve = km({1, 2, 3, 4}, {true, true, true, true});
  SUBCASE("t0=0 recovers the km mean") {
    CHECK(conditional_residual_mean(curve, 0.0) == doctest::Approx(rmst(curve, curve.t_max)));
  }
  SUBCASE("hand example at t0=2") {
    CHECK(conditional_residual_mean(curve, 2.0) == doctest::Approx(3.5));
  }
  SUBCASE("beyond the last event time") {
    CHECK(conditional_residual_mean(curve, 9.0) == doctest::Approx(9.0));
  }
}

TEST_CASE("fitted curves are non-increasing") {
  auto curve = km({3, 1, 4, 1, 5, 2, 6}, {true, false, true, true, false, true, true});
  double prev = 1.0;
  for (double p : curve.probs) {
    CHECK(p <= prev + 1e-12);
    prev = p;
  }
  double prev_eval = 1.0;
  for (double t = 0.0; t < 8.0; t += 0.1) {
    const double v = eval_curve(curve, t);
    CHECK(v <= prev_eval + 1e-12);
    prev_eval = v;
  }
}
