#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "wdlab/errors.hpp"
#include "wdlab/sa_lab.hpp"

using namespace wdlab;

namespace {

QuadProblem one_dim(double s, double noise_var, double w0, double w_star) {
  QuadProblem p;
  p.spectrum = {s};
  p.noise_var = noise_var;
  p.w0 = FlatVector::Constant(1, w0);
  p.w_star = FlatVector::Constant(1, w_star);
  return p;
}

}  // namespace

TEST_CASE("default problem") {
  const QuadProblem p = default_quad_problem(0);
  CHECK(p.dim() == 10);
  CHECK(p.mu() == doctest::Approx(0.1));
  CHECK(p.max_curvature() == doctest::Approx(1.0));
  CHECK(p.noise_var == 1.0);
  CHECK(p.w0 == FlatVector::Zero(10));
  for (Index i = 1; i < 10; ++i) CHECK(p.spectrum[i] / p.spectrum[i - 1] == doctest::Approx(std::pow(10.0, 1.0 / 9)));
  CHECK(default_quad_problem(3).w_star == default_quad_problem(3).w_star);

  QuadProblem bad = p;
  bad.spectrum[2] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.w0 = FlatVector::Zero(3);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("noiseless recursion is plain gradient descent") {
  QuadProblem p = default_quad_problem(1);
  p.noise_var = 0.0;
  const auto lrs = schedule_lrs(Schedule::cosine_warmup(0.8, 5, 60, 0.1), 60);
  const RiskCurve r = exact_risk(p, lrs);
  CHECK(r.steps.size() == 61);
  for (std::size_t t = 0; t <= 60; t += 6) {
    double expected = 0;
    for (Index i = 0; i < p.dim(); ++i) {
      double factor = 1;
      for (std::size_t k = 0; k < t; ++k) factor *= (1 - lrs[k] * p.spectrum[i]) * (1 - lrs[k] * p.spectrum[i]);
      expected += factor * std::pow(p.w0(i) - p.w_star(i), 2);
    }
    CHECK(r.expected_error[t] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.variance_part[t] == 0.0);
  }
  const EmpiricalRisk sim = simulate_sgd(p, lrs, 3, 5);
  for (std::size_t t = 0; t <= 60; ++t) CHECK(std::abs(sim.mean[t] - r.expected_error[t]) <= 1e-12 * (1 + r.expected_error[t]));
}

TEST_CASE("stationary variance") {
  CHECK(stationary_variance(1.0, 1.0, 0.1) == doctest::Approx(0.1 / 1.9).epsilon(1e-15));
  CHECK(stationary_variance(1.0, 1.0, 0.1) == doctest::Approx(0.052632).epsilon(1e-5));
  const double ratio = stationary_variance(1.0, 1.0, 0.02) / stationary_variance(1.0, 1.0, 0.01);
  CHECK(ratio >= 1.9);
  CHECK(ratio <= 2.1);

  const QuadProblem p = one_dim(1.0, 1.0, 0.0, 0.0);
  const RiskCurve r = exact_risk(p, Schedule::constant(0.1, 400), 400);
  CHECK(r.variance_part.back() == doctest::Approx(0.1 / 1.9).epsilon(1e-12));

  const auto est = simulate_stationary_variance(1.0, 1.0, 0.1, 500, 100, 2000, 3);
  CHECK(std::abs(est.mean - 0.1 / 1.9) <= 3 * est.std_error);
}

TEST_CASE("recursion invariants") {
  const QuadProblem p = default_quad_problem(2);
  for (double lr : {0.05, 0.3, 1.0, 1.5}) {
    const RiskCurve r = exact_risk(p, Schedule::constant(lr, 300), 300);
    for (std::size_t t = 0; t < r.steps.size(); ++t) {
      CHECK(r.expected_error[t] == r.bias_part[t] + r.variance_part[t]);
      if (t > 0) CHECK(r.variance_part[t] >= r.variance_part[t - 1]);
    }
    double floor = 0;
    for (double s : p.spectrum) floor += stationary_variance(s, p.noise_var, lr);
    CHECK(r.variance_part.back() <= floor * (1 + 1e-12));
  }
  // larger lr contracts the bias faster while lr * max(s) <= 1
  const RiskCurve slow = exact_risk(p, Schedule::constant(0.2, 200), 200);
  const RiskCurve fast = exact_risk(p, Schedule::constant(0.9, 200), 200);
  for (std::size_t t = 0; t < slow.steps.size(); ++t) CHECK(fast.bias_part[t] <= slow.bias_part[t]);

  CHECK_THROWS_AS(exact_risk(p, Schedule::constant(2.0, 10), 10), DomainError);
}

TEST_CASE("upper bound") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const QuadProblem p = default_quad_problem(seed);
    for (const Schedule& s : {Schedule::constant(0.5, 400), Schedule::cosine_warmup(1.2, 20, 400, 0.1),
                              Schedule::step_decay(1.0, 200, 0.05, 400)}) {
      const auto lrs = schedule_lrs(s, 400);
      REQUIRE(upper_bound_applies(p, lrs));
      const RiskCurve r = exact_risk(p, lrs);
      const auto bound = risk_upper_bound(p, lrs);
      for (std::size_t t = 0; t < bound.size(); ++t) CHECK(r.expected_error[t] <= bound[t]);
    }
  }
  CHECK_FALSE(upper_bound_applies(default_quad_problem(0), std::vector<double>{1.9}));
}

TEST_CASE("Monte-Carlo agrees with the recursion") {
  const QuadProblem p = default_quad_problem(0);
  const auto lrs = schedule_lrs(Schedule::constant(0.5, 100), 100);
  const RiskCurve exact = exact_risk(p, lrs);
  const EmpiricalRisk sim = simulate_sgd(p, lrs, 4000, 9);
  for (std::size_t t : {25u, 50u, 100u}) CHECK(std::abs(sim.mean[t] - exact.expected_error[t]) <= 3 * sim.std_error[t]);

  // standard error shrinks like 1/sqrt(replicas)
  const EmpiricalRisk few = simulate_sgd(p, lrs, 100, 1);
  const EmpiricalRisk many = simulate_sgd(p, lrs, 10000, 1);
  const double ratio = few.std_error.back() / many.std_error.back();
  CHECK(ratio >= 10.0 / 2);
  CHECK(ratio <= 10.0 * 2);
  CHECK(simulate_sgd(p, lrs, 1, 1).replicas == 1);
  CHECK_THROWS(simulate_sgd(p, lrs, 0, 1));
}

TEST_CASE("effective-lr equivalence demo") {
  const QuadProblem p = default_quad_problem(0);
  const Schedule s = Schedule::cosine_warmup(0.3, 10, 500, 0.1);

  const EquivalenceReport none = effective_lr_equivalence_demo(p, s, 0.0, 500);
  CHECK(none.lr_a == none.lr_b);
  CHECK(none.a.expected_error == none.b.expected_error);
  // with nothing to match, the matched schedule is the base one
  for (std::size_t t = 0; t < none.lr_c.size(); ++t) CHECK(none.lr_c[t] == doctest::Approx(none.lr_b[t]).epsilon(1e-12));
  CHECK(none.terminal_c == doctest::Approx(none.terminal_a).epsilon(1e-10));

  const EquivalenceReport r = effective_lr_equivalence_demo(p, s, 0.1, 500);
  CHECK(r.lr_c.back() == doctest::Approx(r.lr_a.back()).epsilon(1e-9));
  CHECK(r.summary().rfind("illustrative", 0) == 0);
  REQUIRE(r.contract_applies);
  CHECK(std::abs(r.terminal_a - r.terminal_c) < std::abs(r.terminal_a - r.terminal_b));
  CHECK(r.contract_holds);
}

TEST_CASE("risk csv") {
  const QuadProblem p = default_quad_problem(0);
  const RiskCurve exact = exact_risk(p, Schedule::constant(0.1, 3), 3);
  std::ostringstream bare;
  write_risk_csv(bare, exact);
  const std::string text = bare.str();
  CHECK(text.rfind("step,exact_total,bias,variance,empirical_mean,empirical_stderr\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  const EmpiricalRisk sim = simulate_sgd(p, Schedule::constant(0.1, 3), 3, 10, 1);
  std::ostringstream full;
  write_risk_csv(full, exact, &sim);
  CHECK(full.str() != text);
}
