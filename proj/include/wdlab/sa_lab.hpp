#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wdlab/optim.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

/// Diagonal quadratic f(w) = 1/2 sum_i s_i (w_i - w*_i)^2 observed through
/// gradients with additive isotropic Gaussian noise of variance noise_var
/// per coordinate.
struct QuadProblem {
  std::vector<double> spectrum;
  FlatVector w_star;
  double noise_var = 0.0;
  FlatVector w0;

  Index dim() const { return static_cast<Index>(spectrum.size()); }
  double mu() const;
  double max_curvature() const;
  /// Throws ConfigError on a non-positive eigenvalue or mismatched sizes.
  void validate() const;
};

/// dim 10, spectrum log-spaced on [0.1, 1], noise_var 1, w* ~ N(0, I) from
/// `seed`, w0 = 0.
QuadProblem default_quad_problem(std::uint64_t seed = 0);

/// Rows for steps 0..T. expected_error = bias_part + variance_part.
struct RiskCurve {
  std::vector<std::int64_t> steps;
  std::vector<double> expected_error;
  std::vector<double> bias_part;
  std::vector<double> variance_part;
};

/// Learning rates lr_at(schedule, t) for t < T.
std::vector<double> schedule_lrs(const Schedule& schedule, std::int64_t T);

/// Exact mean squared distance to w* of SGD driven by `lrs`, one entry per
/// step. Throws DomainError if some lr * max(spectrum) >= 2.
RiskCurve exact_risk(const QuadProblem& problem, std::span<const double> lrs);
RiskCurve exact_risk(const QuadProblem& problem, const Schedule& schedule, std::int64_t T);

/// (prod_k (1 - lr_k mu)^2) |w0 - w*|^2 + max(lr) noise_var dim / (mu (2 - max(lr) max(s))),
/// evaluated at every step of a curve over `lrs`.
std::vector<double> risk_upper_bound(const QuadProblem& problem, std::span<const double> lrs);

/// The bound above holds whenever lr (mu + max(s)) <= 2 at every step.
bool upper_bound_applies(const QuadProblem& problem, std::span<const double> lrs);

/// Per-direction limit lr sigma^2 / (s (2 - lr s)) of the variance under a
/// constant lr.
double stationary_variance(double s, double noise_var, double lr);

struct EmpiricalRisk {
  std::vector<std::int64_t> steps;
  std::vector<double> mean;
  std::vector<double> std_error;
  int replicas = 0;
};

/// Monte-Carlo estimate of E|w_t - w*|^2 over independent SGD replicas.
EmpiricalRisk simulate_sgd(const QuadProblem& problem, std::span<const double> lrs, int replicas,
                           std::uint64_t seed);
EmpiricalRisk simulate_sgd(const QuadProblem& problem, const Schedule& schedule, std::int64_t T, int replicas,
                           std::uint64_t seed);

struct StationaryEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Stationary E(w - w*)^2 of one direction with curvature s, starting at w*:
/// each replica averages its squared error over `tail_steps` after
/// `burn_in`, the standard error is taken across replicas.
StationaryEstimate simulate_stationary_variance(double s, double noise_var, double lr, int replicas,
                                                std::int64_t burn_in, std::int64_t tail_steps, std::uint64_t seed);

struct EquivalenceReport {
  std::vector<double> lr_a;  // effective lr with weight decay folded in
  std::vector<double> lr_b;  // base schedule
  std::vector<double> lr_c;  // base shape, terminal lr matched to lr_a
  RiskCurve a;
  RiskCurve b;
  RiskCurve c;
  double terminal_a = 0.0;
  double terminal_b = 0.0;
  double terminal_c = 0.0;
  bool contract_applies = false;  // terminal lr_a >= 1.1 terminal lr_b
  bool contract_holds = true;

  std::string summary() const;
};

/// Weight decay read as a larger learning rate. The shrink is folded into an
/// effective step size through a surrogate norm recursion
/// n^2 <- (1 - lr lambda)^2 n^2 + lr^2 noise_var dim, giving
/// lr_a = lr (n_0 / n_lambda) / (1 - lr lambda), with n_0 the same recursion
/// at lambda = 0. The quadratic is not scale-invariant, so this is an
/// illustration only.
EquivalenceReport effective_lr_equivalence_demo(const QuadProblem& problem, const Schedule& schedule, double lambda,
                                                std::int64_t T);

/// step,exact_total,bias,variance,empirical_mean,empirical_stderr; the
/// empirical columns are left empty when `empirical` is null.
void write_risk_csv(std::ostream& os, const RiskCurve& exact, const EmpiricalRisk* empirical = nullptr);

}  // namespace wdlab
