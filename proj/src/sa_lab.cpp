#include "wdlab/sa_lab.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "wdlab/errors.hpp"

namespace wdlab {

double QuadProblem::mu() const { return *std::min_element(spectrum.begin(), spectrum.end()); }

double QuadProblem::max_curvature() const { return *std::max_element(spectrum.begin(), spectrum.end()); }

void QuadProblem::validate() const {
  if (spectrum.empty()) throw ConfigError("quad problem: empty spectrum");
  for (double s : spectrum) {
    if (!(s > 0) || !std::isfinite(s)) throw ConfigError("quad problem: eigenvalues must be positive and finite");
  }
  if (w_star.size() != dim() || w0.size() != dim()) {
    throw ConfigError("quad problem: w_star and w0 must have one entry per eigenvalue");
  }
  if (!(noise_var >= 0)) throw ConfigError("quad problem: noise_var must be non-negative");
}

QuadProblem default_quad_problem(std::uint64_t seed) {
  constexpr Index dim = 10;
  QuadProblem p;
  for (Index i = 0; i < dim; ++i) p.spectrum.push_back(std::pow(10.0, -1.0 + static_cast<double>(i) / (dim - 1)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  p.w_star.resize(dim);
  for (Index i = 0; i < dim; ++i) p.w_star[i] = normal(rng);
  p.w0 = FlatVector::Zero(dim);
  p.noise_var = 1.0;
  return p;
}

std::vector<double> schedule_lrs(const Schedule& schedule, std::int64_t T) {
  if (T < 0) throw DomainError("schedule_lrs: negative horizon");
  std::vector<double> lrs(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) lrs[static_cast<std::size_t>(t)] = lr_at(schedule, t);
  return lrs;
}

namespace {

void check_stable(const QuadProblem& problem, std::span<const double> lrs) {
  const double s_max = problem.max_curvature();
  for (std::size_t t = 0; t < lrs.size(); ++t) {
    if (!(lrs[t] > 0) || !(lrs[t] * s_max < 2)) {
      throw DomainError("sa-lab: lr " + std::to_string(lrs[t]) + " at step " + std::to_string(t) +
                        " outside the stable range (0, 2 / max eigenvalue)");
    }
  }
}

}  // namespace

RiskCurve exact_risk(const QuadProblem& problem, std::span<const double> lrs) {
  problem.validate();
  check_stable(problem, lrs);
  const Index d = problem.dim();
  std::vector<double> bias(static_cast<std::size_t>(d));
  std::vector<double> var(static_cast<std::size_t>(d), 0.0);
  for (Index i = 0; i < d; ++i) {
    const double delta = problem.w0[i] - problem.w_star[i];
    bias[static_cast<std::size_t>(i)] = delta * delta;
  }
  RiskCurve curve;
  auto record = [&](std::int64_t t) {
    double b = 0.0;
    double v = 0.0;
    for (std::size_t i = 0; i < bias.size(); ++i) {
      b += bias[i];
      v += var[i];
    }
    curve.steps.push_back(t);
    curve.bias_part.push_back(b);
    curve.variance_part.push_back(v);
    curve.expected_error.push_back(b + v);
  };
  record(0);
  for (std::size_t t = 0; t < lrs.size(); ++t) {
    const double lr = lrs[t];
    for (std::size_t i = 0; i < bias.size(); ++i) {
      const double a = (1 - lr * problem.spectrum[i]) * (1 - lr * problem.spectrum[i]);
      bias[i] *= a;
      var[i] = a * var[i] + lr * lr * problem.noise_var;
    }
    record(static_cast<std::int64_t>(t) + 1);
  }
  return curve;
}

RiskCurve exact_risk(const QuadProblem& problem, const Schedule& schedule, std::int64_t T) {
  const auto lrs = schedule_lrs(schedule, T);
  return exact_risk(problem, lrs);
}

bool upper_bound_applies(const QuadProblem& problem, std::span<const double> lrs) {
  const double reach = problem.mu() + problem.max_curvature();
  return std::all_of(lrs.begin(), lrs.end(), [&](double lr) { return lr * reach <= 2; });
}

std::vector<double> risk_upper_bound(const QuadProblem& problem, std::span<const double> lrs) {
  problem.validate();
  check_stable(problem, lrs);
  const double mu = problem.mu();
  const double lr_max = lrs.empty() ? 0.0 : *std::max_element(lrs.begin(), lrs.end());
  const double floor =
      lr_max * problem.noise_var * static_cast<double>(problem.dim()) / (mu * (2 - lr_max * problem.max_curvature()));
  double contraction = (problem.w0 - problem.w_star).squaredNorm();
  std::vector<double> bound{contraction + floor};
  for (double lr : lrs) {
    contraction *= (1 - lr * mu) * (1 - lr * mu);
    bound.push_back(contraction + floor);
  }
  return bound;
}

double stationary_variance(double s, double noise_var, double lr) {
  if (!(s > 0) || !(lr > 0) || !(lr * s < 2)) throw DomainError("stationary_variance: need 0 < lr s < 2");
  return lr * noise_var / (s * (2 - lr * s));
}

EmpiricalRisk simulate_sgd(const QuadProblem& problem, std::span<const double> lrs, int replicas,
                           std::uint64_t seed) {
  problem.validate();
  if (replicas < 1) throw DomainError("simulate_sgd: need at least one replica");
  const Index d = problem.dim();
  const auto T = lrs.size();
  const Eigen::Map<const Eigen::ArrayXd> s(problem.spectrum.data(), d);
  const double sigma = std::sqrt(problem.noise_var);

  std::vector<double> sum(T + 1, 0.0);
  std::vector<double> sum_sq(T + 1, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::ArrayXd noise(d);
  for (int r = 0; r < replicas; ++r) {
    Eigen::ArrayXd w = problem.w0.array();
    auto accumulate = [&](std::size_t t) {
      const double e = (w - problem.w_star.array()).square().sum();
      sum[t] += e;
      sum_sq[t] += e * e;
    };
    accumulate(0);
    for (std::size_t t = 0; t < T; ++t) {
      if (sigma > 0) {
        for (Index i = 0; i < d; ++i) noise[i] = sigma * normal(rng);
        w -= lrs[t] * (s * (w - problem.w_star.array()) + noise);
      } else {
        w -= lrs[t] * (s * (w - problem.w_star.array()));
      }
      accumulate(t + 1);
    }
  }

  EmpiricalRisk out;
  out.replicas = replicas;
  const double n = replicas;
  for (std::size_t t = 0; t <= T; ++t) {
    const double mean = sum[t] / n;
    const double var = replicas > 1 ? std::max(0.0, (sum_sq[t] - n * mean * mean) / (n - 1)) : 0.0;
    out.steps.push_back(static_cast<std::int64_t>(t));
    out.mean.push_back(mean);
    out.std_error.push_back(std::sqrt(var / n));
  }
  return out;
}

EmpiricalRisk simulate_sgd(const QuadProblem& problem, const Schedule& schedule, std::int64_t T, int replicas,
                           std::uint64_t seed) {
  const auto lrs = schedule_lrs(schedule, T);
  return simulate_sgd(problem, lrs, replicas, seed);
}

StationaryEstimate simulate_stationary_variance(double s, double noise_var, double lr, int replicas,
                                                std::int64_t burn_in, std::int64_t tail_steps, std::uint64_t seed) {
  if (replicas < 2) throw DomainError("simulate_stationary_variance: need at least two replicas");
  if (tail_steps < 1 || burn_in < 0) throw DomainError("simulate_stationary_variance: bad step counts");
  stationary_variance(s, noise_var, lr);  // range check
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_var));
  const double a = 1 - lr * s;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int r = 0; r < replicas; ++r) {
    double e = 0.0;
    for (std::int64_t t = 0; t < burn_in; ++t) e = a * e - lr * normal(rng);
    double acc = 0.0;
    for (std::int64_t t = 0; t < tail_steps; ++t) {
      e = a * e - lr * normal(rng);
      acc += e * e;
    }
    const double m = acc / static_cast<double>(tail_steps);
    sum += m;
    sum_sq += m * m;
  }
  const double n = replicas;
  StationaryEstimate out;
  out.mean = sum / n;
  out.std_error = std::sqrt(std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1)) / n);
  return out;
}

EquivalenceReport effective_lr_equivalence_demo(const QuadProblem& problem, const Schedule& schedule, double lambda,
                                                std::int64_t T) {
  problem.validate();
  if (!(lambda >= 0)) throw DomainError("equivalence demo: lambda must be non-negative");
  if (T < 1) throw DomainError("equivalence demo: need at least one step");
  EquivalenceReport rep;
  rep.lr_b = schedule_lrs(schedule, T);

  const double drive = problem.noise_var * static_cast<double>(problem.dim());
  double n0 = problem.w0.squaredNorm();
  if (!(n0 > 0)) n0 = 1.0;
  double n_plain = n0;
  double n_decay = n0;
  rep.lr_a.reserve(rep.lr_b.size());
  for (double lr : rep.lr_b) {
    const double shrink = 1 - lr * lambda;
    if (!(shrink > 0)) throw DomainError("equivalence demo: lr * lambda must be below 1");
    rep.lr_a.push_back(lr * std::sqrt(n_plain / n_decay) / shrink);
    n_plain += lr * lr * drive;
    n_decay = shrink * shrink * n_decay + lr * lr * drive;
  }

  const double target = rep.lr_a.back();
  const double last_b = rep.lr_b.back();
  if (schedule.kind == ScheduleKind::cosine_warmup && T == schedule.total_steps && T - 1 >= schedule.warmup_steps) {
    // Same warmup and base, floor chosen so that the last applied lr hits target.
    const double progress = static_cast<double>(T - 1 - schedule.warmup_steps) /
                            static_cast<double>(schedule.total_steps - schedule.warmup_steps);
    const double c = 0.5 * (1 + std::cos(std::numbers::pi * progress));
    const double floor_ratio = (target / schedule.base_lr - c) / (1 - c);
    Schedule matched = schedule;
    matched.floor_ratio = floor_ratio;
    rep.lr_c.reserve(rep.lr_b.size());
    for (std::int64_t t = 0; t < T; ++t) rep.lr_c.push_back(lr_at(matched, t));
    rep.lr_c.back() = target;
  } else {
    for (double lr : rep.lr_b) rep.lr_c.push_back(lr * target / last_b);
  }

  rep.a = exact_risk(problem, rep.lr_a);
  rep.b = exact_risk(problem, rep.lr_b);
  rep.c = exact_risk(problem, rep.lr_c);
  rep.terminal_a = rep.a.expected_error.back();
  rep.terminal_b = rep.b.expected_error.back();
  rep.terminal_c = rep.c.expected_error.back();
  rep.contract_applies = target >= 1.1 * last_b;
  rep.contract_holds =
      !rep.contract_applies || std::abs(rep.terminal_a - rep.terminal_c) < std::abs(rep.terminal_a - rep.terminal_b);
  return rep;
}

std::string EquivalenceReport::summary() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "illustrative: weight decay folded into an effective lr on a quadratic (not scale-invariant)\n";
  os << "terminal lr    a=" << lr_a.back() << " b=" << lr_b.back() << " c=" << lr_c.back() << '\n';
  os << "terminal risk  a=" << terminal_a << " b=" << terminal_b << " c=" << terminal_c << '\n';
  os << "|a-c| < |a-b|: " << (std::abs(terminal_a - terminal_c) < std::abs(terminal_a - terminal_b) ? "yes" : "no")
     << (contract_applies ? "" : " (not required: terminal lr gap below 10%)") << '\n';
  return os.str();
}

void write_risk_csv(std::ostream& os, const RiskCurve& exact, const EmpiricalRisk* empirical) {
  if (empirical && empirical->steps.size() != exact.steps.size()) {
    throw ShapeError("write_risk_csv: exact and empirical curves differ in length");
  }
  os << "step,exact_total,bias,variance,empirical_mean,empirical_stderr\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < exact.steps.size(); ++i) {
    line.str("");
    line << exact.steps[i] << ',' << exact.expected_error[i] << ',' << exact.bias_part[i] << ','
         << exact.variance_part[i] << ',';
    if (empirical) line << empirical->mean[i] << ',' << empirical->std_error[i];
    else line << ',';
    os << line.str() << '\n';
  }
}

}  // namespace wdlab
