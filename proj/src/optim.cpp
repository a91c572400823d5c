#include "wdlab/optim.hpp"

#include <numbers>
#include <string>

namespace wdlab {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::step_decay: return "step_decay";
    case ScheduleKind::cosine_warmup: return "cosine_warmup";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "step_decay") return ScheduleKind::step_decay;
  if (name == "cosine_warmup") return ScheduleKind::cosine_warmup;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

Schedule Schedule::constant(double lr, std::int64_t total_steps) {
  Schedule s;
  s.kind = ScheduleKind::constant;
  s.base_lr = lr;
  s.total_steps = total_steps;
  s.post_decay_lr = lr;
  return s;
}

Schedule Schedule::step_decay(double lr, std::int64_t decay_step, double post_decay_lr, std::int64_t total_steps) {
  Schedule s = constant(lr, total_steps);
  s.kind = ScheduleKind::step_decay;
  s.decay_step = decay_step;
  s.post_decay_lr = post_decay_lr;
  return s;
}

Schedule Schedule::cosine_warmup(double lr, std::int64_t warmup_steps, std::int64_t total_steps, double floor_ratio) {
  Schedule s = constant(lr, total_steps);
  s.kind = ScheduleKind::cosine_warmup;
  s.warmup_steps = warmup_steps;
  s.floor_ratio = floor_ratio;
  return s;
}

void Schedule::validate() const {
  if (!(base_lr > 0)) throw ConfigError("schedule: base_lr must be positive");
  if (total_steps < 1) throw ConfigError("schedule: total_steps must be positive");
  switch (kind) {
    case ScheduleKind::constant:
      break;
    case ScheduleKind::step_decay:
      if (decay_step < 0) throw ConfigError("schedule: decay_step must be non-negative");
      if (!(post_decay_lr > 0)) throw ConfigError("schedule: post_decay_lr must be positive");
      break;
    case ScheduleKind::cosine_warmup:
      if (warmup_steps < 0 || warmup_steps >= total_steps) {
        throw ConfigError("schedule: warmup_steps must lie in [0, total_steps)");
      }
      if (!(floor_ratio > 0 && floor_ratio <= 1)) throw ConfigError("schedule: floor_ratio must lie in (0, 1]");
      break;
  }
}

double lr_at(const Schedule& schedule, std::int64_t t) {
  if (t < 0 || t >= schedule.total_steps) {
    throw DomainError("lr_at: step " + std::to_string(t) + " outside [0, " + std::to_string(schedule.total_steps) +
                      ")");
  }
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return schedule.base_lr;
    case ScheduleKind::step_decay:
      return t < schedule.decay_step ? schedule.base_lr : schedule.post_decay_lr;
    case ScheduleKind::cosine_warmup: {
      const double base = schedule.base_lr;
      const auto warmup = schedule.warmup_steps;
      if (t < warmup) {
        const double start = base / static_cast<double>(warmup);
        return start + (base - start) * static_cast<double>(t) / static_cast<double>(warmup);
      }
      const double progress =
          static_cast<double>(t - warmup) / static_cast<double>(schedule.total_steps - warmup);
      const double floor = schedule.floor_ratio * base;
      return floor + (base - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    }
  }
  return schedule.base_lr;
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::sgd_l2: return "sgd_l2";
    case OptimizerKind::sgd_decoupled_wd: return "sgd_decoupled_wd";
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::signgd: return "signgd";
    case OptimizerKind::signgd_wd: return "signgd_wd";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::sphere_sgd: return "sphere_sgd";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (auto k : {OptimizerKind::sgd, OptimizerKind::sgd_l2, OptimizerKind::sgd_decoupled_wd,
                 OptimizerKind::sgd_momentum, OptimizerKind::signgd, OptimizerKind::signgd_wd, OptimizerKind::adamw,
                 OptimizerKind::sphere_sgd}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown optimizer kind '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  lr_schedule.validate();
  if (!(lambda_wd >= 0)) throw ConfigError("optimizer: lambda_wd must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("optimizer: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(eps > 0)) throw ConfigError("optimizer: eps must be positive");
  if ((kind == OptimizerKind::signgd || kind == OptimizerKind::sphere_sgd) && lambda_wd != 0) {
    throw ConfigError("optimizer: kind " + std::string(to_string(kind)) + " has no weight-decay term");
  }
}

Optimizer::Optimizer(OptimizerConfig config, FlatVector decay_mask)
    : config_(std::move(config)), lambda_(config_.lambda_wd * decay_mask.array()) {
  config_.validate();
}

StepStatus Optimizer::step(FlatVector& w, const FlatVector& g, double lr) {
  if (w.size() != lambda_.size()) throw ShapeError("optimizer: parameter size does not match decay mask");
  if (!g.allFinite()) return {true};

  FlatVector next;
  switch (config_.kind) {
    case OptimizerKind::sgd:
    case OptimizerKind::sgd_l2:
    case OptimizerKind::sgd_decoupled_wd:
      next = step_sgd(w, g, lr, lambda_);
      ++state_.step_count;
      break;
    case OptimizerKind::sgd_momentum:
      next = step_momentum(w, g, state_, lr, lambda_, config_.momentum);
      break;
    case OptimizerKind::signgd:
    case OptimizerKind::signgd_wd:
      next = step_signgd(w, g, lr, lambda_);
      ++state_.step_count;
      break;
    case OptimizerKind::adamw: {
      OptState trial = state_;
      next = step_adamw(w, g, trial, lr, lambda_, config_.beta1, config_.beta2, config_.eps);
      if (!trial.first_moment.allFinite() || !trial.second_moment.allFinite()) return {true};
      state_ = std::move(trial);
      break;
    }
    case OptimizerKind::sphere_sgd:
      next = step_sphere(w, g, lr);
      ++state_.step_count;
      break;
  }
  if (!next.allFinite()) return {true};
  w = std::move(next);
  return {};
}

}  // namespace wdlab
