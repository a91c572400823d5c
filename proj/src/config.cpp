#include "wdlab/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "wdlab/errors.hpp"

namespace wdlab {

using nlohmann::ordered_json;
using Json = nlohmann::json;

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
  for (const char* k : keys) {
    if (!j.contains(k)) throw ConfigError(where + ": missing key '" + std::string(k) + "'");
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

std::string_view loss_name(LossKind k) {
  switch (k) {
    case LossKind::softmax_xent: return "softmax_xent";
    case LossKind::logistic_xent: return "logistic_xent";
    case LossKind::squared: return "squared";
  }
  return "?";
}

LossKind parse_loss(const std::string& s) {
  for (auto k : {LossKind::softmax_xent, LossKind::logistic_xent, LossKind::squared}) {
    if (loss_name(k) == s) return k;
  }
  throw ConfigError("unknown loss '" + s + "'");
}

std::string_view normalization_name(Normalization n) {
  return n == Normalization::none ? "none" : "non_affine";
}

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "non_affine") return Normalization::non_affine;
  throw ConfigError("unknown normalization '" + s + "'");
}

TaskSpec task_from(const Json& j) {
  const std::string w = "task";
  check_keys(j, {"kind", "n_train", "dim", "classes", "noise_std", "seed"}, w);
  TaskSpec t;
  t.kind = parse_task_kind(get<std::string>(j, "kind", w));
  t.n_train = get<Index>(j, "n_train", w);
  t.dim = get<Index>(j, "dim", w);
  t.classes = get<int>(j, "classes", w);
  t.noise_std = get<double>(j, "noise_std", w);
  t.seed = get<std::uint64_t>(j, "seed", w);
  return t;
}

ordered_json task_to(const TaskSpec& t) {
  return {{"kind", to_string(t.kind)}, {"n_train", t.n_train}, {"dim", t.dim},
          {"classes", t.classes},     {"noise_std", t.noise_std}, {"seed", t.seed}};
}

MLPSpec model_from(const Json& j) {
  const std::string w = "model";
  check_keys(j,
             {"layer_widths", "normalization", "skip_connections", "last_layer_fixed", "init_std", "norm_eps", "loss"},
             w);
  MLPSpec m;
  m.layer_widths = get<std::vector<Index>>(j, "layer_widths", w);
  m.normalization = parse_normalization(get<std::string>(j, "normalization", w));
  m.skip_connections = get<bool>(j, "skip_connections", w);
  m.last_layer_fixed = get<bool>(j, "last_layer_fixed", w);
  m.init_std = get<double>(j, "init_std", w);
  m.norm_eps = get<double>(j, "norm_eps", w);
  m.loss = parse_loss(get<std::string>(j, "loss", w));
  return m;
}

ordered_json model_to(const MLPSpec& m) {
  return {{"layer_widths", m.layer_widths},
          {"normalization", normalization_name(m.normalization)},
          {"skip_connections", m.skip_connections},
          {"last_layer_fixed", m.last_layer_fixed},
          {"init_std", m.init_std},
          {"norm_eps", m.norm_eps},
          {"loss", loss_name(m.loss)}};
}

OptimizerConfig optimizer_from(const Json& j) {
  const std::string w = "optimizer";
  check_keys(j, {"kind", "lambda_wd", "momentum", "beta1", "beta2", "eps", "decay_layernorm_params"}, w);
  OptimizerConfig o;
  o.kind = parse_optimizer_kind(get<std::string>(j, "kind", w));
  o.lambda_wd = get<double>(j, "lambda_wd", w);
  o.momentum = get<double>(j, "momentum", w);
  o.beta1 = get<double>(j, "beta1", w);
  o.beta2 = get<double>(j, "beta2", w);
  o.eps = get<double>(j, "eps", w);
  o.decay_layernorm_params = get<bool>(j, "decay_layernorm_params", w);
  return o;
}

ordered_json optimizer_to(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)}, {"lambda_wd", o.lambda_wd}, {"momentum", o.momentum},
          {"beta1", o.beta1},          {"beta2", o.beta2},         {"eps", o.eps},
          {"decay_layernorm_params", o.decay_layernorm_params}};
}

MixedPrecisionPolicy precision_from(const Json& j) {
  const std::string w = "precision";
  check_keys(j, {"compute_mode", "master_weights_full", "quantize_gradients"}, w);
  MixedPrecisionPolicy p;
  p.compute_mode = parse_numeric_mode(get<std::string>(j, "compute_mode", w));
  p.master_weights_full = get<bool>(j, "master_weights_full", w);
  p.quantize_gradients = get<bool>(j, "quantize_gradients", w);
  return p;
}

ordered_json precision_to(const MixedPrecisionPolicy& p) {
  return {{"compute_mode", to_string(p.compute_mode.kind)},
          {"master_weights_full", p.master_weights_full},
          {"quantize_gradients", p.quantize_gradients}};
}

Schedule schedule_from(const Json& j, std::int64_t total_steps, const std::string& w) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(w + ": schedule needs a 'kind'");
  const auto kind = parse_schedule_kind(get<std::string>(j, "kind", w));
  Schedule s;
  switch (kind) {
    case ScheduleKind::constant:
      check_keys(j, {"kind", "base_lr"}, w);
      s = Schedule::constant(get<double>(j, "base_lr", w), total_steps);
      break;
    case ScheduleKind::step_decay:
      check_keys(j, {"kind", "base_lr", "decay_step", "post_decay_lr"}, w);
      s = Schedule::step_decay(get<double>(j, "base_lr", w), get<std::int64_t>(j, "decay_step", w),
                               get<double>(j, "post_decay_lr", w), total_steps);
      break;
    case ScheduleKind::cosine_warmup:
      check_keys(j, {"kind", "base_lr", "warmup_steps", "floor_ratio"}, w);
      s = Schedule::cosine_warmup(get<double>(j, "base_lr", w), get<std::int64_t>(j, "warmup_steps", w),
                                  total_steps, get<double>(j, "floor_ratio", w));
      break;
  }
  return s;
}

ordered_json schedule_to(const Schedule& s) {
  ordered_json j{{"kind", to_string(s.kind)}, {"base_lr", s.base_lr}};
  if (s.kind == ScheduleKind::step_decay) {
    j["decay_step"] = s.decay_step;
    j["post_decay_lr"] = s.post_decay_lr;
  } else if (s.kind == ScheduleKind::cosine_warmup) {
    j["warmup_steps"] = s.warmup_steps;
    j["floor_ratio"] = s.floor_ratio;
  }
  return j;
}

ProbeOptions probe_from(const Json& j) {
  const std::string w = "probe";
  check_keys(j,
             {"trace_probes", "subset_size", "noise_scale", "stabilization_window", "stabilization_band",
              "divergence_factor", "divergence_persist", "ema_beta"},
             w);
  ProbeOptions p;
  p.trace_probes = get<int>(j, "trace_probes", w);
  p.subset_size = get<Index>(j, "subset_size", w);
  p.noise_scale = get<bool>(j, "noise_scale", w);
  p.stabilization_window = get<Index>(j, "stabilization_window", w);
  p.stabilization_band = get<double>(j, "stabilization_band", w);
  p.divergence_factor = get<double>(j, "divergence_factor", w);
  p.divergence_persist = get<Index>(j, "divergence_persist", w);
  p.ema_beta = get<double>(j, "ema_beta", w);
  return p;
}

ordered_json probe_to(const ProbeOptions& p) {
  return {{"trace_probes", p.trace_probes},
          {"subset_size", p.subset_size},
          {"noise_scale", p.noise_scale},
          {"stabilization_window", p.stabilization_window},
          {"stabilization_band", p.stabilization_band},
          {"divergence_factor", p.divergence_factor},
          {"divergence_persist", p.divergence_persist},
          {"ema_beta", p.ema_beta}};
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

std::int64_t RunConfig::total_steps() const {
  std::int64_t total = 0;
  for (const auto& p : phases) total += p.steps;
  return total;
}

void RunConfig::validate() const {
  if (phases.empty()) throw ConfigError("config: phases must be non-empty");
  for (const auto& p : phases) {
    if (p.steps < 1) throw ConfigError("config: every phase needs at least one step");
    if (p.schedule.total_steps != p.steps) throw ConfigError("config: phase schedule length differs from its steps");
    p.schedule.validate();
  }
  if (probes_every < 1) throw ConfigError("config: probes_every must be at least 1");
  if (snapshot_every < 0) throw ConfigError("config: snapshot_every must be non-negative");
  if (batch_size < 1) throw ConfigError("config: batch_size must be at least 1");
  if (finetune && (finetune->steps < 0 || !(finetune->lr > 0))) {
    throw ConfigError("config: finetune needs steps >= 0 and lr > 0");
  }
  if (probe.trace_probes < 0) throw ConfigError("config: trace_probes must be non-negative");
  if (probe.subset_size < 2) throw ConfigError("config: probe subset_size must be at least 2");
  if (probe.stabilization_window < 2) throw ConfigError("config: stabilization_window must be at least 2");
  if (!(probe.divergence_factor > 1) || probe.divergence_persist < 1) {
    throw ConfigError("config: divergence_factor must exceed 1 and divergence_persist be at least 1");
  }
  if (!(probe.ema_beta >= 0 && probe.ema_beta <= 1)) throw ConfigError("config: ema_beta must lie in [0, 1]");
  OptimizerConfig opt = optimizer;
  opt.lr_schedule = phases.front().schedule;
  opt.validate();
  if (task.kind == TaskKind::linreg && model.loss != LossKind::squared) {
    throw ConfigError("config: linreg needs the squared loss");
  }
  if (task.kind != TaskKind::linreg && model.loss == LossKind::squared) {
    throw ConfigError("config: the squared loss needs a linreg task");
  }
  if (model.layer_widths.empty() || model.layer_widths.front() != task.dim) {
    throw ConfigError("config: model input width must equal task dim");
  }
  if (model.loss == LossKind::softmax_xent && model.layer_widths.back() != task.classes) {
    throw ConfigError("config: softmax output width must equal the number of classes");
  }
  if (model.loss == LossKind::logistic_xent && task.classes != 2) {
    throw ConfigError("config: logistic loss needs a binary task");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  const Json j = parse_json(json_text, "config");
  const std::string w = "config";
  check_keys(j,
             {"task", "model", "optimizer", "precision", "phases", "probes_every", "snapshot_every", "finetune",
              "seed", "batch_size", "probe"},
             w);
  RunConfig c;
  c.task = task_from(j.at("task"));
  c.model = model_from(j.at("model"));
  c.optimizer = optimizer_from(j.at("optimizer"));
  c.precision = precision_from(j.at("precision"));
  if (!j.at("phases").is_array()) throw ConfigError("config: phases must be an array");
  for (std::size_t i = 0; i < j.at("phases").size(); ++i) {
    const auto& pj = j.at("phases")[i];
    const std::string pw = "phases[" + std::to_string(i) + "]";
    check_keys(pj, {"steps", "schedule"}, pw);
    Phase p;
    p.steps = get<std::int64_t>(pj, "steps", pw);
    p.schedule = schedule_from(pj.at("schedule"), p.steps, pw + ".schedule");
    c.phases.push_back(p);
  }
  c.probes_every = get<std::int64_t>(j, "probes_every", w);
  c.snapshot_every = get<std::int64_t>(j, "snapshot_every", w);
  if (!j.at("finetune").is_null()) {
    const auto& fj = j.at("finetune");
    check_keys(fj, {"steps", "lr"}, "finetune");
    c.finetune = FinetuneSpec{get<std::int64_t>(fj, "steps", "finetune"), get<double>(fj, "lr", "finetune")};
  }
  c.seed = get<std::uint64_t>(j, "seed", w);
  c.batch_size = get<Index>(j, "batch_size", w);
  c.probe = probe_from(j.at("probe"));
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

std::string dump_run_config(const RunConfig& c) {
  ordered_json j;
  j["task"] = task_to(c.task);
  j["model"] = model_to(c.model);
  j["optimizer"] = optimizer_to(c.optimizer);
  j["precision"] = precision_to(c.precision);
  j["phases"] = ordered_json::array();
  for (const auto& p : c.phases) j["phases"].push_back({{"steps", p.steps}, {"schedule", schedule_to(p.schedule)}});
  j["probes_every"] = c.probes_every;
  j["snapshot_every"] = c.snapshot_every;
  if (c.finetune) {
    j["finetune"] = {{"steps", c.finetune->steps}, {"lr", c.finetune->lr}};
  } else {
    j["finetune"] = nullptr;
  }
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["probe"] = probe_to(c.probe);
  return j.dump(2) + "\n";
}

RunConfig default_spiral_config() {
  RunConfig c;
  c.task = TaskSpec{TaskKind::spiral, 256, 2, 2, 0.05, 11};
  c.model.layer_widths = {2, 32, 32, 2};
  c.optimizer.kind = OptimizerKind::sgd;
  c.optimizer.lambda_wd = 5e-4;
  c.phases = {Phase{1000, Schedule::constant(0.5, 1000)}, Phase{200, Schedule::constant(0.05, 200)}};
  c.probes_every = 50;
  c.snapshot_every = 100;
  c.finetune = FinetuneSpec{300, 0.05};
  c.seed = 0;
  c.batch_size = 8;
  c.probe.trace_probes = 10;
  c.probe.subset_size = 256;
  return c;
}

RunConfig stress_config() {
  RunConfig c;
  c.task = TaskSpec{TaskKind::gauss_blobs, 256, 8, 4, 1.0, 5};
  c.model.layer_widths = {8, 32, 32, 32, 32, 32, 4};
  c.model.skip_connections = true;
  c.model.normalization = Normalization::none;
  c.optimizer.kind = OptimizerKind::sgd_decoupled_wd;
  c.precision = MixedPrecisionPolicy::mixed(NumericMode::bf16());
  c.phases = {Phase{300, Schedule::constant(0.1, 300)}};
  c.probes_every = 10;
  c.snapshot_every = 0;
  c.seed = 0;
  c.batch_size = 16;
  c.probe.noise_scale = false;
  c.probe.subset_size = 256;
  return c;
}

SaLabConfig parse_sa_lab_config(const std::string& json_text) {
  const Json j = parse_json(json_text, "sa-lab config");
  const std::string w = "sa-lab config";
  check_keys(j, {"problem", "schedule", "steps", "replicas", "seed", "demo_lambda"}, w);
  SaLabConfig c;
  c.steps = get<std::int64_t>(j, "steps", w);
  if (c.steps < 1) throw ConfigError(w + ": steps must be positive");
  c.replicas = get<int>(j, "replicas", w);
  if (c.replicas < 1) throw ConfigError(w + ": replicas must be positive");
  c.seed = get<std::uint64_t>(j, "seed", w);
  const auto& pj = j.at("problem");
  if (pj.is_string()) {
    if (pj.get<std::string>() != "default") throw ConfigError(w + ": problem must be an object or \"default\"");
    c.problem = default_quad_problem(c.seed);
  } else {
    check_keys(pj, {"spectrum", "w_star", "noise_var", "w0"}, "problem");
    c.problem.spectrum = get<std::vector<double>>(pj, "spectrum", "problem");
    const auto ws = get<std::vector<double>>(pj, "w_star", "problem");
    const auto w0 = get<std::vector<double>>(pj, "w0", "problem");
    c.problem.w_star = Eigen::Map<const FlatVector>(ws.data(), static_cast<Index>(ws.size()));
    c.problem.w0 = Eigen::Map<const FlatVector>(w0.data(), static_cast<Index>(w0.size()));
    c.problem.noise_var = get<double>(pj, "noise_var", "problem");
  }
  c.problem.validate();
  c.schedule = schedule_from(j.at("schedule"), c.steps, "schedule");
  c.schedule.validate();
  if (!j.at("demo_lambda").is_null()) c.demo_lambda = get<double>(j, "demo_lambda", w);
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace wdlab
