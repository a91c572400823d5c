#include "wdlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "wdlab/autodiff.hpp"
#include "wdlab/errors.hpp"
#include "wdlab/models.hpp"

namespace wdlab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Json = nlohmann::json;

namespace {

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t salt, std::int64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kBatchSalt = 1;
constexpr std::uint64_t kTraceSalt = 2;
constexpr std::uint64_t kFinetuneSalt = 3;

bool sphere_mode(const RunConfig& c) { return c.optimizer.kind == OptimizerKind::sphere_sgd; }

struct Context {
  Dataset data;
  MlpModel model;
  ParamSet initial;
  DataBatch subset;
  FlatVector mask;    // 1 where weight decay applies
  FlatVector lambda;  // lambda_wd * mask
};

Context make_context(const RunConfig& config) {
  config.validate();
  Dataset data = generate(config.task);
  BuiltMlp built = build_mlp(config.model, config.seed);
  if (sphere_mode(config)) built.params.assign(project_sphere(built.params.flatten()));
  const Index m = std::min<Index>(config.probe.subset_size, data.train.size());
  std::vector<Index> head(static_cast<std::size_t>(m));
  std::iota(head.begin(), head.end(), Index{0});
  DataBatch subset = data.train.subset(head);
  FlatVector mask = built.params.decay_mask(config.optimizer.decay_layernorm_params);
  FlatVector lambda = config.optimizer.lambda_wd * mask;
  return {std::move(data), std::move(built.model), std::move(built.params), std::move(subset), std::move(mask),
          std::move(lambda)};
}

double test_metric(const Context& ctx, const ParamSet& params) {
  const DataBatch& test = ctx.data.test;
  const RowMatrix out = evaluate_outputs(ctx.model, params, test.inputs);
  if (!test.is_classification()) return (out - test.targets).squaredNorm() / static_cast<double>(test.size());
  Index wrong = 0;
  for (Index i = 0; i < test.size(); ++i) {
    int predicted = 0;
    if (out.cols() == 1) {
      predicted = out(i, 0) > 0 ? 1 : 0;
    } else {
      Index arg = 0;
      out.row(i).maxCoeff(&arg);
      predicted = static_cast<int>(arg);
    }
    if (predicted != test.labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

DataBatch sample_batch(const RunConfig& config, const DataBatch& train, std::int64_t step) {
  auto rng = stream_for(config.seed, kBatchSalt, step);
  std::uniform_int_distribution<Index> pick(0, train.size() - 1);
  std::vector<Index> idx(static_cast<std::size_t>(config.batch_size));
  for (auto& i : idx) i = pick(rng);
  return train.subset(idx);
}

struct Schedules {
  std::vector<std::int64_t> starts;

  explicit Schedules(const RunConfig& c) {
    std::int64_t s = 0;
    for (const auto& p : c.phases) {
      starts.push_back(s);
      s += p.steps;
    }
  }
  std::size_t phase_of(std::int64_t t) const {
    auto it = std::upper_bound(starts.begin(), starts.end(), t);
    return static_cast<std::size_t>(it - starts.begin()) - 1;
  }
};

double lr_for(const RunConfig& c, const Schedules& s, std::int64_t t) {
  const auto p = s.phase_of(std::min(t, c.total_steps() - 1));
  const auto local = std::min(t - s.starts[p], c.phases[p].steps - 1);
  return lr_at(c.phases[p].schedule, local);
}

ProbeRecord measure(const RunConfig& config, const Context& ctx, const ParamSet& params, std::int64_t step,
                    double lr) {
  ProbeRecord r;
  r.step = step;
  const auto lg = loss_and_gradient(ctx.model, params, ctx.data.train, config.precision);
  r.train_loss = lg.loss;
  const FlatVector w = params.flatten();
  r.param_norm = w.norm();
  r.reg_loss = r.train_loss + 0.5 * (ctx.lambda.array() * w.array().square()).sum();
  r.grad_norm = lg.finite ? lg.grad.norm() : NAN;
  r.test_metric = test_metric(ctx, params);
  if (config.probe.noise_scale) r.noise_scale = noise_scale(ctx.model, params, ctx.subset);
  const double lambda = config.optimizer.lambda_wd;
  r.eff_lr = (lr * lambda < 1 && r.param_norm > 0) ? effective_lr(lr, lambda, r.param_norm) : NAN;
  if (config.probe.trace_probes > 0) {
    const auto seed = stream_for(config.seed, kTraceSalt, step)();
    const auto t = hutchinson_trace(ctx.model, params, ctx.subset, config.probe.trace_probes, seed);
    r.trace_estimate = t.estimate;
    r.trace_stderr = t.std_error;
  }
  return r;
}

struct LoopState {
  std::int64_t step = 0;
  ParamSet params;
  OptState opt_state;
  AveragerState averager;
  std::vector<ProbeRecord> records;
  bool observe_first = true;
};

RunRecord train_loop(const RunConfig& config, Context ctx, LoopState st) {
  const Schedules schedules(config);
  const std::int64_t total = config.total_steps();
  OptimizerConfig opt_config = config.optimizer;
  opt_config.lr_schedule = config.phases.front().schedule;
  Optimizer opt(opt_config, ctx.mask);
  opt.set_state(st.opt_state);
  const std::int64_t tail_start = config.phases.size() > 1 ? schedules.starts.back() : -1;

  RunRecord out;
  out.config = config;
  out.records = std::move(st.records);
  std::vector<double> history;
  for (const auto& r : out.records) history.push_back(r.train_loss);

  ParamSet params = std::move(st.params);
  AveragerState averager = std::move(st.averager);
  FlatVector w = params.flatten();

  auto observe = [&](std::int64_t t, bool force_diverged) {
    ProbeRecord r = measure(config, ctx, params, t, lr_for(config, schedules, t));
    history.push_back(r.train_loss);
    r.stabilized = detect_stabilization(history, config.probe.stabilization_window, config.probe.stabilization_band);
    const auto div = detect_divergence(history, config.probe.divergence_factor, config.probe.divergence_persist);
    r.diverged = force_diverged || div.diverged;
    out.records.push_back(r);
    return r.diverged;
  };

  for (std::int64_t t = st.step;; ++t) {
    const bool first = t == st.step;
    if (t % config.probes_every == 0 && (!first || st.observe_first)) {
      if (observe(t, false)) {
        out.diverged = true;
        out.divergence_step = t;
        break;
      }
    }
    if (config.snapshot_every > 0 && t % config.snapshot_every == 0) {
      out.snapshots.push_back(Snapshot{t, params, opt.state(), averager});
    }
    if (t == total) break;

    if (t == tail_start) averager = start_tail(std::move(averager));
    const double lr = lr_for(config, schedules, t);
    const DataBatch batch = sample_batch(config, ctx.data.train, t);
    const auto lg = loss_and_gradient(ctx.model, params, batch, config.precision);
    StepStatus status{!lg.finite};
    if (!status.non_finite) status = opt.step(w, lg.grad, lr);
    if (status.non_finite) {
      observe(t, true);
      out.diverged = true;
      out.divergence_step = t;
      break;
    }
    if (!config.precision.master_weights_full) quantize_inplace(w, config.precision.compute_mode);
    params.assign(w);
    averager = ema_update(std::move(averager), w);
    out.steps_completed = t + 1;
  }
  out.final_params = std::move(params);
  return out;
}

}  // namespace

std::string RunRecord::probes_jsonl() const {
  std::string s;
  for (const auto& r : records) {
    s += to_json_line(r);
    s += '\n';
  }
  return s;
}

RunRecord run(const RunConfig& config) {
  Context ctx = make_context(config);
  LoopState st;
  st.params = ctx.initial;
  st.averager = make_averager(config.probe.ema_beta);
  return train_loop(config, std::move(ctx), std::move(st));
}

RunRecord resume(const RunConfig& config, const Snapshot& snapshot, std::vector<ProbeRecord> prefix) {
  Context ctx = make_context(config);
  if (snapshot.step < 0 || snapshot.step > config.total_steps()) {
    throw ConfigError("resume: snapshot step outside the configured run");
  }
  if (snapshot.params.total_dim() != ctx.initial.total_dim()) {
    throw ConfigError("resume: snapshot parameters do not fit the configured model");
  }
  LoopState st;
  st.step = snapshot.step;
  st.params = snapshot.params;
  st.opt_state = snapshot.opt_state;
  st.averager = snapshot.averager;
  st.observe_first = prefix.empty() || prefix.back().step != snapshot.step;
  st.records = std::move(prefix);
  RunRecord out = train_loop(config, std::move(ctx), std::move(st));
  if (out.steps_completed == 0) out.steps_completed = snapshot.step;
  return out;
}

namespace {

std::string_view role_name(ParamRole r) {
  switch (r) {
    case ParamRole::weight: return "weight";
    case ParamRole::bias: return "bias";
    case ParamRole::norm_gain: return "norm_gain";
    case ParamRole::norm_bias: return "norm_bias";
  }
  return "?";
}

ParamRole parse_role(const std::string& s) {
  for (auto r : {ParamRole::weight, ParamRole::bias, ParamRole::norm_gain, ParamRole::norm_bias}) {
    if (role_name(r) == s) return r;
  }
  throw ConfigError("snapshot: unknown parameter role '" + s + "'");
}

ordered_json vec_to(const FlatVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

FlatVector vec_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const FlatVector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string snapshot_to_json(const Snapshot& s) {
  ordered_json j;
  j["step"] = s.step;
  j["params"] = ordered_json::array();
  for (const auto& e : s.params.entries()) {
    j["params"].push_back({{"name", e.name},
                           {"role", role_name(e.role)},
                           {"mode", to_string(e.tensor.mode().kind)},
                           {"shape", e.tensor.shape()},
                           {"data", vec_to(e.tensor.data())}});
  }
  j["opt_state"] = {{"momentum_buf", vec_to(s.opt_state.momentum_buf)},
                    {"first_moment", vec_to(s.opt_state.first_moment)},
                    {"second_moment", vec_to(s.opt_state.second_moment)},
                    {"step_count", s.opt_state.step_count}};
  j["averager"] = {{"ema", vec_to(s.averager.ema)},
                   {"beta", s.averager.beta},
                   {"tail_sum", vec_to(s.averager.tail_sum)},
                   {"tail_count", s.averager.tail_count},
                   {"tail_active", s.averager.tail_active}};
  return j.dump();
}

Snapshot snapshot_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    Snapshot s;
    s.step = j.at("step").get<std::int64_t>();
    for (const auto& p : j.at("params")) {
      s.params.add(p.at("name").get<std::string>(),
                   Tensor(p.at("shape").get<std::vector<Index>>(), vec_from(p.at("data")),
                          parse_numeric_mode(p.at("mode").get<std::string>())),
                   parse_role(p.at("role").get<std::string>()));
    }
    const auto& o = j.at("opt_state");
    s.opt_state.momentum_buf = vec_from(o.at("momentum_buf"));
    s.opt_state.first_moment = vec_from(o.at("first_moment"));
    s.opt_state.second_moment = vec_from(o.at("second_moment"));
    s.opt_state.step_count = o.at("step_count").get<std::int64_t>();
    const auto& a = j.at("averager");
    s.averager.ema = vec_from(a.at("ema"));
    s.averager.beta = a.at("beta").get<double>();
    s.averager.tail_sum = vec_from(a.at("tail_sum"));
    s.averager.tail_count = a.at("tail_count").get<Index>();
    s.averager.tail_active = a.at("tail_active").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("snapshot: ") + e.what());
  }
}

void write_run_dir(const RunRecord& record, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "snapshots");
  write_text_file((fs::path(dir) / "config.json").string(), dump_run_config(record.config));
  write_text_file((fs::path(dir) / "probes.jsonl").string(), record.probes_jsonl());
  ordered_json summary{{"steps_completed", record.steps_completed},
                       {"diverged", record.diverged},
                       {"divergence_step", record.divergence_step},
                       {"final_param_norm", record.final_params.flatten().norm()}};
  write_text_file((fs::path(dir) / "summary.json").string(), summary.dump(2) + "\n");
  for (const auto& s : record.snapshots) {
    write_text_file((fs::path(dir) / "snapshots" / ("step_" + std::to_string(s.step) + ".json")).string(),
                    snapshot_to_json(s));
  }
}

LoadedRun load_run_dir(const std::string& dir) {
  LoadedRun out;
  out.config = load_run_config((fs::path(dir) / "config.json").string());
  std::istringstream lines(read_text_file((fs::path(dir) / "probes.jsonl").string()));
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) out.records.push_back(parse_probe_record(line));
  }
  const fs::path snaps = fs::path(dir) / "snapshots";
  if (fs::is_directory(snaps)) {
    for (const auto& entry : fs::directory_iterator(snaps)) {
      if (entry.path().extension() == ".json") {
        out.snapshots.push_back(snapshot_from_json(read_text_file(entry.path().string())));
      }
    }
  }
  std::sort(out.snapshots.begin(), out.snapshots.end(),
            [](const Snapshot& a, const Snapshot& b) { return a.step < b.step; });
  return out;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < workers; ++k) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::vector<FinetunePoint> finetune_along_trajectory(const RunConfig& config, const std::vector<Snapshot>& snapshots,
                                                     std::int64_t ft_steps, double ft_lr, int trace_probes,
                                                     int threads) {
  if (snapshots.size() < 2) throw DomainError("finetune: need at least two snapshots");
  if (ft_steps < 0 || !(ft_lr > 0)) throw DomainError("finetune: need ft_steps >= 0 and ft_lr > 0");
  if (trace_probes < 1) throw DomainError("finetune: need at least one trace probe");
  const Context ctx = make_context(config);
  const bool sphere = sphere_mode(config);
  // Same probe vectors at every snapshot, so the series compares like with like.
  const auto trace_seed = stream_for(config.seed, kFinetuneSalt, 0)();
  std::vector<FinetunePoint> out(snapshots.size());
  parallel_for(snapshots.size(), threads, [&](std::size_t i) {
    ParamSet params = snapshots[i].params;
    FlatVector w = params.flatten();
    for (std::int64_t k = 0; k < ft_steps; ++k) {
      const auto lg = loss_and_gradient(ctx.model, params, ctx.data.train);
      if (!lg.finite) break;
      w = sphere ? step_sphere(w, lg.grad, ft_lr) : step_sgd(w, lg.grad, ft_lr, 0.0);
      params.assign(w);
    }
    FinetunePoint p;
    p.step = snapshots[i].step;
    p.train_loss = evaluate_loss(ctx.model, params, ctx.data.train);
    p.test_metric = test_metric(ctx, params);
    const auto t = hutchinson_trace(ctx.model, params, ctx.subset, trace_probes, trace_seed);
    p.trace = t.estimate;
    p.trace_stderr = t.std_error;
    out[i] = p;
  });
  return out;
}

std::string finetune_csv(const std::vector<FinetunePoint>& points) {
  std::string s = "step,train_loss,test_metric,trace,trace_stderr\n";
  for (const auto& p : points) {
    s += std::to_string(p.step) + ',' + csv_number(p.train_loss) + ',' + csv_number(p.test_metric) + ',' +
         csv_number(p.trace) + ',' + csv_number(p.trace_stderr) + '\n';
  }
  return s;
}

std::size_t SweepGrid::cells() const { return lr.size() * lambda_wd.size() * precision.size() * seed.size(); }

SweepGrid parse_sweep_grid(const std::string& spec, const RunConfig& base) {
  SweepGrid g;
  g.lr = {base.phases.front().schedule.base_lr};
  g.lambda_wd = {base.optimizer.lambda_wd};
  g.precision = {base.precision.compute_mode};
  g.seed = {base.seed};
  std::istringstream axes(spec);
  bool any = false;
  for (std::string axis; std::getline(axes, axis, ';');) {
    if (axis.empty()) continue;
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw ConfigError("grid: expected name=values in '" + axis + "'");
    const std::string name = axis.substr(0, eq);
    std::vector<std::string> values;
    std::istringstream vs(axis.substr(eq + 1));
    for (std::string v; std::getline(vs, v, ',');) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("grid: axis '" + name + "' has no values");
    try {
      if (name == "lr") {
        g.lr.clear();
        for (const auto& v : values) g.lr.push_back(std::stod(v));
      } else if (name == "lambda_wd") {
        g.lambda_wd.clear();
        for (const auto& v : values) g.lambda_wd.push_back(std::stod(v));
      } else if (name == "precision") {
        g.precision.clear();
        for (const auto& v : values) g.precision.push_back(parse_numeric_mode(v));
      } else if (name == "seed") {
        g.seed.clear();
        for (const auto& v : values) g.seed.push_back(std::stoull(v));
      } else {
        throw ConfigError("grid: unknown axis '" + name + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("grid: bad value on axis '" + name + "'");
    }
    any = true;
  }
  if (!any) throw ConfigError("grid: empty specification");
  return g;
}

RunConfig sweep_cell_config(const RunConfig& base, double lr, double lambda_wd, NumericMode precision,
                            std::uint64_t seed) {
  RunConfig c = base;
  Schedule& s = c.phases.front().schedule;
  if (s.kind == ScheduleKind::step_decay) s.post_decay_lr *= lr / s.base_lr;
  s.base_lr = lr;
  c.optimizer.lambda_wd = lambda_wd;
  c.precision = precision.is_full() ? MixedPrecisionPolicy::full() : MixedPrecisionPolicy::mixed(precision);
  c.seed = seed;
  return c;
}

std::vector<SweepRow> sweep(const RunConfig& base, const SweepGrid& grid, int threads) {
  if (grid.cells() == 0) throw ConfigError("sweep: grid is empty");
  std::vector<SweepRow> rows(grid.cells());
  std::size_t cell = 0;
  for (double lr : grid.lr) {
    for (double lambda : grid.lambda_wd) {
      for (const auto& mode : grid.precision) {
        for (auto seed : grid.seed) {
          SweepRow& r = rows[cell];
          r.cell = cell++;
          r.lr = lr;
          r.lambda_wd = lambda;
          r.precision = std::string(to_string(mode.kind));
          r.seed = seed;
        }
      }
    }
  }
  std::mutex mu;
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    SweepRow r;
    {
      std::lock_guard lock(mu);
      r = rows[i];
    }
    try {
      const RunConfig c = sweep_cell_config(base, r.lr, r.lambda_wd, parse_numeric_mode(r.precision), r.seed);
      const RunRecord rec = run(c);
      r.status = rec.diverged ? "diverged" : "ok";
      r.divergence_step = rec.divergence_step;
      const ProbeRecord& last = rec.records.back();
      r.final_train_loss = last.train_loss;
      r.final_test_metric = last.test_metric;
      r.final_param_norm = rec.final_params.flatten().norm();
    } catch (const std::exception& e) {
      r.status = "error";
      r.error = e.what();
    }
    std::lock_guard lock(mu);
    rows[i] = r;
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s =
      "cell,lr,lambda_wd,precision,seed,status,divergence_step,final_train_loss,final_test_metric,final_param_norm,"
      "error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    s += std::to_string(r.cell) + ',' + csv_number(r.lr) + ',' + csv_number(r.lambda_wd) + ',' + r.precision + ',' +
         std::to_string(r.seed) + ',' + r.status + ',' + std::to_string(r.divergence_step) + ',' +
         csv_number(r.final_train_loss) + ',' + csv_number(r.final_test_metric) + ',' +
         csv_number(r.final_param_norm) + ',' + err + '\n';
  }
  return s;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman: need two equal-length series of length >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const Eigen::Map<const Eigen::ArrayXd> a(rx.data(), static_cast<Index>(rx.size()));
  const Eigen::Map<const Eigen::ArrayXd> b(ry.data(), static_cast<Index>(ry.size()));
  const Eigen::ArrayXd ca = a - a.mean();
  const Eigen::ArrayXd cb = b - b.mean();
  const double denom = std::sqrt(ca.square().sum() * cb.square().sum());
  if (!(denom > 0)) throw DomainError("spearman: constant series");
  return (ca * cb).sum() / denom;
}

BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, double confidence,
                                 std::uint64_t seed) {
  if (values.empty() || resamples < 1 || !(confidence > 0 && confidence < 1)) {
    throw DomainError("bootstrap_mean: need values, resamples >= 1 and confidence in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += values[pick(rng)];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1 - confidence);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  BootstrapInterval out;
  out.estimate = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  out.lower = quantile(alpha);
  out.upper = quantile(1 - alpha);
  return out;
}

}  // namespace wdlab
