#include "wdlab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "wdlab/config.hpp"
#include "wdlab/errors.hpp"
#include "wdlab/probes.hpp"

namespace wdlab {

namespace fs = std::filesystem;

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::loss_curve: return "loss_curve";
    case PlotKind::norm_curve: return "norm_curve";
    case PlotKind::elr_curve: return "elr_curve";
    case PlotKind::trace_trend: return "trace_trend";
    case PlotKind::risk_curve: return "risk_curve";
    case PlotKind::ushape: return "ushape";
  }
  return "?";
}

PlotKind parse_plot_kind(std::string_view name) {
  for (auto k : {PlotKind::loss_curve, PlotKind::norm_curve, PlotKind::elr_curve, PlotKind::trace_trend,
                 PlotKind::risk_curve, PlotKind::ushape}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown plot kind '" + std::string(name) + "'");
}

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 160;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  }
  return ticks;
}

}  // namespace

std::string render_svg(const Chart& chart) {
  auto ty = [&](double y) { return chart.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!chart.log_y || y > 0); };

  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, ty(s.y[i]));
      y_hi = std::max(y_hi, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x_lo)) throw DomainError("plot: no finite data to draw");
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    const double pad = y_lo == 0 ? 0.5 : 0.05 * std::abs(y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (ty(y) - y_lo) / (y_hi - y_lo) * ph; };
  auto py_raw = [&](double v) { return kTop + ph - (v - y_lo) / (y_hi - y_lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(chart.title) << "</text>\n";
  os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : nice_ticks(x_lo, x_hi)) {
    os << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
       << fmt(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << tick_label(t) << "</text>\n";
  }
  for (double t : nice_ticks(y_lo, y_hi)) {
    os << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py_raw(t)) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
       << fmt(py_raw(t)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py_raw(t) + 4) << "\" text-anchor=\"end\">"
       << tick_label(chart.log_y ? std::pow(10.0, t) : t) << "</text>\n";
  }
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10) << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt(kTop + ph / 2) << ")\">" << escape(chart.y_label) << (chart.log_y ? " (log)" : "") << "</text>\n";

  std::size_t k = 0;
  for (const auto& s : chart.series) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::ostringstream pts;
    bool any = false;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      pts << (any ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
      any = true;
    }
    if (!any) continue;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
       << "\"/>\n";
    if (chart.markers) {
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!usable(s.x[i], s.y[i])) continue;
        os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << color
           << "\"/>\n";
      }
    }
    const double ly = kTop + 12 + 16 * static_cast<double>(k);
    os << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(kLeft + pw + 32)
       << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(kLeft + pw + 36) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.name) << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

std::vector<ProbeRecord> load_probes(const std::string& input) {
  fs::path path(input);
  if (fs::is_directory(path)) path /= "probes.jsonl";
  std::istringstream lines(read_text_file(path.string()));
  std::vector<ProbeRecord> out;
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty()) out.push_back(parse_probe_record(line));
  }
  return out;
}

std::string series_name(const std::string& input) {
  fs::path p(input);
  if (p.filename() == "probes.jsonl") p = p.parent_path();
  return p.filename().empty() ? input : p.filename().string();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("plot: input lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  double number(std::size_t row, std::size_t col) const {
    const auto& cell = rows[row].at(col);
    if (cell.empty() || cell == "nan") return NAN;
    try {
      return std::stod(cell);
    } catch (const std::logic_error&) {
      throw ConfigError("plot: non-numeric cell '" + cell + "'");
    }
  }
};

Table load_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Table t;
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("plot: '" + path + "' is empty");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

}  // namespace

Chart load_chart(PlotKind kind, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("plot: no input given");
  Chart c;
  c.title = std::string(to_string(kind));
  switch (kind) {
    case PlotKind::loss_curve:
    case PlotKind::norm_curve:
    case PlotKind::elr_curve: {
      c.x_label = "step";
      c.y_label = kind == PlotKind::loss_curve ? "train loss" : kind == PlotKind::norm_curve ? "|w|" : "effective lr";
      c.log_y = kind != PlotKind::norm_curve;
      for (const auto& in : inputs) {
        Series s{series_name(in), {}, {}};
        for (const auto& r : load_probes(in)) {
          s.x.push_back(static_cast<double>(r.step));
          s.y.push_back(kind == PlotKind::loss_curve ? r.train_loss
                        : kind == PlotKind::norm_curve ? r.param_norm
                                                       : r.eff_lr);
        }
        c.series.push_back(std::move(s));
      }
      break;
    }
    case PlotKind::trace_trend: {
      c.x_label = "snapshot step";
      c.y_label = "fine-tuned Hessian trace";
      c.markers = true;
      for (const auto& in : inputs) {
        const Table t = load_csv(in);
        Series s{series_name(in), {}, {}};
        const auto xs = t.column("step"), ys = t.column("trace");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          s.x.push_back(t.number(i, xs));
          s.y.push_back(t.number(i, ys));
        }
        c.series.push_back(std::move(s));
      }
      break;
    }
    case PlotKind::risk_curve: {
      c.x_label = "step";
      c.y_label = "E|w - w*|^2";
      c.log_y = true;
      for (const auto& in : inputs) {
        const Table t = load_csv(in);
        const auto xs = t.column("step");
        const std::string prefix = inputs.size() > 1 ? series_name(in) + " " : "";
        for (const char* col : {"exact_total", "bias", "variance", "empirical_mean"}) {
          Series s{prefix + col, {}, {}};
          const auto ys = t.column(col);
          for (std::size_t i = 0; i < t.rows.size(); ++i) {
            s.x.push_back(t.number(i, xs));
            s.y.push_back(t.number(i, ys));
          }
          c.series.push_back(std::move(s));
        }
      }
      break;
    }
    case PlotKind::ushape: {
      c.x_label = "learning rate";
      c.y_label = "final test metric";
      c.markers = true;
      for (const auto& in : inputs) {
        const Table t = load_csv(in);
        const auto lr = t.column("lr"), lam = t.column("lambda_wd"), metric = t.column("final_test_metric");
        const auto status = t.column("status");
        std::map<double, std::map<double, std::pair<double, int>>> cells;  // lambda -> lr -> (sum, count)
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          if (t.rows[i].at(status) == "error") continue;
          auto& cell = cells[t.number(i, lam)][t.number(i, lr)];
          cell.first += t.number(i, metric);
          cell.second += 1;
        }
        for (const auto& [lambda, by_lr] : cells) {
          Series s{"lambda_wd=" + tick_label(lambda), {}, {}};
          for (const auto& [x, acc] : by_lr) {
            s.x.push_back(x);
            s.y.push_back(acc.first / acc.second);
          }
          c.series.push_back(std::move(s));
        }
      }
      break;
    }
  }
  return c;
}

void write_plot(PlotKind kind, const std::vector<std::string>& inputs, const std::string& out) {
  const std::string svg = render_svg(load_chart(kind, inputs));
  write_text_file(out, svg);
}

}  // namespace wdlab
