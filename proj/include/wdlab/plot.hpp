#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wdlab {

enum class PlotKind { loss_curve, norm_curve, elr_curve, trace_trend, risk_curve, ushape };

std::string_view to_string(PlotKind kind);
/// Throws ConfigError for an unknown name.
PlotKind parse_plot_kind(std::string_view name);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
  bool markers = false;
};

/// Line chart with axes, ticks, labels and a legend. Non-finite points are
/// dropped. Output depends only on the chart. Throws DomainError when no
/// series has a finite point.
std::string render_svg(const Chart& chart);

/// Builds the chart of `kind` from input files:
/// - loss_curve, norm_curve, elr_curve: probes.jsonl files or run directories
/// - trace_trend: fine-tune CSV (step,train_loss,test_metric,trace,trace_stderr)
/// - risk_curve: risk CSV (step,exact_total,bias,variance,empirical_mean,empirical_stderr)
/// - ushape: sweep CSV, final test metric against lr, one series per lambda_wd
Chart load_chart(PlotKind kind, const std::vector<std::string>& inputs);

/// load_chart + render_svg, written to `out` only when rendering succeeds.
void write_plot(PlotKind kind, const std::vector<std::string>& inputs, const std::string& out);

}  // namespace wdlab
