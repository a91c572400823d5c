#include "wdlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wdlab/errors.hpp"

namespace wdlab {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::gauss_blobs: return "gauss_blobs";
    case TaskKind::spiral: return "spiral";
    case TaskKind::linreg: return "linreg";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "gauss_blobs") return TaskKind::gauss_blobs;
  if (name == "spiral") return TaskKind::spiral;
  if (name == "linreg") return TaskKind::linreg;
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

namespace {

FlatVector draw_teacher(Index dim, std::uint64_t seed) {
  // Separate stream so the teacher does not depend on n_train.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  FlatVector w(dim);
  for (Index j = 0; j < dim; ++j) w[j] = normal(rng);
  return w;
}

DataBatch draw_classification(const TaskSpec& task, Index n, const RowMatrix& centers, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  DataBatch batch;
  batch.inputs.resize(n, task.dim);
  batch.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % task.classes);
    batch.labels[static_cast<std::size_t>(i)] = label;
    if (task.kind == TaskKind::gauss_blobs) {
      for (Index j = 0; j < task.dim; ++j) batch.inputs(i, j) = centers(label, j) + task.noise_std * normal(rng);
    } else {
      const double t = unit(rng);
      const double angle = 2.0 * std::numbers::pi * label / task.classes + 4.0 * t;
      batch.inputs(i, 0) = t * std::cos(angle) + task.noise_std * normal(rng);
      batch.inputs(i, 1) = t * std::sin(angle) + task.noise_std * normal(rng);
      for (Index j = 2; j < task.dim; ++j) batch.inputs(i, j) = task.noise_std * normal(rng);
    }
  }
  // Fisher-Yates so classes are interleaved.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Index> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
  }
  return batch.subset(order);
}

DataBatch draw_regression(const TaskSpec& task, Index n, const FlatVector& teacher, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  DataBatch batch;
  batch.inputs.resize(n, task.dim);
  for (Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = normal(rng);
  batch.targets = batch.inputs * teacher;
  if (task.noise_std > 0) {
    for (Index i = 0; i < n; ++i) batch.targets(i, 0) += task.noise_std * normal(rng);
  }
  return batch;
}

}  // namespace

FlatVector linreg_teacher(const TaskSpec& task) { return draw_teacher(task.dim, task.seed); }

Dataset generate(const TaskSpec& task) {
  if (task.dim < 1) throw ConfigError("generate: dim must be positive");
  if (task.noise_std < 0) throw ConfigError("generate: noise_std must be non-negative");
  if (task.n_train < 1) throw ConfigError("generate: n_train must be positive");
  const Index n_test = std::max<Index>(1, task.n_train / 4);
  std::mt19937_64 rng(task.seed);

  if (task.kind == TaskKind::linreg) {
    const FlatVector teacher = draw_teacher(task.dim, task.seed);
    DataBatch train = draw_regression(task, task.n_train, teacher, rng);
    DataBatch test = draw_regression(task, n_test, teacher, rng);
    return {std::move(train), std::move(test)};
  }

  if (task.classes < 2) throw ConfigError("generate: classification needs at least 2 classes");
  if (task.n_train < task.classes) throw ConfigError("generate: n_train smaller than the number of classes");
  if (task.kind == TaskKind::spiral && task.dim < 2) throw ConfigError("generate: spiral needs dim >= 2");

  RowMatrix centers(task.classes, task.dim);
  {
    std::normal_distribution<double> normal(0.0, 2.0);
    for (Index i = 0; i < centers.size(); ++i) centers.data()[i] = normal(rng);
  }
  DataBatch train = draw_classification(task, task.n_train, centers, rng);
  DataBatch test = draw_classification(task, n_test, centers, rng);
  return {std::move(train), std::move(test)};
}

void write_csv(std::ostream& os, const DataBatch& batch) {
  batch.validate();
  for (Index j = 0; j < batch.inputs.cols(); ++j) os << 'x' << j << ',';
  os << "label\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (Index i = 0; i < batch.size(); ++i) {
    line.str("");
    for (Index j = 0; j < batch.inputs.cols(); ++j) line << batch.inputs(i, j) << ',';
    if (batch.is_classification()) {
      line << batch.labels[static_cast<std::size_t>(i)];
    } else {
      line << batch.targets(i, 0);
    }
    os << line.str() << '\n';
  }
}

DataBatch read_csv(std::istream& is, bool classification) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("read_csv: missing header");
  const auto columns = static_cast<Index>(std::count(header.begin(), header.end(), ',')) + 1;
  if (columns < 2) throw ConfigError("read_csv: need at least one feature column and a label");

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Index>(row.size()) != columns) {
      throw ConfigError("read_csv: row " + std::to_string(rows.size() + 1) + " has " +
                        std::to_string(row.size()) + " fields, header has " + std::to_string(columns));
    }
    rows.push_back(std::move(row));
  }
  DataBatch batch;
  const auto n = static_cast<Index>(rows.size());
  batch.inputs.resize(n, columns - 1);
  if (!classification) batch.targets.resize(n, 1);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j + 1 < columns; ++j) batch.inputs(i, j) = row[static_cast<std::size_t>(j)];
    const double last = row.back();
    if (classification) {
      if (last != std::floor(last)) throw ConfigError("read_csv: non-integer label " + std::to_string(last));
      batch.labels.push_back(static_cast<int>(last));
    } else {
      batch.targets(i, 0) = last;
    }
  }
  return batch;
}

void standardize(DataBatch& batch, const DataBatch& reference) {
  const Eigen::RowVectorXd mean = reference.inputs.colwise().mean();
  const RowMatrix centered = reference.inputs.rowwise() - mean;
  Eigen::RowVectorXd stddev =
      (centered.array().square().colwise().sum() / static_cast<double>(reference.size())).sqrt();
  for (Index j = 0; j < stddev.size(); ++j) {
    if (stddev[j] == 0.0) stddev[j] = 1.0;
  }
  batch.inputs = (batch.inputs.rowwise() - mean).array().rowwise() / stddev.array();
}

}  // namespace wdlab
