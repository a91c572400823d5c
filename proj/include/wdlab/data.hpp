#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include "wdlab/model.hpp"

namespace wdlab {

enum class TaskKind { gauss_blobs, spiral, linreg };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Seeded synthetic task. `n_train` is the training set size; a held-out
/// test set of n_train / 4 examples (20% of the total) is drawn after it.
struct TaskSpec {
  TaskKind kind = TaskKind::spiral;
  Index n_train = 200;
  Index dim = 2;
  int classes = 2;
  double noise_std = 0.1;
  std::uint64_t seed = 0;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct Dataset {
  DataBatch train;
  DataBatch test;
};

/// Same spec, same bytes. Classification sets are class-balanced (label
/// i mod classes before a seeded shuffle).
///
/// - gauss_blobs: class centers ~ N(0, 4 I), points center + noise_std N(0, I).
/// - spiral: `classes` interleaved arms in the first two coordinates, radius
///   in [0, 1], isotropic noise; extra dimensions carry noise only.
/// - linreg: x ~ N(0, I), w* ~ N(0, I), target x^T w* + noise_std N(0, 1).
Dataset generate(const TaskSpec& task);

/// Ground-truth weights used by a linreg task.
FlatVector linreg_teacher(const TaskSpec& task);

/// CSV with header x0,...,x{d-1},label; values printed with 17 significant
/// digits so they read back exactly.
void write_csv(std::ostream& os, const DataBatch& batch);
/// Reads write_csv() output. `classification` selects integer labels versus
/// real-valued targets for the last column.
DataBatch read_csv(std::istream& is, bool classification);

/// Standardize each input column to zero mean and unit variance using the
/// statistics of `reference`.
void standardize(DataBatch& batch, const DataBatch& reference);

}  // namespace wdlab
