#pragma once

#include "mtgp/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mtgp {

/// Observations of a single task: inputs (N×P) and targets (N).
struct TaskData {
  Matrix inputs;
  Vector targets;

  Index size() const { return inputs.rows(); }
};

/// Heterotopic multi-task data: each task carries its own inputs, all tasks
/// share the input dimension.
class MultiTaskDataset {
public:
  MultiTaskDataset() = default;

  MultiTaskDataset(std::vector<TaskData> tasks) : tasks_(std::move(tasks)) {
    normalize_empty_tasks();
    validate();
  }

  Index num_tasks() const { return static_cast<Index>(tasks_.size()); }

  Index input_dim() const { return tasks_.empty() ? 0 : tasks_[0].inputs.cols(); }

  const TaskData &task(Index d) const {
    return tasks_.at(static_cast<std::size_t>(d));
  }
  const std::vector<TaskData> &tasks() const { return tasks_; }

  Index total_size() const {
    Index n = 0;
    for (const auto &t : tasks_) {
      n += t.size();
    }
    return n;
  }

  /// Row offset of task `d` in the task-major stacking.
  Index offset(Index d) const {
    Index n = 0;
    for (Index k = 0; k < d; ++k) {
      n += task(k).size();
    }
    return n;
  }

  /// Targets of all tasks concatenated in task-major order.
  Vector stacked_targets() const {
    Vector y(total_size());
    Index pos = 0;
    for (const auto &t : tasks_) {
      y.segment(pos, t.size()) = t.targets;
      pos += t.size();
    }
    return y;
  }

  /// Inputs of all tasks concatenated in task-major order.
  Matrix stacked_inputs() const {
    Matrix x(total_size(), input_dim());
    Index pos = 0;
    for (const auto &t : tasks_) {
      x.middleRows(pos, t.size()) = t.inputs;
      pos += t.size();
    }
    return x;
  }

  /// Task label of every stacked row.
  std::vector<Index> task_labels() const {
    std::vector<Index> labels;
    labels.reserve(static_cast<std::size_t>(total_size()));
    for (Index d = 0; d < num_tasks(); ++d) {
      labels.insert(labels.end(), static_cast<std::size_t>(task(d).size()), d);
    }
    return labels;
  }

private:
  // Empty tasks may come with a default-constructed 0×0 input matrix.
  void normalize_empty_tasks() {
    Index dim = 0;
    for (const auto &t : tasks_) {
      if (t.inputs.rows() > 0) {
        dim = t.inputs.cols();
        break;
      }
    }
    for (auto &t : tasks_) {
      if (t.inputs.rows() == 0 && t.targets.size() == 0) {
        t.inputs.resize(0, dim);
      }
    }
  }

  void validate() const {
    if (tasks_.empty()) {
      throw InputShapeError("dataset must contain at least one task");
    }
    const Index dim = tasks_[0].inputs.cols();
    Index total = 0;
    for (std::size_t d = 0; d < tasks_.size(); ++d) {
      const auto &t = tasks_[d];
      const std::string tag = "task " + std::to_string(d);
      require_shape(t.inputs.rows() == t.targets.size(),
                    tag + ": input rows and target count differ");
      require_shape(t.inputs.cols() == dim,
                    tag + ": input dimension differs from task 0");
      if (!t.targets.allFinite() || !t.inputs.allFinite()) {
        throw InputShapeError(tag + ": non-finite value");
      }
      total += t.size();
    }
    require_shape(total > 0, "dataset must contain at least one observation");
    require_shape(dim > 0, "inputs must have at least one column");
  }

  std::vector<TaskData> tasks_;
};

} // namespace mtgp
