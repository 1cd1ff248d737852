#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "idc/core_math.hpp"

namespace idc {

struct LabeledSample {
  std::string id;
  int label = 0;
  Eigen::VectorXd x;
};

/// A target sample as the trainer sees it: there is no label field.
struct UnlabeledSample {
  std::string id;
  Eigen::VectorXd x;
};

/// What training is allowed to see.
struct TrainingView {
  int num_classes = 0;
  Index dim = 0;
  std::span<const LabeledSample> source;
  std::span<const UnlabeledSample> target;
};

struct Dataset {
  int num_classes = 0;
  Index dim = 0;
  std::vector<LabeledSample> source;
  std::vector<UnlabeledSample> target;
  /// Ground truth for `target`, parallel to it. Evaluation only; empty when unknown.
  std::vector<int> target_labels;

  TrainingView training_view() const { return {num_classes, dim, source, target}; }
};

}  // namespace idc
