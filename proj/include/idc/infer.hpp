#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "idc/dataset.hpp"
#include "idc/membank.hpp"
#include "idc/trainer.hpp"

namespace idc {

/// Per-class memory scores for one sample. Scores are not probabilities and
/// may be negative once representative values go below zero.
struct Prediction {
  Eigen::VectorXd scores;
  int predicted_class = 0;
  double confidence = 0;
  /// evidence[c] is the read of bank c, most similar slot first.
  std::vector<std::vector<EvidenceItem<double>>> evidence;
};

/// Reads every bank with an already-encoded feature. Ages are not touched.
Prediction predict_feature(const MemoryBankSet<double>& banks, const Eigen::VectorXd& feature);
Prediction predict(const Model& model, const Eigen::VectorXd& x);

/// Softmax output of the FC head, the non-interpretable baseline.
struct FcPrediction {
  Eigen::VectorXd probs;
  int predicted_class = 0;
  double confidence = 0;
};
FcPrediction fc_predict(const Model& model, const Eigen::VectorXd& x);

struct Explanation {
  std::string sample_id;
  int predicted_class = 0;
  Eigen::VectorXd scores;
  /// Evidence of the predicted class by contribution, largest first.
  std::vector<EvidenceItem<double>> most;
  /// Evidence of the predicted class by contribution, smallest first.
  std::vector<EvidenceItem<double>> least;
};

Explanation explain(const Model& model, const Eigen::VectorXd& x, Index top_n,
                    std::string sample_id = {});

struct ScoredPrediction {
  double confidence = 0;
  int predicted = 0;
  int truth = 0;
};

struct RejectionPoint {
  double rate = 0;
  double accuracy = 0;
  Index retained = 0;
};
using RejectionCurve = std::vector<RejectionPoint>;

/// Sample indices by confidence, highest first; ties keep ascending index.
std::vector<Index> confidence_ranking(std::span<const ScoredPrediction> predictions);

/// ceil((1 - rate) * n), robust to the rounding of 1 - rate.
Index retained_count(double rate, Index n);

/// Accuracy on the top ceil((1-r)N) most confident samples for each rate.
/// An empty retained set reports accuracy 1.0. Rates must be strictly
/// increasing within [0,1].
RejectionCurve rejection_curve(std::span<const ScoredPrediction> predictions,
                               std::span<const double> rates);

/// Scores every target with the memory classifier (or the FC head when
/// `use_fc` is set) against the evaluation labels of `data`.
std::vector<ScoredPrediction> score_targets(const Model& model, const Dataset& data,
                                            bool use_fc = false);

struct ClassificationMetrics {
  Index count = 0;
  double accuracy = 0;
  /// Mean over classes of per-class recall; classes absent from the truth are skipped.
  double mean_class_accuracy = 0;
  std::vector<double> per_class_accuracy;
};

ClassificationMetrics classification_metrics(std::span<const ScoredPrediction> predictions,
                                             int num_classes);

struct EvalReport {
  ClassificationMetrics idc;
  ClassificationMetrics fc;
};

/// Target-domain metrics for both classifiers. Needs data.target_labels.
EvalReport evaluate_targets(const Model& model, const Dataset& data);

}  // namespace idc
