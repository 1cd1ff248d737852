#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idc/dataset.hpp"
#include "idc/infer.hpp"
#include "idc/trainer.hpp"

namespace idc {

/// random: seeded uniform draws. in: similarity of raw input features.
/// adv: similarity of adapted encoder features. idc: representative score
/// times adapted-feature similarity.
enum class ImportanceMethod { random, in, adv, idc };

/// S: global ranking. P: per-class quotas proportional to class sizes.
/// M: a split of the quota spread evenly over classes, the rest global.
enum class Strategy { S, P, M };

const char* to_string(ImportanceMethod m);
const char* to_string(Strategy s);
ImportanceMethod importance_method_from_string(const std::string& s);
Strategy strategy_from_string(const std::string& s);

struct ImportanceRow {
  std::string id;
  int label = 0;
  double importance = 0;
};
using ImportanceTable = std::vector<ImportanceRow>;

/// importance[i] = mean over targets t of normalized_similarity(source_i, t).
std::vector<double> importance_similarity(std::span<const Eigen::VectorXd> source_features,
                                          std::span<const Eigen::VectorXd> target_features);

/// Value of the latest slot written for this sample in its class bank, or
/// the bank's read score for `feature` when no such slot survives.
double representative_score(const Model& model, const LabeledSample& sample,
                            const Eigen::VectorXd& feature);

/// importance[i] = mean over targets of v(x_i) * s(f(x_i), f(t)).
std::vector<double> importance_idc(const Model& model, std::span<const LabeledSample> sources,
                                   std::span<const UnlabeledSample> targets);

/// Importance of every source sample under `method`. `model` may be null for
/// random and in.
ImportanceTable importance_table(ImportanceMethod method, const Model* model,
                                 const TrainingView& data, std::uint64_t seed);

enum class SelectedBy { none, class_quota, global };
const char* to_string(SelectedBy s);

struct SelectionPlan {
  ImportanceMethod method = ImportanceMethod::random;
  Strategy strategy = Strategy::S;
  double ratio = 1.0;
  Index quota = 0;
  /// Table row indices in the order they were picked.
  std::vector<Index> selected;
  /// Per table row.
  std::vector<SelectedBy> selected_by;
  std::vector<Index> per_class_counts;
};

/// max(1, floor(ratio * n)).
Index selection_quota(double ratio, Index n);

/// Splits `total` over classes in proportion to `class_sizes`: floors first,
/// then one extra each for the largest remainders (lower class on ties).
std::vector<Index> largest_remainder(std::span<const Index> class_sizes, Index total);

/// A class asked for more than it holds gives all of its samples and the
/// shortfall is filled from the global ranking.
SelectionPlan apply_strategy(const ImportanceTable& table, Strategy strategy, double ratio,
                             int num_classes, double mixture_split = 0.9);

/// Copy of `data` keeping only the selected sources (original order) and all targets.
Dataset subset_sources(const Dataset& data, const ImportanceTable& table,
                       const SelectionPlan& plan);

struct RetrainResult {
  EvalReport report;
  /// Target accuracy of the retrained adversarial model's FC head.
  double accuracy = 0;
};

/// Fresh training on the selected sources plus every target. Classes
/// absent from the selection are allowed; the memory classifier metrics are
/// then left at zero.
RetrainResult retrain_on_selection(const SelectionPlan& plan, const ImportanceTable& table,
                                   const Dataset& data, const TrainConfig& config);

struct SweepCell {
  ImportanceMethod method = ImportanceMethod::random;
  Strategy strategy = Strategy::S;
  double ratio = 0;
  std::vector<double> accuracies;
  double mean = 0;
  double stddev = 0;
};

struct SweepSpec {
  std::vector<ImportanceMethod> methods;
  std::vector<Strategy> strategies;
  std::vector<double> ratios;
  std::vector<std::uint64_t> seeds;
  double mixture_split = 0.9;
};

/// For each seed: train an interpreter, score sources under each method,
/// select under each strategy and ratio, retrain, record target accuracy.
std::vector<SweepCell> run_sweep(const Dataset& data, const TrainConfig& config,
                                 const SweepSpec& spec);

}  // namespace idc
