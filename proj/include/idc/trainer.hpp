#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "idc/dataset.hpp"
#include "idc/membank.hpp"
#include "idc/nn.hpp"

namespace idc {

/// Hyperparameters for joint adversarial + memory training. Defaults are
/// sized for the synthetic benchmark; the large-scale setting is
/// N_m=8192, N_k=64, batch 72.
struct TrainConfig {
  int num_classes = 8;
  Index input_dim = 16;
  Index hidden_dim = 64;
  Index feature_dim = 32;
  Index discriminator_hidden = 32;
  Index memory_slots = 256;
  Index read_k = 4;
  int batch_size = 32;
  int max_iterations = 2000;
  double encoder_lr = 1e-3;
  double discriminator_lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double memory_lr = 1e-5;
  double grl_gamma = 10.0;
  double grl_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossRecord {
  int iteration = 0;
  double fc = 0;
  double adv = 0;
  double idc = 0;
  double source_accuracy = 0;
};

inline constexpr double kDiscriminatorClamp = 1e-7;

struct Model {
  TrainConfig config;
  Mlp<double> encoder;
  Mlp<double> fc_head;
  Mlp<double> discriminator;
  MemoryBankSet<double> banks;

  /// Networks shaped per `config` with zero parameters and empty banks.
  static Model create(const TrainConfig& config);

  Eigen::VectorXd encode(const Eigen::VectorXd& x) const { return encoder.forward(x); }
  Eigen::VectorXd fc_probabilities(const Eigen::VectorXd& feature) const {
    return softmax(fc_head.forward(feature));
  }
  /// Unclamped P(target | feature).
  double domain_probability(const Eigen::VectorXd& feature) const {
    return sigmoid(discriminator.forward(feature)(0));
  }
};

/// Multipliers on the three objectives; used by gradient-flow checks.
struct LossWeights {
  double fc = 1.0;
  double adv = 1.0;
  double idc = 1.0;
};

/// Gradients of one batch, in the direction each parameter group descends:
///   encoder       d(fc*L_fc)/dθ - λ d(adv*L_adv)/dθ   (reversed through the GRL)
///   fc_head       d(fc*L_fc)/dθ
///   discriminator d(adv*L_adv)/dθ
///   values[c]     d(idc*L_idc)/dv for every slot of bank c
struct BatchGradients {
  Eigen::VectorXd encoder;
  Eigen::VectorXd fc_head;
  Eigen::VectorXd discriminator;
  std::vector<Eigen::VectorXd> values;
};

/// A source sample's bank reads, kept so the caller can touch the selections.
struct SourceReads {
  int positive_class = -1;
  int negative_class = -1;
  std::vector<Index> positive_selected;
  std::vector<Index> negative_selected;
};

struct BatchEvaluation {
  double fc_loss = 0;
  double adv_loss = 0;
  double idc_loss = 0;
  double source_accuracy = 0;
  /// Source samples whose positive and negative banks were both non-empty.
  int idc_samples = 0;
  std::vector<Eigen::VectorXd> source_features;
  std::vector<Eigen::VectorXd> target_features;
  std::vector<Eigen::VectorXd> source_probs;
  std::vector<SourceReads> reads;
  BatchGradients grads;
};

/// Forward and backward pass over one batch without mutating the model.
/// Losses are batch means; L_idc is averaged over contributing samples.
BatchEvaluation evaluate_batch(const Model& model, std::span<const LabeledSample> source,
                               std::span<const UnlabeledSample> target, double grl_coefficient,
                               const LossWeights& weights = {});

class Trainer {
 public:
  /// Fresh model with parameters drawn from the "init" stream of config.seed.
  explicit Trainer(const TrainConfig& config);
  /// Continue training an existing model with fresh optimizer state.
  explicit Trainer(Model model);

  /// One iteration: encode, read, refresh, losses, parameter/value updates,
  /// then one memory write per source sample.
  LossRecord train_step(std::span<const LabeledSample> source,
                        std::span<const UnlabeledSample> target);

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  int iteration() const { return iteration_; }
  std::uint64_t total_writes() const { return total_writes_; }
  const std::vector<WriteOutcome>& last_writes() const { return last_writes_; }
  double current_grl_coefficient() const;

 private:
  void setup_optimizers();

  Model model_;
  SgdMomentum<double> encoder_opt_;
  SgdMomentum<double> fc_opt_;
  SgdMomentum<double> disc_opt_;
  std::vector<Adam<double>> value_opt_;
  int iteration_ = 0;
  std::uint64_t total_writes_ = 0;
  std::vector<WriteOutcome> last_writes_;
};

struct TrainResult {
  Model model;
  std::vector<LossRecord> history;
};

/// Runs config.max_iterations steps, each on batch_size/2 source and
/// batch_size/2 target samples drawn uniformly with replacement. With
/// `require_every_class` unset, classes without source samples are allowed.
TrainResult train(const TrainConfig& config, const TrainingView& data,
                  bool require_every_class = true);

}  // namespace idc
