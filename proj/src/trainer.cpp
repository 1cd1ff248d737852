#include "idc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "idc/random.hpp"

namespace idc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ConfigInvalid, what);
}

}  // namespace

void TrainConfig::validate() const {
  require(num_classes >= 2, "num_classes must be >= 2");
  require(input_dim >= 1 && hidden_dim >= 1 && feature_dim >= 1 && discriminator_hidden >= 1,
          "network dimensions must be >= 1");
  require(memory_slots >= 1, "memory_slots must be >= 1");
  require(read_k >= 1, "read_k must be >= 1");
  require(batch_size >= 2 && batch_size % 2 == 0, "batch_size must be even and >= 2");
  require(max_iterations >= 1, "max_iterations must be >= 1");
  require(encoder_lr > 0 && discriminator_lr > 0 && memory_lr > 0,
          "learning rates must be > 0");
  require(momentum >= 0 && momentum < 1, "momentum must be in [0,1)");
  require(weight_decay >= 0, "weight_decay must be >= 0");
  require(grl_gamma >= 0 && grl_max >= 0, "GRL schedule parameters must be >= 0");
}

Model Model::create(const TrainConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  m.encoder = make_encoder<double>(config.input_dim, config.hidden_dim, config.feature_dim);
  m.fc_head = make_fc_head<double>(config.feature_dim, config.num_classes);
  m.discriminator = make_discriminator<double>(config.feature_dim, config.discriminator_hidden);
  m.banks = MemoryBankSet<double>(config.num_classes, config.memory_slots, config.feature_dim,
                                  config.read_k);
  return m;
}

BatchEvaluation evaluate_batch(const Model& model, std::span<const LabeledSample> source,
                               std::span<const UnlabeledSample> target, double grl_coefficient,
                               const LossWeights& weights) {
  if (source.empty() || target.empty()) {
    throw Error(Errc::EmptyInput, "training batch needs source and target samples");
  }
  const auto ns = static_cast<double>(source.size());
  const auto nt = static_cast<double>(target.size());
  const int num_classes = model.config.num_classes;

  BatchEvaluation ev;
  auto& g = ev.grads;
  g.encoder = Eigen::VectorXd::Zero(model.encoder.num_params());
  g.fc_head = Eigen::VectorXd::Zero(model.fc_head.num_params());
  g.discriminator = Eigen::VectorXd::Zero(model.discriminator.num_params());
  for (const auto& b : model.banks.banks()) g.values.push_back(Eigen::VectorXd::Zero(b.size()));

  std::vector<Mlp<double>::Cache> src_cache(source.size());
  std::vector<Mlp<double>::Cache> tgt_cache(target.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i].label < 0 || source[i].label >= num_classes) {
      throw Error(Errc::LabelOutOfRange, "source label " + std::to_string(source[i].label) +
                                             " of '" + source[i].id + "' out of range");
    }
    ev.source_features.push_back(model.encoder.forward(source[i].x, &src_cache[i]));
    if (!(ev.source_features.back().norm() > 0)) {
      throw Error(Errc::ZeroNormVector, "encoded feature of '" + source[i].id + "' is zero");
    }
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    ev.target_features.push_back(model.encoder.forward(target[j].x, &tgt_cache[j]));
    if (!(ev.target_features.back().norm() > 0)) {
      throw Error(Errc::ZeroNormVector, "encoded feature of '" + target[j].id + "' is zero");
    }
  }

  std::vector<Eigen::VectorXd> src_up(source.size(), Eigen::VectorXd::Zero(model.config.feature_dim));
  std::vector<Eigen::VectorXd> tgt_up(target.size(), Eigen::VectorXd::Zero(model.config.feature_dim));

  // Classification loss through the FC head.
  Mlp<double>::Cache fc_cache;
  int correct = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Eigen::VectorXd logits = model.fc_head.forward(ev.source_features[i], &fc_cache);
    Eigen::VectorXd p = softmax(logits);
    const int label = source[i].label;
    ev.fc_loss += cross_entropy(p, label) / ns;
    if (argmax(p) == label) ++correct;
    Eigen::VectorXd dlogits = p;
    dlogits(label) -= 1.0;
    dlogits *= weights.fc / ns;
    src_up[i] += model.fc_head.backward(fc_cache, dlogits, g.fc_head);
    ev.source_probs.push_back(std::move(p));
  }
  ev.source_accuracy = correct / ns;

  // Domain loss. D estimates P(target); the encoder receives the reversed gradient.
  Mlp<double>::Cache d_cache;
  Eigen::VectorXd dz(1);
  const double lo = kDiscriminatorClamp;
  const double hi = 1.0 - kDiscriminatorClamp;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double p = sigmoid(model.discriminator.forward(ev.target_features[j], &d_cache)(0));
    const double pc = std::clamp(p, lo, hi);
    ev.adv_loss += -std::log(pc) / nt;
    dz(0) = (p > lo && p < hi) ? weights.adv * -(1.0 - p) / nt : 0.0;
    const Eigen::VectorXd df = model.discriminator.backward(d_cache, dz, g.discriminator);
    tgt_up[j] += grl_backward(df, grl_coefficient);
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double p = sigmoid(model.discriminator.forward(ev.source_features[i], &d_cache)(0));
    const double pc = std::clamp(p, lo, hi);
    ev.adv_loss += -std::log(1.0 - pc) / ns;
    dz(0) = (p > lo && p < hi) ? weights.adv * p / ns : 0.0;
    const Eigen::VectorXd df = model.discriminator.backward(d_cache, dz, g.discriminator);
    src_up[i] += grl_backward(df, grl_coefficient);
  }

  for (std::size_t i = 0; i < source.size(); ++i) {
    model.encoder.backward(src_cache[i], src_up[i], g.encoder);
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    model.encoder.backward(tgt_cache[j], tgt_up[j], g.encoder);
  }

  // Memory loss. Features and keys are constants here; only values get gradient.
  std::vector<IdcLoss<double>> per_sample;
  std::vector<std::pair<int, int>> classes;
  for (std::size_t i = 0; i < source.size(); ++i) {
    SourceReads sr;
    sr.positive_class = source[i].label;
    sr.negative_class = most_confusing_negative(ev.source_probs[i], sr.positive_class);
    const auto& pos_bank = model.banks.bank(sr.positive_class);
    const auto& neg_bank = model.banks.bank(sr.negative_class);
    std::optional<ReadResult<double>> pos, neg;
    if (!pos_bank.empty()) {
      pos = pos_bank.read(ev.source_features[i], model.banks.read_k(), false);
      sr.positive_selected = pos->selected;
    }
    if (!neg_bank.empty()) {
      neg = neg_bank.read(ev.source_features[i], model.banks.read_k(), false);
      sr.negative_selected = neg->selected;
    }
    if (pos && neg) {
      per_sample.push_back(idc_loss_and_value_grads(*pos, *neg));
      classes.emplace_back(sr.positive_class, sr.negative_class);
    }
    ev.reads.push_back(std::move(sr));
  }
  ev.idc_samples = static_cast<int>(per_sample.size());
  if (ev.idc_samples > 0) {
    const double n = ev.idc_samples;
    for (std::size_t k = 0; k < per_sample.size(); ++k) {
      ev.idc_loss += per_sample[k].loss / n;
      auto& gp = g.values[static_cast<std::size_t>(classes[k].first)];
      auto& gn = g.values[static_cast<std::size_t>(classes[k].second)];
      for (const auto& [idx, d] : per_sample[k].positive_grads) gp(idx) += weights.idc * d / n;
      for (const auto& [idx, d] : per_sample[k].negative_grads) gn(idx) += weights.idc * d / n;
    }
  }
  return ev;
}

Trainer::Trainer(const TrainConfig& config) : model_(Model::create(config)) {
  auto rng = make_stream(config.seed, "init");
  model_.encoder.initialize(rng);
  model_.fc_head.initialize(rng);
  model_.discriminator.initialize(rng);
  setup_optimizers();
}

Trainer::Trainer(Model model) : model_(std::move(model)) {
  model_.config.validate();
  setup_optimizers();
}

void Trainer::setup_optimizers() {
  const auto& c = model_.config;
  encoder_opt_ = {c.encoder_lr, c.momentum, c.weight_decay, {}, 0};
  fc_opt_ = {c.encoder_lr, c.momentum, c.weight_decay, {}, 0};
  disc_opt_ = {c.discriminator_lr, c.momentum, c.weight_decay, {}, 0};
  value_opt_.assign(static_cast<std::size_t>(c.num_classes), Adam<double>{});
  for (std::size_t k = 0; k < value_opt_.size(); ++k) {
    value_opt_[k].lr = c.memory_lr;
    value_opt_[k].resize(model_.banks.bank(static_cast<int>(k)).size());
  }
}

double Trainer::current_grl_coefficient() const {
  const auto& c = model_.config;
  const double progress = std::min(1.0, static_cast<double>(iteration_) / c.max_iterations);
  return grl_lambda(progress, c.grl_gamma, c.grl_max);
}

LossRecord Trainer::train_step(std::span<const LabeledSample> source,
                               std::span<const UnlabeledSample> target) {
  const BatchEvaluation ev = evaluate_batch(model_, source, target, current_grl_coefficient());
  auto& banks = model_.banks;

  // Age bookkeeping: source reads, then every bank for every target feature.
  for (const auto& r : ev.reads) {
    if (!r.positive_selected.empty()) banks.bank(r.positive_class).touch(r.positive_selected);
    if (!r.negative_selected.empty()) banks.bank(r.negative_class).touch(r.negative_selected);
  }
  for (const auto& f : ev.target_features) banks.refresh_with_target(f);

  encoder_opt_.step(model_.encoder.params(), ev.grads.encoder);
  fc_opt_.step(model_.fc_head.params(), ev.grads.fc_head);
  disc_opt_.step(model_.discriminator.params(), ev.grads.discriminator);
  for (int c = 0; c < banks.num_classes(); ++c) {
    auto& bank = banks.bank(c);
    if (bank.empty()) continue;
    Eigen::VectorXd values = bank.values();
    value_opt_[static_cast<std::size_t>(c)].step(values, ev.grads.values[static_cast<std::size_t>(c)]);
    bank.set_values(values);
  }

  // Writes go last so this step's reads never see this step's keys.
  last_writes_.clear();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const int label = source[i].label;
    auto& opt = value_opt_[static_cast<std::size_t>(label)];
    const WriteOutcome w =
        banks.bank(label).write(ev.source_features[i], ev.source_probs[i](label), source[i].id);
    if (w.kind == WriteOutcome::Kind::inserted) {
      opt.resize(banks.bank(label).size());
    } else {
      opt.reset_entry(w.slot_index);
    }
    last_writes_.push_back(w);
  }
  total_writes_ += source.size();

  LossRecord rec{iteration_, ev.fc_loss, ev.adv_loss, ev.idc_loss, ev.source_accuracy};
  ++iteration_;
  return rec;
}

TrainResult train(const TrainConfig& config, const TrainingView& data,
                  bool require_every_class) {
  config.validate();
  if (data.num_classes != config.num_classes) {
    throw Error(Errc::ConfigInvalid, "dataset has " + std::to_string(data.num_classes) +
                                         " classes, config expects " +
                                         std::to_string(config.num_classes));
  }
  if (data.dim != config.input_dim) {
    throw Error(Errc::ConfigInvalid, "dataset dimension " + std::to_string(data.dim) +
                                         " differs from config input_dim " +
                                         std::to_string(config.input_dim));
  }
  if (data.target.empty()) throw Error(Errc::ConfigInvalid, "no target samples");
  if (data.source.empty()) throw Error(Errc::ConfigInvalid, "no source samples");
  std::vector<int> per_class(static_cast<std::size_t>(config.num_classes), 0);
  for (const auto& s : data.source) {
    if (s.label < 0 || s.label >= config.num_classes) {
      throw Error(Errc::LabelOutOfRange, "source label out of range for '" + s.id + "'");
    }
    ++per_class[static_cast<std::size_t>(s.label)];
  }
  for (int c = 0; c < config.num_classes; ++c) {
    if (require_every_class && per_class[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::ConfigInvalid, "no source samples for class " + std::to_string(c));
    }
  }

  Trainer trainer(config);
  auto rng = make_stream(config.seed, "sampling");
  std::uniform_int_distribution<std::size_t> pick_src(0, data.source.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_tgt(0, data.target.size() - 1);
  const auto half = static_cast<std::size_t>(config.batch_size / 2);
  std::vector<LabeledSample> src_batch(half);
  std::vector<UnlabeledSample> tgt_batch(half);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(config.max_iterations));
  for (int it = 0; it < config.max_iterations; ++it) {
    for (auto& s : src_batch) s = data.source[pick_src(rng)];
    for (auto& t : tgt_batch) t = data.target[pick_tgt(rng)];
    result.history.push_back(trainer.train_step(src_batch, tgt_batch));
  }
  result.model = std::move(trainer.model());
  return result;
}

}  // namespace idc
