// Small random training instances and the finite-difference gradient check.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "idc/trainer.hpp"
#include "oracles.hpp"

namespace fixture {

/// Model whose encoder is the exact identity on R^dim: relu([x; -x]) then [I, -I].
inline idc::Model identity_model(int classes, idc::Index dim, idc::Index read_k, idc::Index capacity = 64) {
  idc::TrainConfig c;
  c.num_classes = classes;
  c.input_dim = dim;
  c.hidden_dim = 2 * dim;
  c.feature_dim = dim;
  c.read_k = read_k;
  c.memory_slots = capacity;
  auto m = idc::Model::create(c);
  auto w1 = m.encoder.weights(0);
  w1.topRows(dim).setIdentity();
  w1.bottomRows(dim) = -Eigen::MatrixXd::Identity(dim, dim);
  auto w2 = m.encoder.weights(1);
  w2.leftCols(dim).setIdentity();
  w2.rightCols(dim) = -Eigen::MatrixXd::Identity(dim, dim);
  return m;
}

struct GradientInstance {
  idc::Model model;
  std::vector<idc::LabeledSample> source;
  std::vector<idc::UnlabeledSample> target;
  double lambda = 0;
};

inline GradientInstance make_gradient_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  idc::TrainConfig cfg;
  cfg.num_classes = 3;
  cfg.input_dim = 4;
  cfg.hidden_dim = 6;
  cfg.feature_dim = 5;
  cfg.discriminator_hidden = 4;
  cfg.memory_slots = 8;
  cfg.read_k = 3;
  GradientInstance g{idc::Model::create(cfg), {}, {}, 0};
  auto& m = g.model;
  m.encoder.params() = oracle::random_vector(rng, m.encoder.num_params(), 0.6);
  m.fc_head.params() = oracle::random_vector(rng, m.fc_head.num_params(), 0.6);
  m.discriminator.params() = oracle::random_vector(rng, m.discriminator.num_params(), 0.4);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> cls(0, cfg.num_classes - 1);
  std::uniform_int_distribution<int> fill(1, 8);
  for (int c = 0; c < cfg.num_classes; ++c) {
    const int n = fill(rng);
    for (int j = 0; j < n; ++j) {
      m.banks.bank(c).write(oracle::random_vector(rng, cfg.feature_dim), u(rng), "k" + std::to_string(j));
    }
  }
  for (int i = 0; i < 4; ++i) {
    g.source.push_back({"s" + std::to_string(i), cls(rng), oracle::random_vector(rng, cfg.input_dim)});
    g.target.push_back({"t" + std::to_string(i), oracle::random_vector(rng, cfg.input_dim)});
  }
  g.lambda = u(rng);
  return g;
}

struct GradientErrors {
  double encoder = 0;
  double fc_head = 0;
  double discriminator = 0;
  double values = 0;
};

/// Relative error of each analytic gradient group against central differences of
/// the objective that group descends.
inline GradientErrors check_gradients(const GradientInstance& g) {
  const auto ev = idc::evaluate_batch(g.model, g.source, g.target, g.lambda);
  auto probe = g.model;
  auto eval = [&] { return idc::evaluate_batch(probe, g.source, g.target, g.lambda); };
  GradientErrors e;

  const auto fd_enc = oracle::finite_difference(
      [&](const Eigen::VectorXd& p) {
        probe.encoder.params() = p;
        const auto r = eval();
        return r.fc_loss - g.lambda * r.adv_loss;
      },
      g.model.encoder.params());
  probe.encoder = g.model.encoder;
  e.encoder = oracle::relative_error(ev.grads.encoder, fd_enc);

  const auto fd_fc = oracle::finite_difference(
      [&](const Eigen::VectorXd& p) {
        probe.fc_head.params() = p;
        return eval().fc_loss;
      },
      g.model.fc_head.params());
  probe.fc_head = g.model.fc_head;
  e.fc_head = oracle::relative_error(ev.grads.fc_head, fd_fc);

  const auto fd_disc = oracle::finite_difference(
      [&](const Eigen::VectorXd& p) {
        probe.discriminator.params() = p;
        return eval().adv_loss;
      },
      g.model.discriminator.params());
  probe.discriminator = g.model.discriminator;
  e.discriminator = oracle::relative_error(ev.grads.discriminator, fd_disc);

  Eigen::Index total = 0;
  for (const auto& b : g.model.banks.banks()) total += b.size();
  Eigen::VectorXd analytic(total), all_values(total);
  Eigen::Index off = 0;
  for (int c = 0; c < g.model.banks.num_classes(); ++c) {
    const auto n = g.model.banks.bank(c).size();
    analytic.segment(off, n) = ev.grads.values[static_cast<std::size_t>(c)];
    all_values.segment(off, n) = g.model.banks.bank(c).values();
    off += n;
  }
  const auto fd_values = oracle::finite_difference(
      [&](const Eigen::VectorXd& v) {
        Eigen::Index o = 0;
        for (int c = 0; c < probe.banks.num_classes(); ++c) {
          auto& b = probe.banks.bank(c);
          b.set_values(v.segment(o, b.size()));
          o += b.size();
        }
        return eval().idc_loss;
      },
      all_values);
  e.values = oracle::relative_error(analytic, fd_values);
  return e;
}

}  // namespace fixture
