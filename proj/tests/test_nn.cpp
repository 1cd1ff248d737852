#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "idc/nn.hpp"
#include "oracles.hpp"

using idc::Activation;
using idc::Mlp;

namespace {

Mlp<double> random_net(std::mt19937_64& rng, std::vector<idc::LayerShape> shapes) {
  Mlp<double> net(std::move(shapes));
  net.params() = oracle::random_vector(rng, net.num_params(), 0.7);
  return net;
}

/// Layer-by-layer evaluation reading weights from the flat parameter layout.
Eigen::VectorXd straight_line_forward(const Mlp<double>& net, Eigen::VectorXd h) {
  const auto& p = net.params();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto s = net.layers()[l];
    Eigen::VectorXd z(s.out);
    for (Eigen::Index r = 0; r < s.out; ++r) {
      double acc = p(off + s.out * s.in + r);
      for (Eigen::Index c = 0; c < s.in; ++c) acc += p(off + r * s.in + c) * h(c);
      z(r) = s.activation == Activation::relu ? std::max(0.0, acc) : acc;
    }
    off += s.out * s.in + s.out;
    h = z;
  }
  return h;
}

}  // namespace

TEST(Mlp, IdentityNet) {
  Mlp<double> net({{2, 2, Activation::identity}});
  net.weights(0).setIdentity();
  EXPECT_EQ(net.forward(Eigen::Vector2d(2, 3)), Eigen::Vector2d(2, 3));
}

TEST(Mlp, ZeroNetGivesZero) {
  Mlp<double> net({{3, 4, Activation::relu}, {4, 2, Activation::identity}});
  EXPECT_TRUE(net.forward(Eigen::Vector3d(1, -2, 3)).isZero(0));
}

TEST(Mlp, MatchesStraightLineOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    auto net = random_net(rng, {{5, 7, Activation::relu}, {7, 6, Activation::relu}, {6, 3, Activation::identity}});
    const Eigen::VectorXd x = oracle::random_vector(rng, 5);
    EXPECT_LT((net.forward(x) - straight_line_forward(net, x)).norm(), 1e-12);
  }
}

TEST(Mlp, ConstructionErrors) {
  EXPECT_THROW(Mlp<double>({{3, 4, Activation::relu}, {5, 2, Activation::identity}}), idc::Error);
  EXPECT_THROW(Mlp<double>({{3, 4, Activation::relu}}), idc::Error);
  Mlp<double> net({{3, 2, Activation::identity}});
  try {
    net.forward(Eigen::Vector2d(1, 1));
    FAIL();
  } catch (const idc::Error& e) {
    EXPECT_EQ(e.code(), idc::Errc::DimensionMismatch);
  }
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    auto net = random_net(rng, {{4, 6, Activation::relu}, {6, 3, Activation::identity}});
    const Eigen::VectorXd x = oracle::random_vector(rng, 4);
    const Eigen::VectorXd w = oracle::random_vector(rng, 3);
    // Scalar objective L = w . net(x).
    Mlp<double>::Cache cache;
    net.forward(x, &cache);
    Eigen::VectorXd pg = Eigen::VectorXd::Zero(net.num_params());
    const Eigen::VectorXd xg = net.backward(cache, w, pg);

    auto probe = net;
    const auto fd_params = oracle::finite_difference(
        [&](const Eigen::VectorXd& p) {
          probe.params() = p;
          return w.dot(probe.forward(x));
        },
        net.params());
    const auto fd_input = oracle::finite_difference(
        [&](const Eigen::VectorXd& xx) { return w.dot(net.forward(xx)); }, x);
    EXPECT_LE(oracle::relative_error(pg, fd_params), 1e-4);
    EXPECT_LE(oracle::relative_error(xg, fd_input), 1e-4);
  }
}

TEST(Mlp, BackwardAccumulatesAndZeroUpstream) {
  std::mt19937_64 rng(4);
  auto net = random_net(rng, {{3, 5, Activation::relu}, {5, 2, Activation::identity}});
  Mlp<double>::Cache cache;
  net.forward(oracle::random_vector(rng, 3), &cache);
  Eigen::VectorXd pg = Eigen::VectorXd::Zero(net.num_params());
  net.backward(cache, Eigen::Vector2d::Zero(), pg);
  EXPECT_TRUE(pg.isZero(0));
  const Eigen::Vector2d up(0.3, -1.1);
  net.backward(cache, up, pg);
  const Eigen::VectorXd once = pg;
  net.backward(cache, up, pg);
  EXPECT_LT((pg - 2 * once).norm(), 1e-12);
}

TEST(Mlp, LinearInputGradIsWeightsTransposeUpstream) {
  std::mt19937_64 rng(5);
  auto net = random_net(rng, {{4, 3, Activation::identity}});
  Mlp<double>::Cache cache;
  net.forward(oracle::random_vector(rng, 4), &cache);
  Eigen::VectorXd pg = Eigen::VectorXd::Zero(net.num_params());
  const Eigen::Vector3d up(1, -2, 0.5);
  const Eigen::VectorXd expected = net.weights(0).transpose() * up;
  EXPECT_EQ(net.backward(cache, up, pg), expected);
}

TEST(Mlp, StaleCacheRejected) {
  Mlp<double> a({{3, 2, Activation::identity}});
  Mlp<double> b({{4, 2, Activation::identity}});
  Mlp<double>::Cache cache;
  a.forward(Eigen::Vector3d(1, 2, 3), &cache);
  Eigen::VectorXd pg = Eigen::VectorXd::Zero(b.num_params());
  try {
    b.backward(cache, Eigen::Vector2d(1, 1), pg);
    FAIL();
  } catch (const idc::Error& e) {
    EXPECT_EQ(e.code(), idc::Errc::StaleCache);
  }
}

TEST(Grl, Definition) {
  EXPECT_EQ(idc::grl_backward(Eigen::Vector2d(1, -2), 1.0), Eigen::Vector2d(-1, 2));
  EXPECT_TRUE(idc::grl_backward(Eigen::Vector2d(1, -2), 0.0).isZero(0));
  EXPECT_EQ(idc::grl_backward(Eigen::Matrix<double, 1, 1>(4.0), 0.5)(0), -2.0);
}

TEST(Grl, Schedule) {
  EXPECT_DOUBLE_EQ(idc::grl_lambda(0.0), 0.0);
  EXPECT_NEAR(idc::grl_lambda(1.0), 2.0 / (1.0 + std::exp(-10.0)) - 1.0, 1e-15);
  double prev = -1;
  for (int i = 0; i <= 100; ++i) {
    const double l = idc::grl_lambda(i / 100.0);
    EXPECT_GE(l, prev);
    EXPECT_LT(l, 1.0);
    prev = l;
  }
}

TEST(Sgd, FirstStepAndMomentum) {
  idc::SgdMomentum<double> opt{0.1, 0.9, 0.0, {}, 0};
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  opt.step(p, Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(p(0), -0.1);
  opt.step(p, Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(p(0), -0.1 - 0.1 * 1.9);
}

TEST(Sgd, ZeroGradLeavesParams) {
  idc::SgdMomentum<double> opt{0.1, 0.9, 0.0, {}, 0};
  Eigen::VectorXd p = Eigen::Vector3d(1, -2, 3);
  const Eigen::VectorXd before = p;
  opt.step(p, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(p, before);
}

TEST(Sgd, WeightDecayPullsToZero) {
  idc::SgdMomentum<double> opt{0.1, 0.0, 0.5, {}, 0};
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 2.0);
  opt.step(p, Eigen::VectorXd::Zero(1));
  EXPECT_DOUBLE_EQ(p(0), 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  idc::Adam<double> opt;
  opt.lr = 1e-3;
  Eigen::VectorXd p = Eigen::Vector3d(0, 0, 0);
  const Eigen::Vector3d g(2.5, -0.01, 40);
  opt.step(p, g);
  for (int i = 0; i < 3; ++i) {
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    const double expected = -opt.lr * g(i) / (std::abs(g(i)) + opt.eps);
    EXPECT_NEAR(p(i), expected, 1e-15);
    EXPECT_NEAR(p(i), -opt.lr * (g(i) > 0 ? 1 : -1), 1e-8);
  }
}

TEST(Adam, ResizeAndReset) {
  idc::Adam<double> opt;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  opt.step(p, Eigen::Vector2d(1, 1));
  opt.resize(3);
  EXPECT_EQ(opt.m.size(), 3);
  EXPECT_EQ(opt.m(2), 0.0);
  opt.reset_entry(0);
  EXPECT_EQ(opt.m(0), 0.0);
  EXPECT_EQ(opt.v(0), 0.0);
  EXPECT_NE(opt.m(1), 0.0);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(opt.step(q, Eigen::Vector2d(1, 1)), idc::Error);
}
