#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "sscl/error.hpp"
#include "sscl/optim.hpp"

using namespace sscl;

namespace {

ModelParams tiny_params() {
  ModelConfig c;
  c.encoder_hidden = 2;
  c.encoder_dim = 2;
  c.conv_dim = 2;
  c.hidden_dim = 2;
  c.embed_dim = 2;
  c.num_classes = 2;
  Rng rng(1);
  return ModelParams::init(c, rng);
}

std::vector<Eigen::MatrixXd> tensors(const ModelParams& p) {
  std::vector<Eigen::MatrixXd> out;
  p.visit([&](const std::string&, const Eigen::MatrixXd& m) { out.push_back(m); });
  return out;
}

}  // namespace

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 0.01), 0.01);
  EXPECT_NEAR(cosine_lr(100, 100, 0.01, 0.001), 0.001, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 0.01, 0.002), 0.006, 1e-15);
  EXPECT_NEAR(cosine_lr(25, 100, 1.0), (1 + std::cos(std::numbers::pi / 4)) / 2, 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ModelParams p = tiny_params();
  const auto before = tensors(p);
  AdamState state = AdamState::for_params(p);
  adam_step(p, GradientTape::zeros_like(p), 0.01, state);
  EXPECT_EQ(tensors(p), before);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstSign) {
  ModelParams p = tiny_params();
  GradientTape tape = GradientTape::zeros_like(p);
  tape.grad.node_mlp.w1(0, 0) = 3.0;
  tape.grad.node_mlp.w1(1, 0) = -0.5;
  AdamState state = AdamState::for_params(p);
  adam_step(p, tape, 0.01, state);
  // Bias correction makes m_hat = g and v_hat = g^2.
  const double expected0 = 0.01 * 3.0 / (3.0 + 1e-8);
  const double expected1 = 0.01 * 0.5 / (0.5 + 1e-8);
  ModelParams q = tiny_params();
  EXPECT_NEAR(q.node_mlp.w1(0, 0) - p.node_mlp.w1(0, 0), expected0, 1e-15);
  EXPECT_NEAR(p.node_mlp.w1(1, 0) - q.node_mlp.w1(1, 0), expected1, 1e-15);
  EXPECT_EQ(p.node_mlp.w1(0, 1), q.node_mlp.w1(0, 1));
}

TEST(Adam, SecondStepUsesMoments) {
  ModelParams p = tiny_params();
  const double start = p.graph_mlp.b2(0, 0);
  GradientTape tape = GradientTape::zeros_like(p);
  AdamState state = AdamState::for_params(p);
  tape.grad.graph_mlp.b2(0, 0) = 1.0;
  adam_step(p, tape, 0.1, state);
  tape.grad.graph_mlp.b2(0, 0) = -1.0;
  adam_step(p, tape, 0.1, state);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -1.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 1.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double second = 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  const double first = 0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p.graph_mlp.b2(0, 0), start - first - second, 1e-14);
}

TEST(Adam, NonFiniteGradientNamesTensorAndLeavesParams) {
  ModelParams p = tiny_params();
  const auto before = tensors(p);
  GradientTape tape = GradientTape::zeros_like(p);
  tape.grad.instance_mlp.w2(0, 0) = std::numeric_limits<double>::quiet_NaN();
  AdamState state = AdamState::for_params(p);
  try {
    adam_step(p, tape, 0.01, state);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("instance_mlp"), std::string::npos);
  }
  EXPECT_EQ(tensors(p), before);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  ModelParams a = tiny_params(), b = tiny_params();
  AdamState sa = AdamState::for_params(a), sb = AdamState::for_params(b);
  GradientTape tape = GradientTape::zeros_like(a);
  tape.grad.conv[0].w2.setConstant(0.37);
  tape.grad.prototypes.setConstant(-1.3);
  for (int k = 0; k < 5; ++k) {
    adam_step(a, tape, cosine_lr(k, 5, 0.01), sa);
    adam_step(b, tape, cosine_lr(k, 5, 0.01), sb);
  }
  EXPECT_EQ(tensors(a), tensors(b));
}
