#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sscl/error.hpp"
#include "sscl/loss.hpp"

using namespace sscl;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<AnchorTerms> mixed_anchors(int batch, int classes, std::mt19937_64& rng) {
  std::vector<AnchorTerms> out;
  for (int k = 0; k < batch; ++k) {
    AnchorTerms a;
    a.anchor = k;
    a.positive = (k + 1) % batch;
    for (int j = 0; j < batch; ++j)
      if (j != k && j != *a.positive) a.negatives.push_back(j);
    if (k % 2 == 0) a.label = static_cast<int>(rng() % static_cast<unsigned>(classes));
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST(SsclLoss, AllZeroDotProductsGiveTwoLogFour) {
  // Six mutually orthogonal unit vectors: anchor, positive, negative, two
  // prototypes (and a spare).
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 6);
  z(0, 0) = z(1, 1) = z(2, 2) = 1.0;
  Eigen::MatrixXd protos = Eigen::MatrixXd::Zero(2, 6);
  protos(0, 3) = protos(1, 4) = 1.0;
  const AnchorTerms a{0, 1, {2}, 0};
  const auto r = sscl_loss(z, std::span(&a, 1), protos, {1.0, true});
  EXPECT_NEAR(r.report.total, 2.0 * std::log(4.0), 1e-15);
  EXPECT_NEAR(r.report.per_anchor[0], 2.0 * std::log(4.0), 1e-15);
}

TEST(SsclLoss, PrototypeOnlyAnchorIsCrossEntropy) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd z = random_matrix(1, 5, rng);
  const Eigen::MatrixXd protos = random_matrix(4, 5, rng);
  const AnchorTerms a{0, std::nullopt, {}, 2};
  const double tau = 0.7;
  const double loss = sscl_loss(z, std::span(&a, 1), protos, {tau, false}).report.total;
  Eigen::VectorXd logits = protos * z.row(0).transpose() / tau;
  const double ce = -(logits(2) - std::log(logits.array().exp().sum()));
  EXPECT_NEAR(loss, ce, 1e-12);
}

TEST(SsclLoss, UnlabeledAnchorHasOnlyThePositiveTerm) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd z = random_matrix(3, 4, rng);
  const Eigen::MatrixXd protos = random_matrix(2, 4, rng);
  const AnchorTerms a{0, 1, {2}, std::nullopt};
  const auto r = sscl_loss(z, std::span(&a, 1), protos, {1.0, false});
  const Eigen::RowVectorXd v = z.row(0);
  const double s_pos = v.dot(z.row(1)), s_neg = v.dot(z.row(2));
  const double s_c0 = v.dot(protos.row(0)), s_c1 = v.dot(protos.row(1));
  const double lse = std::log(std::exp(s_pos) + std::exp(s_neg) + std::exp(s_c0) + std::exp(s_c1));
  EXPECT_NEAR(r.report.total, lse - s_pos, 1e-12);
}

TEST(SsclLoss, StableForHugeLogits) {
  Eigen::MatrixXd z(3, 2);
  z << 1e3, 0, 1e3, 1, -1e3, 0;
  const Eigen::MatrixXd protos = Eigen::MatrixXd::Identity(2, 2);
  const AnchorTerms a{0, 1, {2}, 1};
  const auto r = sscl_loss(z, std::span(&a, 1), protos, {0.01, false});
  EXPECT_TRUE(std::isfinite(r.report.total));
  EXPECT_TRUE(r.grad_embeddings.allFinite());
  EXPECT_TRUE(r.grad_prototypes.allFinite());
}

TEST(SsclLoss, InvariantToNegativeAndPrototypeOrder) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd z = random_matrix(5, 4, rng);
  const Eigen::MatrixXd protos = random_matrix(3, 4, rng);
  AnchorTerms a{0, 1, {2, 3, 4}, 1};
  const double base = sscl_loss(z, std::span(&a, 1), protos, {0.5, true}).report.total;
  AnchorTerms b{0, 1, {4, 2, 3}, 1};
  EXPECT_NEAR(sscl_loss(z, std::span(&b, 1), protos, {0.5, true}).report.total, base, 1e-12);
  Eigen::MatrixXd swapped = protos;
  swapped.row(0).swap(swapped.row(2));
  EXPECT_NEAR(sscl_loss(z, std::span(&a, 1), swapped, {0.5, true}).report.total, base, 1e-12);
}

TEST(SsclLoss, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  Eigen::MatrixXd z = random_matrix(6, 5, rng);
  Eigen::MatrixXd protos = random_matrix(3, 5, rng);
  const auto anchors = mixed_anchors(6, 3, rng);
  const LossOptions opts{0.4, true};
  const auto r = sscl_loss(z, anchors, protos, opts);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double saved = z.data()[i];
    z.data()[i] = saved + h;
    const double plus = sscl_loss(z, anchors, protos, opts).report.total;
    z.data()[i] = saved - h;
    const double minus = sscl_loss(z, anchors, protos, opts).report.total;
    z.data()[i] = saved;
    EXPECT_NEAR(r.grad_embeddings.data()[i], (plus - minus) / (2 * h), 1e-6);
  }
  for (Eigen::Index i = 0; i < protos.size(); ++i) {
    const double saved = protos.data()[i];
    protos.data()[i] = saved + h;
    const double plus = sscl_loss(z, anchors, protos, opts).report.total;
    protos.data()[i] = saved - h;
    const double minus = sscl_loss(z, anchors, protos, opts).report.total;
    protos.data()[i] = saved;
    EXPECT_NEAR(r.grad_prototypes.data()[i], (plus - minus) / (2 * h), 1e-6);
  }
}

TEST(SsclLoss, PositiveIsPulledAndNegativePushed) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd z = normalize_rows(random_matrix(3, 4, rng));
  const Eigen::MatrixXd protos = normalize_rows(random_matrix(2, 4, rng));
  const AnchorTerms a{0, 1, {2}, std::nullopt};
  const auto r = sscl_loss(z, std::span(&a, 1), protos, {0.5, false});
  // Descent moves the positive towards the anchor and the negative away.
  EXPECT_GT(-r.grad_embeddings.row(1).dot(z.row(0)), 0.0);
  EXPECT_LT(-r.grad_embeddings.row(2).dot(z.row(0)), 0.0);
}

TEST(WeightedLoss, UnitWeightIsBitIdentical) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd z = random_matrix(8, 4, rng);
  const Eigen::MatrixXd protos = random_matrix(3, 4, rng);
  const auto anchors = mixed_anchors(8, 3, rng);
  const auto a = sscl_loss(z, anchors, protos, {0.3, true});
  const auto b = weighted_sscl_loss(z, anchors, protos, {0.3, true}, 1.0);
  EXPECT_EQ(a.report.total, b.report.total);
  EXPECT_EQ(a.report.per_anchor, b.report.per_anchor);
  EXPECT_EQ(a.grad_embeddings, b.grad_embeddings);
  EXPECT_EQ(a.grad_prototypes, b.grad_prototypes);
}

TEST(WeightedLoss, ScalesOnlyUnlabeledAnchors) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd z = random_matrix(8, 4, rng);
  const Eigen::MatrixXd protos = random_matrix(3, 4, rng);
  const auto anchors = mixed_anchors(8, 3, rng);
  const auto r = weighted_sscl_loss(z, anchors, protos, {0.3, true}, 0.25);
  double expected = 0.0;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double w = anchors[k].label ? 1.0 : 0.25;
    EXPECT_EQ(r.report.weights[k], w);
    expected += w * r.report.per_anchor[k];
  }
  EXPECT_NEAR(r.report.total, expected, 1e-12);
}

TEST(SsclLoss, Errors) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Ones(2, 2);
  const Eigen::MatrixXd protos = Eigen::MatrixXd::Identity(2, 2);
  const AnchorTerms bad_label{0, 1, {}, 2};
  EXPECT_THROW(sscl_loss(z, std::span(&bad_label, 1), protos, {}), DataError);
  const AnchorTerms nothing{0, std::nullopt, {}, std::nullopt};
  EXPECT_THROW(sscl_loss(z, std::span(&nothing, 1), protos, {}), ArgumentError);
}

TEST(NormalizeRows, LeavesZeroRows) {
  Eigen::MatrixXd m(2, 2);
  m << 3, 4, 0, 0;
  const Eigen::MatrixXd n = normalize_rows(m);
  EXPECT_DOUBLE_EQ(n(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.8);
  EXPECT_EQ(n(1, 0), 0.0);
}
