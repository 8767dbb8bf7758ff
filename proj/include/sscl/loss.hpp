#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace sscl {

// One anchor's contrastive terms. Indices refer to rows of the embedding
// matrix passed to sscl_loss.
struct AnchorTerms {
  int anchor = 0;
  std::optional<int> positive;  // absent in the fully-supervised reduction
  std::vector<int> negatives;
  std::optional<int> label;     // present for labeled anchors
};

struct LossOptions {
  double temperature = 1.0;
  // L2-normalize prototypes before taking dot products.
  bool normalize_prototypes = true;
};

struct LossReport {
  double total = 0.0;
  std::vector<double> per_anchor;  // unweighted L_n
  std::vector<double> weights;     // alpha_n used in the total
};

struct LossResult {
  LossReport report;
  Eigen::MatrixXd grad_embeddings;  // same shape as the embeddings
  Eigen::MatrixXd grad_prototypes;  // with respect to the raw prototypes
};

// Semi-supervised contrastive loss with class prototypes:
//   L_n = -sum_{z+ in P_n} log( exp(z+ . z_n / tau) / sum_{z_k in A_n} exp(z_k . z_n / tau) )
// with P_n = {positive, prototype of the label} for labeled anchors and
// {positive} otherwise, and A_n = negatives + positive + all prototypes.
// An anchor without a positive uses P_n = {prototype of the label} and
// A_n = negatives + prototypes, which with no negatives is softmax cross
// entropy over prototype logits. The total is sum_n L_n.
// Throws DataError when a label is outside [0, C) and ArgumentError when an
// anchor has neither a positive nor a label.
LossResult sscl_loss(const Eigen::MatrixXd& embeddings,
                     std::span<const AnchorTerms> anchors,
                     const Eigen::MatrixXd& prototypes, const LossOptions& options);

// Same terms with unlabeled anchors weighted by `unlabeled_weight`:
// total = sum_n alpha_n L_n, alpha_n = 1 for labeled anchors.
LossResult weighted_sscl_loss(const Eigen::MatrixXd& embeddings,
                              std::span<const AnchorTerms> anchors,
                              const Eigen::MatrixXd& prototypes,
                              const LossOptions& options, double unlabeled_weight);

// Row-wise L2 normalization, leaving zero rows untouched.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);

}  // namespace sscl
