#include "sscl/loss.hpp"

#include <cmath>
#include <string>

#include "sscl/error.hpp"

namespace sscl {

namespace {

struct Candidate {
  bool is_prototype;
  int row;
};

LossResult loss_impl(const Eigen::MatrixXd& z, std::span<const AnchorTerms> anchors,
                     const Eigen::MatrixXd& prototypes, const LossOptions& options,
                     double unlabeled_weight) {
  if (!(options.temperature > 0.0)) throw ArgumentError("temperature must be positive");
  const int num_classes = static_cast<int>(prototypes.rows());
  const Eigen::MatrixXd protos =
      options.normalize_prototypes ? normalize_rows(prototypes) : prototypes;
  const double inv_tau = 1.0 / options.temperature;

  LossResult result;
  result.grad_embeddings = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  Eigen::MatrixXd grad_protos = Eigen::MatrixXd::Zero(protos.rows(), protos.cols());
  result.report.per_anchor.reserve(anchors.size());
  result.report.weights.reserve(anchors.size());

  std::vector<Candidate> candidates;
  std::vector<int> positives;  // indices into candidates
  Eigen::VectorXd logits;
  for (const auto& a : anchors) {
    if (a.label && (*a.label < 0 || *a.label >= num_classes)) {
      throw DataError("anchor label " + std::to_string(*a.label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!a.positive && !a.label) {
      throw ArgumentError("anchor has neither a positive nor a label");
    }
    candidates.clear();
    positives.clear();
    for (int k : a.negatives) candidates.push_back({false, k});
    if (a.positive) {
      positives.push_back(static_cast<int>(candidates.size()));
      candidates.push_back({false, *a.positive});
    }
    for (int c = 0; c < num_classes; ++c) {
      if (a.label && *a.label == c) positives.push_back(static_cast<int>(candidates.size()));
      candidates.push_back({true, c});
    }

    const auto zn = z.row(a.anchor);
    logits.resize(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const auto& cand = candidates[k];
      const double dot = cand.is_prototype ? protos.row(cand.row).dot(zn)
                                           : z.row(cand.row).dot(zn);
      logits[static_cast<Eigen::Index>(k)] = dot * inv_tau;
    }
    const double max_logit = logits.maxCoeff();
    const Eigen::VectorXd shifted = (logits.array() - max_logit).exp().matrix();
    const double sum_exp = shifted.sum();
    const double lse = max_logit + std::log(sum_exp);

    double loss = 0.0;
    for (int p : positives) loss += lse - logits[p];

    const double weight = a.label ? 1.0 : unlabeled_weight;
    result.report.per_anchor.push_back(loss);
    result.report.weights.push_back(weight);
    result.report.total += weight * loss;

    // dL/dlogit_k = |P| softmax_k - [k in P], scaled by the anchor weight.
    Eigen::VectorXd d_logits = shifted * (static_cast<double>(positives.size()) / sum_exp);
    for (int p : positives) d_logits[p] -= 1.0;
    d_logits *= weight * inv_tau;

    Eigen::RowVectorXd d_anchor = Eigen::RowVectorXd::Zero(z.cols());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const double g = d_logits[static_cast<Eigen::Index>(k)];
      const auto& cand = candidates[k];
      if (cand.is_prototype) {
        d_anchor += g * protos.row(cand.row);
        grad_protos.row(cand.row) += g * zn;
      } else {
        d_anchor += g * z.row(cand.row);
        result.grad_embeddings.row(cand.row) += g * zn;
      }
    }
    result.grad_embeddings.row(a.anchor) += d_anchor;
  }

  if (options.normalize_prototypes) {
    result.grad_prototypes = Eigen::MatrixXd::Zero(prototypes.rows(), prototypes.cols());
    for (Eigen::Index c = 0; c < prototypes.rows(); ++c) {
      const double norm = prototypes.row(c).norm();
      if (norm == 0.0) continue;
      const Eigen::RowVectorXd unit = protos.row(c);
      const Eigen::RowVectorXd g = grad_protos.row(c);
      result.grad_prototypes.row(c) = (g - unit * unit.dot(g)) / norm;
    }
  } else {
    result.grad_prototypes = std::move(grad_protos);
  }
  return result;
}

}  // namespace

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (norm > 0.0) out.row(r) /= norm;
  }
  return out;
}

LossResult sscl_loss(const Eigen::MatrixXd& embeddings, std::span<const AnchorTerms> anchors,
                     const Eigen::MatrixXd& prototypes, const LossOptions& options) {
  return loss_impl(embeddings, anchors, prototypes, options, 1.0);
}

LossResult weighted_sscl_loss(const Eigen::MatrixXd& embeddings,
                              std::span<const AnchorTerms> anchors,
                              const Eigen::MatrixXd& prototypes,
                              const LossOptions& options, double unlabeled_weight) {
  if (!(unlabeled_weight > 0.0 && unlabeled_weight <= 1.0)) {
    throw ArgumentError("unlabeled weight must be in (0, 1]");
  }
  return loss_impl(embeddings, anchors, prototypes, options, unlabeled_weight);
}

}  // namespace sscl
