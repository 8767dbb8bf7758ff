#include "sscl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sscl/error.hpp"
#include "sscl/loss.hpp"

namespace sscl {

Eigen::VectorXd class_scores(const Eigen::RowVectorXd& z, const Eigen::MatrixXd& prototypes,
                             double temperature, bool normalize_prototypes) {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  if (prototypes.cols() != z.cols()) throw ArgumentError("prototype width mismatch");
  const Eigen::MatrixXd protos =
      normalize_prototypes ? normalize_rows(prototypes) : prototypes;
  Eigen::VectorXd logits = (protos * z.transpose()) / temperature;
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

Eigen::MatrixXd class_score_matrix(const Eigen::MatrixXd& embeddings,
                                   const Eigen::MatrixXd& prototypes, double temperature,
                                   bool normalize_prototypes) {
  Eigen::MatrixXd out(embeddings.rows(), prototypes.rows());
  for (Eigen::Index n = 0; n < embeddings.rows(); ++n) {
    out.row(n) = class_scores(embeddings.row(n), prototypes, temperature, normalize_prototypes)
                     .transpose();
  }
  return out;
}

Eigen::MatrixXd class_mean_prototypes(const Eigen::MatrixXd& embeddings,
                                      std::span<const int> labels, int num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
    throw ArgumentError("label count does not match embedding count");
  }
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_classes, embeddings.cols());
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int c = labels[n];
    if (c < 0 || c >= num_classes) throw DataError("label outside class range");
    sums.row(c) += embeddings.row(static_cast<Eigen::Index>(n));
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) sums.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  return sums;
}

namespace {

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

PrCurve pr_curve(std::span<const double> scores, std::span<const char> positive) {
  if (scores.size() != positive.size()) throw ArgumentError("score/label length mismatch");
  const auto total = static_cast<double>(std::count(positive.begin(), positive.end(), char{1}));
  PrCurve curve;
  curve.reserve(scores.size());
  const auto order = rank_order(scores);
  double tp = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (positive[order[k]]) tp += 1.0;
    curve.push_back({total > 0.0 ? tp / total : 0.0, tp / static_cast<double>(k + 1)});
  }
  return curve;
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const char> positive,
                                        ApConvention convention) {
  if (scores.size() != positive.size()) throw ArgumentError("score/label length mismatch");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ArgumentError("non-finite score");
  }
  const auto total = std::count(positive.begin(), positive.end(), char{1});
  if (total == 0) return std::nullopt;

  const auto order = rank_order(scores);
  if (convention == ApConvention::kRankSum) {
    double sum = 0.0;
    double tp = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (!positive[order[k]]) continue;
      tp += 1.0;
      sum += tp / static_cast<double>(k + 1);
    }
    return sum / static_cast<double>(total);
  }

  const PrCurve curve = pr_curve(scores, positive);
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double level = i / 10.0;
    double best = 0.0;
    for (const auto& p : curve) {
      if (p.recall >= level - 1e-12) best = std::max(best, p.precision);
    }
    sum += best;
  }
  return sum / 11.0;
}

double mean_ap(std::span<const std::optional<double>> per_class) {
  double sum = 0.0;
  int count = 0;
  for (const auto& ap : per_class) {
    if (!ap) continue;
    sum += *ap;
    ++count;
  }
  if (count == 0) throw ArgumentError("no class has a positive example");
  return sum / count;
}

ApTable evaluate_classification(const Eigen::MatrixXd& scores, std::span<const int> labels,
                                ApConvention convention) {
  if (static_cast<Eigen::Index>(labels.size()) != scores.rows()) {
    throw ArgumentError("label count does not match score rows");
  }
  const auto num_classes = static_cast<int>(scores.cols());
  ApTable table;
  std::vector<double> column(labels.size());
  std::vector<char> positive(labels.size());
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t n = 0; n < labels.size(); ++n) {
      column[n] = scores(static_cast<Eigen::Index>(n), c);
      positive[n] = labels[n] == c ? 1 : 0;
    }
    table.per_class.push_back(average_precision(column, positive, convention));
  }
  table.mean = mean_ap(table.per_class);
  return table;
}

double cosine_similarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

RetrievalResult retrieve_knn(const std::string& query_id, const Eigen::RowVectorXd& query,
                             std::span<const std::string> corpus_ids,
                             const Eigen::MatrixXd& corpus, int k) {
  if (static_cast<Eigen::Index>(corpus_ids.size()) != corpus.rows()) {
    throw ArgumentError("corpus id count does not match embedding rows");
  }
  if (corpus_ids.empty()) throw ArgumentError("empty retrieval corpus");
  if (k < 1) throw ArgumentError("k must be at least 1");

  std::vector<RetrievalHit> all;
  all.reserve(corpus_ids.size());
  for (std::size_t i = 0; i < corpus_ids.size(); ++i) {
    if (corpus_ids[i] == query_id) continue;
    all.push_back({corpus_ids[i],
                   cosine_similarity(query, corpus.row(static_cast<Eigen::Index>(i))),
                   std::nullopt});
  }
  std::sort(all.begin(), all.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.clip_id < b.clip_id;
  });
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  return {query_id, std::move(all)};
}

double avg_soia_of_retrievals(std::span<const InstanceTracks> queries,
                              std::span<const InstanceTracks> top1) {
  if (queries.size() != top1.size()) throw ArgumentError("query/result count mismatch");
  if (queries.empty()) throw ArgumentError("no retrievals to average");
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) sum += soia_distance(queries[i], top1[i]);
  return sum / static_cast<double>(queries.size());
}

}  // namespace sscl
