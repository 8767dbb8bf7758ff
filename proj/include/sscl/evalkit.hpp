#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sscl/soia.hpp"

namespace sscl {

// Softmax over z . c_k / temperature.
Eigen::VectorXd class_scores(const Eigen::RowVectorXd& z, const Eigen::MatrixXd& prototypes,
                             double temperature, bool normalize_prototypes = true);

// Row n holds class_scores of embeddings.row(n).
Eigen::MatrixXd class_score_matrix(const Eigen::MatrixXd& embeddings,
                                   const Eigen::MatrixXd& prototypes, double temperature,
                                   bool normalize_prototypes = true);

// Per-class mean of labeled embeddings, for reading out classes from an
// embedding trained without prototypes' class semantics. Classes without
// examples get a zero row.
Eigen::MatrixXd class_mean_prototypes(const Eigen::MatrixXd& embeddings,
                                      std::span<const int> labels, int num_classes);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};
using PrCurve = std::vector<PrPoint>;

// One point per rank cut of the score-descending order (ties by index).
PrCurve pr_curve(std::span<const double> scores, std::span<const char> positive);

enum class ApConvention {
  kRankSum,     // sum_k precision@k * delta recall@k
  kElevenPoint, // mean of max precision at recall >= 0, 0.1, ..., 1
};

// Area under the step precision-recall curve. std::nullopt when there are no
// positives (the class is skipped by mean_ap).
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const char> positive,
                                        ApConvention convention = ApConvention::kRankSum);

// Unweighted mean of the defined entries. Throws ArgumentError when none is
// defined.
double mean_ap(std::span<const std::optional<double>> per_class);

struct ApTable {
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
};

// One-vs-rest AP per class from an N x C score matrix and labels in [0, C).
ApTable evaluate_classification(const Eigen::MatrixXd& scores, std::span<const int> labels,
                                ApConvention convention = ApConvention::kRankSum);

double cosine_similarity(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

struct RetrievalHit {
  std::string clip_id;
  double cosine = 0.0;
  std::optional<double> soia_distance;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<RetrievalHit> hits;  // cosine non-increasing
};

// Top-k corpus entries by cosine similarity, ties by clip id. Entries whose
// id equals the query id are skipped. k larger than the corpus returns the
// full ranking. Throws ArgumentError on an empty corpus.
RetrievalResult retrieve_knn(const std::string& query_id, const Eigen::RowVectorXd& query,
                             std::span<const std::string> corpus_ids,
                             const Eigen::MatrixXd& corpus, int k);

// Mean soia_distance(query, top1) over query/top-1 pairs.
double avg_soia_of_retrievals(std::span<const InstanceTracks> queries,
                              std::span<const InstanceTracks> top1);

}  // namespace sscl
