#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sscl/augment.hpp"
#include "sscl/loss.hpp"
#include "sscl/net.hpp"
#include "sscl/soia.hpp"
#include "sscl/stgraph.hpp"

namespace sscl {

enum class LearningMode {
  kScl,    // positive = SOIA nearest batch member
  kGcl,    // positive = augmented view of the anchor
  kFsl,    // labeled data only, prototype is the only positive
  kUnsup,  // kScl or kGcl flavor with every label ignored
};

LearningMode parse_learning_mode(const std::string& name);
std::string to_string(LearningMode mode);

struct TrainConfig {
  LearningMode mode = LearningMode::kScl;
  LearningMode unsup_flavor = LearningMode::kScl;
  int batch_size = 32;
  int epochs = 50;
  double lr_init = 0.01;
  double lr_min = 0.0;
  double margin_fraction = 0.25;
  double unlabeled_weight = 1.0;
  double temperature = 1.0;
  bool normalize = true;  // unit embeddings and prototypes
  std::uint64_t seed = 0;
  int threads = 1;
  int eval_every = 1;  // validation mAP every n epochs, 0 = never
  ModelConfig model;   // model.num_classes is the class count C
  AugmentConfig augment;

  void validate() const;
  // Model config with `normalize` applied.
  ModelConfig effective_model() const;
  LossOptions loss_options() const;
};

// Graphs, SOIA tracks and labels of a clip collection. Labels are kept apart
// from the graphs and every read goes through label(), which is counted.
class Dataset {
 public:
  static Dataset from_clips(std::span<const TrackedClip> clips,
                            const GraphOptions& options = {});

  // Any label carried by `graph` is moved into the counted slot.
  void add(StGraph graph, InstanceTracks tracks, std::optional<int> label);

  std::size_t size() const { return graphs_.size(); }
  bool empty() const { return graphs_.empty(); }
  const StGraph& graph(std::size_t i) const { return graphs_.at(i); }
  std::span<const StGraph> graphs() const { return graphs_; }
  const InstanceTracks& tracks(std::size_t i) const { return tracks_.at(i); }
  std::span<const InstanceTracks> all_tracks() const { return tracks_; }
  std::optional<int> label(std::size_t i) const;
  std::size_t label_reads() const { return label_reads_; }

  // Full pairwise SOIA matrix, computed once and shared by copies.
  const Eigen::MatrixXd& distances(int threads = 1) const;
  bool has_distances() const { return distances_ != nullptr; }
  void set_distances(Eigen::MatrixXd distances);

 private:
  std::vector<StGraph> graphs_;
  std::vector<InstanceTracks> tracks_;
  std::vector<std::optional<int>> labels_;
  mutable std::size_t label_reads_ = 0;
  mutable std::shared_ptr<const Eigen::MatrixXd> distances_;
};

// Rows of the embedding matrix are members 0..B-1 followed, in GCL flavor,
// by one augmented view per member at B..2B-1.
struct Batch {
  std::vector<int> members;  // dataset indices
  std::vector<StGraph> views;
  std::vector<AnchorTerms> anchors;
};

// Dataset indices eligible for batches: labeled ones for FSL, all otherwise.
std::vector<int> training_pool(const Dataset& dataset, const TrainConfig& config);

// Anchors, positives and negatives for the given members.
Batch make_batch(const Dataset& dataset, std::span<const int> members,
                 const TrainConfig& config, Rng& rng);

// Uniform sample of batch_size pool members without replacement, then
// make_batch. Throws ConfigError when the pool is smaller than a batch.
Batch make_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng);

struct StepReport {
  LossReport loss;
  double grad_norm = 0.0;
  double lr = 0.0;
};

// Forward, loss, backward over one batch. The tape receives the summed
// parameter gradient; reduction order is independent of `threads`.
StepReport batch_gradient(const Dataset& dataset, const Batch& batch,
                          const ModelParams& params, const TrainConfig& config,
                          GradientTape& tape);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;  // rate of the epoch's first step
  double loss = 0.0;  // mean weighted loss per anchor
  double grad_norm = 0.0;  // mean over steps
  std::optional<double> val_map;
};

std::string to_json_line(const EpochRecord& record);

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

// Raised when the loss or a gradient stops being finite. Carries the
// parameters of the last completed step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, ModelParams last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const ModelParams& last_good() const { return last_good_; }

 private:
  ModelParams last_good_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Full optimization loop: per epoch, shuffled pool chunks of batch_size
// (floor(N / B) batches), Adam with a cosine schedule over all steps.
// Validation mAP is logged when a validation set is given and the mode is
// not unsupervised.
TrainResult train_run(const Dataset& train, const TrainConfig& config,
                      const Dataset* validation = nullptr,
                      const EpochCallback& on_epoch = {});

// Mean AP of prototype-softmax scores on labeled validation entries.
double validation_map(const Dataset& validation, const ModelParams& params,
                      const TrainConfig& config,
                      const Eigen::MatrixXd* prototypes = nullptr);

}  // namespace sscl
