#include "sscl/train.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sscl/error.hpp"
#include "sscl/evalkit.hpp"
#include "sscl/optim.hpp"
#include "sscl/parallel.hpp"

namespace sscl {

namespace {

// Graphs per backward accumulation group. Fixed so the gradient sum does not
// depend on the worker count.
constexpr std::size_t kBackwardGroup = 4;

LearningMode flavor_of(const TrainConfig& config) {
  return config.mode == LearningMode::kUnsup ? config.unsup_flavor : config.mode;
}

double tape_norm(const GradientTape& tape) {
  double sq = 0.0;
  tape.grad.visit([&](const std::string&, const Eigen::MatrixXd& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

}  // namespace

LearningMode parse_learning_mode(const std::string& name) {
  if (name == "scl") return LearningMode::kScl;
  if (name == "gcl") return LearningMode::kGcl;
  if (name == "fsl") return LearningMode::kFsl;
  if (name == "unsup") return LearningMode::kUnsup;
  throw ArgumentError("unknown learning mode '" + name + "'");
}

std::string to_string(LearningMode mode) {
  switch (mode) {
    case LearningMode::kScl: return "scl";
    case LearningMode::kGcl: return "gcl";
    case LearningMode::kFsl: return "fsl";
    case LearningMode::kUnsup: return "unsup";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(lr_init > 0.0)) throw ConfigError("lr_init must be positive");
  if (!(lr_min >= 0.0 && lr_min <= lr_init)) throw ConfigError("lr_min must be in [0, lr_init]");
  if (!(margin_fraction >= 0.0)) throw ConfigError("margin_fraction must be non-negative");
  if (!(unlabeled_weight > 0.0 && unlabeled_weight <= 1.0)) {
    throw ConfigError("unlabeled_weight must be in (0, 1]");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (unsup_flavor != LearningMode::kScl && unsup_flavor != LearningMode::kGcl) {
    throw ConfigError("unsupervised flavor must be scl or gcl");
  }
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
  effective_model().validate();
  augment.validate();
  if (flavor_of(*this) == LearningMode::kScl &&
      1 + margin_count(margin_fraction, batch_size) > batch_size - 1) {
    throw ConfigError("margin_fraction leaves no negatives for batch_size " +
                      std::to_string(batch_size));
  }
}

ModelConfig TrainConfig::effective_model() const {
  ModelConfig m = model;
  m.normalize = normalize;
  return m;
}

LossOptions TrainConfig::loss_options() const {
  return {temperature, normalize};
}

Dataset Dataset::from_clips(std::span<const TrackedClip> clips, const GraphOptions& options) {
  Dataset d;
  for (const auto& clip : clips) {
    d.add(build_graph(clip, options), InstanceTracks::from_clip(clip), clip.label);
  }
  return d;
}

void Dataset::add(StGraph graph, InstanceTracks tracks, std::optional<int> label) {
  graph.label.reset();
  graphs_.push_back(std::move(graph));
  tracks_.push_back(std::move(tracks));
  labels_.push_back(label);
  distances_.reset();
}

std::optional<int> Dataset::label(std::size_t i) const {
  ++label_reads_;
  return labels_.at(i);
}

const Eigen::MatrixXd& Dataset::distances(int threads) const {
  if (!distances_) {
    distances_ = std::make_shared<const Eigen::MatrixXd>(distance_matrix(tracks_, threads));
  }
  return *distances_;
}

void Dataset::set_distances(Eigen::MatrixXd distances) {
  const auto n = static_cast<Eigen::Index>(size());
  if (distances.rows() != n || distances.cols() != n) {
    throw ArgumentError("distance matrix shape does not match the dataset");
  }
  distances_ = std::make_shared<const Eigen::MatrixXd>(std::move(distances));
}

std::vector<int> training_pool(const Dataset& dataset, const TrainConfig& config) {
  std::vector<int> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (config.mode != LearningMode::kFsl || dataset.label(i)) pool.push_back(static_cast<int>(i));
  }
  if (pool.empty()) {
    throw ConfigError(config.mode == LearningMode::kFsl
                          ? "fully-supervised training needs labeled clips"
                          : "empty training set");
  }
  return pool;
}

Batch make_batch(const Dataset& dataset, std::span<const int> members,
                 const TrainConfig& config, Rng& rng) {
  const int b = static_cast<int>(members.size());
  if (b < 2) throw ConfigError("a batch needs at least two members");
  Batch batch;
  batch.members.assign(members.begin(), members.end());
  const bool use_labels = config.mode != LearningMode::kUnsup;
  const LearningMode flavor = flavor_of(config);

  auto label_of = [&](int k) -> std::optional<int> {
    if (!use_labels) return std::nullopt;
    return dataset.label(static_cast<std::size_t>(members[static_cast<std::size_t>(k)]));
  };

  if (flavor == LearningMode::kFsl) {
    for (int k = 0; k < b; ++k) {
      auto label = label_of(k);
      if (!label) throw DataError("fully-supervised batch member without a label");
      batch.anchors.push_back({k, std::nullopt, {}, label});
    }
  } else if (flavor == LearningMode::kScl) {
    const Eigen::MatrixXd& d = dataset.distances(config.threads);
    std::vector<double> row(static_cast<std::size_t>(b));
    for (int k = 0; k < b; ++k) {
      for (int j = 0; j < b; ++j) {
        row[static_cast<std::size_t>(j)] = d(members[static_cast<std::size_t>(k)],
                                             members[static_cast<std::size_t>(j)]);
      }
      PosNegSelection sel = select_pos_neg(k, row, config.margin_fraction);
      batch.anchors.push_back({k, sel.positive, std::move(sel.negatives), label_of(k)});
    }
  } else {
    for (int k = 0; k < b; ++k) {
      Rng view_rng(rng());
      batch.views.push_back(
          augment(dataset.graph(static_cast<std::size_t>(members[static_cast<std::size_t>(k)])),
                  config.augment, view_rng));
    }
    for (int k = 0; k < b; ++k) {
      std::vector<int> negatives;
      for (int j = 0; j < b; ++j) {
        if (j != k) negatives.push_back(j);
      }
      batch.anchors.push_back({k, b + k, std::move(negatives), label_of(k)});
    }
  }
  return batch;
}

Batch make_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng) {
  std::vector<int> pool = training_pool(dataset, config);
  const auto b = static_cast<std::size_t>(config.batch_size);
  if (pool.size() < b) {
    throw ConfigError("batch_size " + std::to_string(b) + " exceeds the " +
                      std::to_string(pool.size()) + " available clips");
  }
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  return make_batch(dataset, std::span<const int>(pool.data(), b), config, rng);
}

StepReport batch_gradient(const Dataset& dataset, const Batch& batch,
                          const ModelParams& params, const TrainConfig& config,
                          GradientTape& tape) {
  std::vector<const StGraph*> inputs;
  for (int m : batch.members) inputs.push_back(&dataset.graph(static_cast<std::size_t>(m)));
  for (const auto& v : batch.views) inputs.push_back(&v);
  const std::size_t n = inputs.size();

  std::vector<ForwardCache> caches(n);
  std::vector<Eigen::RowVectorXd> rows(n);
  parallel_for(n, config.threads,
               [&](std::size_t i) { rows[i] = forward(*inputs[i], params, &caches[i]); });
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), params.config.embed_dim);
  for (std::size_t i = 0; i < n; ++i) z.row(static_cast<Eigen::Index>(i)) = rows[i];

  StepReport report;
  LossResult loss = weighted_sscl_loss(z, batch.anchors, params.prototypes,
                                       config.loss_options(), config.unlabeled_weight);
  report.loss = std::move(loss.report);

  const std::size_t groups = (n + kBackwardGroup - 1) / kBackwardGroup;
  std::vector<GradientTape> partial(groups, GradientTape::zeros_like(params));
  parallel_for(groups, config.threads, [&](std::size_t g) {
    const std::size_t end = std::min(n, (g + 1) * kBackwardGroup);
    for (std::size_t i = g * kBackwardGroup; i < end; ++i) {
      backward(loss.grad_embeddings.row(static_cast<Eigen::Index>(i)), caches[i], params,
               partial[g]);
    }
  });
  tape.zero();
  for (const auto& p : partial) tape += p;
  tape.grad.prototypes += loss.grad_prototypes;
  report.grad_norm = tape_norm(tape);
  return report;
}

std::string to_json_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["lr"] = record.lr;
  j["loss"] = record.loss;
  j["grad_norm"] = record.grad_norm;
  if (record.val_map) j["val_map"] = *record.val_map;
  return j.dump();
}

double validation_map(const Dataset& validation, const ModelParams& params,
                      const TrainConfig& config, const Eigen::MatrixXd* prototypes) {
  std::vector<int> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    if (auto label = validation.label(i)) {
      rows.push_back(static_cast<int>(i));
      labels.push_back(*label);
    }
  }
  if (rows.empty()) throw ConfigError("validation set has no labeled clips");
  std::vector<StGraph> graphs;
  graphs.reserve(rows.size());
  for (int r : rows) graphs.push_back(validation.graph(static_cast<std::size_t>(r)));
  const Eigen::MatrixXd z = embed_all(graphs, params, config.threads);
  const Eigen::MatrixXd scores =
      class_score_matrix(z, prototypes ? *prototypes : params.prototypes, config.temperature,
                         config.normalize);
  return evaluate_classification(scores, labels).mean;
}

TrainResult train_run(const Dataset& train, const TrainConfig& config,
                      const Dataset* validation, const EpochCallback& on_epoch) {
  config.validate();
  std::vector<int> pool = training_pool(train, config);
  const auto b = static_cast<std::size_t>(config.batch_size);
  if (pool.size() < b) {
    throw ConfigError("batch_size " + std::to_string(b) + " exceeds the " +
                      std::to_string(pool.size()) + " available clips");
  }
  if (flavor_of(config) == LearningMode::kScl) train.distances(config.threads);

  TrainResult result;
  Rng init_rng(derive_seed(config.seed, {1}));
  result.params = ModelParams::init(config.effective_model(), init_rng);
  ModelParams& params = result.params;

  const std::size_t batches = pool.size() / b;
  const auto total_steps = static_cast<std::int64_t>(batches) * config.epochs;
  AdamState state = AdamState::for_params(params);
  GradientTape tape = GradientTape::zeros_like(params);
  Rng order_rng(derive_seed(config.seed, {2}));

  const bool log_map = validation != nullptr && config.mode != LearningMode::kUnsup &&
                       config.eval_every > 0;
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(order_rng)]);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.lr = cosine_lr(step, total_steps, config.lr_init, config.lr_min);
    double loss_sum = 0.0;
    std::size_t anchors = 0;
    double norm_sum = 0.0;
    for (std::size_t k = 0; k < batches; ++k) {
      Rng batch_rng(derive_seed(config.seed, {3, static_cast<std::uint64_t>(epoch), k}));
      const Batch batch =
          make_batch(train, std::span<const int>(pool.data() + k * b, b), config, batch_rng);
      const StepReport report = batch_gradient(train, batch, params, config, tape);
      if (!std::isfinite(report.loss.total)) {
        throw TrainingDiverged("loss is not finite at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step),
                               params);
      }
      const double lr = cosine_lr(step, total_steps, config.lr_init, config.lr_min);
      try {
        adam_step(params, tape, lr, state);
      } catch (const DataError& e) {
        throw TrainingDiverged(e.what(), params);
      }
      loss_sum += report.loss.total;
      anchors += report.loss.per_anchor.size();
      norm_sum += report.grad_norm;
      ++step;
    }
    record.loss = loss_sum / static_cast<double>(anchors);
    record.grad_norm = norm_sum / static_cast<double>(batches);
    if (log_map && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      record.val_map = validation_map(*validation, params, config);
    }
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace sscl
