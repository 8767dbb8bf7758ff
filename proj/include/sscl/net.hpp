#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sscl/augment.hpp"
#include "sscl/stgraph.hpp"

namespace sscl {

struct ModelConfig {
  int encoder_hidden = 32;
  int encoder_dim = 32;  // output of each of the two encoders
  int conv_dim = 64;     // width of the propagation layers
  int num_layers = 3;
  int hidden_dim = 64;   // aggregator MLP width
  int embed_dim = 64;
  int num_classes = 5;
  bool normalize = true;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Two-layer perceptron: relu(x W1 + b1) W2 + b2, optionally followed by relu.
struct Mlp {
  Eigen::MatrixXd w1, b1, w2, b2;
  bool relu_out = true;
};

// One local-extrema convolution:
// x'_i = relu(x_i W1 + sum_{j ~ i} e_ij (x_i W2 - x_j W3)).
struct LeConv {
  Eigen::MatrixXd w1, w2, w3;
};

struct ModelParams {
  ModelConfig config;
  Mlp semantic_encoder;   // 8 -> encoder_dim
  Mlp geometric_encoder;  // 15 (geometry + lane) -> encoder_dim
  std::vector<LeConv> conv;
  Mlp node_mlp;      // per node, before the instance sum
  Mlp instance_mlp;  // per instance, before the graph sum
  Mlp graph_mlp;     // final projection, linear output
  Eigen::MatrixXd prototypes;  // num_classes x embed_dim

  // Glorot-uniform weights, zero biases, unit-norm Gaussian prototypes.
  static ModelParams init(const ModelConfig& config, Rng& rng);
  ModelParams zeros_like() const;

  // Visits every tensor with a stable name, in a fixed order.
  void visit(const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
  void visit(const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const;
  std::size_t num_scalars() const;
};

// Per-parameter gradient accumulators.
struct GradientTape {
  ModelParams grad;

  static GradientTape zeros_like(const ModelParams& params);
  void zero();
  GradientTape& operator+=(const GradientTape& other);
  GradientTape& operator*=(double factor);
};

struct MlpCache {
  Eigen::MatrixXd input, pre1, pre2;
};

// Intermediate values of one forward pass, in canonical node order
// (frame, then instance id).
struct ForwardCache {
  bool valid = false;
  std::vector<int> order;  // canonical position -> graph node index
  MlpCache semantic, geometric;
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd degree;
  std::vector<Eigen::MatrixXd> layer_input;  // x^(l), l = 0..L-1
  std::vector<Eigen::MatrixXd> layer_pre;
  Eigen::MatrixXd node_features;  // x^(L)
  std::vector<std::vector<int>> instances;  // canonical node indices
  MlpCache node, instance, graph;
  Eigen::RowVectorXd z_raw;
  Eigen::RowVectorXd z;
  double z_norm = 0.0;
};

// Raw attribute matrices in canonical order: N x 8 semantic and N x 15
// geometry+lane.
void node_inputs(const StGraph& graph, std::span<const int> order,
                 Eigen::MatrixXd& semantic, Eigen::MatrixXd& geometric);

// Canonical node order of a graph.
std::vector<int> canonical_order(const StGraph& graph);

// x^(0) = [MLP_g([g, f]), MLP_s(s)], one row per node in canonical order.
Eigen::MatrixXd encode(const StGraph& graph, const ModelParams& params);

// Dense symmetric weighted adjacency in the given node order.
Eigen::MatrixXd adjacency_matrix(const StGraph& graph, std::span<const int> order);

Eigen::MatrixXd leconv_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& adjacency,
                             const LeConv& weights);

// z = MLP_1(sum_u MLP_2(sum_{i in u} MLP_3(x_i))), unit-normalized when the
// config asks for it. `instances` lists node rows of x per instance.
Eigen::RowVectorXd aggregate(const Eigen::MatrixXd& x,
                             const std::vector<std::vector<int>>& instances,
                             const ModelParams& params);

// Full pass: encoder, propagation layers, aggregator. Fills `cache` when
// given. The result is invariant (bit for bit) under node relabeling.
Eigen::RowVectorXd forward(const StGraph& graph, const ModelParams& params,
                           ForwardCache* cache = nullptr);

// Accumulates dLoss/dparams into `tape` given dLoss/dz for the embedding
// produced by the cached forward pass. Throws UsageError on an empty cache.
void backward(const Eigen::RowVectorXd& grad_z, const ForwardCache& cache,
              const ModelParams& params, GradientTape& tape);

// Embeds every graph; row k is forward(graphs[k]).
Eigen::MatrixXd embed_all(std::span<const StGraph> graphs, const ModelParams& params,
                          int threads = 1);

// Checkpoint: magic, version, string metadata, then every tensor with name,
// shape and row-major data. Round-trips bit-exactly.
void save_checkpoint(std::ostream& out, const ModelParams& params,
                     const std::map<std::string, std::string>& metadata = {});
ModelParams load_checkpoint(std::istream& in,
                            std::map<std::string, std::string>* metadata = nullptr);
void save_checkpoint_file(const std::filesystem::path& path, const ModelParams& params,
                          const std::map<std::string, std::string>& metadata = {});
ModelParams load_checkpoint_file(const std::filesystem::path& path,
                                 std::map<std::string, std::string>* metadata = nullptr);

}  // namespace sscl
