#include "sscl/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "sscl/error.hpp"
#include "sscl/parallel.hpp"

namespace sscl {

namespace {

constexpr int kGeometricInput = kGeometricDim + kLaneDim;

Eigen::MatrixXd glorot(int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::MatrixXd w(fan_in, fan_out);
  for (int r = 0; r < fan_in; ++r) {
    for (int c = 0; c < fan_out; ++c) w(r, c) = dist(rng);
  }
  return w;
}

Mlp make_mlp(int in, int hidden, int out, bool relu_out, Rng& rng) {
  Mlp m;
  m.w1 = glorot(in, hidden, rng);
  m.b1 = Eigen::MatrixXd::Zero(1, hidden);
  m.w2 = glorot(hidden, out, rng);
  m.b2 = Eigen::MatrixXd::Zero(1, out);
  m.relu_out = relu_out;
  return m;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd mlp_forward(const Mlp& m, const Eigen::MatrixXd& x, MlpCache* cache) {
  Eigen::MatrixXd pre1 = x * m.w1;
  pre1.rowwise() += m.b1.row(0);
  Eigen::MatrixXd pre2 = relu(pre1) * m.w2;
  pre2.rowwise() += m.b2.row(0);
  Eigen::MatrixXd out = m.relu_out ? relu(pre2) : pre2;
  if (cache) {
    cache->input = x;
    cache->pre1 = std::move(pre1);
    cache->pre2 = std::move(pre2);
  }
  return out;
}

// Returns dLoss/dinput.
Eigen::MatrixXd mlp_backward(const Mlp& m, const MlpCache& cache,
                             const Eigen::MatrixXd& grad_out, Mlp& grad) {
  Eigen::MatrixXd d_pre2 =
      m.relu_out ? Eigen::MatrixXd(grad_out.cwiseProduct(relu_mask(cache.pre2)))
                 : grad_out;
  grad.w2.noalias() += relu(cache.pre1).transpose() * d_pre2;
  grad.b2 += d_pre2.colwise().sum();
  Eigen::MatrixXd d_pre1 = (d_pre2 * m.w2.transpose()).cwiseProduct(relu_mask(cache.pre1));
  grad.w1.noalias() += cache.input.transpose() * d_pre1;
  grad.b1 += d_pre1.colwise().sum();
  return d_pre1 * m.w1.transpose();
}

Eigen::MatrixXd leconv_pre(const Eigen::MatrixXd& x, const Eigen::MatrixXd& adjacency,
                           const Eigen::VectorXd& degree, const LeConv& w) {
  Eigen::MatrixXd pre = x * w.w1;
  pre.noalias() += degree.asDiagonal() * (x * w.w2);
  pre.noalias() -= adjacency * (x * w.w3);
  return pre;
}

std::vector<std::vector<int>> canonical_instances(const StGraph& graph,
                                                  std::span<const int> order) {
  std::vector<int> position(graph.nodes.size());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = static_cast<int>(p);
  std::vector<std::vector<int>> instances;
  instances.reserve(graph.instance_map.size());
  for (const auto& [id, members] : graph.instance_map) {
    std::vector<int> rows;
    rows.reserve(members.size());
    for (int idx : members) rows.push_back(position.at(idx));
    std::sort(rows.begin(), rows.end());
    instances.push_back(std::move(rows));
  }
  return instances;
}

Eigen::RowVectorXd aggregate_impl(const Eigen::MatrixXd& x,
                                  const std::vector<std::vector<int>>& instances,
                                  const ModelParams& params, ForwardCache* cache) {
  const int hidden = params.config.hidden_dim;
  const Eigen::MatrixXd h3 =
      mlp_forward(params.node_mlp, x, cache ? &cache->node : nullptr);
  Eigen::MatrixXd per_instance = Eigen::MatrixXd::Zero(instances.size(), hidden);
  for (std::size_t u = 0; u < instances.size(); ++u) {
    for (int row : instances[u]) per_instance.row(u) += h3.row(row);
  }
  const Eigen::MatrixXd h2 =
      mlp_forward(params.instance_mlp, per_instance, cache ? &cache->instance : nullptr);
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(1, hidden);
  for (Eigen::Index u = 0; u < h2.rows(); ++u) pooled.row(0) += h2.row(u);
  const Eigen::MatrixXd z_raw =
      mlp_forward(params.graph_mlp, pooled, cache ? &cache->graph : nullptr);

  Eigen::RowVectorXd z = z_raw.row(0);
  const double norm = z.norm();
  if (params.config.normalize && norm > 0.0) z /= norm;
  if (cache) {
    cache->z_raw = z_raw.row(0);
    cache->z = z;
    cache->z_norm = norm;
  }
  return z;
}

}  // namespace

void ModelConfig::validate() const {
  if (encoder_hidden < 1 || encoder_dim < 1 || conv_dim < 1 || hidden_dim < 1 ||
      embed_dim < 1) {
    throw ConfigError("model widths must be positive");
  }
  if (num_layers < 1) throw ConfigError("model needs at least one propagation layer");
  if (num_classes < 1) throw ConfigError("model needs at least one class");
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.semantic_encoder =
      make_mlp(kSemanticDim, config.encoder_hidden, config.encoder_dim, true, rng);
  p.geometric_encoder =
      make_mlp(kGeometricInput, config.encoder_hidden, config.encoder_dim, true, rng);
  int width = 2 * config.encoder_dim;
  for (int l = 0; l < config.num_layers; ++l) {
    p.conv.push_back({glorot(width, config.conv_dim, rng),
                      glorot(width, config.conv_dim, rng),
                      glorot(width, config.conv_dim, rng)});
    width = config.conv_dim;
  }
  p.node_mlp = make_mlp(width, config.hidden_dim, config.hidden_dim, true, rng);
  p.instance_mlp =
      make_mlp(config.hidden_dim, config.hidden_dim, config.hidden_dim, true, rng);
  p.graph_mlp =
      make_mlp(config.hidden_dim, config.hidden_dim, config.embed_dim, false, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  p.prototypes.resize(config.num_classes, config.embed_dim);
  for (int c = 0; c < config.num_classes; ++c) {
    for (int d = 0; d < config.embed_dim; ++d) p.prototypes(c, d) = gauss(rng);
    const double norm = p.prototypes.row(c).norm();
    if (norm > 0.0) p.prototypes.row(c) /= norm;
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.visit([](const std::string&, Eigen::MatrixXd& t) { t.setZero(); });
  return z;
}

void ModelParams::visit(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  auto mlp = [&](const std::string& prefix, Mlp& m) {
    fn(prefix + ".w1", m.w1);
    fn(prefix + ".b1", m.b1);
    fn(prefix + ".w2", m.w2);
    fn(prefix + ".b2", m.b2);
  };
  mlp("semantic_encoder", semantic_encoder);
  mlp("geometric_encoder", geometric_encoder);
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const std::string prefix = "conv" + std::to_string(l);
    fn(prefix + ".w1", conv[l].w1);
    fn(prefix + ".w2", conv[l].w2);
    fn(prefix + ".w3", conv[l].w3);
  }
  mlp("node_mlp", node_mlp);
  mlp("instance_mlp", instance_mlp);
  mlp("graph_mlp", graph_mlp);
  fn("prototypes", prototypes);
}

void ModelParams::visit(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const {
  const_cast<ModelParams*>(this)->visit(
      [&](const std::string& name, Eigen::MatrixXd& t) { fn(name, t); });
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Eigen::MatrixXd& t) { n += t.size(); });
  return n;
}

GradientTape GradientTape::zeros_like(const ModelParams& params) {
  return GradientTape{params.zeros_like()};
}

void GradientTape::zero() {
  grad.visit([](const std::string&, Eigen::MatrixXd& t) { t.setZero(); });
}

GradientTape& GradientTape::operator+=(const GradientTape& other) {
  std::vector<const Eigen::MatrixXd*> src;
  other.grad.visit([&](const std::string&, const Eigen::MatrixXd& t) { src.push_back(&t); });
  std::size_t k = 0;
  grad.visit([&](const std::string&, Eigen::MatrixXd& t) { t += *src[k++]; });
  return *this;
}

GradientTape& GradientTape::operator*=(double factor) {
  grad.visit([&](const std::string&, Eigen::MatrixXd& t) { t *= factor; });
  return *this;
}

std::vector<int> canonical_order(const StGraph& graph) {
  std::vector<int> order(graph.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& na = graph.nodes[a];
    const auto& nb = graph.nodes[b];
    return std::tie(na.frame_index, na.instance_id) <
           std::tie(nb.frame_index, nb.instance_id);
  });
  return order;
}

void node_inputs(const StGraph& graph, std::span<const int> order,
                 Eigen::MatrixXd& semantic, Eigen::MatrixXd& geometric) {
  const auto n = static_cast<Eigen::Index>(order.size());
  semantic.resize(n, kSemanticDim);
  geometric.resize(n, kGeometricInput);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& a = graph.nodes[order[r]].attr;
    for (int k = 0; k < kSemanticDim; ++k) semantic(r, k) = a.semantic[k];
    for (int k = 0; k < kGeometricDim; ++k) geometric(r, k) = a.geometric[k];
    for (int k = 0; k < kLaneDim; ++k) geometric(r, kGeometricDim + k) = a.lane[k];
  }
}

Eigen::MatrixXd adjacency_matrix(const StGraph& graph, std::span<const int> order) {
  const auto n = static_cast<Eigen::Index>(order.size());
  std::vector<int> position(graph.nodes.size());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = static_cast<int>(p);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  auto add = [&](const std::vector<Edge>& edges) {
    for (const auto& e : edges) {
      a(position[e.i], position[e.j]) = e.weight;
      a(position[e.j], position[e.i]) = e.weight;
    }
  };
  add(graph.spatial_edges);
  add(graph.temporal_edges);
  return a;
}

Eigen::MatrixXd encode(const StGraph& graph, const ModelParams& params) {
  const auto order = canonical_order(graph);
  Eigen::MatrixXd s, g;
  node_inputs(graph, order, s, g);
  Eigen::MatrixXd x(s.rows(), 2 * params.config.encoder_dim);
  x << mlp_forward(params.geometric_encoder, g, nullptr),
      mlp_forward(params.semantic_encoder, s, nullptr);
  return x;
}

Eigen::MatrixXd leconv_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& adjacency,
                             const LeConv& weights) {
  const Eigen::VectorXd degree = adjacency.rowwise().sum();
  return relu(leconv_pre(x, adjacency, degree, weights));
}

Eigen::RowVectorXd aggregate(const Eigen::MatrixXd& x,
                             const std::vector<std::vector<int>>& instances,
                             const ModelParams& params) {
  return aggregate_impl(x, instances, params, nullptr);
}

Eigen::RowVectorXd forward(const StGraph& graph, const ModelParams& params,
                           ForwardCache* cache) {
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.order = canonical_order(graph);

  Eigen::MatrixXd s, g;
  node_inputs(graph, c.order, s, g);
  const auto n = s.rows();
  Eigen::MatrixXd x(n, 2 * params.config.encoder_dim);
  x << mlp_forward(params.geometric_encoder, g, &c.geometric),
      mlp_forward(params.semantic_encoder, s, &c.semantic);

  c.adjacency = adjacency_matrix(graph, c.order);
  c.degree = c.adjacency.rowwise().sum();
  for (const auto& layer : params.conv) {
    Eigen::MatrixXd pre = leconv_pre(x, c.adjacency, c.degree, layer);
    c.layer_input.push_back(std::move(x));
    x = relu(pre);
    c.layer_pre.push_back(std::move(pre));
  }
  c.node_features = x;
  c.instances = canonical_instances(graph, c.order);
  const Eigen::RowVectorXd z = aggregate_impl(x, c.instances, params, &c);
  c.valid = true;
  return z;
}

void backward(const Eigen::RowVectorXd& grad_z, const ForwardCache& c,
              const ModelParams& params, GradientTape& tape) {
  if (!c.valid) throw UsageError("backward called without a cached forward pass");
  ModelParams& g = tape.grad;

  Eigen::RowVectorXd d_raw = grad_z;
  if (params.config.normalize && c.z_norm > 0.0) {
    d_raw = (grad_z - c.z * c.z.dot(grad_z)) / c.z_norm;
  }
  const Eigen::MatrixXd d_pooled =
      mlp_backward(params.graph_mlp, c.graph, Eigen::MatrixXd(d_raw), g.graph_mlp);
  const auto num_instances = static_cast<Eigen::Index>(c.instances.size());
  const Eigen::MatrixXd d_h2 = d_pooled.replicate(num_instances, 1);
  Eigen::MatrixXd d_instance = Eigen::MatrixXd::Zero(num_instances, params.config.hidden_dim);
  if (num_instances > 0) {
    d_instance = mlp_backward(params.instance_mlp, c.instance, d_h2, g.instance_mlp);
  }
  const auto n = c.node_features.rows();
  Eigen::MatrixXd d_h3 = Eigen::MatrixXd::Zero(n, params.config.hidden_dim);
  for (Eigen::Index u = 0; u < num_instances; ++u) {
    for (int row : c.instances[u]) d_h3.row(row) = d_instance.row(u);
  }
  if (n == 0) return;
  Eigen::MatrixXd d_x = mlp_backward(params.node_mlp, c.node, d_h3, g.node_mlp);

  for (int l = static_cast<int>(params.conv.size()) - 1; l >= 0; --l) {
    const LeConv& w = params.conv[l];
    LeConv& gw = g.conv[l];
    const Eigen::MatrixXd& x = c.layer_input[l];
    const Eigen::MatrixXd d_pre = d_x.cwiseProduct(relu_mask(c.layer_pre[l]));
    const Eigen::MatrixXd deg_d_pre = c.degree.asDiagonal() * d_pre;
    const Eigen::MatrixXd adj_d_pre = c.adjacency * d_pre;
    gw.w1.noalias() += x.transpose() * d_pre;
    gw.w2.noalias() += x.transpose() * deg_d_pre;
    gw.w3.noalias() -= x.transpose() * adj_d_pre;
    d_x = d_pre * w.w1.transpose();
    d_x.noalias() += deg_d_pre * w.w2.transpose();
    d_x.noalias() -= adj_d_pre * w.w3.transpose();
  }

  const int e = params.config.encoder_dim;
  mlp_backward(params.geometric_encoder, c.geometric, d_x.leftCols(e), g.geometric_encoder);
  mlp_backward(params.semantic_encoder, c.semantic, d_x.rightCols(e), g.semantic_encoder);
}

Eigen::MatrixXd embed_all(std::span<const StGraph> graphs, const ModelParams& params,
                          int threads) {
  Eigen::MatrixXd out(graphs.size(), params.config.embed_dim);
  std::vector<Eigen::RowVectorXd> rows(graphs.size());
  parallel_for(graphs.size(), threads,
               [&](std::size_t k) { rows[k] = forward(graphs[k], params); });
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = rows[k];
  return out;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'S', 'C', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& in) {
  const auto size = get<std::uint64_t>(in);
  if (size > (1u << 20)) throw DataError("checkpoint string too long");
  std::string s(size, '\0');
  in.read(s.data(), static_cast<std::streamsize>(size));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

std::map<std::string, std::string> config_metadata(const ModelConfig& c) {
  return {
      {"model.encoder_hidden", std::to_string(c.encoder_hidden)},
      {"model.encoder_dim", std::to_string(c.encoder_dim)},
      {"model.conv_dim", std::to_string(c.conv_dim)},
      {"model.num_layers", std::to_string(c.num_layers)},
      {"model.hidden_dim", std::to_string(c.hidden_dim)},
      {"model.embed_dim", std::to_string(c.embed_dim)},
      {"model.num_classes", std::to_string(c.num_classes)},
      {"model.normalize", c.normalize ? "1" : "0"},
  };
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta) {
  auto num = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint lacks " + key);
    return std::stoi(it->second);
  };
  ModelConfig c;
  c.encoder_hidden = num("model.encoder_hidden");
  c.encoder_dim = num("model.encoder_dim");
  c.conv_dim = num("model.conv_dim");
  c.num_layers = num("model.num_layers");
  c.hidden_dim = num("model.hidden_dim");
  c.embed_dim = num("model.embed_dim");
  c.num_classes = num("model.num_classes");
  c.normalize = num("model.normalize") != 0;
  return c;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params,
                     const std::map<std::string, std::string>& metadata) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  auto meta = metadata;
  for (auto& [k, v] : config_metadata(params.config)) meta[k] = v;
  put<std::uint64_t>(out, meta.size());
  for (const auto& [k, v] : meta) {
    put_string(out, k);
    put_string(out, v);
  }
  std::size_t count = 0;
  params.visit([&](const std::string&, const Eigen::MatrixXd&) { ++count; });
  put<std::uint64_t>(out, count);
  params.visit([&](const std::string& name, const Eigen::MatrixXd& t) {
    put_string(out, name);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) put<double>(out, t(r, c));
    }
  });
  if (!out) throw DataError("failed writing checkpoint");
}

ModelParams load_checkpoint(std::istream& in, std::map<std::string, std::string>* metadata) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, std::string> meta;
  const auto meta_count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < meta_count; ++k) {
    std::string key = get_string(in);
    meta[key] = get_string(in);
  }
  Rng rng(0);
  ModelParams params = ModelParams::init(config_from_metadata(meta), rng);
  std::map<std::string, Eigen::MatrixXd*> slots;
  params.visit([&](const std::string& name, Eigen::MatrixXd& t) { slots[name] = &t; });

  const auto count = get<std::uint64_t>(in);
  if (count != slots.size()) throw DataError("checkpoint tensor count mismatch");
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = get_string(in);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint has unknown tensor " + name);
    Eigen::MatrixXd& t = *it->second;
    if (rows != static_cast<std::uint64_t>(t.rows()) ||
        cols != static_cast<std::uint64_t>(t.cols())) {
      throw DataError("checkpoint tensor " + name + " has wrong shape");
    }
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = get<double>(in);
    }
  }
  if (metadata) *metadata = std::move(meta);
  return params;
}

void save_checkpoint_file(const std::filesystem::path& path, const ModelParams& params,
                          const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_checkpoint(out, params, metadata);
}

ModelParams load_checkpoint_file(const std::filesystem::path& path,
                                 std::map<std::string, std::string>* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in, metadata);
}

}  // namespace sscl
