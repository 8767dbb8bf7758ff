#include "sscl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sscl/error.hpp"
#include "sscl/text.hpp"

namespace sscl {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(RunConfig&, const std::string&)>;

template <typename T>
T number(const std::string& key, const std::string& value) {
  auto parsed = text::parse_number<T>(text::trim(value));
  if (!parsed) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return *parsed;
}

bool boolean(const std::string& key, const std::string& value) {
  const auto v = text::trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value + "'");
}

template <typename Fn>
auto translated(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const ArgumentError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.manifest", [](RunConfig& c, const std::string& v) { c.manifest = std::string(text::trim(v)); }},
      {"data.lane_step", [](RunConfig& c, const std::string& v) { c.load.lane_step = number<double>("data.lane_step", v); }},
      {"data.min_score", [](RunConfig& c, const std::string& v) { c.load.min_score = number<double>("data.min_score", v); }},
      {"data.sigma_lane", [](RunConfig& c, const std::string& v) { c.graph.sigma_lane = number<double>("data.sigma_lane", v); }},
      {"data.normalize_lane", [](RunConfig& c, const std::string& v) { c.graph.normalize_lane = boolean("data.normalize_lane", v); }},

      {"model.encoder_hidden", [](RunConfig& c, const std::string& v) { c.train.model.encoder_hidden = number<int>("model.encoder_hidden", v); }},
      {"model.encoder_dim", [](RunConfig& c, const std::string& v) { c.train.model.encoder_dim = number<int>("model.encoder_dim", v); }},
      {"model.conv_dim", [](RunConfig& c, const std::string& v) { c.train.model.conv_dim = number<int>("model.conv_dim", v); }},
      {"model.num_layers", [](RunConfig& c, const std::string& v) { c.train.model.num_layers = number<int>("model.num_layers", v); }},
      {"model.hidden_dim", [](RunConfig& c, const std::string& v) { c.train.model.hidden_dim = number<int>("model.hidden_dim", v); }},
      {"model.embed_dim", [](RunConfig& c, const std::string& v) { c.train.model.embed_dim = number<int>("model.embed_dim", v); }},
      {"model.num_classes", [](RunConfig& c, const std::string& v) {
         c.train.model.num_classes = number<int>("model.num_classes", v);
         c.num_classes_given = true;
       }},

      {"train.mode", [](RunConfig& c, const std::string& v) {
         c.train.mode = translated("train.mode", [&] { return parse_learning_mode(std::string(text::trim(v))); });
       }},
      {"train.unsup_flavor", [](RunConfig& c, const std::string& v) {
         c.train.unsup_flavor = translated("train.unsup_flavor", [&] { return parse_learning_mode(std::string(text::trim(v))); });
       }},
      {"train.batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = number<int>("train.batch_size", v); }},
      {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = number<int>("train.epochs", v); }},
      {"train.lr_init", [](RunConfig& c, const std::string& v) { c.train.lr_init = number<double>("train.lr_init", v); }},
      {"train.lr_min", [](RunConfig& c, const std::string& v) { c.train.lr_min = number<double>("train.lr_min", v); }},
      {"train.margin_fraction", [](RunConfig& c, const std::string& v) { c.train.margin_fraction = number<double>("train.margin_fraction", v); }},
      {"train.unlabeled_weight", [](RunConfig& c, const std::string& v) { c.train.unlabeled_weight = number<double>("train.unlabeled_weight", v); }},
      {"train.temperature", [](RunConfig& c, const std::string& v) { c.train.temperature = number<double>("train.temperature", v); }},
      {"train.normalize", [](RunConfig& c, const std::string& v) { c.train.normalize = boolean("train.normalize", v); }},
      {"train.seed", [](RunConfig& c, const std::string& v) { c.train.seed = number<std::uint64_t>("train.seed", v); }},
      {"train.eval_every", [](RunConfig& c, const std::string& v) { c.train.eval_every = number<int>("train.eval_every", v); }},

      {"augment.policy", [](RunConfig& c, const std::string& v) {
         c.train.augment.policy = translated("augment.policy", [&] { return parse_augment_policy(std::string(text::trim(v))); });
       }},
      {"augment.node_drop_ratio", [](RunConfig& c, const std::string& v) { c.train.augment.node_drop_ratio = number<double>("augment.node_drop_ratio", v); }},
      {"augment.edge_perturb_ratio", [](RunConfig& c, const std::string& v) { c.train.augment.edge_perturb_ratio = number<double>("augment.edge_perturb_ratio", v); }},
      {"augment.attr_mask_ratio", [](RunConfig& c, const std::string& v) { c.train.augment.attr_mask_ratio = number<double>("augment.attr_mask_ratio", v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  RunConfig config;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (section != "data" && section != "model" && section != "train" && section != "augment") {
      throw ConfigError("config: unknown section or key outside a section '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->second(config, value.data());
    }
  }
  if (!config.manifest.empty() && config.manifest.is_relative() && !base_dir.empty()) {
    config.manifest = base_dir / config.manifest;
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in, path.parent_path());
}

std::string to_ini(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const ModelConfig& m = t.model;
  std::ostringstream out;
  auto num = [](double v) { return text::format_double(v); };
  out << "[data]\n";
  if (!c.manifest.empty()) out << "manifest = " << c.manifest.string() << '\n';
  out << "lane_step = " << num(c.load.lane_step) << '\n'
      << "min_score = " << num(c.load.min_score) << '\n';
  if (c.graph.sigma_lane) out << "sigma_lane = " << num(*c.graph.sigma_lane) << '\n';
  out << "normalize_lane = " << (c.graph.normalize_lane ? "true" : "false") << '\n';
  out << "\n[model]\n"
      << "encoder_hidden = " << m.encoder_hidden << '\n'
      << "encoder_dim = " << m.encoder_dim << '\n'
      << "conv_dim = " << m.conv_dim << '\n'
      << "num_layers = " << m.num_layers << '\n'
      << "hidden_dim = " << m.hidden_dim << '\n'
      << "embed_dim = " << m.embed_dim << '\n';
  if (c.num_classes_given) out << "num_classes = " << m.num_classes << '\n';
  out << "\n[train]\n"
      << "mode = " << to_string(t.mode) << '\n'
      << "unsup_flavor = " << to_string(t.unsup_flavor) << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "epochs = " << t.epochs << '\n'
      << "lr_init = " << num(t.lr_init) << '\n'
      << "lr_min = " << num(t.lr_min) << '\n'
      << "margin_fraction = " << num(t.margin_fraction) << '\n'
      << "unlabeled_weight = " << num(t.unlabeled_weight) << '\n'
      << "temperature = " << num(t.temperature) << '\n'
      << "normalize = " << (t.normalize ? "true" : "false") << '\n'
      << "seed = " << t.seed << '\n'
      << "eval_every = " << t.eval_every << '\n';
  out << "\n[augment]\n"
      << "policy = " << to_string(t.augment.policy) << '\n'
      << "node_drop_ratio = " << num(t.augment.node_drop_ratio) << '\n'
      << "edge_perturb_ratio = " << num(t.augment.edge_perturb_ratio) << '\n'
      << "attr_mask_ratio = " << num(t.augment.attr_mask_ratio) << '\n';
  return out.str();
}

}  // namespace sscl
