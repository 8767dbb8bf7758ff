#include "sscl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sscl/config.hpp"
#include "sscl/error.hpp"
#include "sscl/evalkit.hpp"
#include "sscl/ingest.hpp"
#include "sscl/net.hpp"
#include "sscl/parallel.hpp"
#include "sscl/soia.hpp"
#include "sscl/stgraph.hpp"
#include "sscl/synth.hpp"
#include "sscl/text.hpp"
#include "sscl/train.hpp"

namespace sscl {

namespace {

namespace fs = std::filesystem;

void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path);
  file << content;
  if (!file) throw DataError("write failed: " + path);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += sep;
    s += parts[i];
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto part : text::split(s, sep)) out.emplace_back(part);
  return out;
}

bool in_split(const ClipRecord& r, const std::string& split) {
  return split == "all" || r.split == split;
}

std::vector<ClipRecord> select(const std::vector<ClipRecord>& records, const std::string& split) {
  std::vector<ClipRecord> out;
  for (const auto& r : records) {
    if (in_split(r, split)) out.push_back(r);
  }
  return out;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  int clips_per_class = 50;
  int extra_clips = 150;
  int val_per_class = 20;
  int val_extra = 0;
  double labeled_fraction = 1.0;
  double noise = 2.0;
  double dropout = 0.05;
  int actors = 2;
  int frames = 10;
};

void run_synth(const SynthArgs& a) {
  DatasetSpec spec;
  spec.seed = a.seed;
  spec.clips_per_class = a.clips_per_class;
  spec.extra_clips = a.extra_clips;
  spec.val_per_class = a.val_per_class;
  spec.val_extra = a.val_extra;
  spec.labeled_fraction = a.labeled_fraction;
  spec.base.noise = a.noise;
  spec.base.dropout = a.dropout;
  spec.base.background_actors = a.actors;
  spec.base.num_frames = a.frames;
  write_dataset(a.out, generate_dataset(spec));
}

// ---- ingest --------------------------------------------------------------

struct IngestArgs {
  std::string tracks;
  std::string lanes;
  int width = 1280;
  int height = 720;
  double fps_in = 30.0;
  double fps_out = 2.5;
  int clip_length = 10;
  int stride = 0;  // 0 = clip_length
  std::string session_id;
  std::string label;
  std::string split = "train";
  double min_score = 0.5;
  std::string out;
  bool append = false;
};

void run_ingest(const IngestArgs& a, std::ostream& os) {
  if (a.split != "train" && a.split != "val") throw ArgumentError("--split must be train or val");
  Session session;
  session.session_id = a.session_id.empty() ? fs::path(a.tracks).stem().string() : a.session_id;
  session.width = a.width;
  session.height = a.height;
  std::ifstream tracks(a.tracks);
  if (!tracks) throw DataError("cannot open track file " + a.tracks);
  try {
    session.objects = downsample_tracks(
        parse_track_file(tracks, {a.width, a.height, a.min_score}), a.fps_in, a.fps_out);
  } catch (const ParseError& e) {
    throw DataError(a.tracks + ": " + e.what());
  }
  if (!a.lanes.empty()) {
    std::ifstream lanes(a.lanes);
    if (!lanes) throw DataError("cannot open lane file " + a.lanes);
    session.lanes = downsample_lanes(parse_lane_file(lanes), a.fps_in, a.fps_out);
  }
  session.num_frames = session_length(session.objects, session.lanes);
  const int stride = a.stride > 0 ? a.stride : a.clip_length;
  const auto clips = slice_clips(session, a.clip_length, stride, 20.0);

  const fs::path manifest_dir = fs::absolute(fs::path(a.out)).parent_path();
  auto relative = [&](const std::string& p) {
    return p.empty() ? p : fs::proximate(fs::absolute(p), manifest_dir).generic_string();
  };
  std::vector<ClipRecord> records;
  if (a.append && fs::exists(a.out)) {
    std::ifstream existing(a.out);
    records = read_manifest(existing);
  }
  for (std::size_t k = 0; k < clips.size(); ++k) {
    ClipRecord r;
    r.clip_id = clips[k].clip_id;
    r.track_file = relative(a.tracks);
    r.lane_file = relative(a.lanes);
    r.width = a.width;
    r.height = a.height;
    r.fps_in = a.fps_in;
    r.fps_out = a.fps_out;
    r.frame_begin = static_cast<int>(k) * stride;
    r.frame_end = r.frame_begin + a.clip_length;
    r.label = a.label;
    r.split = a.split;
    records.push_back(std::move(r));
  }
  std::ostringstream out;
  write_manifest(out, records);
  write_output(a.out, out.str(), os);
}

// ---- shared loading ------------------------------------------------------

struct DataArgs {
  std::string manifest;
  double lane_step = 20.0;
  double min_score = 0.5;
  double sigma_lane = 0.0;  // 0 = default scale
  bool normalize_lane = false;
  std::string split = "all";
  int threads = default_threads();
};

GraphOptions graph_options(const DataArgs& a) {
  GraphOptions g;
  if (a.sigma_lane > 0.0) g.sigma_lane = a.sigma_lane;
  g.normalize_lane = a.normalize_lane;
  return g;
}

std::vector<TrackedClip> load_clips(const std::vector<ClipRecord>& records,
                                    const std::vector<std::string>& classes,
                                    const ClipLoadOptions& options) {
  ClipLoader loader(classes, options);
  return loader.load_all(records);
}

void add_data_options(CLI::App* cmd, DataArgs& a, bool graph_flags) {
  cmd->add_option("--manifest", a.manifest, "Clip manifest CSV")->required();
  cmd->add_option("--split", a.split, "Manifest split to use: train, val or all")
      ->capture_default_str();
  cmd->add_option("--min-score", a.min_score, "Drop detections scoring below this")
      ->capture_default_str();
  cmd->add_option("--threads", a.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();
  if (graph_flags) {
    cmd->add_option("--lane-step", a.lane_step, "Lane rasterization spacing in pixels")
        ->capture_default_str();
    cmd->add_option("--sigma-lane", a.sigma_lane,
                    "Lane interaction scale in pixels (0 = edge weight scale)")
        ->capture_default_str();
    cmd->add_flag("--normalize-lane", a.normalize_lane,
                  "Divide lane interaction sums by the number of lane points");
  }
}

// ---- graph ---------------------------------------------------------------

struct GraphArgs {
  DataArgs data;
  std::string out;
};

void run_graph(const GraphArgs& a, std::ostream& out) {
  const auto records = select(read_manifest_file(a.data.manifest), a.data.split);
  const auto all = read_manifest_file(a.data.manifest);
  const auto clips = load_clips(records, manifest_classes(all), {a.data.min_score, a.data.lane_step});
  std::vector<StGraph> graphs(clips.size());
  const GraphOptions options = graph_options(a.data);
  parallel_for(clips.size(), a.data.threads,
               [&](std::size_t i) { graphs[i] = build_graph(clips[i], options); });
  std::ostringstream buf(std::ios::binary);
  write_graphs(buf, graphs);
  write_output(a.out, buf.str(), out);
}

// ---- dist ----------------------------------------------------------------

struct DistArgs {
  DataArgs data;
  std::string out;
  bool pairs = false;
};

void run_dist(const DistArgs& a, std::ostream& out) {
  const auto all = read_manifest_file(a.data.manifest);
  const auto records = select(all, a.data.split);
  const auto clips = load_clips(records, manifest_classes(all), {a.data.min_score, a.data.lane_step});
  std::vector<InstanceTracks> tracks;
  for (const auto& c : clips) tracks.push_back(InstanceTracks::from_clip(c));
  const Eigen::MatrixXd d = distance_matrix(tracks, a.data.threads);

  std::ostringstream s;
  if (a.pairs) {
    s << "clip_a,clip_b,soia_distance\n";
    for (std::size_t i = 0; i < clips.size(); ++i) {
      for (std::size_t j = i + 1; j < clips.size(); ++j) {
        s << clips[i].clip_id << ',' << clips[j].clip_id << ','
          << text::format_double(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << '\n';
      }
    }
  } else {
    s << "clip_id";
    for (const auto& c : clips) s << ',' << c.clip_id;
    s << '\n';
    for (std::size_t i = 0; i < clips.size(); ++i) {
      s << clips[i].clip_id;
      for (std::size_t j = 0; j < clips.size(); ++j) {
        s << ',' << text::format_double(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
      s << '\n';
    }
  }
  write_output(a.out, s.str(), out);
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string mode;
  std::string config;
  std::string out;
  std::string log;
  std::string manifest;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = default_threads();
  int epochs = 0;
  int batch_size = 0;
};

void run_train(const TrainArgs& a, std::ostream& err) {
  RunConfig rc = load_run_config(a.config);
  if (!a.mode.empty()) rc.train.mode = parse_learning_mode(a.mode);
  if (!a.manifest.empty()) rc.manifest = a.manifest;
  if (a.seed_given) rc.train.seed = a.seed;
  if (a.epochs > 0) rc.train.epochs = a.epochs;
  if (a.batch_size > 0) rc.train.batch_size = a.batch_size;
  rc.train.threads = a.threads;
  if (rc.manifest.empty()) throw ConfigError("no manifest: set data.manifest or pass --manifest");

  const auto records = read_manifest_file(rc.manifest);
  const auto classes = manifest_classes(records);
  if (rc.num_classes_given) {
    if (rc.train.model.num_classes < static_cast<int>(classes.size())) {
      throw ConfigError("model.num_classes is smaller than the manifest's class count");
    }
  } else {
    rc.train.model.num_classes = std::max<int>(1, static_cast<int>(classes.size()));
  }
  rc.train.validate();

  const auto train_clips = load_clips(select(records, "train"), classes, rc.load);
  const auto val_clips = load_clips(select(records, "val"), classes, rc.load);
  const Dataset train = Dataset::from_clips(train_clips, rc.graph);
  const Dataset val = Dataset::from_clips(val_clips, rc.graph);

  const std::string log_path = a.log.empty() ? a.out + ".metrics.jsonl" : a.log;
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write " + log_path);

  std::map<std::string, std::string> meta;
  meta["classes"] = join(classes, ',');
  meta["mode"] = to_string(rc.train.mode);
  RunConfig stored = rc;
  stored.num_classes_given = true;
  meta["run_config"] = to_ini(stored);

  try {
    TrainResult result =
        train_run(train, rc.train, val.empty() ? nullptr : &val, [&](const EpochRecord& r) {
          log << to_json_line(r) << '\n';
          log.flush();
        });
    save_checkpoint_file(a.out, result.params, meta);
  } catch (const TrainingDiverged& e) {
    save_checkpoint_file(a.out + ".last_good", e.last_good(), meta);
    err << "training diverged; last good parameters in " << a.out << ".last_good\n";
    throw;
  }
}

// ---- model-consuming subcommands ----------------------------------------

struct ModelArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  int threads = default_threads();
};

struct LoadedModel {
  ModelParams params;
  RunConfig config;
  std::vector<std::string> classes;
};

LoadedModel load_model(const std::string& path) {
  std::map<std::string, std::string> meta;
  LoadedModel m;
  m.params = load_checkpoint_file(path, &meta);
  auto it = meta.find("run_config");
  if (it != meta.end()) {
    std::istringstream in(it->second);
    m.config = parse_run_config(in);
  }
  m.config.train.model = m.params.config;
  m.config.train.normalize = m.params.config.normalize;
  if (auto c = meta.find("classes"); c != meta.end()) m.classes = split_list(c->second, ',');
  return m;
}

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--manifest", a.manifest, "Clip manifest CSV")->required();
  cmd->add_option("--checkpoint", a.checkpoint, "Trained model checkpoint")->required();
  cmd->add_option("--out", a.out, "Output file, - for stdout")->required();
  cmd->add_option("--threads", a.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();
}

struct EmbedArgs {
  ModelArgs model;
  std::string split = "all";
};

void run_embed(const EmbedArgs& a, std::ostream& out) {
  const LoadedModel m = load_model(a.model.checkpoint);
  const auto records = select(read_manifest_file(a.model.manifest), a.split);
  const auto clips = load_clips(records, m.classes, m.config.load);
  std::vector<StGraph> graphs;
  for (const auto& c : clips) graphs.push_back(build_graph(c, m.config.graph));
  const Eigen::MatrixXd z = embed_all(graphs, m.params, a.model.threads);

  std::ostringstream s;
  s << "clip_id";
  for (Eigen::Index k = 0; k < z.cols(); ++k) s << ",z" << k;
  s << '\n';
  for (std::size_t i = 0; i < clips.size(); ++i) {
    s << clips[i].clip_id;
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      s << ',' << text::format_double(z(static_cast<Eigen::Index>(i), k));
    }
    s << '\n';
  }
  write_output(a.model.out, s.str(), out);
}

struct RetrieveArgs {
  ModelArgs model;
  int k = 5;
  std::string queries = "val";
  std::string corpus = "val";
  std::string summary;
};

void run_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const LoadedModel m = load_model(a.model.checkpoint);
  const auto records = read_manifest_file(a.model.manifest);
  const auto query_clips = load_clips(select(records, a.queries), m.classes, m.config.load);
  const auto corpus_clips = load_clips(select(records, a.corpus), m.classes, m.config.load);
  if (query_clips.empty()) throw DataError("no query clips in split '" + a.queries + "'");

  auto embed = [&](const std::vector<TrackedClip>& clips) {
    std::vector<StGraph> graphs;
    for (const auto& c : clips) graphs.push_back(build_graph(c, m.config.graph));
    return embed_all(graphs, m.params, a.model.threads);
  };
  const Eigen::MatrixXd zq = embed(query_clips);
  const Eigen::MatrixXd zc = embed(corpus_clips);
  std::vector<std::string> corpus_ids;
  std::vector<InstanceTracks> corpus_tracks;
  for (const auto& c : corpus_clips) {
    corpus_ids.push_back(c.clip_id);
    corpus_tracks.push_back(InstanceTracks::from_clip(c));
  }

  std::vector<RetrievalResult> results(query_clips.size());
  std::vector<InstanceTracks> query_tracks(query_clips.size());
  parallel_for(query_clips.size(), a.model.threads, [&](std::size_t q) {
    query_tracks[q] = InstanceTracks::from_clip(query_clips[q]);
    results[q] = retrieve_knn(query_clips[q].clip_id, zq.row(static_cast<Eigen::Index>(q)),
                              corpus_ids, zc, a.k);
    for (auto& hit : results[q].hits) {
      const auto pos = std::find(corpus_ids.begin(), corpus_ids.end(), hit.clip_id) -
                       corpus_ids.begin();
      hit.soia_distance = soia_distance(query_tracks[q], corpus_tracks[static_cast<std::size_t>(pos)]);
    }
  });

  std::ostringstream s;
  s << "query_id,rank,clip_id,cosine,soia_distance\n";
  double top1_sum = 0.0;
  std::size_t top1_count = 0;
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      const auto& h = r.hits[i];
      s << r.query_id << ',' << (i + 1) << ',' << h.clip_id << ','
        << text::format_double(h.cosine) << ',' << text::format_double(*h.soia_distance) << '\n';
    }
    if (!r.hits.empty()) {
      top1_sum += *r.hits.front().soia_distance;
      ++top1_count;
    }
  }
  write_output(a.model.out, s.str(), out);

  if (!a.summary.empty()) {
    nlohmann::ordered_json j;
    j["queries"] = results.size();
    j["k"] = a.k;
    if (top1_count > 0) j["avg_top1_soia"] = top1_sum / static_cast<double>(top1_count);
    write_output(a.summary, j.dump() + "\n", out);
  }
}

struct EvalArgs {
  ModelArgs model;
  std::string split = "val";
  std::string prototypes = "learned";
  std::string convention = "rank-sum";
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const LoadedModel m = load_model(a.model.checkpoint);
  if (m.classes.empty()) throw DataError("checkpoint carries no class names");
  const auto records = read_manifest_file(a.model.manifest);

  auto labeled_embeddings = [&](const std::string& split, std::vector<int>& labels) {
    const auto clips = load_clips(select(records, split), m.classes, m.config.load);
    std::vector<StGraph> graphs;
    for (const auto& c : clips) {
      if (!c.label) continue;
      graphs.push_back(build_graph(c, m.config.graph));
      labels.push_back(*c.label);
    }
    return embed_all(graphs, m.params, a.model.threads);
  };

  std::vector<int> labels;
  const Eigen::MatrixXd z = labeled_embeddings(a.split, labels);
  if (labels.empty()) throw DataError("no labeled clips in split '" + a.split + "'");

  Eigen::MatrixXd protos = m.params.prototypes;
  if (a.prototypes == "class-mean") {
    std::vector<int> train_labels;
    const Eigen::MatrixXd zt = labeled_embeddings("train", train_labels);
    if (train_labels.empty()) throw DataError("class-mean prototypes need labeled train clips");
    protos = class_mean_prototypes(zt, train_labels, static_cast<int>(m.params.prototypes.rows()));
  }
  const ApConvention convention =
      a.convention == "11-point" ? ApConvention::kElevenPoint : ApConvention::kRankSum;
  const Eigen::MatrixXd scores =
      class_score_matrix(z, protos, m.config.train.temperature, m.config.train.normalize);
  const ApTable table = evaluate_classification(scores, labels, convention);

  std::ostringstream s;
  s << "class,ap\n";
  for (std::size_t c = 0; c < table.per_class.size(); ++c) {
    const std::string name = c < m.classes.size() ? m.classes[c] : "class_" + std::to_string(c);
    s << name << ',' << (table.per_class[c] ? text::format_double(*table.per_class[c]) : "skip")
      << '\n';
  }
  s << "mAP," << text::format_double(table.mean) << '\n';
  write_output(a.model.out, s.str(), out);
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised contrastive learning on driving-scene graphs"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled scenario dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--clips-per-class", synth.clips_per_class, "Training clips per class")
      ->capture_default_str();
  synth_cmd->add_option("--extra-clips", synth.extra_clips,
                        "Out-of-class unlabeled training clips")
      ->capture_default_str();
  synth_cmd->add_option("--val-per-class", synth.val_per_class, "Validation clips per class")
      ->capture_default_str();
  synth_cmd->add_option("--val-extra", synth.val_extra, "Out-of-class validation clips")
      ->capture_default_str();
  synth_cmd->add_option("--labeled-fraction", synth.labeled_fraction,
                        "Fraction of in-class training clips that keep their label")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Box jitter in pixels")->capture_default_str();
  synth_cmd->add_option("--dropout", synth.dropout, "Per-detection miss probability")
      ->capture_default_str();
  synth_cmd->add_option("--actors", synth.actors, "Maximum number of background actors")
      ->capture_default_str();
  synth_cmd->add_option("--frames", synth.frames, "Working frames per clip")
      ->capture_default_str();

  IngestArgs ingest;
  auto* ingest_cmd =
      app.add_subcommand("ingest", "Slice a tracking session into clips and write a manifest");
  ingest_cmd->add_option("--tracks", ingest.tracks, "Track CSV (frame,id,x,y,w,h,class,score)")
      ->required();
  ingest_cmd->add_option("--lanes", ingest.lanes, "Lane JSON file");
  ingest_cmd->add_option("--width", ingest.width, "Frame width in pixels")->capture_default_str();
  ingest_cmd->add_option("--height", ingest.height, "Frame height in pixels")
      ->capture_default_str();
  ingest_cmd->add_option("--fps-in", ingest.fps_in, "Source frame rate")->capture_default_str();
  ingest_cmd->add_option("--fps-out", ingest.fps_out, "Working frame rate")
      ->capture_default_str();
  ingest_cmd->add_option("--clip-length", ingest.clip_length, "Working frames per clip")
      ->capture_default_str();
  ingest_cmd->add_option("--stride", ingest.stride, "Working frames between clip starts (0 = clip length)")
      ->capture_default_str();
  ingest_cmd->add_option("--session-id", ingest.session_id,
                         "Clip id prefix (default: track file stem)");
  ingest_cmd->add_option("--label", ingest.label, "Class label for every clip (empty = unlabeled)");
  ingest_cmd->add_option("--split", ingest.split, "train or val")->capture_default_str();
  ingest_cmd->add_option("--min-score", ingest.min_score, "Drop detections scoring below this")
      ->capture_default_str();
  ingest_cmd->add_option("--out", ingest.out, "Manifest CSV to write, - for stdout")->required();
  ingest_cmd->add_flag("--append", ingest.append, "Keep the records already in --out");

  GraphArgs graph;
  auto* graph_cmd = app.add_subcommand("graph", "Build spatio-temporal graphs for a manifest");
  add_data_options(graph_cmd, graph.data, true);
  graph_cmd->add_option("--out", graph.out, "Binary graph file, - for stdout")->required();

  DistArgs dist;
  auto* dist_cmd = app.add_subcommand("dist", "Pairwise SOIA distance matrix of a manifest");
  add_data_options(dist_cmd, dist.data, false);
  dist_cmd->add_option("--out", dist.out, "CSV output, - for stdout")->required();
  dist_cmd->add_flag("--pairs", dist.pairs, "Write clip_a,clip_b,distance rows instead of a matrix");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an embedding model");
  train_cmd->add_option("--mode", train.mode, "scl, gcl, fsl or unsup (overrides the config)")
      ->check(CLI::IsMember({"scl", "gcl", "fsl", "unsup"}));
  train_cmd->add_option("--config", train.config, "INI run configuration")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint to write")->required();
  train_cmd->add_option("--log", train.log, "Per-epoch JSON lines (default: <out>.metrics.jsonl)");
  train_cmd->add_option("--manifest", train.manifest, "Manifest (overrides data.manifest)");
  auto* seed_opt = train_cmd->add_option("--seed", train.seed, "Random seed (overrides train.seed)");
  train_cmd->add_option("--epochs", train.epochs, "Epochs (overrides train.epochs)");
  train_cmd->add_option("--batch-size", train.batch_size, "Batch size (overrides train.batch_size)");
  train_cmd->add_option("--threads", train.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Write clip embeddings as CSV");
  add_model_options(embed_cmd, embed.model);
  embed_cmd->add_option("--split", embed.split, "train, val or all")->capture_default_str();

  RetrieveArgs retrieve;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Nearest-neighbour clip retrieval");
  add_model_options(retrieve_cmd, retrieve.model);
  retrieve_cmd->add_option("--k", retrieve.k, "Results per query")->capture_default_str();
  retrieve_cmd->add_option("--queries", retrieve.queries, "Query split: train, val or all")
      ->capture_default_str();
  retrieve_cmd->add_option("--corpus", retrieve.corpus, "Corpus split: train, val or all")
      ->capture_default_str();
  retrieve_cmd->add_option("--summary", retrieve.summary,
                           "JSON file with the mean SOIA distance of top-1 results");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP table and mAP");
  add_model_options(eval_cmd, eval.model);
  eval_cmd->add_option("--split", eval.split, "Split to score: train, val or all")
      ->capture_default_str();
  eval_cmd->add_option("--prototypes", eval.prototypes,
                       "learned, or class-mean of labeled train embeddings")
      ->check(CLI::IsMember({"learned", "class-mean"}))
      ->capture_default_str();
  eval_cmd->add_option("--ap", eval.convention, "AP convention: rank-sum or 11-point")
      ->check(CLI::IsMember({"rank-sum", "11-point"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth_cmd) {
      run_synth(synth);
    } else if (*ingest_cmd) {
      run_ingest(ingest, out);
    } else if (*graph_cmd) {
      run_graph(graph, out);
    } else if (*dist_cmd) {
      run_dist(dist, out);
    } else if (*train_cmd) {
      train.seed_given = seed_opt->count() > 0;
      run_train(train, err);
    } else if (*embed_cmd) {
      run_embed(embed, out);
    } else if (*retrieve_cmd) {
      run_retrieve(retrieve, out);
    } else if (*eval_cmd) {
      run_eval(eval, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sscl
