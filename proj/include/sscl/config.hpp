#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "sscl/ingest.hpp"
#include "sscl/stgraph.hpp"
#include "sscl/train.hpp"

namespace sscl {

// Everything a training run reads, merged from an INI file with sections
// [data], [model], [train] and [augment].
struct RunConfig {
  std::filesystem::path manifest;  // resolved against the config file's directory
  ClipLoadOptions load;
  GraphOptions graph;
  TrainConfig train;
  bool num_classes_given = false;  // otherwise taken from the manifest
};

// Throws ConfigError on unknown sections or keys and on unparsable values.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// INI text that parse_run_config reads back into the same configuration.
std::string to_ini(const RunConfig& config);

}  // namespace sscl
