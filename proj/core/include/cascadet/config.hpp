#pragma once

// Flat key=value run configuration. One setting per line, '#' starts a
// comment, lists are written [a,b,c]. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascadet/cascade.hpp"
#include "cascadet/model.hpp"
#include "cascadet/train.hpp"

namespace cascadet {

struct DataConfig {
  std::uint64_t train_seed = 1000;
  int train_scenes = 500;
  std::uint64_t eval_seed = 900000;
  int eval_scenes = 200;
  double scale_mix = 0.5;
  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;  // initialization, shuffling and augmentation
  std::string out_dir = "run";
  int threads = 1;  // data generation and evaluation only
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  CascadeConfig cascade;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Applies one "key=value" assignment. `where` prefixes error messages.
void apply_setting(RunConfig& config, const std::string& assignment, const std::string& where = "override");
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& config);
std::string serialize_config(const RunConfig& config);
std::vector<std::string> config_keys();

}  // namespace cascadet
