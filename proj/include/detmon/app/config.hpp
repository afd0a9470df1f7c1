#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "detmon/synthgen.hpp"

namespace detmon::app {

// Invalid configuration or command-line usage; the CLI exits with 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::size_t window_size = 10;
  std::size_t stride = 1;
  int num_classes = 5;
  int critical_class = 2;
  double iou_threshold = 0.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  int epochs = 40;
  std::uint64_t seed = 1;
  double decision_threshold = 0.5;

  // Ingestion filter applied to detections and ground truth.
  double min_size_px = 25.0;
  std::map<std::string, std::string> class_merge;

  std::int64_t filter_out_channels = 0;  // 0 -> window_size
  std::vector<std::int64_t> hidden_dims{64};
  std::string cascade_mode = "accumulated";
  std::vector<std::int64_t> baseline_hidden_dims{64, 32};
  int baseline_epochs = 40;

  synth::SynthConfig synth;

  void check() const;
};

// Applies one `key = value` setting. Keys prefixed "synth." configure the
// synthetic generator. Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Flat key=value text; blank lines and lines starting with '#' are ignored.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace detmon::app
