#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "detmon/features.hpp"
#include "detmon/model_file.hpp"
#include "detmon/nn/cascade.hpp"
#include "detmon/nn/coral.hpp"
#include "detmon/nn/trainer.hpp"
#include "detmon/stream.hpp"

namespace detmon::nn {

inline constexpr const char* kMonitorKind = "monitor";

struct MonitorModel {
  CascadeNet<float> net;
  features::NormStats norm;
  std::uint64_t seed = 0;

  const CascadeConfig& config() const noexcept { return net.config(); }

  // Logits for an unnormalized window.
  std::vector<float> logits(const features::WindowFeature& window) const;
};

struct TrainingExample {
  features::WindowFeature window;
  int label = 0;
};

struct TrainResult {
  MonitorModel model;
  std::vector<double> loss_history;  // see minibatch_adam
};

// Cascade configuration matching a stream's feature layers.
CascadeConfig cascade_config_for(const stream::StreamHeader& header, std::int64_t window_size, int num_classes);

// Fits normalization on the training windows, then minimizes the mean CORAL
// loss with mini-batch Adam. Deterministic given options.seed.
TrainResult train_monitor(std::vector<TrainingExample> data, const CascadeConfig& config,
                          const TrainOptions& options);

OrdinalPrediction predict(const features::WindowFeature& window, const MonitorModel& model, double threshold);

// Throws ShapeError unless the model accepts windows built from this header.
void check_compatible(const MonitorModel& model, const stream::StreamHeader& header);

model_file::Envelope to_envelope(const MonitorModel& model);
MonitorModel from_envelope(const model_file::Envelope& env);
void save_monitor(const std::filesystem::path& path, const MonitorModel& model);
MonitorModel load_monitor(const std::filesystem::path& path);

}  // namespace detmon::nn
