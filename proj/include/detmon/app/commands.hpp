#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "detmon/app/config.hpp"
#include "detmon/baselines.hpp"
#include "detmon/features.hpp"
#include "detmon/mapeval.hpp"
#include "detmon/metrics.hpp"
#include "detmon/nn/monitor_model.hpp"
#include "detmon/ordinal.hpp"
#include "detmon/stream.hpp"

// The pipeline behind each CLI subcommand, callable in-process.
namespace detmon::app {

struct WindowSample {
  mapeval::WindowLabel label;
  features::WindowFeature window;
  std::vector<double> handcrafted;
  std::vector<double> pooled_last;
};

struct Dataset {
  stream::StreamHeader header;  // after preprocessing
  std::vector<WindowSample> samples;  // every labeled window, defined or not
  std::optional<std::string> warning;
};

// Reads a ground-truth stream once and builds window features, labels and
// both baseline vectors for windows at the configured stride.
Dataset build_dataset(stream::StreamReader& reader, const RunConfig& config, bool with_baselines = true);

ordinal::CriticalRule critical_rule(const RunConfig& config);

struct TrainSummary {
  std::size_t windows = 0;            // defined windows used
  std::size_t undefined_windows = 0;  // skipped (no ground truth objects)
  std::vector<double> loss_history;
};

enum class ModelKind { kMonitor, kHandcrafted, kPooledLastLayer };
ModelKind model_kind_from_string(const std::string& s);

// Trains one model on a ground-truth stream and writes it to model_path.
// The optional loss log is a CSV of (epoch, loss).
TrainSummary cmd_train(const std::filesystem::path& stream_path, const RunConfig& config, ModelKind kind,
                       const std::filesystem::path& model_path, std::ostream* loss_log = nullptr);

// In-memory variants used by cmd_train and the acceptance suite.
nn::TrainResult train_monitor_on(const Dataset& data, const RunConfig& config);
baselines::BaselineTrainResult train_baseline_on(const Dataset& data, const RunConfig& config,
                                                 baselines::BaselineKind kind);

// Monitor report first, then one report per baseline, in argument order.
std::vector<metrics::EvalReport> evaluate_on(const Dataset& data, const RunConfig& config,
                                             const nn::MonitorModel& monitor,
                                             const std::vector<baselines::BaselineModel>& baselines);

std::vector<metrics::EvalReport> cmd_eval(const std::filesystem::path& stream_path,
                                          const std::filesystem::path& model_path,
                                          const std::vector<std::filesystem::path>& baseline_paths,
                                          const RunConfig& config);

struct Emission {
  std::uint64_t start_frame = 0;
  int ordinal_class = 0;
  bool alert = false;
  double alert_score = 0;
  double latency_ms = 0;  // wall clock from window completion to prediction

  // Prediction fields only; latency is excluded.
  bool same_prediction(const Emission& other) const {
    return start_frame == other.start_frame && ordinal_class == other.ordinal_class && alert == other.alert &&
           alert_score == other.alert_score;
  }
};

struct MonitorOptions {
  double decision_threshold = 0.5;
  int critical_class = 2;
  std::size_t queue_capacity = 16;
};

// Live monitoring: an ingest thread reads frames and pools their feature maps
// into a bounded queue; the calling thread assembles stride-1 windows,
// predicts and hands each emission to `sink` in stream order. Ground truth
// and detections are never read. Throws before processing any frame if the
// model does not fit the stream header.
std::size_t run_monitor(stream::StreamReader& reader, const nn::MonitorModel& model, const MonitorOptions& options,
                        const std::function<void(const Emission&)>& sink);

std::vector<Emission> cmd_monitor(const std::filesystem::path& stream_path, const std::filesystem::path& model_path,
                                  const MonitorOptions& options, std::ostream* out = nullptr);

void write_emission_header(std::ostream& out);
void write_emission(std::ostream& out, const Emission& e);

std::vector<mapeval::WindowSizeRow> cmd_analyze_window(const std::filesystem::path& stream_path,
                                                       const std::vector<std::size_t>& window_sizes,
                                                       const RunConfig& config);
void write_window_size_table(std::ostream& out, const std::vector<mapeval::WindowSizeRow>& rows);

}  // namespace detmon::app
