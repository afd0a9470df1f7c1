#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "detmon/rng.hpp"
#include "detmon/stream.hpp"

// Deterministic synthetic deployment streams. A hidden difficulty d_t in
// [0,1] drives both the detector's errors (misses, box jitter, confidence
// loss, spurious boxes) and the noise level of the backbone feature maps.
namespace detmon::synth {

struct SynthConfig {
  std::uint64_t seed = 42;
  std::uint64_t frame_count = 1200;
  stream::ImageSize image{640, 384};
  std::vector<std::string> classes{"vehicle", "pedestrian"};
  int min_objects = 3;
  int max_objects = 8;

  // Mean-reverting walk, reflected into [difficulty_min, difficulty_max].
  double walk_step = 0.07;
  double walk_reversion = 0.01;
  double walk_mean = 0.5;
  double difficulty_min = 0.0;
  double difficulty_max = 1.0;
  std::optional<double> initial_difficulty;  // drawn uniformly when unset

  // Degradation gains (all >= 0). Zero gains yield a perfect detector.
  double miss_gain = 0.7;
  double localization_gain = 0.3;
  double spurious_gain = 0.6;
  double confidence_gain = 0.0;
  double feature_noise_gain = 1.0;
  double base_feature_noise = 0.05;
  int max_spurious = 6;

  std::vector<Shape3> layer_shapes{{8, 28, 28}, {16, 14, 14}, {32, 7, 7}};
  // Seeds the fixed "detector" response (channel weights, background
  // patterns) shared by every stream generated from this configuration.
  std::uint64_t detector_seed = 7;

  void check() const;
};

stream::StreamHeader make_header(const SynthConfig& config);

// Frame-by-frame generator. Every frame consumes the same number of draws
// from each random source whatever the gains, so runs that differ only in
// gains share all random numbers.
class Generator {
 public:
  explicit Generator(SynthConfig config);

  const stream::StreamHeader& header() const noexcept { return header_; }
  bool done() const noexcept { return produced_ >= config_.frame_count; }

  // Returns the next frame and its hidden difficulty.
  std::pair<stream::FrameRecord, double> next();

 private:
  struct LayerPattern {
    std::vector<std::vector<float>> background;    // per channel, h*w
    std::vector<std::vector<float>> class_weight;  // [class][channel]
  };

  SynthConfig config_;
  stream::StreamHeader header_;
  std::vector<LayerPattern> patterns_;
  Rng walk_rng_, scene_rng_, detector_rng_, feature_rng_;
  double difficulty_ = 0;
  std::uint64_t produced_ = 0;
};

struct GeneratedStream {
  std::string bytes;
  std::vector<double> difficulty;
};

// Writes a complete `.dstream` to `out`; returns the hidden difficulty series.
std::vector<double> generate_stream_to(std::ostream& out, const SynthConfig& config);
GeneratedStream generate_stream(const SynthConfig& config);
std::vector<stream::FrameRecord> generate_frames(const SynthConfig& config, std::vector<double>* difficulty = nullptr);

// Diagnostic side file: frame_id,difficulty per line.
void write_difficulty_csv(std::ostream& out, const std::vector<double>& difficulty);

// Train/test streams sharing a configuration but not a seed.
std::pair<GeneratedStream, GeneratedStream> make_split(const SynthConfig& config, std::uint64_t train_seed,
                                                       std::uint64_t test_seed);

}  // namespace detmon::synth
