#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detmon/model_file.hpp"
#include "detmon/nn/params.hpp"
#include "detmon/nn/trainer.hpp"
#include "detmon/rng.hpp"
#include "detmon/stream.hpp"

// Comparison systems: hand-crafted detection statistics and globally pooled
// last-layer features, each feeding a dense binary alert classifier.
namespace detmon::baselines {

enum class BaselineKind { kHandcrafted, kPooledLastLayer };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

inline constexpr std::size_t kHandcraftedWidth = 8;

// [mean conf, median conf, mean pairwise IoU, median pairwise IoU,
//  mean width, median width, mean height, median height]; widths and heights
// normalized by the image size. All zero for a frame without detections;
// the IoU terms are zero with fewer than two detections.
std::array<double, kHandcraftedWidth> handcrafted_features(const stream::FrameRecord& frame,
                                                           const stream::ImageSize& image);

// Global average of each channel of the last feature layer.
std::vector<double> pooled_last_layer(const stream::FrameRecord& frame);

std::vector<double> frame_vector(BaselineKind kind, const stream::FrameRecord& frame, const stream::ImageSize& image);

// Concatenates per-frame vectors over a sliding window; frame k of the window
// occupies slot k.
class WindowVectorizer {
 public:
  WindowVectorizer(BaselineKind kind, std::size_t window_size, stream::ImageSize image);

  std::optional<std::vector<double>> push(const stream::FrameRecord& frame);

 private:
  BaselineKind kind_;
  std::size_t window_size_;
  stream::ImageSize image_;
  std::deque<std::vector<double>> frames_;
};

// Dense ReLU network with a single logit output.
template <typename T>
class BinaryMlp {
 public:
  BinaryMlp(std::size_t input_dim, std::vector<std::int64_t> hidden_dims);

  void initialize(Rng& rng);  // output layer starts at zero
  T logit(std::span<const T> x) const;
  // Returns the BCE-with-logits loss and accumulates its gradient.
  T loss_and_grad(std::span<const T> x, bool positive, std::vector<T>& grads) const;

  std::size_t input_dim() const noexcept { return input_dim_; }
  const std::vector<std::int64_t>& hidden_dims() const noexcept { return hidden_; }
  nn::ParameterSet<T>& params() noexcept { return params_; }
  const nn::ParameterSet<T>& params() const noexcept { return params_; }

 private:
  std::size_t input_dim_;
  std::vector<std::int64_t> hidden_;
  nn::ParameterSet<T> params_;
  std::vector<std::size_t> w_, b_;
};

extern template class BinaryMlp<float>;
extern template class BinaryMlp<double>;

struct BaselineModel {
  BaselineKind kind = BaselineKind::kHandcrafted;
  std::size_t window_size = 10;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  BinaryMlp<float> net;
  std::uint64_t seed = 0;
};

struct BaselineTrainResult {
  BaselineModel model;
  std::vector<double> loss_history;
};

// Z-scores each input feature, then trains the classifier with BCE and
// mini-batch Adam. Throws std::invalid_argument if all labels agree.
BaselineTrainResult train_baseline(BaselineKind kind, std::size_t window_size,
                                   std::span<const std::vector<double>> features, const std::vector<bool>& alerts,
                                   const nn::TrainOptions& options, std::vector<std::int64_t> hidden_dims = {64, 32});

// Alert probability for one window vector.
double predict_baseline(std::span<const double> window_vector, const BaselineModel& model);

model_file::Envelope to_envelope(const BaselineModel& model);
BaselineModel from_envelope(const model_file::Envelope& env);
void save_baseline(const std::filesystem::path& path, const BaselineModel& model);
BaselineModel load_baseline(const std::filesystem::path& path);

}  // namespace detmon::baselines
