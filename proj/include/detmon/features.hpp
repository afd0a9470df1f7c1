#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "detmon/tensor.hpp"

// Window input construction: channel-wise average pooling of each backbone
// map, stacking of omega consecutive pooled maps, and scalar z-scoring.
namespace detmon::features {

// One frame's pooled maps, one 1 x h_j x w_j tensor per layer.
using PooledFrame = std::vector<TensorF>;

// p tensors; tensor j is omega x h_j x w_j with frame k in channel k.
struct WindowFeature {
  std::vector<TensorF> layers;

  std::size_t window_size() const noexcept {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().channels());
  }
  bool operator==(const WindowFeature&) const = default;
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static constexpr double kMinStd = 1e-6;
  static NormStats identity(std::size_t layers) {
    return {std::vector<double>(layers, 0.0), std::vector<double>(layers, 1.0)};
  }
  bool operator==(const NormStats&) const = default;
};

// Per-pixel mean over channels; 64-bit accumulation, 32-bit result.
TensorF channel_avg_pool(const TensorF& tensor);

PooledFrame pool_frame(std::span<const TensorF> layers);

// Throws ShapeError if frames disagree on layer count or shapes.
WindowFeature stack_window(std::span<const PooledFrame> frames);

// Per-layer mean and standard deviation over every value of every window.
NormStats fit_norm_stats(std::span<const WindowFeature> windows);

WindowFeature normalize(const WindowFeature& wf, const NormStats& stats);
void normalize_in_place(WindowFeature& wf, const NormStats& stats);
WindowFeature denormalize(const WindowFeature& wf, const NormStats& stats);

// Rolling window of pooled frames; yields a WindowFeature once omega frames
// have been pushed, then one per subsequent push.
class WindowAssembler {
 public:
  explicit WindowAssembler(std::size_t window_size);

  std::optional<WindowFeature> push(PooledFrame frame);
  std::size_t window_size() const noexcept { return window_size_; }

 private:
  std::size_t window_size_;
  std::deque<PooledFrame> frames_;
};

}  // namespace detmon::features
