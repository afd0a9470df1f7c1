#include "detmon/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace detmon::features {

TensorF channel_avg_pool(const TensorF& tensor) {
  const auto& s = tensor.shape();
  if (s.channels < 1) throw ShapeError("channel_avg_pool: tensor has no channels");
  const std::size_t plane = s.plane();
  std::vector<double> acc(plane, 0.0);
  for (std::int64_t c = 0; c < s.channels; ++c) {
    const auto ch = tensor.channel(c);
    for (std::size_t i = 0; i < plane; ++i) acc[i] += ch[i];
  }
  TensorF out(Shape3{1, s.height, s.width});
  const double inv = 1.0 / static_cast<double>(s.channels);
  for (std::size_t i = 0; i < plane; ++i) out.values()[i] = static_cast<float>(acc[i] * inv);
  return out;
}

PooledFrame pool_frame(std::span<const TensorF> layers) {
  PooledFrame out;
  out.reserve(layers.size());
  for (const auto& t : layers) out.push_back(channel_avg_pool(t));
  return out;
}

WindowFeature stack_window(std::span<const PooledFrame> frames) {
  if (frames.empty()) throw ShapeError("stack_window: empty window");
  const auto& first = frames.front();
  const auto omega = static_cast<std::int64_t>(frames.size());
  WindowFeature wf;
  wf.layers.reserve(first.size());
  for (std::size_t j = 0; j < first.size(); ++j) {
    const auto& s = first[j].shape();
    if (s.channels != 1) throw ShapeError("stack_window: pooled map must have one channel");
    wf.layers.emplace_back(Shape3{omega, s.height, s.width});
  }
  for (std::int64_t k = 0; k < omega; ++k) {
    const auto& frame = frames[static_cast<std::size_t>(k)];
    if (frame.size() != first.size())
      throw ShapeError("stack_window: frame " + std::to_string(k) + " has " + std::to_string(frame.size()) +
                       " layers, expected " + std::to_string(first.size()));
    for (std::size_t j = 0; j < frame.size(); ++j) {
      if (frame[j].shape() != first[j].shape())
        throw ShapeError("stack_window: frame " + std::to_string(k) + " layer " + std::to_string(j) + " shape " +
                         frame[j].shape().str() + " differs from " + first[j].shape().str());
      std::copy(frame[j].values().begin(), frame[j].values().end(), wf.layers[j].channel(k).begin());
    }
  }
  return wf;
}

NormStats fit_norm_stats(std::span<const WindowFeature> windows) {
  if (windows.empty()) throw std::invalid_argument("fit_norm_stats: no windows");
  const std::size_t p = windows.front().layers.size();
  NormStats stats{std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)};
  for (std::size_t j = 0; j < p; ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& wf : windows) {
      for (float v : wf.layers.at(j).values()) sum += v;
      n += wf.layers[j].size();
    }
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& wf : windows)
      for (float v : wf.layers[j].values()) sq += (v - mean) * (v - mean);
    stats.mean[j] = mean;
    stats.stddev[j] = std::max(std::sqrt(sq / static_cast<double>(n)), NormStats::kMinStd);
  }
  return stats;
}

void normalize_in_place(WindowFeature& wf, const NormStats& stats) {
  if (stats.mean.size() != wf.layers.size() || stats.stddev.size() != wf.layers.size())
    throw ShapeError("normalize: stats describe " + std::to_string(stats.mean.size()) + " layers, window has " +
                     std::to_string(wf.layers.size()));
  for (std::size_t j = 0; j < wf.layers.size(); ++j) {
    const double m = stats.mean[j];
    const double inv = 1.0 / std::max(stats.stddev[j], NormStats::kMinStd);
    for (float& v : wf.layers[j].values()) v = static_cast<float>((v - m) * inv);
  }
}

WindowFeature normalize(const WindowFeature& wf, const NormStats& stats) {
  WindowFeature out = wf;
  normalize_in_place(out, stats);
  return out;
}

WindowFeature denormalize(const WindowFeature& wf, const NormStats& stats) {
  if (stats.mean.size() != wf.layers.size()) throw ShapeError("denormalize: layer count mismatch");
  WindowFeature out = wf;
  for (std::size_t j = 0; j < out.layers.size(); ++j) {
    const double s = std::max(stats.stddev[j], NormStats::kMinStd);
    for (float& v : out.layers[j].values()) v = static_cast<float>(v * s + stats.mean[j]);
  }
  return out;
}

WindowAssembler::WindowAssembler(std::size_t window_size) : window_size_(window_size) {
  if (window_size_ < 1) throw std::invalid_argument("window size must be >= 1");
}

std::optional<WindowFeature> WindowAssembler::push(PooledFrame frame) {
  frames_.push_back(std::move(frame));
  if (frames_.size() > window_size_) frames_.pop_front();
  if (frames_.size() < window_size_) return std::nullopt;
  const std::vector<PooledFrame> window(frames_.begin(), frames_.end());
  return stack_window(window);
}

}  // namespace detmon::features
