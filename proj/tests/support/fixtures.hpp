#pragma once

#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <string>
#include <vector>

#include "detmon/rng.hpp"
#include "detmon/stream.hpp"

namespace fixture {

using namespace detmon;

inline stream::StreamHeader header(std::vector<Shape3> shapes = {{3, 8, 8}, {4, 4, 4}},
                                   std::vector<std::string> classes = {"vehicle", "pedestrian"}) {
  stream::StreamHeader h;
  h.layer_shapes = std::move(shapes);
  h.image_size = {100, 80};
  h.class_names = std::move(classes);
  return h;
}

inline stream::BBox random_box(Rng& rng, double w_img = 100, double h_img = 80) {
  const double w = rng.uniform(5, 40), h = rng.uniform(5, 40);
  const double x = rng.uniform(0, w_img - w), y = rng.uniform(0, h_img - h);
  return {x, y, x + w, y + h};
}

inline stream::FrameRecord random_frame(Rng& rng, const stream::StreamHeader& h, std::uint64_t id,
                                        bool with_gt = true) {
  stream::FrameRecord f;
  f.frame_id = id;
  const auto nc = static_cast<std::int64_t>(h.num_classes());
  for (auto n = rng.between(0, 4); n > 0; --n)
    f.detections.push_back({random_box(rng), rng.between(0, nc - 1), rng.uniform(0.01, 1.0)});
  if (with_gt) {
    auto& g = f.ground_truth.emplace();
    for (auto n = rng.between(0, 3); n > 0; --n) g.push_back({random_box(rng), rng.between(0, nc - 1)});
  }
  for (const auto& s : h.layer_shapes) {
    TensorF t(s);
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-2, 2));
    f.features.push_back(std::move(t));
  }
  return f;
}

// Detections placed near ground truth so windows have a spread of AP
// values; confidences are quantized to force ties.
inline std::vector<stream::FrameRecord> matched_window(Rng& rng, const stream::StreamHeader& h, std::size_t frames,
                                                       std::uint64_t first_id = 0) {
  std::vector<stream::FrameRecord> out;
  const auto nc = static_cast<std::int64_t>(h.num_classes());
  for (std::size_t i = 0; i < frames; ++i) {
    stream::FrameRecord f;
    f.frame_id = first_id + i;
    auto& gts = f.ground_truth.emplace();
    for (auto n = rng.between(0, 3); n > 0; --n) gts.push_back({random_box(rng), rng.between(0, nc - 1)});
    for (const auto& g : gts) {
      for (auto k = rng.between(0, 2); k > 0; --k) {
        auto b = g.box;
        const double j = rng.uniform(0, 8);
        b.x_min += rng.uniform(-j, j);
        b.x_max += rng.uniform(-j, j);
        b.y_min += rng.uniform(-j, j);
        b.y_max += rng.uniform(-j, j);
        if (!b.valid()) continue;
        const auto cls = rng.uniform() < 0.85 ? g.class_id : rng.between(0, nc - 1);
        f.detections.push_back({b, cls, static_cast<double>(rng.between(1, 10)) / 10.0});
      }
    }
    for (auto n = rng.between(0, 2); n > 0; --n)
      f.detections.push_back({random_box(rng), rng.between(0, nc - 1), static_cast<double>(rng.between(1, 10)) / 10.0});
    for (const auto& s : h.layer_shapes) f.features.emplace_back(s, 0.0f);
    out.push_back(std::move(f));
  }
  return out;
}

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("detmon_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
