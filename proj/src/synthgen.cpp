#include "detmon/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace detmon::synth {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double reflect(double x, double lo, double hi) {
  for (int i = 0; i < 4 && (x < lo || x > hi); ++i) x = x < lo ? 2 * lo - x : 2 * hi - x;
  return std::clamp(x, lo, hi);
}

}  // namespace

void SynthConfig::check() const {
  if (classes.empty()) throw std::invalid_argument("synth: at least one class is required");
  if (min_objects < 0 || max_objects < min_objects) throw std::invalid_argument("synth: bad object count range");
  if (!(difficulty_min >= 0.0 && difficulty_max <= 1.0 && difficulty_min <= difficulty_max))
    throw std::invalid_argument("synth: difficulty bounds must lie within [0,1]");
  for (double g : {miss_gain, localization_gain, spurious_gain, confidence_gain, feature_noise_gain,
                   base_feature_noise, walk_step, walk_reversion})
    if (!(g >= 0.0)) throw std::invalid_argument("synth: gains and walk parameters must be >= 0");
  if (max_spurious < 0) throw std::invalid_argument("synth: max_spurious must be >= 0");
  if (image.width < 32 || image.height < 32) throw std::invalid_argument("synth: image too small");
  if (initial_difficulty && !(*initial_difficulty >= 0.0 && *initial_difficulty <= 1.0))
    throw std::invalid_argument("synth: initial difficulty outside [0,1]");
}

stream::StreamHeader make_header(const SynthConfig& config) {
  stream::StreamHeader h;
  h.layer_shapes = config.layer_shapes;
  h.image_size = config.image;
  h.class_names = config.classes;
  h.frame_count = config.frame_count;
  h.check();
  return h;
}

Generator::Generator(SynthConfig config)
    : config_(std::move(config)),
      header_(make_header(config_)),
      walk_rng_(splitmix(config_.seed ^ 0x1111)),
      scene_rng_(splitmix(config_.seed ^ 0x2222)),
      detector_rng_(splitmix(config_.seed ^ 0x3333)),
      feature_rng_(splitmix(config_.seed ^ 0x4444)) {
  config_.check();
  Rng pattern_rng(splitmix(config_.detector_seed));
  for (const auto& s : config_.layer_shapes) {
    LayerPattern lp;
    for (std::int64_t c = 0; c < s.channels; ++c) {
      const double fx = pattern_rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / static_cast<double>(s.width);
      const double fy = pattern_rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / static_cast<double>(s.height);
      const double px = pattern_rng.uniform(0, 6.283), py = pattern_rng.uniform(0, 6.283);
      const double amp = pattern_rng.uniform(0.1, 0.4);
      std::vector<float> plane(s.plane());
      for (std::int64_t y = 0; y < s.height; ++y)
        for (std::int64_t x = 0; x < s.width; ++x)
          plane[static_cast<std::size_t>(y * s.width + x)] =
              static_cast<float>(amp * std::sin(fx * static_cast<double>(x) + px) * std::cos(fy * static_cast<double>(y) + py));
      lp.background.push_back(std::move(plane));
    }
    for (std::size_t k = 0; k < config_.classes.size(); ++k) {
      std::vector<float> w(static_cast<std::size_t>(s.channels));
      for (auto& v : w) v = static_cast<float>(pattern_rng.uniform(0.3, 1.5));
      lp.class_weight.push_back(std::move(w));
    }
    patterns_.push_back(std::move(lp));
  }
  difficulty_ = config_.initial_difficulty
                    ? *config_.initial_difficulty
                    : walk_rng_.uniform(config_.difficulty_min, config_.difficulty_max);
}

std::pair<stream::FrameRecord, double> Generator::next() {
  if (done()) throw std::logic_error("synth generator exhausted");
  const double iw = static_cast<double>(config_.image.width), ih = static_cast<double>(config_.image.height);
  const auto n_classes = static_cast<std::int64_t>(config_.classes.size());

  if (produced_ > 0) {
    const double step = config_.walk_reversion * (config_.walk_mean - difficulty_) + config_.walk_step * walk_rng_.normal();
    difficulty_ = reflect(difficulty_ + step, config_.difficulty_min, config_.difficulty_max);
  } else {
    walk_rng_.normal();
  }
  const double d = difficulty_;

  stream::FrameRecord frame;
  frame.frame_id = produced_;

  // Scene: ground-truth objects.
  auto& gts = frame.ground_truth.emplace();
  const auto n_obj = scene_rng_.between(config_.min_objects, config_.max_objects);
  for (std::int64_t i = 0; i < n_obj; ++i) {
    const auto cls = scene_rng_.between(0, n_classes - 1);
    const double w = scene_rng_.uniform(40.0, std::min(200.0, iw / 2));
    const double aspect = scene_rng_.uniform(0.65, 1.5) * (cls == 1 ? 2.0 : 1.0);
    const double h = std::min(w * aspect, ih / 2);
    const double x0 = scene_rng_.uniform(0.0, iw - w);
    const double y0 = scene_rng_.uniform(0.0, ih - h);
    gts.push_back({{x0, y0, x0 + w, y0 + h}, cls});
  }

  // Detector response. Draw counts per object and per spurious slot are fixed.
  const double miss_p = std::clamp(config_.miss_gain * d, 0.0, 1.0);
  const double jitter = config_.localization_gain * d;
  for (const auto& g : gts) {
    const double u_miss = detector_rng_.uniform();
    double n[4];
    for (double& v : n) v = detector_rng_.normal();
    const double u_base = detector_rng_.uniform();
    const double u_drop = detector_rng_.uniform();
    if (u_miss < miss_p) continue;
    const double bw = g.box.width(), bh = g.box.height();
    stream::BBox b{g.box.x_min + n[0] * jitter * bw, g.box.y_min + n[1] * jitter * bh,
                   g.box.x_max + n[2] * jitter * bw, g.box.y_max + n[3] * jitter * bh};
    b.x_min = std::clamp(b.x_min, 0.0, iw - 1);
    b.y_min = std::clamp(b.y_min, 0.0, ih - 1);
    b.x_max = std::clamp(b.x_max, b.x_min + 1, iw);
    b.y_max = std::clamp(b.y_max, b.y_min + 1, ih);
    const double conf = std::clamp(0.6 + 0.4 * u_base - config_.confidence_gain * d * u_drop, 0.01, 1.0);
    frame.detections.push_back({b, g.class_id, conf});
  }
  const double spurious_p = std::clamp(config_.spurious_gain * d, 0.0, 1.0);
  for (int k = 0; k < config_.max_spurious; ++k) {
    const double u_present = detector_rng_.uniform();
    const auto cls = detector_rng_.between(0, n_classes - 1);
    const double w = detector_rng_.uniform(40.0, std::min(200.0, iw / 2));
    const double aspect = detector_rng_.uniform(0.65, 1.5) * (cls == 1 ? 2.0 : 1.0);
    const double h = std::min(w * aspect, ih / 2);
    const double x0 = detector_rng_.uniform(0.0, iw - w);
    const double y0 = detector_rng_.uniform(0.0, ih - h);
    const double conf = 0.6 + 0.4 * detector_rng_.uniform();
    if (u_present >= spurious_p) continue;
    frame.detections.push_back({{x0, y0, x0 + w, y0 + h}, cls, conf});
  }

  // Backbone features: background + class-weighted object blobs + noise.
  const double noise = config_.base_feature_noise + config_.feature_noise_gain * d;
  for (std::size_t j = 0; j < config_.layer_shapes.size(); ++j) {
    const auto& s = config_.layer_shapes[j];
    const auto& lp = patterns_[j];
    const double sx = static_cast<double>(s.width) / iw, sy = static_cast<double>(s.height) / ih;
    std::vector<std::vector<float>> blob(static_cast<std::size_t>(n_classes), std::vector<float>(s.plane(), 0.f));
    for (const auto& g : gts) {
      const double cx = 0.5 * (g.box.x_min + g.box.x_max) * sx, cy = 0.5 * (g.box.y_min + g.box.y_max) * sy;
      const double rx = std::max(0.5, 0.35 * g.box.width() * sx), ry = std::max(0.5, 0.35 * g.box.height() * sy);
      auto& plane = blob[static_cast<std::size_t>(g.class_id)];
      for (std::int64_t y = 0; y < s.height; ++y) {
        const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
        for (std::int64_t x = 0; x < s.width; ++x) {
          const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
          plane[static_cast<std::size_t>(y * s.width + x)] += static_cast<float>(std::exp(-0.5 * (dx * dx + dy * dy)));
        }
      }
    }
    TensorF t(s);
    for (std::int64_t c = 0; c < s.channels; ++c) {
      auto ch = t.channel(c);
      const auto& bg = lp.background[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < ch.size(); ++i) {
        double v = bg[i];
        for (std::int64_t k = 0; k < n_classes; ++k)
          v += lp.class_weight[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] * blob[static_cast<std::size_t>(k)][i];
        ch[i] = static_cast<float>(v + noise * feature_rng_.normal());
      }
    }
    frame.features.push_back(std::move(t));
  }

  ++produced_;
  return {std::move(frame), d};
}

std::vector<double> generate_stream_to(std::ostream& out, const SynthConfig& config) {
  Generator gen(config);
  stream::StreamWriter writer(out, gen.header());
  std::vector<double> difficulty;
  difficulty.reserve(config.frame_count);
  while (!gen.done()) {
    auto [frame, d] = gen.next();
    writer.write(frame);
    difficulty.push_back(d);
  }
  return difficulty;
}

GeneratedStream generate_stream(const SynthConfig& config) {
  std::ostringstream out(std::ios::binary);
  auto difficulty = generate_stream_to(out, config);
  return {std::move(out).str(), std::move(difficulty)};
}

std::vector<stream::FrameRecord> generate_frames(const SynthConfig& config, std::vector<double>* difficulty) {
  Generator gen(config);
  std::vector<stream::FrameRecord> frames;
  frames.reserve(config.frame_count);
  while (!gen.done()) {
    auto [frame, d] = gen.next();
    frames.push_back(std::move(frame));
    if (difficulty) difficulty->push_back(d);
  }
  return frames;
}

void write_difficulty_csv(std::ostream& out, const std::vector<double>& difficulty) {
  out << "frame_id,difficulty\n" << std::setprecision(17);
  for (std::size_t i = 0; i < difficulty.size(); ++i) out << i << ',' << difficulty[i] << '\n';
}

std::pair<GeneratedStream, GeneratedStream> make_split(const SynthConfig& config, std::uint64_t train_seed,
                                                       std::uint64_t test_seed) {
  if (train_seed == test_seed) throw std::invalid_argument("make_split: train and test seeds must differ");
  SynthConfig a = config, b = config;
  a.seed = train_seed;
  b.seed = test_seed;
  return {generate_stream(a), generate_stream(b)};
}

}  // namespace detmon::synth
