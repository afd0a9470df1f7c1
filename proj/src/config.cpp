#include "detmon/app/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace detmon::app {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<std::int64_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::int64_t>(key, item));
  return out;
}

std::vector<Shape3> parse_shapes(const std::string& key, const std::string& value) {
  // "8x28x28,16x14x14"
  std::vector<Shape3> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream dims(trim(item));
    std::string d;
    std::vector<std::int64_t> v;
    while (std::getline(dims, d, 'x')) v.push_back(parse_number<std::int64_t>(key, d));
    if (v.size() != 3) throw ConfigError("layer shape '" + item + "' must be CxHxW");
    out.push_back({v[0], v[1], v[2]});
  }
  return out;
}

void apply_synth(synth::SynthConfig& s, const std::string& key, const std::string& value) {
  const std::string k = key.substr(6);
  auto num = [&] { return parse_number<double>(key, value); };
  if (k == "seed") s.seed = parse_number<std::uint64_t>(key, value);
  else if (k == "frames" || k == "frame_count") s.frame_count = parse_number<std::uint64_t>(key, value);
  else if (k == "image_width") s.image.width = parse_number<std::int64_t>(key, value);
  else if (k == "image_height") s.image.height = parse_number<std::int64_t>(key, value);
  else if (k == "min_objects") s.min_objects = parse_number<int>(key, value);
  else if (k == "max_objects") s.max_objects = parse_number<int>(key, value);
  else if (k == "walk_step") s.walk_step = num();
  else if (k == "walk_reversion") s.walk_reversion = num();
  else if (k == "walk_mean") s.walk_mean = num();
  else if (k == "difficulty_min") s.difficulty_min = num();
  else if (k == "difficulty_max") s.difficulty_max = num();
  else if (k == "initial_difficulty") s.initial_difficulty = num();
  else if (k == "miss_gain") s.miss_gain = num();
  else if (k == "localization_gain") s.localization_gain = num();
  else if (k == "spurious_gain") s.spurious_gain = num();
  else if (k == "confidence_gain") s.confidence_gain = num();
  else if (k == "feature_noise_gain") s.feature_noise_gain = num();
  else if (k == "base_feature_noise") s.base_feature_noise = num();
  else if (k == "max_spurious") s.max_spurious = parse_number<int>(key, value);
  else if (k == "layer_shapes") s.layer_shapes = parse_shapes(key, value);
  else if (k == "detector_seed") s.detector_seed = parse_number<std::uint64_t>(key, value);
  else if (k == "classes") {
    s.classes.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) s.classes.push_back(trim(item));
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

}  // namespace

void RunConfig::check() const {
  if (window_size < 1) throw ConfigError("window_size must be >= 1");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (critical_class < 1 || critical_class > num_classes - 1)
    throw ConfigError("critical_class must lie in [1, num_classes - 1]");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("iou_threshold must lie in (0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0 || baseline_epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0))
    throw ConfigError("decision_threshold must lie in [0, 1]");
  if (!(min_size_px >= 0.0)) throw ConfigError("min_size_px must be >= 0");
  if (cascade_mode != "accumulated" && cascade_mode != "pairwise")
    throw ConfigError("cascade_mode must be 'accumulated' or 'pairwise'");
}

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key), value = trim(raw_value);
  if (key.rfind("synth.", 0) == 0) return apply_synth(c.synth, key, value);
  if (key == "window_size") c.window_size = parse_number<std::size_t>(key, value);
  else if (key == "stride") c.stride = parse_number<std::size_t>(key, value);
  else if (key == "num_classes") c.num_classes = parse_number<int>(key, value);
  else if (key == "critical_class") c.critical_class = parse_number<int>(key, value);
  else if (key == "iou_threshold") c.iou_threshold = parse_number<double>(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "baseline_epochs") c.baseline_epochs = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "decision_threshold") c.decision_threshold = parse_number<double>(key, value);
  else if (key == "min_size_px") c.min_size_px = parse_number<double>(key, value);
  else if (key == "filter_out_channels") c.filter_out_channels = parse_number<std::int64_t>(key, value);
  else if (key == "hidden_dims") c.hidden_dims = parse_int_list(key, value);
  else if (key == "baseline_hidden_dims") c.baseline_hidden_dims = parse_int_list(key, value);
  else if (key == "cascade_mode") c.cascade_mode = value;
  else if (key == "class_merge") {
    // "van:vehicle,car:vehicle"
    c.class_merge.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError("class_merge entry '" + item + "' must be source:target");
      c.class_merge[trim(item.substr(0, colon))] = trim(item.substr(colon + 1));
    }
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    apply_setting(config, t.substr(0, eq), t.substr(eq + 1));
  }
}

}  // namespace detmon::app
