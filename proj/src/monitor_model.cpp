#include "detmon/nn/monitor_model.hpp"

#include <stdexcept>

namespace detmon::nn {

using nlohmann::json;

std::vector<float> MonitorModel::logits(const features::WindowFeature& window) const {
  const auto normalized = features::normalize(window, norm);
  return net.forward(normalized.layers);
}

CascadeConfig cascade_config_for(const stream::StreamHeader& header, std::int64_t window_size, int num_classes) {
  CascadeConfig cfg;
  cfg.window_size = window_size;
  cfg.num_classes = num_classes;
  for (const auto& s : header.layer_shapes) cfg.layer_spatial.emplace_back(s.height, s.width);
  cfg.check();
  return cfg;
}

TrainResult train_monitor(std::vector<TrainingExample> data, const CascadeConfig& config,
                          const TrainOptions& options) {
  if (data.empty()) throw std::invalid_argument("train_monitor: empty dataset");
  for (const auto& ex : data)
    if (ex.label < 0 || ex.label >= config.num_classes)
      throw std::invalid_argument("train_monitor: label " + std::to_string(ex.label) + " out of range");

  std::vector<features::WindowFeature> windows;
  windows.reserve(data.size());
  for (auto& ex : data) windows.push_back(std::move(ex.window));
  auto norm = features::fit_norm_stats(windows);
  for (auto& w : windows) features::normalize_in_place(w, norm);

  Rng rng(options.seed);
  CascadeNet<float> net(config);
  net.initialize(rng);

  std::vector<std::vector<int>> bits;
  bits.reserve(data.size());
  for (const auto& ex : data) bits.push_back(coral_encode(ex.label, config.num_classes));

  typename CascadeNet<float>::Cache cache;
  std::vector<float> glogits(static_cast<std::size_t>(config.num_classes - 1));
  auto history = minibatch_adam<float>(net.params(), windows.size(), options, rng,
                                       [&](std::size_t i, std::vector<float>& grads) {
                                         const auto z = net.forward(windows[i].layers, &cache);
                                         const float loss = coral_loss<float>(z, bits[i], glogits);
                                         net.backward(cache, glogits, grads);
                                         return static_cast<double>(loss);
                                       });
  return {MonitorModel{std::move(net), std::move(norm), options.seed}, std::move(history)};
}

OrdinalPrediction predict(const features::WindowFeature& window, const MonitorModel& model, double threshold) {
  const auto z = model.logits(window);
  return predict_from_logits<float>(z, threshold);
}

void check_compatible(const MonitorModel& model, const stream::StreamHeader& header) {
  const auto& cfg = model.config();
  if (cfg.num_layers() != header.num_layers())
    throw ShapeError("model expects " + std::to_string(cfg.num_layers()) + " feature layers, stream has " +
                     std::to_string(header.num_layers()));
  for (std::size_t j = 0; j < cfg.num_layers(); ++j) {
    const auto& s = header.layer_shapes[j];
    if (cfg.layer_spatial[j] != std::pair{s.height, s.width})
      throw ShapeError("model layer " + std::to_string(j) + " spatial size differs from stream layer shape " +
                       s.str());
  }
}

namespace {

json config_to_json(const CascadeConfig& c) {
  json spatial = json::array();
  for (auto [h, w] : c.layer_spatial) spatial.push_back({h, w});
  return {{"window_size", c.window_size}, {"layer_spatial", spatial}, {"filter_out_channels", c.filter_out_channels},
          {"kernel_size", c.kernel_size}, {"hidden_dims", c.hidden_dims}, {"num_classes", c.num_classes},
          {"mode", to_string(c.mode)}};
}

CascadeConfig config_from_json(const json& j) {
  CascadeConfig c;
  c.window_size = j.at("window_size").get<std::int64_t>();
  for (const auto& s : j.at("layer_spatial")) c.layer_spatial.emplace_back(s.at(0).get<std::int64_t>(), s.at(1).get<std::int64_t>());
  c.filter_out_channels = j.at("filter_out_channels").get<std::int64_t>();
  c.kernel_size = j.at("kernel_size").get<std::int64_t>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<std::int64_t>>();
  c.num_classes = j.at("num_classes").get<int>();
  c.mode = cascade_mode_from_string(j.at("mode").get<std::string>());
  return c;
}

}  // namespace

model_file::Envelope to_envelope(const MonitorModel& model) {
  model_file::Envelope env;
  env.kind = kMonitorKind;
  env.meta = {{"config", config_to_json(model.config())},
              {"norm", {{"mean", model.norm.mean}, {"std", model.norm.stddev}}},
              {"seed", model.seed}};
  env.params = model.net.params();
  return env;
}

MonitorModel from_envelope(const model_file::Envelope& env) {
  if (env.kind != kMonitorKind) throw FormatError("model file kind is '" + env.kind + "', expected 'monitor'");
  try {
    CascadeConfig cfg = config_from_json(env.meta.at("config"));
    CascadeNet<float> net(cfg);
    model_file::require_layout(net.params(), env.params);
    net.params().values() = env.params.values();
    features::NormStats norm{env.meta.at("norm").at("mean").get<std::vector<double>>(),
                             env.meta.at("norm").at("std").get<std::vector<double>>()};
    if (norm.mean.size() != cfg.num_layers() || norm.stddev.size() != cfg.num_layers())
      throw FormatError("normalization statistics do not match the layer count");
    return MonitorModel{std::move(net), std::move(norm), env.meta.at("seed").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed monitor metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid monitor configuration: ") + e.what());
  }
}

void save_monitor(const std::filesystem::path& path, const MonitorModel& model) {
  model_file::save(path, to_envelope(model));
}

MonitorModel load_monitor(const std::filesystem::path& path) { return from_envelope(model_file::load(path)); }

}  // namespace detmon::nn
