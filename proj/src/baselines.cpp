#include "detmon/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "detmon/mapeval.hpp"
#include "detmon/nn/layers.hpp"

namespace detmon::baselines {

using nlohmann::json;

std::string to_string(BaselineKind kind) {
  return kind == BaselineKind::kHandcrafted ? "handcrafted" : "pooled_last_layer";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "handcrafted") return BaselineKind::kHandcrafted;
  if (s == "pooled_last_layer" || s == "pooled") return BaselineKind::kPooledLastLayer;
  throw std::invalid_argument("unknown baseline kind '" + s + "'");
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::array<double, kHandcraftedWidth> handcrafted_features(const stream::FrameRecord& frame,
                                                           const stream::ImageSize& image) {
  std::array<double, kHandcraftedWidth> out{};
  const auto& dets = frame.detections;
  if (dets.empty()) return out;
  std::vector<double> conf, overlap, width, height;
  const double iw = static_cast<double>(image.width), ih = static_cast<double>(image.height);
  for (const auto& d : dets) {
    conf.push_back(d.confidence);
    width.push_back(std::clamp(d.box.width() / iw, 0.0, 1.0));
    height.push_back(std::clamp(d.box.height() / ih, 0.0, 1.0));
  }
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = i + 1; j < dets.size(); ++j) overlap.push_back(mapeval::iou(dets[i].box, dets[j].box));
  out = {mean_of(conf),  median_of(conf),  mean_of(overlap), median_of(overlap),
         mean_of(width), median_of(width), mean_of(height),  median_of(height)};
  return out;
}

std::vector<double> pooled_last_layer(const stream::FrameRecord& frame) {
  if (frame.features.empty()) throw ShapeError("pooled_last_layer: frame has no feature layers");
  const auto& t = frame.features.back();
  std::vector<double> out(static_cast<std::size_t>(t.channels()));
  for (std::int64_t c = 0; c < t.channels(); ++c) {
    double s = 0;
    for (float v : t.channel(c)) s += v;
    out[static_cast<std::size_t>(c)] = s / static_cast<double>(t.shape().plane());
  }
  return out;
}

std::vector<double> frame_vector(BaselineKind kind, const stream::FrameRecord& frame, const stream::ImageSize& image) {
  if (kind == BaselineKind::kHandcrafted) {
    const auto a = handcrafted_features(frame, image);
    return {a.begin(), a.end()};
  }
  return pooled_last_layer(frame);
}

WindowVectorizer::WindowVectorizer(BaselineKind kind, std::size_t window_size, stream::ImageSize image)
    : kind_(kind), window_size_(window_size), image_(image) {
  if (window_size_ < 1) throw std::invalid_argument("window size must be >= 1");
}

std::optional<std::vector<double>> WindowVectorizer::push(const stream::FrameRecord& frame) {
  frames_.push_back(frame_vector(kind_, frame, image_));
  if (frames_.size() > window_size_) frames_.pop_front();
  if (frames_.size() < window_size_) return std::nullopt;
  std::vector<double> out;
  for (const auto& f : frames_) out.insert(out.end(), f.begin(), f.end());
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
BinaryMlp<T>::BinaryMlp(std::size_t input_dim, std::vector<std::int64_t> hidden_dims)
    : input_dim_(input_dim), hidden_(std::move(hidden_dims)) {
  if (input_dim_ == 0) throw std::invalid_argument("baseline classifier needs a non-empty input");
  auto prev = static_cast<std::int64_t>(input_dim_);
  std::vector<std::int64_t> widths = hidden_;
  widths.push_back(1);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] < 1) throw std::invalid_argument("baseline hidden widths must be positive");
    w_.push_back(params_.add("dense." + std::to_string(i) + ".weight", {widths[i], prev}));
    b_.push_back(params_.add("dense." + std::to_string(i) + ".bias", {widths[i]}));
    prev = widths[i];
  }
}

template <typename T>
void BinaryMlp<T>::initialize(Rng& rng) {
  for (std::size_t i = 0; i + 1 < w_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(params_.infos()[w_[i]].shape[1]));
    for (T& v : params_.view(w_[i])) v = static_cast<T>(rng.uniform(-bound, bound));
    for (T& v : params_.view(b_[i])) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  for (T& v : params_.view(w_.back())) v = T{0};
  for (T& v : params_.view(b_.back())) v = T{0};
}

template <typename T>
T BinaryMlp<T>::logit(std::span<const T> x) const {
  if (x.size() != input_dim_) throw ShapeError("baseline classifier: input width mismatch");
  std::vector<T> h(x.begin(), x.end());
  for (std::size_t i = 0; i < w_.size(); ++i) {
    h = nn::dense_forward<T>(h, params_.view(w_[i]), params_.view(b_[i]));
    if (i + 1 < w_.size()) nn::relu_in_place<T>(h);
  }
  return h[0];
}

template <typename T>
T BinaryMlp<T>::loss_and_grad(std::span<const T> x, bool positive, std::vector<T>& grads) const {
  if (grads.size() != params_.total()) grads.assign(params_.total(), T{0});
  std::vector<std::vector<T>> inputs, pre;
  std::vector<T> h(x.begin(), x.end());
  for (std::size_t i = 0; i < w_.size(); ++i) {
    inputs.push_back(h);
    auto z = nn::dense_forward<T>(h, params_.view(w_[i]), params_.view(b_[i]));
    pre.push_back(z);
    if (i + 1 < w_.size()) nn::relu_in_place<T>(z);
    h = std::move(z);
  }
  const T z = h[0];
  const T y = positive ? T{1} : T{0};
  const T loss = nn::softplus(z) - y * z;
  std::vector<T> g = {nn::sigmoid(z) - y};
  for (std::size_t i = w_.size(); i-- > 0;) {
    if (i + 1 < w_.size()) nn::relu_backward<T>(pre[i], g);
    g = nn::dense_backward<T>(inputs[i], g, params_.view(w_[i]), nn::grad_view(grads, params_, w_[i]),
                              nn::grad_view(grads, params_, b_[i]));
  }
  return loss;
}

template class BinaryMlp<float>;
template class BinaryMlp<double>;

// ---------------------------------------------------------------------------

namespace {

std::vector<float> standardize(std::span<const double> v, const std::vector<double>& mean,
                               const std::vector<double>& sd) {
  if (v.size() != mean.size())
    throw ShapeError("baseline input has " + std::to_string(v.size()) + " features, model expects " +
                     std::to_string(mean.size()));
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>((v[i] - mean[i]) / sd[i]);
  return out;
}

}  // namespace

BaselineTrainResult train_baseline(BaselineKind kind, std::size_t window_size,
                                   std::span<const std::vector<double>> features, const std::vector<bool>& alerts,
                                   const nn::TrainOptions& options, std::vector<std::int64_t> hidden_dims) {
  if (features.empty()) throw std::invalid_argument("train_baseline: empty dataset");
  if (features.size() != alerts.size()) throw std::invalid_argument("train_baseline: features/labels mismatch");
  const auto pos = std::count(alerts.begin(), alerts.end(), true);
  if (pos == 0 || static_cast<std::size_t>(pos) == alerts.size())
    throw std::invalid_argument("train_baseline: training labels contain a single class");
  const std::size_t dim = features.front().size();

  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& f : features) {
    if (f.size() != dim) throw ShapeError("train_baseline: inconsistent feature widths");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += f[i];
  }
  for (double& m : mean) m /= static_cast<double>(features.size());
  for (const auto& f : features)
    for (std::size_t i = 0; i < dim; ++i) sd[i] += (f[i] - mean[i]) * (f[i] - mean[i]);
  for (double& s : sd) s = std::max(std::sqrt(s / static_cast<double>(features.size())), 1e-6);

  std::vector<std::vector<float>> xs;
  xs.reserve(features.size());
  for (const auto& f : features) xs.push_back(standardize(f, mean, sd));

  Rng rng(options.seed);
  BinaryMlp<float> net(dim, std::move(hidden_dims));
  net.initialize(rng);
  auto history = nn::minibatch_adam<float>(net.params(), xs.size(), options, rng,
                                           [&](std::size_t i, std::vector<float>& grads) {
                                             return static_cast<double>(net.loss_and_grad(xs[i], alerts[i], grads));
                                           });
  return {BaselineModel{kind, window_size, std::move(mean), std::move(sd), std::move(net), options.seed},
          std::move(history)};
}

double predict_baseline(std::span<const double> window_vector, const BaselineModel& model) {
  const auto x = standardize(window_vector, model.feature_mean, model.feature_std);
  return static_cast<double>(nn::sigmoid(model.net.logit(x)));
}

model_file::Envelope to_envelope(const BaselineModel& model) {
  model_file::Envelope env;
  env.kind = "baseline:" + to_string(model.kind);
  env.meta = {{"window_size", model.window_size}, {"input_dim", model.net.input_dim()},
              {"hidden_dims", model.net.hidden_dims()}, {"feature_mean", model.feature_mean},
              {"feature_std", model.feature_std}, {"seed", model.seed}};
  env.params = model.net.params();
  return env;
}

BaselineModel from_envelope(const model_file::Envelope& env) {
  const std::string prefix = "baseline:";
  if (env.kind.rfind(prefix, 0) != 0) throw FormatError("model file kind '" + env.kind + "' is not a baseline");
  try {
    BaselineModel m{baseline_kind_from_string(env.kind.substr(prefix.size())),
                    env.meta.at("window_size").get<std::size_t>(),
                    env.meta.at("feature_mean").get<std::vector<double>>(),
                    env.meta.at("feature_std").get<std::vector<double>>(),
                    BinaryMlp<float>(env.meta.at("input_dim").get<std::size_t>(),
                                     env.meta.at("hidden_dims").get<std::vector<std::int64_t>>()),
                    env.meta.at("seed").get<std::uint64_t>()};
    model_file::require_layout(m.net.params(), env.params);
    m.net.params().values() = env.params.values();
    if (m.feature_mean.size() != m.net.input_dim() || m.feature_std.size() != m.net.input_dim())
      throw FormatError("baseline standardization does not match the input width");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed baseline metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid baseline metadata: ") + e.what());
  }
}

void save_baseline(const std::filesystem::path& path, const BaselineModel& model) {
  model_file::save(path, to_envelope(model));
}

BaselineModel load_baseline(const std::filesystem::path& path) { return from_envelope(model_file::load(path)); }

}  // namespace detmon::baselines
