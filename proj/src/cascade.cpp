#include "detmon/nn/cascade.hpp"

#include <cmath>
#include <stdexcept>

namespace detmon::nn {

void CascadeConfig::check() const {
  if (window_size < 1) throw std::invalid_argument("cascade: window size must be >= 1");
  if (layer_spatial.empty()) throw std::invalid_argument("cascade: at least one feature layer is required");
  if (num_classes < 2) throw std::invalid_argument("cascade: num_classes must be >= 2");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("cascade: kernel size must be odd");
  for (auto d : hidden_dims)
    if (d < 1) throw std::invalid_argument("cascade: hidden widths must be positive");
  for (std::size_t j = 0; j < layer_spatial.size(); ++j) {
    const auto [h, w] = layer_spatial[j];
    if (h < 1 || w < 1) throw std::invalid_argument("cascade: layer dims must be positive");
    if (j + 1 < layer_spatial.size()) {
      const auto [h2, w2] = layer_spatial[j + 1];
      if (h2 < 1 || w2 < 1 || h % h2 != 0 || w % w2 != 0)
        throw std::invalid_argument("cascade: spatial ratio between layers " + std::to_string(j) + " and " +
                                    std::to_string(j + 1) + " is not a positive integer");
    }
  }
}

std::string to_string(CascadeMode mode) {
  return mode == CascadeMode::kAccumulated ? "accumulated" : "pairwise";
}

CascadeMode cascade_mode_from_string(const std::string& s) {
  if (s == "accumulated") return CascadeMode::kAccumulated;
  if (s == "pairwise") return CascadeMode::kPairwise;
  throw std::invalid_argument("unknown cascade mode '" + s + "'");
}

template <typename T>
CascadeNet<T>::CascadeNet(CascadeConfig config) : config_(std::move(config)) {
  config_.check();
  const std::int64_t omega = config_.window_size;
  const std::int64_t out = config_.filter_channels();
  const std::int64_t k = config_.kernel_size;
  const std::size_t p = config_.num_layers();
  for (std::size_t j = 0; j + 1 < p; ++j) {
    const std::int64_t in = filter_geometry(j).in_channels;
    conv_w_.push_back(params_.add("cascade." + std::to_string(j) + ".weight", {out, in, k, k}));
    conv_b_.push_back(params_.add("cascade." + std::to_string(j) + ".bias", {out}));
  }
  if (p == 1)
    pooled_width_ = static_cast<std::size_t>(omega);
  else if (config_.mode == CascadeMode::kAccumulated)
    pooled_width_ = static_cast<std::size_t>(out + omega);
  else
    pooled_width_ = (p - 1) * static_cast<std::size_t>(out + omega);

  std::int64_t prev = static_cast<std::int64_t>(pooled_width_);
  for (std::size_t i = 0; i < config_.hidden_dims.size(); ++i) {
    const auto width = config_.hidden_dims[i];
    dense_w_.push_back(params_.add("head." + std::to_string(i) + ".weight", {width, prev}));
    dense_b_.push_back(params_.add("head." + std::to_string(i) + ".bias", {width}));
    prev = width;
  }
  coral_w_ = params_.add("coral.weight", {prev});
  coral_b_ = params_.add("coral.bias", {1});
  coral_off_ = params_.add("coral.offsets", {config_.num_classes - 2}, /*non_negative=*/true);
}

template <typename T>
ConvGeometry CascadeNet<T>::filter_geometry(std::size_t j) const {
  const auto [h, w] = config_.layer_spatial[j];
  const auto [h2, w2] = config_.layer_spatial[j + 1];
  ConvGeometry g;
  const bool first = j == 0 || config_.mode == CascadeMode::kPairwise;
  g.in_channels = first ? config_.window_size : config_.filter_channels() + config_.window_size;
  g.out_channels = config_.filter_channels();
  g.kernel = config_.kernel_size;
  g.padding = config_.kernel_size / 2;
  g.stride_h = h / h2;
  g.stride_w = w / w2;
  return g;
}

template <typename T>
std::vector<Shape3> CascadeNet<T>::input_shapes() const {
  std::vector<Shape3> shapes;
  for (auto [h, w] : config_.layer_spatial) shapes.push_back({config_.window_size, h, w});
  return shapes;
}

template <typename T>
void CascadeNet<T>::initialize(Rng& rng) {
  auto fill = [&](std::size_t idx, double bound) {
    for (T& v : params_.view(idx)) v = static_cast<T>(rng.uniform(-bound, bound));
  };
  for (std::size_t j = 0; j < conv_w_.size(); ++j) {
    const auto g = filter_geometry(j);
    const double bound = 1.0 / std::sqrt(static_cast<double>(g.in_channels * g.kernel * g.kernel));
    fill(conv_w_[j], bound);
    fill(conv_b_[j], bound);
  }
  for (std::size_t i = 0; i < dense_w_.size(); ++i) {
    const auto fan_in = params_.infos()[dense_w_[i]].shape[1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    fill(dense_w_[i], bound);
    fill(dense_b_[i], bound);
  }
  for (std::size_t idx : {coral_w_, coral_b_, coral_off_})
    for (T& v : params_.view(idx)) v = T{0};
}

template <typename T>
std::vector<T> CascadeNet<T>::forward(std::span<const Tensor<T>> window, Cache* cache) const {
  const std::size_t p = config_.num_layers();
  if (window.size() != p)
    throw ShapeError("cascade: window has " + std::to_string(window.size()) + " layers, model expects " +
                     std::to_string(p));
  const auto shapes = input_shapes();
  for (std::size_t j = 0; j < p; ++j)
    if (window[j].shape() != shapes[j])
      throw ShapeError("cascade: layer " + std::to_string(j) + " has shape " + window[j].shape().str() +
                       ", model expects " + shapes[j].str());

  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache{};

  std::vector<Tensor<T>> pooled_sources;
  if (p == 1) {
    pooled_sources.push_back(window[0]);
  } else {
    Tensor<T> acc = window[0];
    for (std::size_t j = 0; j + 1 < p; ++j) {
      const Tensor<T>& in = config_.mode == CascadeMode::kAccumulated ? acc : window[j];
      Tensor<T> pre = conv2d_forward<T>(in, params_.view(conv_w_[j]), params_.view(conv_b_[j]), filter_geometry(j));
      Tensor<T> act = pre;
      relu_in_place<T>(act.values());
      c.conv_in.push_back(in);
      c.conv_pre.push_back(std::move(pre));
      acc = concat_channels(act, window[j + 1]);
      if (config_.mode == CascadeMode::kPairwise) pooled_sources.push_back(acc);
    }
    if (config_.mode == CascadeMode::kAccumulated) pooled_sources.push_back(std::move(acc));
  }

  for (const auto& src : pooled_sources) {
    c.pooled_shapes.push_back(src.shape());
    const auto v = adaptive_avg_pool(src);
    c.pooled.insert(c.pooled.end(), v.begin(), v.end());
  }

  std::vector<T> h = c.pooled;
  for (std::size_t i = 0; i < dense_w_.size(); ++i) {
    c.dense_in.push_back(h);
    auto pre = dense_forward<T>(h, params_.view(dense_w_[i]), params_.view(dense_b_[i]));
    c.dense_pre.push_back(pre);
    relu_in_place<T>(pre);
    h = std::move(pre);
  }
  c.head_in = h;
  c.logits = coral_head_forward<T>(h, params_.view(coral_w_), params_.view(coral_b_)[0], params_.view(coral_off_));
  return c.logits;
}

template <typename T>
void CascadeNet<T>::backward(const Cache& c, std::span<const T> grad_logits, std::vector<T>& grads,
                             std::vector<Tensor<T>>* grad_window) const {
  if (grads.size() != params_.total()) grads.assign(params_.total(), T{0});
  const std::size_t p = config_.num_layers();

  auto gh = coral_head_backward<T>(c.head_in, grad_logits, params_.view(coral_w_), params_.view(coral_off_),
                                   grad_view(grads, params_, coral_w_), grad_view(grads, params_, coral_b_),
                                   grad_view(grads, params_, coral_off_));
  for (std::size_t i = dense_w_.size(); i-- > 0;) {
    relu_backward<T>(c.dense_pre[i], gh);
    gh = dense_backward<T>(c.dense_in[i], gh, params_.view(dense_w_[i]), grad_view(grads, params_, dense_w_[i]),
                           grad_view(grads, params_, dense_b_[i]));
  }

  if (grad_window) {
    grad_window->clear();
    for (const auto& s : input_shapes()) grad_window->emplace_back(s);
  }

  // Split the pooled gradient back over its sources.
  std::vector<Tensor<T>> g_sources;
  std::size_t off = 0;
  for (const auto& s : c.pooled_shapes) {
    const auto n = static_cast<std::size_t>(s.channels);
    g_sources.push_back(adaptive_avg_pool_backward<T>(s, std::span<const T>(gh).subspan(off, n)));
    off += n;
  }

  if (p == 1) {
    if (grad_window) (*grad_window)[0] = std::move(g_sources[0]);
    return;
  }

  const auto out_ch = static_cast<std::size_t>(config_.filter_channels());
  auto split = [&](const Tensor<T>& g, std::size_t j) {
    // g is the gradient of ReLU(pre_j) ⊕ F_{j+1}; returns the part for pre_j
    // and routes the rest to window layer j+1.
    const auto& pre = c.conv_pre[j];
    const std::size_t n_act = out_ch * pre.shape().plane();
    Tensor<T> g_pre(pre.shape(), std::vector<T>(g.values().begin(), g.values().begin() + static_cast<std::ptrdiff_t>(n_act)));
    relu_backward<T>(pre.values(), g_pre.values());
    if (grad_window) {
      auto& dst = (*grad_window)[j + 1].values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[n_act + i];
    }
    return g_pre;
  };

  if (config_.mode == CascadeMode::kAccumulated) {
    Tensor<T> g_acc = std::move(g_sources[0]);
    for (std::size_t j = p - 1; j-- > 0;) {
      Tensor<T> g_pre = split(g_acc, j);
      Tensor<T> g_in(c.conv_in[j].shape());
      conv2d_backward<T>(c.conv_in[j], g_pre, params_.view(conv_w_[j]), filter_geometry(j),
                         grad_view(grads, params_, conv_w_[j]), grad_view(grads, params_, conv_b_[j]), &g_in);
      if (j == 0) {
        if (grad_window) {
          auto& dst = (*grad_window)[0].values();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g_in.values()[i];
        }
      } else {
        g_acc = std::move(g_in);
      }
    }
  } else {
    for (std::size_t j = 0; j + 1 < p; ++j) {
      Tensor<T> g_pre = split(g_sources[j], j);
      Tensor<T> g_in(c.conv_in[j].shape());
      conv2d_backward<T>(c.conv_in[j], g_pre, params_.view(conv_w_[j]), filter_geometry(j),
                         grad_view(grads, params_, conv_w_[j]), grad_view(grads, params_, conv_b_[j]),
                         grad_window ? &g_in : nullptr);
      if (grad_window) {
        auto& dst = (*grad_window)[j].values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g_in.values()[i];
      }
    }
  }
}

template class CascadeNet<float>;
template class CascadeNet<double>;

}  // namespace detmon::nn
