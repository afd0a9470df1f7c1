#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detmon/nn/coral.hpp"
#include "detmon/nn/layers.hpp"
#include "detmon/nn/params.hpp"
#include "detmon/rng.hpp"
#include "detmon/tensor.hpp"

namespace detmon::nn {

enum class CascadeMode {
  // acc_1 = F_1, acc_{j+1} = ReLU(f_j(acc_j)) ⊕ F_{j+1}; the last acc is pooled.
  kAccumulated,
  // out_j = ReLU(f_j(F_j)) ⊕ F_{j+1}; every out_j is pooled and concatenated.
  kPairwise,
};

struct CascadeConfig {
  std::int64_t window_size = 10;
  std::vector<std::pair<std::int64_t, std::int64_t>> layer_spatial;  // (h_j, w_j)
  std::int64_t filter_out_channels = 0;  // 0 -> window_size
  std::int64_t kernel_size = 3;
  std::vector<std::int64_t> hidden_dims = {64};
  int num_classes = 5;
  CascadeMode mode = CascadeMode::kAccumulated;

  std::int64_t filter_channels() const noexcept {
    return filter_out_channels > 0 ? filter_out_channels : window_size;
  }
  std::size_t num_layers() const noexcept { return layer_spatial.size(); }

  // Throws std::invalid_argument on non-integral spatial ratios, C < 2, etc.
  void check() const;

  bool operator==(const CascadeConfig&) const = default;
};

// The cascaded monitor network: filters f_1..f_{p-1}, global pooling, dense
// hidden layers with ReLU and a CORAL head producing C-1 logits.
template <typename T>
class CascadeNet {
 public:
  explicit CascadeNet(CascadeConfig config);

  const CascadeConfig& config() const noexcept { return config_; }
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }

  // Fan-in uniform initialisation for filters and hidden layers; the CORAL
  // head starts at zero so every initial logit is 0.
  void initialize(Rng& rng);

  std::size_t pooled_width() const noexcept { return pooled_width_; }
  std::vector<Shape3> input_shapes() const;

  struct Cache {
    std::vector<Tensor<T>> conv_in;   // input to each filter
    std::vector<Tensor<T>> conv_pre;  // pre-activation output of each filter
    std::vector<Shape3> pooled_shapes;
    std::vector<T> pooled;
    std::vector<std::vector<T>> dense_in;
    std::vector<std::vector<T>> dense_pre;
    std::vector<T> head_in;
    std::vector<T> logits;
  };

  std::vector<T> forward(std::span<const Tensor<T>> window, Cache* cache = nullptr) const;

  // Accumulates d(loss)/d(params) into grads given d(loss)/d(logits).
  // Optionally returns d(loss)/d(window layers).
  void backward(const Cache& cache, std::span<const T> grad_logits, std::vector<T>& grads,
                std::vector<Tensor<T>>* grad_window = nullptr) const;

 private:
  ConvGeometry filter_geometry(std::size_t j) const;

  CascadeConfig config_;
  ParameterSet<T> params_;
  std::vector<std::size_t> conv_w_, conv_b_, dense_w_, dense_b_;
  std::size_t coral_w_ = 0, coral_b_ = 0, coral_off_ = 0;
  std::size_t pooled_width_ = 0;
};

extern template class CascadeNet<float>;
extern template class CascadeNet<double>;

std::string to_string(CascadeMode mode);
CascadeMode cascade_mode_from_string(const std::string& s);

}  // namespace detmon::nn
