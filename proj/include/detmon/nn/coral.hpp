#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "detmon/nn/layers.hpp"

// Rank-consistent ordinal output (CORAL): C-1 binary "class > k" tasks that
// share one weight vector and differ only by ordered biases.
namespace detmon::nn {

// First `label` entries are 1, the rest 0.
inline std::vector<int> coral_encode(int label, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("coral_encode: num_classes must be >= 2");
  if (label < 0 || label >= num_classes)
    throw std::out_of_range("coral_encode: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(num_classes - 1) + "]");
  std::vector<int> bits(static_cast<std::size_t>(num_classes - 1), 0);
  for (int k = 0; k < label; ++k) bits[static_cast<std::size_t>(k)] = 1;
  return bits;
}

// Mean binary cross-entropy between sigmoid(logit_k) and bit k. When grad is
// non-empty, d(loss)/d(logit_k) is written to it.
template <typename T>
T coral_loss(std::span<const T> logits, std::span<const int> bits, std::span<T> grad = {}) {
  if (logits.size() != bits.size() || logits.empty())
    throw std::invalid_argument("coral_loss: logits and encoded label lengths differ");
  const T inv = T{1} / static_cast<T>(logits.size());
  T loss{0};
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const T z = logits[k];
    const T y = static_cast<T>(bits[k]);
    loss += softplus(z) - y * z;
    if (!grad.empty()) grad[k] = (sigmoid(z) - y) * inv;
  }
  return loss * inv;
}

// Bias b_k = b_1 - sum_{j=2..k} max(offset_j, 0), so b_1 >= b_2 >= ... for
// any parameter values.
template <typename T>
std::vector<T> coral_biases(T first_bias, std::span<const T> offsets) {
  std::vector<T> b(offsets.size() + 1);
  b[0] = first_bias;
  for (std::size_t j = 0; j < offsets.size(); ++j) b[j + 1] = b[j] - std::max(offsets[j], T{0});
  return b;
}

// logit_k = w . h + b_k
template <typename T>
std::vector<T> coral_head_forward(std::span<const T> h, std::span<const T> weight, T first_bias,
                                  std::span<const T> offsets) {
  if (weight.size() != h.size()) throw ShapeError("coral head: weight length does not match feature length");
  T score{0};
  for (std::size_t i = 0; i < h.size(); ++i) score += weight[i] * h[i];
  auto logits = coral_biases(first_bias, offsets);
  for (T& z : logits) z = score + z;
  return logits;
}

// Accumulates parameter gradients; returns d(loss)/dh. The offset gradient
// uses the subgradient of max(., 0) that passes through at 0.
template <typename T>
std::vector<T> coral_head_backward(std::span<const T> h, std::span<const T> grad_logits,
                                   std::span<const T> weight, std::span<const T> offsets,
                                   std::span<T> grad_weight, std::span<T> grad_first_bias,
                                   std::span<T> grad_offsets) {
  T gsum{0};
  for (T g : grad_logits) gsum += g;
  std::vector<T> gh(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    grad_weight[i] += gsum * h[i];
    gh[i] = gsum * weight[i];
  }
  grad_first_bias[0] += gsum;
  // d b_k / d offset_j = -1 for k >= j (offsets index j-1 feeds b_j onward).
  T tail{0};
  for (std::size_t j = offsets.size(); j-- > 0;) {
    tail += grad_logits[j + 1];
    if (offsets[j] >= T{0}) grad_offsets[j] -= tail;
  }
  return gh;
}

struct OrdinalPrediction {
  int ordinal_class = 0;
  std::vector<double> rank_probs;  // p_k = P(class > k-1), k = 1..C-1
};

// class = number of rank probabilities strictly above the threshold.
inline int count_above(std::span<const double> rank_probs, double threshold) {
  int cls = 0;
  for (double p : rank_probs) cls += p > threshold;
  return cls;
}

template <typename T>
OrdinalPrediction predict_from_logits(std::span<const T> logits, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("decision threshold must lie in [0,1]");
  OrdinalPrediction out;
  out.rank_probs.reserve(logits.size());
  for (T z : logits) out.rank_probs.push_back(static_cast<double>(sigmoid(z)));
  out.ordinal_class = count_above(out.rank_probs, threshold);
  return out;
}

}  // namespace detmon::nn
