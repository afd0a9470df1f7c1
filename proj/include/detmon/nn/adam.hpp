#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "detmon/error.hpp"
#include "detmon/nn/params.hpp"

namespace detmon::nn {

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n = 0) : first_moment(n, T{0}), second_moment(n, T{0}) {}
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One bias-corrected Adam update. Parameters flagged non_negative are
// projected onto [0, inf) afterwards. Throws NonFiniteGradient naming the
// offending parameter before touching any state.
template <typename T>
void adam_step(ParameterSet<T>& params, std::span<const T> grads, AdamState<T>& state, double lr) {
  if (grads.size() != params.total() || state.first_moment.size() != params.total() ||
      state.second_moment.size() != params.total())
    throw ShapeError("adam_step: gradient/state sizes do not match the parameter set");
  for (const auto& info : params.infos())
    for (std::size_t i = info.offset; i < info.offset + info.size; ++i)
      if (!std::isfinite(static_cast<double>(grads[i])))
        throw NonFiniteGradient("non-finite gradient in parameter '" + info.name + "' at index " +
                                std::to_string(i - info.offset));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, t)));
  const T step = static_cast<T>(lr), eps = static_cast<T>(state.epsilon);
  auto& values = params.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T g = grads[i];
    T& m = state.first_moment[i];
    T& v = state.second_moment[i];
    m = b1 * m + (T{1} - b1) * g;
    v = b2 * v + (T{1} - b2) * g * g;
    values[i] -= step * (m * c1) / (std::sqrt(v * c2) + eps);
  }
  for (const auto& info : params.infos()) {
    if (!info.non_negative) continue;
    for (std::size_t i = info.offset; i < info.offset + info.size; ++i)
      if (values[i] < T{0}) values[i] = T{0};
  }
}

}  // namespace detmon::nn
