#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "detmon/error.hpp"

namespace detmon::nn {

struct ParamInfo {
  std::string name;
  std::vector<std::int64_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  // Projected onto [0, inf) after every optimizer step.
  bool non_negative = false;

  bool operator==(const ParamInfo&) const = default;
};

// All trainable tensors of a network in one flat buffer. Gradients use a
// buffer with the same layout.
template <typename T>
class ParameterSet {
 public:
  std::size_t add(std::string name, std::vector<std::int64_t> shape, bool non_negative = false) {
    const auto count = static_cast<std::size_t>(
        std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>()));
    infos_.push_back({std::move(name), std::move(shape), values_.size(), count, non_negative});
    values_.resize(values_.size() + count, T{0});
    return infos_.size() - 1;
  }

  std::span<T> view(std::size_t i) { return std::span<T>(values_).subspan(infos_[i].offset, infos_[i].size); }
  std::span<const T> view(std::size_t i) const {
    return std::span<const T>(values_).subspan(infos_[i].offset, infos_[i].size);
  }

  const std::vector<ParamInfo>& infos() const noexcept { return infos_; }
  std::vector<T>& values() noexcept { return values_; }
  const std::vector<T>& values() const noexcept { return values_; }
  std::size_t total() const noexcept { return values_.size(); }

  std::vector<T> zeros_like() const { return std::vector<T>(values_.size(), T{0}); }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& info : infos_) out.add(info.name, info.shape, info.non_negative);
    std::copy(values_.begin(), values_.end(), out.values().begin());
    return out;
  }

 private:
  std::vector<ParamInfo> infos_;
  std::vector<T> values_;
};

// Gradient view for block i of a flat gradient buffer.
template <typename T, typename P>
std::span<T> grad_view(std::vector<T>& grads, const ParameterSet<P>& params, std::size_t i) {
  const auto& info = params.infos()[i];
  return std::span<T>(grads).subspan(info.offset, info.size);
}

}  // namespace detmon::nn
