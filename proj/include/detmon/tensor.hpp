#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detmon/error.hpp"

namespace detmon {

struct Shape3 {
  std::int64_t channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels * height * width);
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height * width); }

  bool operator==(const Shape3&) const = default;

  std::string str() const {
    return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
           std::to_string(width) + ")";
  }
};

// Dense channel-major (c, h, w) tensor, row-major within each channel.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  const Shape3& shape() const noexcept { return shape_; }
  std::int64_t channels() const noexcept { return shape_.channels; }
  std::int64_t height() const noexcept { return shape_.height; }
  std::int64_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>((c * shape_.height + y) * shape_.width + x)];
  }
  const T& at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>((c * shape_.height + y) * shape_.width + x)];
  }

  std::span<T> channel(std::int64_t c) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(), shape_.plane());
  }
  std::span<const T> channel(std::int64_t c) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(),
                                             shape_.plane());
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape3 shape_{};
  std::vector<T> data_;
};

using TensorF = Tensor<float>;

}  // namespace detmon
