#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "detmon/nn/adam.hpp"
#include "detmon/nn/params.hpp"
#include "detmon/rng.hpp"

namespace detmon::nn {

struct TrainOptions {
  int epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  // Called after each epoch with (epoch, mean minibatch loss).
  std::function<void(int, double)> on_epoch;
};

// Mini-batch Adam over n examples. `example_loss(i, grads)` returns the loss
// of example i and accumulates its gradient into grads. Batches are visited
// in a seeded shuffled order and summed in that fixed order, so a run is a
// pure function of (params, data, options).
//
// Returns the loss history: entry 0 is the mean loss of the initial
// parameters over all examples, entry e >= 1 the mean minibatch loss of
// epoch e.
template <typename T, typename ExampleLoss>
std::vector<double> minibatch_adam(ParameterSet<T>& params, std::size_t n, const TrainOptions& options, Rng& rng,
                                   ExampleLoss&& example_loss) {
  if (n == 0) throw std::invalid_argument("training set is empty");
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  std::vector<double> history;
  std::vector<T> grads = params.zeros_like();

  double initial = 0.0;
  for (std::size_t i = 0; i < n; ++i) initial += example_loss(i, grads);
  history.push_back(initial / static_cast<double>(n));

  AdamState<T> state(params.total());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      std::fill(grads.begin(), grads.end(), T{0});
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) batch_loss += example_loss(order[b], grads);
      const T scale = T{1} / static_cast<T>(end - start);
      for (T& g : grads) g *= scale;
      adam_step<T>(params, grads, state, options.learning_rate);
      epoch_loss += batch_loss / static_cast<double>(end - start);
      ++batches;
    }
    history.push_back(epoch_loss / static_cast<double>(batches));
    if (options.on_epoch) options.on_epoch(epoch, history.back());
  }
  return history;
}

}  // namespace detmon::nn
