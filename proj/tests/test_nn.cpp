#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "detmon/error.hpp"
#include "detmon/model_file.hpp"
#include "detmon/nn/adam.hpp"
#include "detmon/nn/cascade.hpp"
#include "detmon/nn/coral.hpp"
#include "detmon/nn/layers.hpp"
#include "detmon/nn/monitor_model.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

using namespace detmon;
using namespace detmon::nn;

TEST(Conv2d, UnitKernelIsIdentity) {
  Rng rng(1);
  const auto x = oracle::random_tensor(rng, {1, 4, 5});
  const std::vector<double> w{1.0}, b{0.0};
  EXPECT_EQ(conv2d_forward<double>(x, w, b, {1, 1, 1, 1, 1, 0}), x);
}

TEST(Conv2d, HandSum) {
  const Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
  const std::vector<double> w(4, 1.0), b{0.0};
  const auto y = conv2d_forward<double>(x, w, b, {1, 1, 2, 1, 1, 0});
  EXPECT_EQ(y, Tensor<double>({1, 1, 1}, {10}));
}

TEST(Conv2d, MatchesNaiveLoops) {
  Rng rng(2);
  for (int c = 0; c < 100; ++c) {
    ConvGeometry g{rng.between(1, 4), rng.between(1, 4), rng.between(1, 3), rng.between(1, 3), rng.between(1, 3),
                   rng.between(0, 1)};
    const Shape3 in{g.in_channels, rng.between(g.kernel, 9), rng.between(g.kernel, 9)};
    const auto x = oracle::random_tensor(rng, in);
    const auto w = gradcheck::random_vec(rng, g.weight_count());
    const auto b = gradcheck::random_vec(rng, static_cast<std::size_t>(g.out_channels));
    const auto got = conv2d_forward<double>(x, w, b, g);
    const auto ref = oracle::conv2d(x, w, b, g.out_channels, g.kernel, g.stride_h, g.stride_w, g.padding);
    ASSERT_EQ(got.shape(), ref.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], ref.values()[i], 1e-12);
  }
}

TEST(Conv2d, IncompatibleShapeRejected) {
  const Tensor<double> x({2, 2, 2});
  const std::vector<double> w(9, 1.0), b{0.0};
  EXPECT_THROW(conv2d_forward<double>(x, w, b, {1, 1, 3, 1, 1, 0}), ShapeError);
  EXPECT_THROW(conv2d_forward<double>(x, w, b, {2, 1, 3, 1, 1, 0}), ShapeError);
}

TEST(AvgPool, Examples) {
  EXPECT_EQ(adaptive_avg_pool(Tensor<double>({1, 2, 2}, {1, 3, 5, 7})), std::vector<double>{4});
  EXPECT_EQ(adaptive_avg_pool(Tensor<double>({2, 3, 3}, 2.5)), std::vector<double>({2.5, 2.5}));
  EXPECT_EQ(adaptive_avg_pool(Tensor<double>({3, 1, 1}, {1, 2, 3})), std::vector<double>({1, 2, 3}));
}

TEST(GradientCheck, EveryLayerWithinTolerance) {
  for (const auto& r : gradcheck::run_all(99, 20)) {
    EXPECT_EQ(r.cases, 20) << r.layer;
    EXPECT_LT(r.worst, 1e-6) << r.layer;
  }
}

TEST(Coral, Encode) {
  EXPECT_EQ(coral_encode(3, 5), std::vector<int>({1, 1, 1, 0}));
  EXPECT_EQ(coral_encode(0, 5), std::vector<int>({0, 0, 0, 0}));
  EXPECT_EQ(coral_encode(4, 5), std::vector<int>({1, 1, 1, 1}));
  for (int c = 2; c < 9; ++c)
    for (int l = 0; l < c; ++l) {
      const auto e = coral_encode(l, c);
      EXPECT_EQ(std::accumulate(e.begin(), e.end(), 0), l);
    }
  EXPECT_THROW(coral_encode(5, 5), std::out_of_range);
  EXPECT_THROW(coral_encode(-1, 5), std::out_of_range);
}

TEST(Coral, LossExamples) {
  const std::vector<double> zero(4, 0.0);
  EXPECT_NEAR(coral_loss<double>(zero, coral_encode(0, 5)), std::log(2.0), 1e-15);
  const std::vector<double> sat{40, 40, 40, -40};
  EXPECT_LT(coral_loss<double>(sat, coral_encode(3, 5)), 1e-15);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto z = gradcheck::random_vec(rng, 4, -50, 50);
    const double l = coral_loss<double>(z, coral_encode(static_cast<int>(rng.between(0, 4)), 5));
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_GE(l, 0.0);
  }
}

TEST(Coral, PredictCountRule) {
  auto logit = [](double p) { return std::log(p / (1 - p)); };
  const std::vector<double> z{logit(0.9), logit(0.7), logit(0.6), logit(0.2)};
  EXPECT_EQ(predict_from_logits<double>(z, 0.5).ordinal_class, 3);
  EXPECT_EQ(predict_from_logits<double>(z, 0.65).ordinal_class, 2);
  EXPECT_EQ(predict_from_logits<double>(z, 0.0).ordinal_class, 4);
  EXPECT_THROW(predict_from_logits<double>(z, 1.5), std::invalid_argument);
  int prev = 4;
  for (int i = 0; i <= 100; ++i) {
    const int c = predict_from_logits<double>(z, i / 100.0).ordinal_class;
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(Coral, RankMonotoneForArbitraryParameters) { EXPECT_EQ(property::rank_violations(4, 2000), 0u); }

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet<double> p;
  p.add("x", {3});
  p.values() = {1, -2, 3};
  AdamState<double> s(3);
  const std::vector<double> g(3, 0.0);
  adam_step<double>(p, g, s, 1e-3);
  EXPECT_EQ(p.values(), std::vector<double>({1, -2, 3}));
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ScalarStepsByHand) {
  ParameterSet<double> p;
  p.add("x", {1});
  AdamState<double> s(1);
  const std::vector<double> g{1.0};
  const double lr = 1e-3;
  double x = 0, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    adam_step<double>(p, g, s, lr);
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.values()[0], x, 1e-15);
    if (t == 1) EXPECT_NEAR(p.values()[0], -lr, 1e-10);
  }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParameterSet<double> p;
  p.add("first", {2});
  p.add("second", {2});
  AdamState<double> s(4);
  const std::vector<double> g{0, 0, 0, NAN};
  try {
    adam_step<double>(p, g, s, 1e-3);
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("second"), std::string::npos);
  }
  EXPECT_EQ(s.step, 0u);
}

TEST(Adam, NonNegativeProjection) {
  ParameterSet<double> p;
  p.add("off", {2}, true);
  p.values() = {0.0005, 1.0};
  AdamState<double> s(2);
  adam_step<double>(p, std::vector<double>{1.0, 1.0}, s, 1e-3);
  EXPECT_EQ(p.values()[0], 0.0);
  EXPECT_NEAR(p.values()[1], 1.0 - 1e-3, 1e-9);
}

TEST(Cascade, ShapeWalkThrough) {
  CascadeConfig cfg;
  cfg.window_size = 10;
  cfg.layer_spatial = {{28, 28}, {14, 14}, {7, 7}};
  cfg.filter_out_channels = 10;
  CascadeNet<float> net(cfg);
  EXPECT_EQ(net.pooled_width(), 20u);
  Rng rng(5);
  net.initialize(rng);
  std::vector<TensorF> window;
  for (const auto& s : net.input_shapes()) window.emplace_back(s, 0.5f);
  const auto logits = net.forward(window);
  EXPECT_EQ(logits.size(), 4u);
  // Zero-initialized head: every logit equals its bias, here 0.
  for (float z : logits) EXPECT_EQ(z, 0.0f);
}

TEST(Cascade, SingleLayerPoolsDirectly) {
  CascadeConfig cfg;
  cfg.window_size = 4;
  cfg.layer_spatial = {{5, 5}};
  CascadeNet<double> net(cfg);
  EXPECT_EQ(net.pooled_width(), 4u);
  Rng rng(6);
  net.initialize(rng);
  std::vector<Tensor<double>> window{oracle::random_tensor(rng, {4, 5, 5})};
  EXPECT_EQ(net.forward(window).size(), 4u);
}

TEST(Cascade, PairwiseWidth) {
  CascadeConfig cfg;
  cfg.window_size = 10;
  cfg.layer_spatial = {{28, 28}, {14, 14}, {7, 7}};
  cfg.mode = CascadeMode::kPairwise;
  CascadeNet<float> net(cfg);
  EXPECT_EQ(net.pooled_width(), 40u);
}

TEST(Cascade, RejectsNonIntegralRatios) {
  CascadeConfig cfg;
  cfg.layer_spatial = {{28, 28}, {10, 10}};
  EXPECT_THROW(CascadeNet<float>{cfg}, std::invalid_argument);
  cfg.layer_spatial = {{28, 28}, {14, 14}};
  cfg.num_classes = 1;
  EXPECT_THROW(CascadeNet<float>{cfg}, std::invalid_argument);
}

TEST(Cascade, WrongInputShapeRejected) {
  CascadeConfig cfg;
  cfg.window_size = 2;
  cfg.layer_spatial = {{4, 4}, {2, 2}};
  CascadeNet<float> net(cfg);
  std::vector<TensorF> window{TensorF({2, 4, 4}), TensorF({3, 2, 2})};
  EXPECT_THROW(net.forward(window), ShapeError);
}

TEST(Cascade, SwappingIdenticalFramesLeavesLogits) {
  Rng rng(7);
  CascadeConfig cfg;
  cfg.window_size = 4;
  cfg.layer_spatial = {{6, 6}, {3, 3}};
  CascadeNet<double> net(cfg);
  net.initialize(rng);
  for (auto& v : net.params().values()) v = rng.uniform(-0.5, 0.5);
  std::vector<Tensor<double>> window;
  for (const auto& s : net.input_shapes()) window.push_back(oracle::random_tensor(rng, s));
  for (auto& t : window) std::copy(t.channel(1).begin(), t.channel(1).end(), t.channel(2).begin());
  const auto before = net.forward(window);
  for (auto& t : window) {
    auto a = t.channel(1), b = t.channel(2);
    std::swap_ranges(a.begin(), a.end(), b.begin());
  }
  EXPECT_EQ(net.forward(window), before);
}

namespace {

// Labels are recoverable from the feature level; each window has its own noise.
std::vector<TrainingExample> separable_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 5);
    features::WindowFeature wf;
    for (const Shape3 s : {Shape3{2, 4, 4}, Shape3{2, 2, 2}}) {
      TensorF t(s);
      for (auto& v : t.values()) v = static_cast<float>(label + rng.uniform(-0.2, 0.2));
      wf.layers.push_back(std::move(t));
    }
    out.push_back({std::move(wf), label});
  }
  return out;
}

CascadeConfig small_config() {
  CascadeConfig cfg;
  cfg.window_size = 2;
  cfg.layer_spatial = {{4, 4}, {2, 2}};
  return cfg;
}

}  // namespace

TEST(TrainMonitor, OverfitsSeparableWindows) {
  auto data = separable_set(64, 8);
  TrainOptions opts;
  opts.epochs = 200;
  opts.learning_rate = 1e-2;
  opts.seed = 3;
  const auto result = train_monitor(data, small_config(), opts);
  ASSERT_EQ(result.loss_history.size(), 201u);
  EXPECT_NEAR(result.loss_history[0], std::log(2.0), 1e-6);
  EXPECT_LT(result.loss_history.back(), result.loss_history[1]);
  int wrong = 0;
  for (const auto& ex : data) wrong += predict(ex.window, result.model, 0.5).ordinal_class != ex.label;
  EXPECT_EQ(wrong, 0);
}

TEST(TrainMonitor, EmptySetRejected) {
  EXPECT_THROW(train_monitor({}, small_config(), {}), std::invalid_argument);
}

TEST(TrainMonitor, DeterministicAndSaveLoadIdentity) {
  fixture::TempDir dir;
  TrainOptions opts;
  opts.epochs = 5;
  opts.seed = 11;
  const auto a = train_monitor(separable_set(40, 1), small_config(), opts);
  const auto b = train_monitor(separable_set(40, 1), small_config(), opts);
  save_monitor(dir / "a.model", a.model);
  save_monitor(dir / "b.model", b.model);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "a.model"), slurp(dir / "b.model"));
  EXPECT_EQ(a.loss_history, b.loss_history);
  const auto loaded = load_monitor(dir / "a.model");
  EXPECT_EQ(loaded.config(), a.model.config());
  EXPECT_EQ(loaded.norm, a.model.norm);
  EXPECT_EQ(loaded.seed, 11u);
  for (const auto& ex : separable_set(10, 2)) EXPECT_EQ(loaded.logits(ex.window), a.model.logits(ex.window));
}

TEST(ModelFile, CorruptFilesRejected) {
  fixture::TempDir dir;
  TrainOptions opts;
  opts.epochs = 1;
  const auto a = train_monitor(separable_set(10, 1), small_config(), opts);
  const auto bytes = model_file::serialize(to_envelope(a.model));
  EXPECT_THROW(model_file::deserialize("NOTAMODEL" + bytes), FormatError);
  EXPECT_THROW(model_file::deserialize(bytes.substr(0, bytes.size() - 3)), DataError);
  auto env = model_file::deserialize(bytes);
  env.kind = "baseline:handcrafted";
  EXPECT_THROW(from_envelope(env), FormatError);
}

TEST(MonitorModel, HeaderMismatchRejected) {
  TrainOptions opts;
  opts.epochs = 1;
  const auto a = train_monitor(separable_set(10, 1), small_config(), opts);
  stream::StreamHeader h;
  h.layer_shapes = {{7, 4, 4}, {3, 2, 2}};
  h.image_size = {10, 10};
  h.class_names = {"a"};
  EXPECT_NO_THROW(check_compatible(a.model, h));
  h.layer_shapes = {{7, 4, 4}, {3, 1, 1}};
  EXPECT_THROW(check_compatible(a.model, h), ShapeError);
}
