#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "detmon/error.hpp"
#include "detmon/mapeval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace detmon;
using namespace detmon::mapeval;
using stream::BBox;

namespace {

FrameRecord frame_with(std::uint64_t id, std::vector<stream::Detection> dets,
                       std::vector<stream::GroundTruthObject> gts) {
  FrameRecord f;
  f.frame_id = id;
  f.detections = std::move(dets);
  f.ground_truth = std::move(gts);
  return f;
}

MatchResult from_flags(std::vector<bool> tp, std::size_t gt) {
  MatchResult m;
  m.true_positive = std::move(tp);
  m.confidence.assign(m.true_positive.size(), 0.5);
  m.gt_count = gt;
  return m;
}

}  // namespace

TEST(Iou, Examples) {
  const BBox a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {20, 20, 30, 30}), 0.0);
  EXPECT_NEAR(iou(a, {5, 0, 15, 10}), 1.0 / 3.0, 1e-15);
}

TEST(Iou, SymmetricAndBounded) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto a = fixture::random_box(rng), b = fixture::random_box(rng);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (v == 1.0) EXPECT_EQ(a, b);
  }
}

TEST(Match, OneDetectionOnOneTruth) {
  const std::vector<ScoredBox> d{{{0, 0, 10, 10}, 0.9, 0}};
  const std::vector<FrameBox> g{{{0, 0, 10, 10}, 0}};
  const auto m = match_detections(d, g);
  EXPECT_EQ(m.true_positive, std::vector<bool>({true}));
  EXPECT_EQ(m.gt_count, 1u);
}

TEST(Match, TruthConsumedOnce) {
  const std::vector<ScoredBox> d{{{0, 0, 10, 10}, 0.8, 0}, {{0, 0, 10, 10}, 0.9, 0}};
  const std::vector<FrameBox> g{{{0, 0, 10, 10}, 0}};
  const auto m = match_detections(d, g);
  EXPECT_EQ(m.true_positive, std::vector<bool>({true, false}));
  EXPECT_EQ(m.confidence, std::vector<double>({0.9, 0.8}));
}

TEST(Match, OnlySameFrameTruthCounts) {
  const std::vector<ScoredBox> d{{{0, 0, 10, 10}, 0.9, 1}};
  const std::vector<FrameBox> g{{{0, 0, 10, 10}, 0}};
  EXPECT_EQ(match_detections(d, g).true_positive, std::vector<bool>({false}));
}

TEST(Match, AgreesWithReferenceMatcher) {
  Rng rng(2);
  const auto h = fixture::header({{1, 1, 1}}, {"a"});
  for (int trial = 0; trial < 300; ++trial) {
    const auto frames = fixture::matched_window(rng, h, 1 + rng.below(4), rng.below(50));
    std::vector<ScoredBox> d;
    std::vector<FrameBox> g;
    std::vector<oracle::Det> od;
    std::vector<oracle::Gt> og;
    for (const auto& f : frames) {
      for (const auto& x : f.detections) {
        od.push_back({x.box, x.confidence, f.frame_id, d.size()});
        d.push_back({x.box, x.confidence, f.frame_id});
      }
      for (const auto& x : *f.ground_truth) {
        g.push_back({x.box, f.frame_id});
        og.push_back({x.box, f.frame_id});
      }
    }
    const auto m = match_detections(d, g, 0.5);
    EXPECT_EQ(m.true_positive, oracle::match(od, og, 0.5));
    EXPECT_LE(m.tp_count(), m.gt_count);
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(*average_precision(from_flags({true, false}, 1)), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision(from_flags({false, true}, 1)), 0.5);
  EXPECT_DOUBLE_EQ(*average_precision(from_flags({}, 1)), 0.0);
  EXPECT_FALSE(average_precision(from_flags({false}, 0)));
}

TEST(AveragePrecision, AgreesWithReference) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.below(15), gt = 1 + rng.below(8);
    std::vector<bool> tp;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool t = hits < gt && rng.uniform() < 0.5;
      hits += t;
      tp.push_back(t);
    }
    EXPECT_NEAR(*average_precision(from_flags(tp, gt)), oracle::ap(tp, gt), 1e-12);
  }
}

TEST(AveragePrecision, AppendingLowRankedDetections) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t gt = 2 + rng.below(6);
    std::vector<bool> tp;
    for (std::size_t i = 0; i < rng.below(10); ++i) tp.push_back(rng.uniform() < 0.3);
    while (std::count(tp.begin(), tp.end(), true) >= static_cast<long>(gt)) tp.pop_back();
    const double base = *average_precision(from_flags(tp, gt));
    auto with_fp = tp;
    with_fp.push_back(false);
    auto with_tp = tp;
    with_tp.push_back(true);
    EXPECT_LE(*average_precision(from_flags(with_fp, gt)), base);
    EXPECT_GE(*average_precision(from_flags(with_tp, gt)), base);
  }
}

TEST(WindowMap, PerfectAndEmptyDetectors) {
  Rng rng(5);
  const auto h = fixture::header();
  std::vector<FrameRecord> perfect, blind;
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto f = fixture::random_frame(rng, h, i);
    f.ground_truth->push_back({fixture::random_box(rng), 0});
    f.detections.clear();
    for (const auto& g : *f.ground_truth) f.detections.push_back({g.box, g.class_id, 0.9});
    perfect.push_back(f);
    f.detections.clear();
    blind.push_back(f);
  }
  EXPECT_DOUBLE_EQ(*window_map(perfect, 2), 1.0);
  EXPECT_DOUBLE_EQ(*window_map(blind, 2), 0.0);
}

TEST(WindowMap, UndefinedWithoutTruthAndErrorWithoutLabels) {
  std::vector<FrameRecord> frames{frame_with(0, {{{0, 0, 5, 5}, 0, 0.5}}, {})};
  EXPECT_FALSE(window_map(frames, 2));
  frames[0].ground_truth.reset();
  EXPECT_THROW(window_map(frames, 2), DataError);
}

TEST(WindowMap, AgreesWithPooledReference) {
  Rng rng(6);
  const auto h = fixture::header({{1, 1, 1}}, {"a", "b", "c"});
  for (int trial = 0; trial < 200; ++trial) {
    const auto frames = fixture::matched_window(rng, h, 10, trial * 100);
    const double ref = oracle::window_map(frames, 3, 0.5);
    const auto got = window_map(frames, 3, 0.5);
    if (ref < 0) {
      EXPECT_FALSE(got);
    } else {
      ASSERT_TRUE(got);
      EXPECT_NEAR(*got, ref, 1e-12);
    }
  }
}

TEST(WindowMap, InvariantToFrameOrder) {
  Rng rng(7);
  const auto h = fixture::header({{1, 1, 1}}, {"a", "b"});
  for (int trial = 0; trial < 50; ++trial) {
    auto frames = fixture::matched_window(rng, h, 6);
    // Distinct confidences so tie-breaking by frame id cannot matter.
    for (auto& f : frames)
      for (auto& d : f.detections) d.confidence = rng.uniform(0.01, 1.0);
    const auto fwd = window_map(frames, 2);
    std::reverse(frames.begin(), frames.end());
    const auto rev = window_map(frames, 2);
    ASSERT_EQ(fwd.has_value(), rev.has_value());
    if (fwd) EXPECT_NEAR(*fwd, *rev, 1e-15);
  }
}

TEST(BinLabel, Examples) {
  EXPECT_EQ(bin_label(0.39, 5), 1);
  EXPECT_EQ(bin_label(0.4, 5), 2);
  EXPECT_EQ(bin_label(0.0, 5), 0);
  EXPECT_EQ(bin_label(1.0, 5), 4);
  EXPECT_EQ(bin_label(0.66, 5), 3);
  EXPECT_THROW(bin_label(1.01, 5), std::out_of_range);
  EXPECT_THROW(bin_label(-0.01, 5), std::out_of_range);
}

TEST(BinLabel, Monotone) {
  int prev = 0;
  for (int i = 0; i <= 10000; ++i) {
    const int c = bin_label(i / 10000.0, 5);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(LabelSeries, WindowCounts) {
  Rng rng(8);
  const auto h = fixture::header({{1, 1, 1}}, {"a"});
  const auto frames = fixture::matched_window(rng, h, 12);
  EXPECT_EQ(label_series(frames, 1, {10, 1, 5, 0.5}).windows.size(), 3u);
  EXPECT_EQ(label_series(std::span(frames).first(10), 1, {10, 1, 5, 0.5}).windows.size(), 1u);
  EXPECT_EQ(label_series(frames, 1, {3, 4, 5, 0.5}).windows.size(), 3u);
  const auto short_series = label_series(std::span(frames).first(4), 1, {10, 1, 5, 0.5});
  EXPECT_TRUE(short_series.windows.empty());
  EXPECT_TRUE(short_series.warning);
  for (std::size_t w = 1; w <= 12; ++w) EXPECT_EQ(label_series(frames, 1, {w, 1, 5, 0.5}).windows.size(), 13 - w);
}

TEST(LabelSeries, StreamingMatchesBatchAndLabelsAreBinned) {
  Rng rng(9);
  const auto h = fixture::header({{1, 1, 1}}, {"a", "b"});
  const auto frames = fixture::matched_window(rng, h, 40, 5);
  const auto series = label_series(frames, 2, {7, 3, 5, 0.5});
  ASSERT_EQ(series.windows.size(), (40 - 7) / 3 + 1);
  for (std::size_t i = 0; i < series.windows.size(); ++i) {
    const auto& w = series.windows[i];
    EXPECT_EQ(w.start_frame, 5 + 3 * i);
    EXPECT_EQ(w.window_size, 7u);
    const std::vector<FrameRecord> slice(frames.begin() + 3 * i, frames.begin() + 3 * i + 7);
    EXPECT_EQ(w.map_value, window_map(slice, 2));
    if (w.map_value) EXPECT_EQ(*w.ordinal_class, bin_label(*w.map_value, 5));
  }
  auto reader = stream::StreamReader::from_bytes(stream::write_stream(h, frames));
  const auto from_reader = label_series(*reader, {7, 3, 5, 0.5});
  ASSERT_EQ(from_reader.windows.size(), series.windows.size());
  for (std::size_t i = 0; i < series.windows.size(); ++i)
    EXPECT_EQ(from_reader.windows[i].map_value, series.windows[i].map_value);
}

TEST(LabelSeries, CsvExport) {
  std::vector<WindowLabel> labels{{0, 10, 0.5, 2}, {1, 10, std::nullopt, std::nullopt}};
  std::ostringstream out;
  write_label_csv(out, labels);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "start_frame,map,class");
}

TEST(WindowSizeAnalysis, ConstantStreamHasZeroChange) {
  const auto h = fixture::header({{1, 1, 1}}, {"a"});
  std::vector<FrameRecord> frames;
  for (std::uint64_t i = 0; i < 30; ++i)
    frames.push_back(frame_with(i, {{{0, 0, 10, 10}, 0, 0.9}, {{50, 50, 60, 60}, 0, 0.8}},
                                {{{0, 0, 10, 10}, 0}, {{20, 20, 30, 30}, 0}}));
  const std::vector<std::size_t> sizes{1, 5, 10, 20};
  const auto rows = window_size_analysis(frames, 1, sizes);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_EQ(r.mean_abs_diff, 0.0);
}

TEST(WindowSizeAnalysis, SingleWindowRowAbsent) {
  Rng rng(10);
  const auto h = fixture::header({{1, 1, 1}}, {"a"});
  const auto frames = fixture::matched_window(rng, h, 8);
  const std::vector<std::size_t> sizes{2, 8};
  const auto rows = window_size_analysis(frames, 1, sizes);
  for (const auto& r : rows) EXPECT_NE(r.window_size, 8u);
}
