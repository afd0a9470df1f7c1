#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detmon/stream.hpp"

// Ground-truth evaluation: IoU matching, all-points average precision and
// per-window mAP labels over pooled detections.
namespace detmon::mapeval {

using stream::BBox;
using stream::FrameRecord;

inline constexpr double kDefaultIouThreshold = 0.5;

double iou(const BBox& a, const BBox& b);

struct ScoredBox {
  BBox box;
  double confidence = 0;
  std::uint64_t frame_id = 0;
};

struct FrameBox {
  BBox box;
  std::uint64_t frame_id = 0;
};

struct MatchResult {
  std::vector<bool> true_positive;  // in confidence rank order
  std::vector<double> confidence;   // same order
  std::size_t gt_count = 0;

  std::size_t tp_count() const;
};

// Greedy matching of one class's detections against its ground truth.
// Detections are visited by descending confidence (ties: lower frame_id,
// then input order). A detection is a true positive iff the unmatched
// ground-truth box of the same frame with the highest IoU reaches
// iou_threshold; that box is then consumed.
MatchResult match_detections(std::span<const ScoredBox> detections, std::span<const FrameBox> ground_truth,
                             double iou_threshold = kDefaultIouThreshold);

// Area under the precision envelope (precision at recall r = max precision at
// recall >= r). nullopt when there is no ground truth.
std::optional<double> average_precision(const MatchResult& match);

// mAP over a window of frames, pooling detections and ground truth across
// frames per class. Averaged over classes with at least one ground-truth box;
// nullopt when no class has any. Throws DataError if a frame lacks ground truth.
std::optional<double> window_map(std::span<const FrameRecord> frames, std::size_t num_classes,
                                 double iou_threshold = kDefaultIouThreshold);

// Ordinal bin: min(floor(map * num_classes), num_classes - 1).
int bin_label(double map_value, int num_classes);

struct WindowLabel {
  std::uint64_t start_frame = 0;
  std::size_t window_size = 0;
  std::optional<double> map_value;
  std::optional<int> ordinal_class;

  bool defined() const noexcept { return map_value.has_value(); }
};

struct LabelOptions {
  std::size_t window_size = 10;
  std::size_t stride = 1;
  int num_classes = 5;
  double iou_threshold = kDefaultIouThreshold;
};

// Incremental labeler: push frames in stream order and collect labels as
// windows complete. Only the last window_size frames are retained.
class WindowLabeler {
 public:
  WindowLabeler(std::size_t num_object_classes, LabelOptions options);

  // Returns the label of the window ending at this frame, if one starts at a
  // stride-aligned position.
  std::optional<WindowLabel> push(FrameRecord frame);

  std::span<const FrameRecord> current() const noexcept { return window_; }

 private:
  std::size_t num_object_classes_;
  LabelOptions options_;
  std::vector<FrameRecord> window_;
  std::size_t pushed_ = 0;
};

struct LabelSeries {
  std::vector<WindowLabel> windows;
  std::optional<std::string> warning;
};

// Windows start at frames 0, stride, 2*stride, ...; floor((N - w) / stride) + 1
// windows in total. Fewer frames than the window size yields an empty series
// and a warning.
LabelSeries label_series(std::span<const FrameRecord> frames, std::size_t num_object_classes,
                         const LabelOptions& options);
LabelSeries label_series(stream::StreamReader& reader, const LabelOptions& options);

void write_label_csv(std::ostream& out, std::span<const WindowLabel> labels);

struct WindowSizeRow {
  std::size_t window_size = 0;
  std::size_t windows = 0;
  double mean_abs_diff = 0;  // over consecutive pairs of defined windows
};

// For each window size, the stride-1 mAP series and the mean absolute
// difference between consecutive windows. Sizes with no consecutive pair of
// defined windows are omitted.
std::vector<WindowSizeRow> window_size_analysis(std::span<const FrameRecord> frames,
                                                std::size_t num_object_classes,
                                                std::span<const std::size_t> window_sizes,
                                                double iou_threshold = kDefaultIouThreshold);

}  // namespace detmon::mapeval
