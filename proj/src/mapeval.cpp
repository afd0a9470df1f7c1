#include "detmon/mapeval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace detmon::mapeval {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::size_t MatchResult::tp_count() const {
  return static_cast<std::size_t>(std::count(true_positive.begin(), true_positive.end(), true));
}

MatchResult match_detections(std::span<const ScoredBox> detections, std::span<const FrameBox> ground_truth,
                             double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    return da.frame_id < db.frame_id;
  });

  MatchResult result;
  result.gt_count = ground_truth.size();
  result.true_positive.reserve(order.size());
  result.confidence.reserve(order.size());
  std::vector<bool> used(ground_truth.size(), false);
  for (std::size_t idx : order) {
    const auto& det = detections[idx];
    double best = -1.0;
    std::size_t best_gt = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g] || ground_truth[g].frame_id != det.frame_id) continue;
      const double o = iou(det.box, ground_truth[g].box);
      if (o > best) {
        best = o;
        best_gt = g;
      }
    }
    const bool tp = best_gt < ground_truth.size() && best >= iou_threshold;
    if (tp) used[best_gt] = true;
    result.true_positive.push_back(tp);
    result.confidence.push_back(det.confidence);
  }
  return result;
}

std::optional<double> average_precision(const MatchResult& match) {
  if (match.gt_count == 0) return std::nullopt;
  const std::size_t n = match.true_positive.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += match.true_positive[i];
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(match.gt_count);
  }
  // Envelope: running maximum from the right.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

std::optional<double> window_map(std::span<const FrameRecord> frames, std::size_t num_classes,
                                 double iou_threshold) {
  std::vector<std::vector<ScoredBox>> dets(num_classes);
  std::vector<std::vector<FrameBox>> gts(num_classes);
  // Pool in frame_id order so the result does not depend on the order frames
  // are supplied in.
  std::vector<const FrameRecord*> sorted;
  sorted.reserve(frames.size());
  for (const auto& f : frames) sorted.push_back(&f);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const FrameRecord* a, const FrameRecord* b) { return a->frame_id < b->frame_id; });

  for (const FrameRecord* f : sorted) {
    if (!f->ground_truth)
      throw DataError("frame " + std::to_string(f->frame_id) + " has no ground truth; window mAP requires it");
    for (const auto& d : f->detections) {
      if (d.class_id < 0 || static_cast<std::size_t>(d.class_id) >= num_classes)
        throw DataError("detection class id out of range in frame " + std::to_string(f->frame_id));
      dets[static_cast<std::size_t>(d.class_id)].push_back({d.box, d.confidence, f->frame_id});
    }
    for (const auto& g : *f->ground_truth) {
      if (g.class_id < 0 || static_cast<std::size_t>(g.class_id) >= num_classes)
        throw DataError("ground-truth class id out of range in frame " + std::to_string(f->frame_id));
      gts[static_cast<std::size_t>(g.class_id)].push_back({g.box, f->frame_id});
    }
  }

  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (gts[c].empty()) continue;
    sum += *average_precision(match_detections(dets[c], gts[c], iou_threshold));
    ++present;
  }
  if (present == 0) return std::nullopt;
  return sum / static_cast<double>(present);
}

int bin_label(double map_value, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("bin_label: num_classes must be >= 2");
  if (!(map_value >= 0.0 && map_value <= 1.0))
    throw std::out_of_range("bin_label: mAP value " + std::to_string(map_value) + " outside [0,1]");
  const auto cls = static_cast<int>(std::floor(map_value * num_classes));
  return std::min(cls, num_classes - 1);
}

WindowLabeler::WindowLabeler(std::size_t num_object_classes, LabelOptions options)
    : num_object_classes_(num_object_classes), options_(options) {
  if (options_.window_size < 1) throw std::invalid_argument("window size must be >= 1");
  if (options_.stride < 1) throw std::invalid_argument("stride must be >= 1");
  window_.reserve(options_.window_size);
}

std::optional<WindowLabel> WindowLabeler::push(FrameRecord frame) {
  if (window_.size() == options_.window_size) window_.erase(window_.begin());
  window_.push_back(std::move(frame));
  ++pushed_;
  if (pushed_ < options_.window_size) return std::nullopt;
  if ((pushed_ - options_.window_size) % options_.stride != 0) return std::nullopt;

  WindowLabel label;
  label.start_frame = window_.front().frame_id;
  label.window_size = options_.window_size;
  label.map_value = window_map(window_, num_object_classes_, options_.iou_threshold);
  if (label.map_value) label.ordinal_class = bin_label(*label.map_value, options_.num_classes);
  return label;
}

namespace {

std::string short_stream_warning(std::size_t n, std::size_t w) {
  return "stream has " + std::to_string(n) + " frames, fewer than the window size " + std::to_string(w) +
         "; no windows produced";
}

}  // namespace

LabelSeries label_series(std::span<const FrameRecord> frames, std::size_t num_object_classes,
                         const LabelOptions& options) {
  WindowLabeler labeler(num_object_classes, options);
  LabelSeries out;
  for (const auto& f : frames)
    if (auto l = labeler.push(f)) out.windows.push_back(*l);
  if (frames.size() < options.window_size) out.warning = short_stream_warning(frames.size(), options.window_size);
  return out;
}

LabelSeries label_series(stream::StreamReader& reader, const LabelOptions& options) {
  WindowLabeler labeler(reader.header().num_classes(), options);
  LabelSeries out;
  std::size_t n = 0;
  while (auto f = reader.next()) {
    ++n;
    if (auto l = labeler.push(std::move(*f))) out.windows.push_back(*l);
  }
  if (n < options.window_size) out.warning = short_stream_warning(n, options.window_size);
  return out;
}

void write_label_csv(std::ostream& out, std::span<const WindowLabel> labels) {
  out << "start_frame,map,class\n";
  for (const auto& l : labels) {
    out << l.start_frame << ',';
    if (l.map_value) out << *l.map_value; else out << "undefined";
    out << ',';
    if (l.ordinal_class) out << *l.ordinal_class; else out << "undefined";
    out << '\n';
  }
}

std::vector<WindowSizeRow> window_size_analysis(std::span<const FrameRecord> frames,
                                                std::size_t num_object_classes,
                                                std::span<const std::size_t> window_sizes,
                                                double iou_threshold) {
  std::vector<WindowSizeRow> rows;
  for (std::size_t w : window_sizes) {
    LabelOptions opts;
    opts.window_size = w;
    opts.stride = 1;
    opts.iou_threshold = iou_threshold;
    const auto series = label_series(frames, num_object_classes, opts);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 1; i < series.windows.size(); ++i) {
      const auto& a = series.windows[i - 1].map_value;
      const auto& b = series.windows[i].map_value;
      if (!a || !b) continue;
      total += std::abs(*b - *a);
      ++pairs;
    }
    if (pairs == 0) continue;
    rows.push_back({w, series.windows.size(), total / static_cast<double>(pairs)});
  }
  return rows;
}

}  // namespace detmon::mapeval
