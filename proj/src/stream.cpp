#include "detmon/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "detmon/binary_io.hpp"

namespace detmon::stream {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDetectionBytes = 6 * 8;
constexpr std::uint64_t kGroundTruthBytes = 5 * 8;

json header_to_json(const StreamHeader& h) {
  json shapes = json::array();
  for (const auto& s : h.layer_shapes) shapes.push_back({s.channels, s.height, s.width});
  json j;
  j["version"] = h.version;
  j["layer_shapes"] = shapes;
  j["image_size"] = {h.image_size.width, h.image_size.height};
  j["class_names"] = h.class_names;
  j["frame_count"] = h.frame_count ? json(*h.frame_count) : json(nullptr);
  return j;
}

StreamHeader header_from_json(const json& j) {
  StreamHeader h;
  try {
    h.version = j.at("version").get<std::int64_t>();
    for (const auto& s : j.at("layer_shapes")) {
      if (!s.is_array() || s.size() != 3) throw FormatError("layer shape must be [c, h, w]");
      h.layer_shapes.push_back({s[0].get<std::int64_t>(), s[1].get<std::int64_t>(), s[2].get<std::int64_t>()});
    }
    const auto& img = j.at("image_size");
    if (!img.is_array() || img.size() != 2) throw FormatError("image_size must be [width, height]");
    h.image_size = {img[0].get<std::int64_t>(), img[1].get<std::int64_t>()};
    h.class_names = j.at("class_names").get<std::vector<std::string>>();
    const auto& fc = j.at("frame_count");
    if (!fc.is_null()) h.frame_count = fc.get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed stream header: ") + e.what());
  }
  if (h.version != kFormatVersion)
    throw FormatError("unsupported stream version " + std::to_string(h.version));
  h.check();
  return h;
}

void append_bytes(std::string& buf, const auto& bytes) { buf.append(bytes.data(), bytes.size()); }

template <typename T>
void put(std::string& buf, T value) {
  append_bytes(buf, io::to_le_bytes(value));
}

void put_box(std::string& buf, const BBox& b) {
  put(buf, b.x_min);
  put(buf, b.y_min);
  put(buf, b.x_max);
  put(buf, b.y_max);
}

BBox get_box(io::CountingReader& r) {
  BBox b;
  b.x_min = r.read<double>("box");
  b.y_min = r.read<double>("box");
  b.x_max = r.read<double>("box");
  b.y_max = r.read<double>("box");
  return b;
}

std::string frame_tag(std::uint64_t id) { return "frame " + std::to_string(id); }

void check_box(const BBox& b, const std::string& where) {
  if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
      !std::isfinite(b.y_max))
    throw FormatError(where + ": non-finite box coordinate");
  if (!b.valid()) throw FormatError(where + ": degenerate box (requires x_min < x_max, y_min < y_max)");
}

void check_class(std::int64_t id, std::size_t num_classes, const std::string& where) {
  if (id < 0 || static_cast<std::size_t>(id) >= num_classes)
    throw FormatError(where + ": class id " + std::to_string(id) + " out of range");
}

bool box_outside(const BBox& b, const ImageSize& img) {
  return b.x_min < 0 || b.y_min < 0 || b.x_max > static_cast<double>(img.width) ||
         b.y_max > static_cast<double>(img.height);
}

}  // namespace

void StreamHeader::check() const {
  if (layer_shapes.empty()) throw FormatError("stream header must declare at least one layer");
  for (std::size_t j = 0; j < layer_shapes.size(); ++j) {
    const auto& s = layer_shapes[j];
    if (s.channels < 1 || s.height < 1 || s.width < 1)
      throw FormatError("layer " + std::to_string(j) + " has non-positive dimension " + s.str());
  }
  if (image_size.width < 1 || image_size.height < 1)
    throw FormatError("image size must be positive");
  if (class_names.empty()) throw FormatError("class_names must be non-empty");
  std::set<std::string> seen;
  for (const auto& name : class_names)
    if (!seen.insert(name).second) throw FormatError("duplicate class name '" + name + "'");
}

void check_frame(const StreamHeader& header, const FrameRecord& frame) {
  const auto tag = frame_tag(frame.frame_id);
  if (frame.features.size() != header.num_layers())
    throw ShapeError(tag + ": expected " + std::to_string(header.num_layers()) + " feature layers, got " +
                     std::to_string(frame.features.size()));
  for (std::size_t j = 0; j < frame.features.size(); ++j) {
    if (frame.features[j].shape() != header.layer_shapes[j])
      throw ShapeError(tag + ", layer " + std::to_string(j) + ": tensor shape " +
                       frame.features[j].shape().str() + " does not match header shape " +
                       header.layer_shapes[j].str());
    if (frame.features[j].size() != header.layer_shapes[j].size())
      throw ShapeError(tag + ", layer " + std::to_string(j) + ": tensor payload length mismatch");
  }
  for (const auto& d : frame.detections) {
    check_box(d.box, tag + " detection");
    check_class(d.class_id, header.num_classes(), tag + " detection");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
      throw FormatError(tag + ": detection confidence " + std::to_string(d.confidence) + " outside [0,1]");
  }
  if (frame.ground_truth) {
    for (const auto& g : *frame.ground_truth) {
      check_box(g.box, tag + " ground truth");
      check_class(g.class_id, header.num_classes(), tag + " ground truth");
    }
  }
}

// ---------------------------------------------------------------------------
// Writing

StreamWriter::StreamWriter(std::ostream& out, StreamHeader header) : out_(&out), header_(std::move(header)) {
  header_.check();
  const std::string text = header_to_json(header_).dump();
  out_->write(kMagic, sizeof(kMagic));
  io::write_le(*out_, static_cast<std::uint32_t>(text.size()));
  out_->write(text.data(), static_cast<std::streamsize>(text.size()));
}

void StreamWriter::write(const FrameRecord& frame) {
  check_frame(header_, frame);
  if (last_id_ && frame.frame_id <= *last_id_)
    throw FormatError(frame_tag(frame.frame_id) + ": frame ids must be strictly increasing (previous " +
                      std::to_string(*last_id_) + ")");
  if (header_.frame_count && written_ >= *header_.frame_count)
    throw FormatError("more frames than the header frame_count " + std::to_string(*header_.frame_count));

  const std::uint64_t gt_count = frame.ground_truth ? frame.ground_truth->size() : 0;
  scratch_.clear();
  put(scratch_, frame.frame_id);
  put(scratch_, static_cast<std::uint64_t>(frame.detections.size()));
  put(scratch_, static_cast<std::uint64_t>(frame.ground_truth ? 1 : 0));
  put(scratch_, gt_count);
  for (const auto& d : frame.detections) {
    put_box(scratch_, d.box);
    put(scratch_, d.class_id);
    put(scratch_, d.confidence);
  }
  if (frame.ground_truth) {
    for (const auto& g : *frame.ground_truth) {
      put_box(scratch_, g.box);
      put(scratch_, g.class_id);
    }
  }
  std::uint64_t tensor_bytes = 0;
  for (const auto& t : frame.features) tensor_bytes += t.size() * sizeof(float);

  io::write_le(*out_, static_cast<std::uint64_t>(scratch_.size() + tensor_bytes));
  out_->write(scratch_.data(), static_cast<std::streamsize>(scratch_.size()));
  for (const auto& t : frame.features) io::write_f32_blob(*out_, t.values());
  if (!*out_) throw DataError("write failed at " + frame_tag(frame.frame_id));
  last_id_ = frame.frame_id;
  ++written_;
}

std::string write_stream(const StreamHeader& header, const std::vector<FrameRecord>& frames) {
  if (header.frame_count && *header.frame_count != frames.size())
    throw FormatError("header frame_count " + std::to_string(*header.frame_count) + " but " +
                      std::to_string(frames.size()) + " frames supplied");
  StreamHeader h = header;
  h.frame_count = frames.size();
  std::ostringstream out(std::ios::binary);
  StreamWriter writer(out, h);
  for (const auto& f : frames) writer.write(f);
  return std::move(out).str();
}

void write_stream_file(const std::filesystem::path& path, const StreamHeader& header,
                       const std::vector<FrameRecord>& frames) {
  const std::string bytes = write_stream(header, frames);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Reading

struct StreamReader::Owned {
  std::ifstream file;
  std::istringstream buffer;
};

StreamReader::StreamReader(std::istream& in) : in_(&in) {
  io::CountingReader r(in);
  char magic[sizeof(kMagic)];
  const auto got = r.read_some(magic, sizeof(magic));
  if (got < sizeof(magic)) {
    if (std::memcmp(magic, kMagic, got) != 0) throw FormatError("bad magic: not a .dstream file");
    throw TruncationError("stream shorter than its magic tag", r.offset());
  }
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw FormatError("bad magic: not a .dstream file");
  const auto len = r.read<std::uint32_t>("header length");
  std::string text(len, '\0');
  r.read_exact(text.data(), len, "header");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("stream header is not valid JSON: ") + e.what());
  }
  header_ = header_from_json(j);
  reader_offset_ = r.offset();
}

std::unique_ptr<StreamReader> StreamReader::open_file(const std::filesystem::path& path) {
  auto owned = std::make_shared<Owned>();
  owned->file.open(path, std::ios::binary);
  if (!owned->file) throw DataError("cannot open " + path.string());
  auto reader = std::make_unique<StreamReader>(owned->file);
  reader->owned_ = std::move(owned);
  return reader;
}

std::unique_ptr<StreamReader> StreamReader::from_bytes(std::string bytes) {
  auto owned = std::make_shared<Owned>();
  owned->buffer = std::istringstream(std::move(bytes), std::ios::binary);
  auto reader = std::make_unique<StreamReader>(owned->buffer);
  reader->owned_ = std::move(owned);
  return reader;
}

std::optional<FrameRecord> StreamReader::next() {
  io::CountingReader r(*in_, reader_offset_);
  if (r.at_eof()) {
    if (header_.frame_count && frames_read_ < *header_.frame_count)
      throw TruncationError("stream ended after " + std::to_string(frames_read_) + " of " +
                                std::to_string(*header_.frame_count) + " frames",
                            r.offset());
    return std::nullopt;
  }
  if (header_.frame_count && frames_read_ >= *header_.frame_count)
    throw FormatError("data after the last of " + std::to_string(*header_.frame_count) + " frames at offset " +
                      std::to_string(r.offset()));

  const auto record_len = r.read<std::uint64_t>("record length");
  const auto body_start = r.offset();

  FrameRecord frame;
  frame.frame_id = r.read<std::uint64_t>("frame id");
  const auto tag = frame_tag(frame.frame_id);
  const auto n_det = r.read<std::uint64_t>("detection count");
  const auto has_gt = r.read<std::uint64_t>("ground-truth flag");
  const auto n_gt = r.read<std::uint64_t>("ground-truth count");
  if (has_gt > 1) throw FormatError(tag + ": ground-truth flag must be 0 or 1");
  if (!has_gt && n_gt != 0) throw FormatError(tag + ": ground-truth count without ground-truth flag");

  std::uint64_t tensor_bytes = 0;
  for (const auto& s : header_.layer_shapes) tensor_bytes += s.size() * sizeof(float);
  const std::uint64_t fixed = 4 * 8 + tensor_bytes;
  if (record_len < fixed || n_det > (record_len - fixed) / kDetectionBytes ||
      n_gt > (record_len - fixed) / kGroundTruthBytes ||
      record_len != fixed + n_det * kDetectionBytes + n_gt * kGroundTruthBytes)
    throw FormatError(tag + ": record length " + std::to_string(record_len) +
                      " inconsistent with its counts and header shapes");

  frame.detections.resize(n_det);
  for (auto& d : frame.detections) {
    d.box = get_box(r);
    d.class_id = r.read<std::int64_t>("class id");
    d.confidence = r.read<double>("confidence");
  }
  if (has_gt) {
    frame.ground_truth.emplace(n_gt);
    for (auto& g : *frame.ground_truth) {
      g.box = get_box(r);
      g.class_id = r.read<std::int64_t>("class id");
    }
  }
  frame.features.reserve(header_.num_layers());
  for (const auto& s : header_.layer_shapes) {
    TensorF t(s);
    io::read_f32_blob(r, t.values(), "feature tensor");
    frame.features.push_back(std::move(t));
  }
  if (r.offset() - body_start != record_len) throw FormatError(tag + ": record length mismatch");

  check_frame(header_, frame);
  if (last_id_ && frame.frame_id <= *last_id_)
    throw FormatError(tag + ": frame ids must be strictly increasing (previous " + std::to_string(*last_id_) + ")");
  last_id_ = frame.frame_id;
  reader_offset_ = r.offset();
  ++frames_read_;
  return frame;
}

StreamContents read_stream(const std::string& bytes) {
  auto reader = StreamReader::from_bytes(bytes);
  StreamContents out{reader->header(), {}};
  while (auto f = reader->next()) out.frames.push_back(std::move(*f));
  return out;
}

StreamContents read_stream_file(const std::filesystem::path& path) {
  auto reader = StreamReader::open_file(path);
  StreamContents out{reader->header(), {}};
  while (auto f = reader->next()) out.frames.push_back(std::move(*f));
  return out;
}

ValidationReport validate(StreamReader& reader) {
  ValidationReport report;
  report.header = reader.header();
  const auto& img = report.header.image_size;
  std::uint64_t boxes_outside = 0, nonfinite = 0;
  while (auto f = reader.next()) {
    ++report.frames;
    if (f->ground_truth) ++report.frames_with_ground_truth;
    for (const auto& d : f->detections) boxes_outside += box_outside(d.box, img);
    if (f->ground_truth)
      for (const auto& g : *f->ground_truth) boxes_outside += box_outside(g.box, img);
    for (const auto& t : f->features)
      for (float v : t.values()) nonfinite += !std::isfinite(v);
  }
  if (boxes_outside > 0)
    report.warnings.push_back(std::to_string(boxes_outside) + " boxes extend beyond the image bounds");
  if (nonfinite > 0)
    report.warnings.push_back(std::to_string(nonfinite) + " non-finite feature values");
  if (report.frames_with_ground_truth != 0 && report.frames_with_ground_truth != report.frames)
    report.warnings.push_back("ground truth present in " + std::to_string(report.frames_with_ground_truth) +
                              " of " + std::to_string(report.frames) + " frames");
  return report;
}

// ---------------------------------------------------------------------------
// Preprocessing

Preprocessor::Preprocessor(const StreamHeader& header, PreprocessOptions options)
    : header_(header), image_(header.image_size), min_size_(options.min_size_px) {
  std::vector<std::string> merged;
  if (options.class_merge.empty()) {
    merged = header.class_names;
    for (std::size_t i = 0; i < merged.size(); ++i) remap_.push_back(static_cast<std::int64_t>(i));
  } else {
    std::set<std::string> targets;
    for (const auto& [from, to] : options.class_merge) targets.insert(to);
    std::vector<std::string> unknown;
    for (const auto& name : header.class_names) {
      std::string target;
      if (auto it = options.class_merge.find(name); it != options.class_merge.end()) {
        target = it->second;
      } else if (targets.count(name)) {
        target = name;
      } else {
        unknown.push_back(name);
        continue;
      }
      auto pos = std::find(merged.begin(), merged.end(), target);
      if (pos == merged.end()) {
        merged.push_back(target);
        pos = merged.end() - 1;
      }
      remap_.push_back(pos - merged.begin());
    }
    if (!unknown.empty()) {
      std::string list;
      for (const auto& n : unknown) list += (list.empty() ? "" : ", ") + n;
      throw DataError("class merge map has no entry for: " + list);
    }
  }
  header_.class_names = std::move(merged);
}

void Preprocessor::apply(FrameRecord& frame) const {
  const double w = static_cast<double>(image_.width), h = static_cast<double>(image_.height);
  auto clip_keep = [&](BBox& b) {
    b.x_min = std::clamp(b.x_min, 0.0, w);
    b.x_max = std::clamp(b.x_max, 0.0, w);
    b.y_min = std::clamp(b.y_min, 0.0, h);
    b.y_max = std::clamp(b.y_max, 0.0, h);
    return b.valid() && b.width() >= min_size_ && b.height() >= min_size_;
  };
  std::vector<Detection> dets;
  dets.reserve(frame.detections.size());
  for (auto d : frame.detections) {
    if (!clip_keep(d.box)) continue;
    d.class_id = remap_.at(static_cast<std::size_t>(d.class_id));
    dets.push_back(d);
  }
  frame.detections = std::move(dets);
  if (frame.ground_truth) {
    std::vector<GroundTruthObject> gts;
    for (auto g : *frame.ground_truth) {
      if (!clip_keep(g.box)) continue;
      g.class_id = remap_.at(static_cast<std::size_t>(g.class_id));
      gts.push_back(g);
    }
    *frame.ground_truth = std::move(gts);
  }
}

StreamContents preprocess(StreamContents contents, const PreprocessOptions& options) {
  Preprocessor pre(contents.header, options);
  for (auto& f : contents.frames) pre.apply(f);
  contents.header = pre.header();
  return contents;
}

}  // namespace detmon::stream
