#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "detmon/tensor.hpp"

// The `.dstream` record format: detector outputs, optional ground truth and
// backbone feature maps for a sequence of frames.
//
// Layout (all integers 64-bit little-endian unless noted):
//   magic "DETMON01" (8 bytes)
//   header length (uint32) + header JSON (compact, sorted keys)
//   repeated frame records:
//     record length (uint64, bytes that follow)
//     frame_id, detection count, has_ground_truth (0/1), ground-truth count
//     detections: x_min, y_min, x_max, y_max (float64), class_id (int64), confidence (float64)
//     ground truth: x_min, y_min, x_max, y_max (float64), class_id (int64)
//     p feature tensors, float32 row-major, shapes from the header
namespace detmon::stream {

inline constexpr char kMagic[8] = {'D', 'E', 'T', 'M', 'O', 'N', '0', '1'};
inline constexpr std::int64_t kFormatVersion = 1;

struct ImageSize {
  std::int64_t width = 0;
  std::int64_t height = 0;
  bool operator==(const ImageSize&) const = default;
};

struct StreamHeader {
  std::int64_t version = kFormatVersion;
  std::vector<Shape3> layer_shapes;
  ImageSize image_size;
  std::vector<std::string> class_names;
  std::optional<std::uint64_t> frame_count;  // nullopt for live streams

  std::size_t num_layers() const noexcept { return layer_shapes.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  // Throws FormatError if an invariant does not hold.
  void check() const;

  bool operator==(const StreamHeader&) const = default;
};

struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }

  bool operator==(const BBox&) const = default;
};

struct Detection {
  BBox box;
  std::int64_t class_id = 0;
  double confidence = 0;
  bool operator==(const Detection&) const = default;
};

struct GroundTruthObject {
  BBox box;
  std::int64_t class_id = 0;
  bool operator==(const GroundTruthObject&) const = default;
};

struct FrameRecord {
  std::uint64_t frame_id = 0;
  std::vector<Detection> detections;
  std::optional<std::vector<GroundTruthObject>> ground_truth;
  std::vector<TensorF> features;  // one per header layer

  bool operator==(const FrameRecord&) const = default;
};

// Throws ShapeError naming the frame and layer on any mismatch against the
// header, FormatError on invalid boxes, class ids or confidences.
void check_frame(const StreamHeader& header, const FrameRecord& frame);

// Incremental writer. frame_ids must be strictly increasing.
class StreamWriter {
 public:
  StreamWriter(std::ostream& out, StreamHeader header);

  void write(const FrameRecord& frame);
  std::uint64_t frames_written() const noexcept { return written_; }
  const StreamHeader& header() const noexcept { return header_; }

 private:
  std::ostream* out_;
  StreamHeader header_;
  std::uint64_t written_ = 0;
  std::optional<std::uint64_t> last_id_;
  std::string scratch_;
};

// Serializes a complete stream. The emitted header carries
// frame_count = frames.size(); a header stating a different count is rejected.
std::string write_stream(const StreamHeader& header, const std::vector<FrameRecord>& frames);
void write_stream_file(const std::filesystem::path& path, const StreamHeader& header,
                       const std::vector<FrameRecord>& frames);

// Lazy frame reader. Holds at most one frame payload in memory.
class StreamReader {
 public:
  explicit StreamReader(std::istream& in);

  static std::unique_ptr<StreamReader> open_file(const std::filesystem::path& path);
  static std::unique_ptr<StreamReader> from_bytes(std::string bytes);

  const StreamHeader& header() const noexcept { return header_; }

  // Next frame in order, or nullopt at a clean end of stream.
  std::optional<FrameRecord> next();

  std::uint64_t frames_read() const noexcept { return frames_read_; }
  std::uint64_t offset() const noexcept { return reader_offset_; }

 private:
  struct Owned;
  std::shared_ptr<Owned> owned_;  // keeps a backing file/buffer alive when constructed via a factory
  std::istream* in_;
  StreamHeader header_;
  std::uint64_t reader_offset_ = 0;
  std::uint64_t frames_read_ = 0;
  std::optional<std::uint64_t> last_id_;
};

struct StreamContents {
  StreamHeader header;
  std::vector<FrameRecord> frames;
};

StreamContents read_stream(const std::string& bytes);
StreamContents read_stream_file(const std::filesystem::path& path);

struct ValidationReport {
  StreamHeader header;
  std::uint64_t frames = 0;
  std::uint64_t frames_with_ground_truth = 0;
  std::vector<std::string> warnings;
};

// Reads the full stream, throwing on any format error, and collects
// non-fatal issues (boxes outside the image, non-finite feature values,
// mixed ground-truth availability) as warnings.
ValidationReport validate(StreamReader& reader);

struct PreprocessOptions {
  double min_size_px = 25.0;
  // Source class name -> merged class name. Empty means identity.
  std::map<std::string, std::string> class_merge;
};

// Streaming form of `preprocess`: rewrites the header once and applies the
// box filter and class remapping frame by frame.
class Preprocessor {
 public:
  Preprocessor(const StreamHeader& header, PreprocessOptions options);

  const StreamHeader& header() const noexcept { return header_; }
  void apply(FrameRecord& frame) const;

 private:
  StreamHeader header_;
  ImageSize image_;
  double min_size_;
  std::vector<std::int64_t> remap_;
};

// Clips boxes to the image, drops detection and ground-truth boxes narrower
// or shorter than min_size_px, and remaps classes. Idempotent.
StreamContents preprocess(StreamContents contents, const PreprocessOptions& options);

}  // namespace detmon::stream
