#include <gtest/gtest.h>

#include <sstream>

#include "detmon/error.hpp"
#include "detmon/stream.hpp"
#include "support/fixtures.hpp"

using namespace detmon;
using namespace detmon::stream;

namespace {

std::vector<FrameRecord> random_frames(std::uint64_t seed, const StreamHeader& h, std::size_t n) {
  Rng rng(seed);
  std::vector<FrameRecord> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(fixture::random_frame(rng, h, 3 * i + 1, i % 3 != 2));
  return frames;
}

}  // namespace

TEST(Stream, EmptyStreamHasZeroFrameCount) {
  const auto h = fixture::header();
  const auto bytes = write_stream(h, {});
  const auto back = read_stream(bytes);
  EXPECT_EQ(back.header.frame_count, 0u);
  EXPECT_TRUE(back.frames.empty());
}

TEST(Stream, RoundTripIsIdentityAndBytesAreStable) {
  const auto h = fixture::header();
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto frames = random_frames(seed, h, 3 + seed % 4);
    const auto bytes = write_stream(h, frames);
    const auto back = read_stream(bytes);
    EXPECT_EQ(back.frames, frames);
    EXPECT_EQ(back.header.layer_shapes, h.layer_shapes);
    EXPECT_EQ(back.header.class_names, h.class_names);
    EXPECT_EQ(*back.header.frame_count, frames.size());
    EXPECT_EQ(write_stream(back.header, back.frames), bytes);
  }
}

TEST(Stream, MagicAndHeaderLayout) {
  const auto h = fixture::header();
  const auto bytes = write_stream(h, {});
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(bytes.substr(0, 8), "DETMON01");
  std::uint32_t len = 0;
  for (int i = 3; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  EXPECT_EQ(len, bytes.size() - 12);
  const auto json = bytes.substr(12);
  EXPECT_EQ(json.front(), '{');
  EXPECT_LT(json.find("\"class_names\""), json.find("\"frame_count\""));
}

TEST(Stream, ShapeMismatchNamesFrameAndLayer) {
  auto h = fixture::header({{3, 8, 8}});
  Rng rng(3);
  auto f = fixture::random_frame(rng, h, 17);
  f.features[0] = TensorF(Shape3{3, 4, 4});
  try {
    write_stream(h, {f});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("17"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 0"), std::string::npos) << msg;
  }
}

TEST(Stream, BadMagicRejected) {
  EXPECT_THROW(read_stream("XXXXXXXXXXXXXXXXXXXXXXXX"), FormatError);
  EXPECT_THROW(read_stream("XX"), FormatError);
}

TEST(Stream, TruncationReportsCutOffset) {
  const auto h = fixture::header();
  const auto frames = random_frames(9, h, 3);
  const auto bytes = write_stream(h, frames);
  // Cut in the middle of the last tensor of the last frame.
  const std::size_t cut = bytes.size() - 4 * 4 * 4 * 4 / 2;
  try {
    read_stream(bytes.substr(0, cut));
    FAIL() << "expected TruncationError";
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.offset(), cut);
  }
  // Every cut position is either a truncation or, at a record boundary, a
  // frame-count shortfall; never a silent success.
  for (std::size_t c = 8; c < bytes.size(); c += 37) EXPECT_THROW(read_stream(bytes.substr(0, c)), DataError);
}

TEST(Stream, TrailingDataRejected) {
  const auto h = fixture::header();
  const auto bytes = write_stream(h, random_frames(2, h, 2)) + "junk";
  EXPECT_THROW(read_stream(bytes), FormatError);
}

TEST(Stream, LazyReaderYieldsInOrder) {
  const auto h = fixture::header();
  const auto frames = random_frames(4, h, 5);
  auto reader = StreamReader::from_bytes(write_stream(h, frames));
  std::size_t i = 0;
  while (auto f = reader->next()) {
    ASSERT_LT(i, frames.size());
    EXPECT_EQ(*f, frames[i++]);
  }
  EXPECT_EQ(i, frames.size());
  EXPECT_FALSE(reader->next());
}

TEST(Stream, WriterRejectsNonIncreasingIds) {
  const auto h = fixture::header();
  Rng rng(5);
  std::ostringstream out;
  StreamWriter w(out, h);
  w.write(fixture::random_frame(rng, h, 4));
  EXPECT_THROW(w.write(fixture::random_frame(rng, h, 4)), FormatError);
  EXPECT_THROW(w.write(fixture::random_frame(rng, h, 2)), FormatError);
}

TEST(Stream, LiveStreamWithoutFrameCount) {
  const auto h = fixture::header();
  const auto frames = random_frames(6, h, 4);
  std::ostringstream out;
  StreamWriter w(out, h);
  for (const auto& f : frames) w.write(f);
  const auto back = read_stream(out.str());
  EXPECT_FALSE(back.header.frame_count);
  EXPECT_EQ(back.frames, frames);
}

TEST(Stream, ValidateWarnsButAccepts) {
  auto h = fixture::header();
  auto frames = random_frames(8, h, 3);
  frames[0].detections.push_back({{90, 70, 130, 95}, 0, 0.5});
  frames[1].features[0].values()[0] = std::numeric_limits<float>::quiet_NaN();
  auto reader = StreamReader::from_bytes(write_stream(h, frames));
  const auto report = validate(*reader);
  EXPECT_EQ(report.frames, 3u);
  EXPECT_EQ(report.frames_with_ground_truth, 2u);
  EXPECT_GE(report.warnings.size(), 3u);
}

TEST(Preprocess, SmallGroundTruthRemoved) {
  auto h = fixture::header();
  StreamContents c{h, {}};
  FrameRecord f;
  f.frame_id = 0;
  f.ground_truth = std::vector<GroundTruthObject>{{{0, 0, 10, 40}, 0}, {{0, 0, 30, 30}, 1}};
  f.detections = {{{0, 0, 10, 40}, 0, 0.9}};
  for (const auto& s : h.layer_shapes) f.features.emplace_back(s, 0.0f);
  c.frames.push_back(f);
  const auto out = preprocess(c, {25.0, {}});
  ASSERT_EQ(out.frames[0].ground_truth->size(), 1u);
  EXPECT_EQ(out.frames[0].ground_truth->front().class_id, 1);
  EXPECT_TRUE(out.frames[0].detections.empty());
}

TEST(Preprocess, IdentityWithZeroMinSize) {
  const auto h = fixture::header();
  const auto frames = random_frames(10, h, 4);
  const auto out = preprocess({h, frames}, {0.0, {}});
  EXPECT_EQ(out.frames, frames);
  EXPECT_EQ(out.header.class_names, h.class_names);
}

TEST(Preprocess, ClassMergeRewritesLabelsAndHeader) {
  auto h = fixture::header({{1, 2, 2}}, {"car", "van", "person", "tram"});
  Rng rng(11);
  std::vector<FrameRecord> frames;
  for (std::uint64_t i = 0; i < 5; ++i) frames.push_back(fixture::random_frame(rng, h, i));
  const std::map<std::string, std::string> merge{
      {"car", "vehicle"}, {"van", "vehicle"}, {"tram", "vehicle"}, {"person", "pedestrian"}};
  const auto out = preprocess({h, frames}, {0.0, merge});
  ASSERT_EQ(out.header.class_names.size(), 2u);
  for (const auto& n : out.header.class_names) EXPECT_TRUE(n == "vehicle" || n == "pedestrian");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ASSERT_EQ(out.frames[i].detections.size(), frames[i].detections.size());
    for (std::size_t k = 0; k < frames[i].detections.size(); ++k) {
      const auto& src = h.class_names[static_cast<std::size_t>(frames[i].detections[k].class_id)];
      const auto& dst = out.header.class_names[static_cast<std::size_t>(out.frames[i].detections[k].class_id)];
      EXPECT_EQ(merge.at(src), dst);
    }
  }
}

TEST(Preprocess, UnknownClassListed) {
  auto h = fixture::header({{1, 2, 2}}, {"car", "bicycle"});
  try {
    preprocess({h, {}}, {0.0, {{"car", "vehicle"}}});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bicycle"), std::string::npos);
  }
}

TEST(Preprocess, Idempotent) {
  auto h = fixture::header({{2, 3, 3}}, {"car", "van", "person"});
  const std::map<std::string, std::string> merge{{"car", "vehicle"}, {"van", "vehicle"}, {"person", "pedestrian"}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<FrameRecord> frames;
    for (std::uint64_t i = 0; i < 4; ++i) frames.push_back(fixture::random_frame(rng, h, i));
    // Some boxes straddle the image border so clipping matters.
    frames[0].detections.push_back({{-10, -5, 20, 30}, 0, 0.4});
    const PreprocessOptions opts{12.0, merge};
    const auto once = preprocess({h, frames}, opts);
    const auto twice = preprocess(once, opts);
    EXPECT_EQ(twice.frames, once.frames);
    EXPECT_EQ(twice.header, once.header);
  }
}
