#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pqi/detection.hpp"

namespace pqi {
namespace {

TEST(DetectionParseTest, DefaultsToAbsolute) {
  const auto r = parse_detections(
      R"({"image_id":"a","x0":1,"y0":2,"x1":5,"y1":6,"class_id":2,"confidence":0.9})"
      "\n");
  EXPECT_EQ(r.coords, CoordMode::Absolute);
  ASSERT_EQ(r.sets.size(), 1u);
  const auto& set = r.sets.at("a");
  ASSERT_EQ(set.k(), 1u);
  EXPECT_EQ(set.detections[0].box, (Box{1, 2, 5, 6}));
  EXPECT_EQ(set.detections[0].class_id, 2);
  EXPECT_DOUBLE_EQ(set.detections[0].confidence, 0.9);
}

TEST(DetectionParseTest, NormalizedHeaderAndGrouping) {
  const auto r = parse_detections(
      "{\"coords\":\"normalized\"}\n"
      "{\"image_id\":\"b\",\"x0\":0.1,\"y0\":0.1,\"x1\":0.5,\"y1\":0.5,\"class_id\":0,\"confidence\":0.5}\n"
      "\n"
      "{\"image_id\":\"a\",\"x0\":0,\"y0\":0,\"x1\":1,\"y1\":1,\"class_id\":1,\"confidence\":0.7}\n"
      "{\"image_id\":\"b\",\"x0\":0.2,\"y0\":0.2,\"x1\":0.3,\"y1\":0.3,\"class_id\":0,\"confidence\":0.6}\r\n");
  EXPECT_EQ(r.coords, CoordMode::Normalized);
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_EQ(r.sets.at("a").k(), 1u);
  EXPECT_EQ(r.sets.at("b").k(), 2u);
  EXPECT_EQ(r.sets.at("b").coords, CoordMode::Normalized);
}

TEST(DetectionParseTest, MalformedRecordsSkippedAndCounted) {
  const auto r = parse_detections(
      "not json\n"
      "{\"image_id\":\"a\",\"x0\":1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0}\n"
      "{\"image_id\":\"a\",\"x0\":5,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0,\"confidence\":0.5}\n"
      "{\"image_id\":\"a\",\"x0\":1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0,\"confidence\":1.5}\n"
      "{\"image_id\":\"\",\"x0\":1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0,\"confidence\":0.5}\n"
      "{\"image_id\":\"a\",\"x0\":-1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0,\"confidence\":0.5}\n"
      "{\"image_id\":\"a\",\"x0\":1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":0.5,\"confidence\":0.5}\n"
      "{\"image_id\":\"a\",\"x0\":1,\"y0\":1,\"x1\":2,\"y1\":2,\"class_id\":3,\"confidence\":0.5}\n");
  EXPECT_EQ(r.skipped, 7u);
  EXPECT_EQ(r.warnings.size(), 7u);
  EXPECT_EQ(r.sets.at("a").k(), 1u);
}

TEST(DetectionParseTest, NormalizedOutOfRangeSkipped) {
  const auto r = parse_detections(
      "{\"coords\":\"normalized\"}\n"
      "{\"image_id\":\"a\",\"x0\":0.1,\"y0\":0.1,\"x1\":1.5,\"y1\":0.5,\"class_id\":0,\"confidence\":0.5}\n");
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_TRUE(r.sets.empty());
}

TEST(DetectionParseTest, BadHeaderThrows) {
  EXPECT_THROW((void)parse_detections("{\"coords\":\"pixels\"}\n"), DataError);
}

TEST(DetectionLoadTest, MissingFileThrows) {
  EXPECT_THROW((void)load_detections("/nonexistent/detections.jsonl"), DataError);
}

TEST(DetectionLoadTest, SaveLoadRoundTrip) {
  DetectionMap sets;
  sets["img_1"] = DetectionSet{"img_1", CoordMode::Normalized,
                               {{Box{0.125, 0.25, 0.5, 0.75}, 3, 0.875}, {Box{0, 0, 1, 1}, 0, 0.4}}};
  sets["img_2"] = DetectionSet{"img_2", CoordMode::Normalized, {{Box{0.1, 0.2, 0.3, 0.4}, 7, 0.1}}};
  const auto path = std::filesystem::temp_directory_path() / "pqi_detections_roundtrip.jsonl";
  save_detections(path, sets, CoordMode::Normalized);
  const auto loaded = load_detections(path);
  EXPECT_EQ(loaded.coords, CoordMode::Normalized);
  EXPECT_EQ(loaded.sets, sets);
}

TEST(FilterTest, ThresholdIsInclusive) {
  DetectionSet ds{"x", CoordMode::Absolute, {}};
  for (const double c : {0.1, 0.39999, 0.4, 0.41, 0.95}) {
    ds.detections.push_back({Box{0, 0, 1, 1}, 0, c});
  }
  const auto kept = filter_detections(ds);
  ASSERT_EQ(kept.k(), 3u);
  EXPECT_DOUBLE_EQ(kept.detections[0].confidence, 0.4);
  EXPECT_EQ(filter_detections(ds, 0.0).k(), 5u);
  EXPECT_THROW((void)filter_detections(ds, 1.1), InvalidArgument);
}

TEST(PixelRectTest, AbsoluteRoundsAndClamps) {
  const Detection d{Box{1.4, 2.6, 7.5, 100}, 0, 1};
  EXPECT_EQ(pixel_rect(d, CoordMode::Absolute, 10, 10), (Rect{1, 3, 8, 9}));
  const Detection outside{Box{20, 20, 30, 30}, 0, 1};
  EXPECT_TRUE(pixel_rect(outside, CoordMode::Absolute, 10, 10).empty());
}

TEST(PixelRectTest, NormalizedCoversFractionalSpan) {
  const Detection full{Box{0, 0, 1, 1}, 0, 1};
  EXPECT_EQ(pixel_rect(full, CoordMode::Normalized, 40, 30), (Rect{0, 0, 39, 29}));
  const Detection half{Box{0.5, 0.25, 0.75, 0.5}, 0, 1};
  EXPECT_EQ(pixel_rect(half, CoordMode::Normalized, 40, 40), (Rect{20, 10, 29, 19}));
  const Detection sliver{Box{0.5, 0.5, 0.5, 0.5}, 0, 1};
  EXPECT_TRUE(pixel_rect(sliver, CoordMode::Normalized, 40, 40).empty());
}

}  // namespace
}  // namespace pqi
