#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pqi/image.hpp"

namespace pqi {

/// Detector confidence cut-off used upstream (the IoU/NMS setting of 0.5 is
/// applied by the detector itself and is not re-applied here).
inline constexpr double kDefaultConfidenceThreshold = 0.4;

enum class CoordMode { Absolute, Normalized };

[[nodiscard]] const char* to_string(CoordMode mode) noexcept;

/// Box corners as stored in the detection file. Absolute boxes are
/// inclusive pixel coordinates; normalized boxes are fractions of width/height.
struct Box {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  Box box;
  int class_id = 0;
  double confidence = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionSet {
  std::string image_id;
  CoordMode coords = CoordMode::Absolute;
  std::vector<Detection> detections;

  [[nodiscard]] std::size_t k() const noexcept { return detections.size(); }
  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

using DetectionMap = std::map<std::string, DetectionSet>;

struct DetectionLoadResult {
  DetectionMap sets;
  CoordMode coords = CoordMode::Absolute;
  /// Records skipped because they failed to parse or validate.
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads a JSON Lines detection file. An optional first line
/// {"coords":"absolute"|"normalized"} selects the coordinate convention
/// (absolute when omitted). Malformed records are skipped and counted;
/// an unreadable file or an invalid header throws DataError.
[[nodiscard]] DetectionLoadResult load_detections(const std::filesystem::path& path);
[[nodiscard]] DetectionLoadResult parse_detections(const std::string& text);

/// Writes the header line followed by one record per detection, grouped by image_id.
void save_detections(const std::filesystem::path& path, const DetectionMap& sets, CoordMode coords);
[[nodiscard]] std::string format_detections(const DetectionMap& sets, CoordMode coords);

/// Keeps detections with confidence >= threshold, preserving order.
[[nodiscard]] DetectionSet filter_detections(const DetectionSet& ds, double conf_threshold = kDefaultConfidenceThreshold);

/// Pixel rectangle of a detection on a width x height frame, clamped to the frame.
/// May be empty (zero area).
[[nodiscard]] Rect pixel_rect(const Detection& d, CoordMode mode, int width, int height) noexcept;

}  // namespace pqi
