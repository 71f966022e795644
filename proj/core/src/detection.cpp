#include "pqi/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pqi {
namespace {

using nlohmann::json;

bool is_header(const json& j) { return j.is_object() && j.contains("coords") && !j.contains("image_id"); }

CoordMode parse_mode(const json& header) {
  const auto& v = header.at("coords");
  if (v.is_string()) {
    if (v.get<std::string>() == "absolute") {
      return CoordMode::Absolute;
    }
    if (v.get<std::string>() == "normalized") {
      return CoordMode::Normalized;
    }
  }
  throw DataError("detection file header: coords must be \"absolute\" or \"normalized\"");
}

double number_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw std::invalid_argument(std::string("missing or non-numeric field '") + key + "'");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("non-finite field '") + key + "'");
  }
  return v;
}

std::pair<std::string, Detection> parse_record(const json& j, CoordMode mode) {
  if (!j.is_object()) {
    throw std::invalid_argument("record is not a JSON object");
  }
  const auto id = j.find("image_id");
  if (id == j.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw std::invalid_argument("missing or empty 'image_id'");
  }
  const auto cls = j.find("class_id");
  if (cls == j.end() || !cls->is_number_integer()) {
    throw std::invalid_argument("missing or non-integer 'class_id'");
  }
  Detection d;
  d.box = Box{number_field(j, "x0"), number_field(j, "y0"), number_field(j, "x1"), number_field(j, "y1")};
  d.class_id = cls->get<int>();
  d.confidence = number_field(j, "confidence");
  if (d.confidence < 0.0 || d.confidence > 1.0) {
    throw std::invalid_argument("confidence outside [0, 1]");
  }
  if (d.box.x1 < d.box.x0 || d.box.y1 < d.box.y0) {
    throw std::invalid_argument("box corners inverted");
  }
  const double lo = std::min(d.box.x0, d.box.y0);
  const double hi = std::max(d.box.x1, d.box.y1);
  if (lo < 0.0) {
    throw std::invalid_argument("negative box coordinate");
  }
  if (mode == CoordMode::Normalized && hi > 1.0) {
    throw std::invalid_argument("normalized box coordinate above 1");
  }
  return {id->get<std::string>(), d};
}

}  // namespace

const char* to_string(CoordMode mode) noexcept { return mode == CoordMode::Normalized ? "normalized" : "absolute"; }

DetectionLoadResult parse_detections(const std::string& text) {
  DetectionLoadResult result;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    json j = json::parse(line, nullptr, false);
    if (!seen_content) {
      seen_content = true;
      if (!j.is_discarded() && is_header(j)) {
        result.coords = parse_mode(j);
        continue;
      }
    }
    try {
      if (j.is_discarded()) {
        throw std::invalid_argument("invalid JSON");
      }
      auto [image_id, det] = parse_record(j, result.coords);
      auto& set = result.sets[image_id];
      set.image_id = image_id;
      set.coords = result.coords;
      set.detections.push_back(det);
    } catch (const std::exception& e) {
      ++result.skipped;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

DetectionLoadResult load_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open detection file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw DataError("read error on detection file: " + path.string());
  }
  try {
    return parse_detections(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_detections(const DetectionMap& sets, CoordMode coords) {
  std::string out = json{{"coords", to_string(coords)}}.dump() + "\n";
  for (const auto& [id, set] : sets) {
    for (const auto& d : set.detections) {
      json rec = {{"image_id", id}, {"x0", d.box.x0},         {"y0", d.box.y0},
                  {"x1", d.box.x1}, {"y1", d.box.y1},         {"class_id", d.class_id},
                  {"confidence", d.confidence}};
      out += rec.dump();
      out += '\n';
    }
  }
  return out;
}

void save_detections(const std::filesystem::path& path, const DetectionMap& sets, CoordMode coords) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path.string());
  }
  out << format_detections(sets, coords);
}

DetectionSet filter_detections(const DetectionSet& ds, double conf_threshold) {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw InvalidArgument("confidence threshold must lie in [0, 1]");
  }
  DetectionSet out{ds.image_id, ds.coords, {}};
  for (const auto& d : ds.detections) {
    if (d.confidence >= conf_threshold) {
      out.detections.push_back(d);
    }
  }
  return out;
}

Rect pixel_rect(const Detection& d, CoordMode mode, int width, int height) noexcept {
  Rect r;
  if (mode == CoordMode::Normalized) {
    // [x0, x1) as a fraction of the frame -> inclusive pixel span.
    r = Rect{static_cast<int>(std::floor(d.box.x0 * width)), static_cast<int>(std::floor(d.box.y0 * height)),
             static_cast<int>(std::ceil(d.box.x1 * width)) - 1, static_cast<int>(std::ceil(d.box.y1 * height)) - 1};
  } else {
    auto px = [](double v) {
      return static_cast<int>(std::clamp(std::round(v), -1.0, 1.0e9));
    };
    r = Rect{px(d.box.x0), px(d.box.y0), px(d.box.x1), px(d.box.y1)};
  }
  return clamp_rect(r, width, height);
}

}  // namespace pqi
