#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pqi/image.hpp"

namespace pqi {

/// Decodes a PNG or JPEG file (detected by signature) into 8-bit RGB.
/// Grayscale and palette PNGs are expanded; alpha is dropped.
/// Throws DecodeError for other bit depths or unreadable data.
[[nodiscard]] RgbImage read_image(const std::filesystem::path& path);
[[nodiscard]] RgbImage decode_image(std::span<const std::uint8_t> encoded);

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
/// 16-bit single-channel PNG, e.g. superpixel label maps.
void write_png16(const std::filesystem::path& path, const Plane<std::uint16_t>& img);
void write_jpeg(const std::filesystem::path& path, const RgbImage& img, int quality = 95);

/// Lists *.png / *.jpg / *.jpeg files in dir, sorted by filename.
[[nodiscard]] std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace pqi
