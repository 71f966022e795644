#include "pqi/image_io.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace pqi {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) {
      std::fclose(f);
    }
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_write(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) {
    throw DataError("cannot open for writing: " + path.string());
  }
  return f;
}

// ---- PNG decode -----------------------------------------------------------

struct PngReadState {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t count) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + count > state->data.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, state->data.data() + state->offset, count);
  state->offset += count;
}

[[noreturn]] void png_throw(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err != nullptr) {
    *err = msg;
  }
  png_longjmp(png, 1);
}

void png_silent_warning(png_structp, png_const_charp) {}

RgbImage decode_png(std::span<const std::uint8_t> encoded) {
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_throw, png_silent_warning);
  if (png == nullptr) {
    throw DecodeError("libpng: cannot allocate read struct");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("libpng: cannot allocate info struct");
  }

  PngReadState state{encoded, 0};
  std::vector<std::uint8_t> rgb;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("PNG decode failed: " + error);
  }

  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("unsupported PNG bit depth " + std::to_string(bit_depth) + " (8-bit channels only)");
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("PNG does not expand to 8-bit RGB");
  }

  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = rgb.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return RgbImage(static_cast<int>(width), static_cast<int>(height), std::move(rgb));
}

// ---- PNG encode -----------------------------------------------------------

void encode_png(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
                int bytes_per_row, const std::uint8_t* data) {
  FilePtr f = open_for_write(path);
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_throw, png_silent_warning);
  if (png == nullptr) {
    throw DataError("libpng: cannot allocate write struct");
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng: cannot allocate info struct");
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * bytes_per_row);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG encode failed: " + error);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---- JPEG -----------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_throw(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

RgbImage decode_jpeg(std::span<const std::uint8_t> encoded) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_throw;
  jerr.base.emit_message = jpeg_silent;

  std::vector<std::uint8_t> rgb;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError(std::string("JPEG decode failed: ") + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, encoded.data(), static_cast<unsigned long>(encoded.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.data_precision != 8) {
    jpeg_destroy_decompress(&cinfo);
    throw DecodeError("unsupported JPEG precision (8-bit channels only)");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const auto width = static_cast<int>(cinfo.output_width);
  const auto height = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return RgbImage(width, height, std::move(rgb));
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> encoded) {
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (encoded.size() >= 8 && std::equal(encoded.begin(), encoded.begin() + 8, kPngSig)) {
    return decode_png(encoded);
  }
  if (encoded.size() >= 3 && encoded[0] == 0xFF && encoded[1] == 0xD8 && encoded[2] == 0xFF) {
    return decode_jpeg(encoded);
  }
  throw DecodeError("unrecognized image format (expected PNG or JPEG)");
}

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DecodeError("cannot open image: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  encode_png(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, img.width() * 3, img.bytes().data());
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  encode_png(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY, img.width(), img.pixels().data());
}

void write_png16(const std::filesystem::path& path, const Plane<std::uint16_t>& img) {
  // PNG stores 16-bit samples big-endian.
  std::vector<std::uint8_t> be(img.size() * 2);
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(px[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(px[i] & 0xFF);
  }
  encode_png(path, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY, img.width() * 2, be.data());
}

void write_jpeg(const std::filesystem::path& path, const RgbImage& img, int quality) {
  FilePtr f = open_for_write(path);
  jpeg_compress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_throw;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw DataError(std::string("JPEG encode failed: ") + jerr.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto bytes = img.bytes();
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPROW>(bytes.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width() * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    std::string ext = entry.path().extension().string();
    std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
      out.push_back(entry.path());
    }
  }
  std::ranges::sort(out);
  return out;
}

}  // namespace pqi
