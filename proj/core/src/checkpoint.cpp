#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "pqi/spanet.hpp"

namespace pqi {

void save_checkpoint(const std::filesystem::path& path, const SpaNetModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path.string());
  }
  out.write("SPANET01", 8);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_string(out, model.config().serialize());
  const auto& specs = model.layout().specs();
  binio::put_u32(out, static_cast<std::uint32_t>(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    binio::put_string(out, specs[i].name);
    binio::put_u32(out, static_cast<std::uint32_t>(specs[i].rows));
    binio::put_u32(out, static_cast<std::uint32_t>(specs[i].cols));
    const nn::Mat& t = model.parameters()[i];
    for (nn::Index r = 0; r < t.rows(); ++r) {
      for (nn::Index c = 0; c < t.cols(); ++c) {
        binio::put_f32(out, static_cast<float>(t(r, c)));
      }
    }
  }
  if (!out) {
    throw DataError("write failed: " + path.string());
  }
}

SpaNetModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open checkpoint: " + path.string());
  }
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "SPANET", 6) != 0) {
    throw DataError(path.string() + ": not a SPA-Net checkpoint");
  }
  if (std::memcmp(magic, "SPANET01", 8) != 0) {
    throw DataError(path.string() + ": checkpoint version mismatch (found " + std::string(magic, 8) +
                    ", expected SPANET01)");
  }
  const std::uint32_t version = binio::get_u32(in);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": checkpoint version mismatch (found " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion) + ")");
  }
  SpaNetModel model(SpaNetConfig::deserialize(binio::get_string(in)));
  const std::uint32_t count = binio::get_u32(in);
  if (count != model.layout().size()) {
    throw DataError(path.string() + ": tensor count does not match the stored configuration");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = binio::get_string(in);
    const auto id = model.layout().find(name);
    if (!id) {
      throw DataError(path.string() + ": unknown tensor '" + name + "'");
    }
    const auto rows = binio::get_u32(in);
    const auto cols = binio::get_u32(in);
    nn::Mat& t = model.parameters()[static_cast<std::size_t>(*id)];
    if (rows != t.rows() || cols != t.cols()) {
      throw DataError(path.string() + ": shape mismatch for tensor '" + name + "'");
    }
    for (nn::Index r = 0; r < t.rows(); ++r) {
      for (nn::Index c = 0; c < t.cols(); ++c) {
        t(r, c) = binio::get_f32(in);
      }
    }
  }
  return model;
}

}  // namespace pqi
