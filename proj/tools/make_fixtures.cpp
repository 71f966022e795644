// Writes the bundled fixture set: scene_00..scene_19 PNGs and detections.jsonl.
// scene_07 deliberately has no detection record.

#include <filesystem>
#include <iostream>

#include "fixture_scenes.hpp"
#include "pqi/image_io.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  if (argc != 2) {
    std::cerr << "usage: pqi_make_fixtures <output-dir>\n";
    return 1;
  }
  const fs::path dir = argv[1];
  try {
    fs::create_directories(dir / "images");
    pqi::DetectionMap sets;
    for (int i = 0; i < pqi::fixtures::kSceneCount; ++i) {
      const std::string id = pqi::fixtures::scene_id(i);
      auto scene = pqi::fixtures::make_scene(1000 + static_cast<std::uint64_t>(i));
      pqi::write_png(dir / "images" / (id + ".png"), scene.image);
      if (i != 7) {
        scene.detections.image_id = id;
        sets.emplace(id, std::move(scene.detections));
      }
    }
    pqi::save_detections(dir / "detections.jsonl", sets, pqi::CoordMode::Absolute);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cout << "wrote " << pqi::fixtures::kSceneCount << " scenes to " << dir.string() << '\n';
  return 0;
}
