#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "polarguide/backbone.hpp"
#include "polarguide/guidance.hpp"
#include "polarguide/synth.hpp"

namespace polarguide::config {

using Json = nlohmann::json;

// Every parser rejects unknown keys and wrong types with a kConfig error
// whose message starts with the JSON pointer of the offending key.

SceneSpec parse_scene(const Json& j);
Json scene_to_json(const SceneSpec& spec);

CorruptionSpec parse_corruption(const Json& j, const std::string& where = "/corruption");
Json corruption_to_json(const CorruptionSpec& spec);

// "camera" holds "ortho" or "fov:<deg>"; perspective needs the image size.
GuidanceConfig parse_guidance(const Json& j, int width = 0, int height = 0);
Json guidance_to_json(const GuidanceConfig& cfg);

CameraModel parse_camera_flag(const std::string& text, int width, int height);

LinearSmootherSpec parse_smoother(const Json& j);

// Oracle backbone file: corruption, coupling parameters, the path of the
// ground-truth normals and optionally of the anchor image (relative paths
// resolve against the file's folder). Without an anchor the oracle is
// anchored at the image it is first fed.
struct OracleFile {
  std::filesystem::path gt;
  std::optional<std::filesystem::path> anchor;
  CorruptedOracleSpec spec;
};
OracleFile parse_oracle(const Json& j, const std::filesystem::path& base_dir);

// Reads and parses a JSON file (kIo when missing, kConfig when malformed).
Json load_json(const std::filesystem::path& path);

// Built-in scene presets: sphere, plane, bumpy_sphere.
SceneSpec preset(const std::string& name);

}  // namespace polarguide::config
