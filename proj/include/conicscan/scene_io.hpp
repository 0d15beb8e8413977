#pragma once

#include "conicscan/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace conicscan {

/// Scene files are JSON:
///
///   {
///     "seed": 7,
///     "noise": {"sigma": 0.005, "sigma_per_meter": 0.0},
///     "planes": [{"normal": [0, 1, 0], "offset": 0.8}],
///     "objects": [
///       {"id": "can", "type": "cylinder", "base": [0, 0.8, 2.5], "axis": [0, -1, 0],
///        "radius": 0.2, "height": 0.6, "velocity": [0, 0, 0.2]},
///       {"id": "cone", "type": "cone", "base": [...], "axis": [...], "base_radius": 0.17, "height": 0.7},
///       {"id": "ball", "type": "sphere", "center": [...], "radius": 0.36}
///     ],
///     "occluders": [{"object": "can", "fraction": 0.3}]
///   }
///
/// Lengths in meters, camera frame (+z forward, +y down). Every key except
/// "objects[].type" and the shape parameters is optional.
SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& scene);

/// Throws IoError for unreadable files, std::invalid_argument for bad content.
SceneSpec load_scene(const std::filesystem::path& path);
void save_scene(const SceneSpec& scene, const std::filesystem::path& path);

struct NamedSceneParams {
  double sigma = 0.005;
  std::uint64_t seed = 1;
  double tilt_deg = 0.0;  ///< parking_cone, tilted_cylinder
  double distance = 1.0;  ///< cylinder, occluded_cylinder, moving_cylinder
  double fraction = 0.0;  ///< occluded_cylinder
  double speed = 0.21;    ///< moving_cylinder
};

/// The built-in scenes of synth.hpp by name (e.g. "three_object").
/// Throws std::invalid_argument for an unknown name.
SceneSpec named_scene(const std::string& name, const NamedSceneParams& params);
std::vector<std::string> scene_names();

}  // namespace conicscan
