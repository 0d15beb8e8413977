#include "conicscan/scene_io.hpp"

#include "conicscan/frame_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace conicscan {
namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(std::string("scene: '") + what + "' must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

double number(const json& obj, const char* key) {
  if (!obj.contains(key)) throw std::invalid_argument(std::string("scene: missing '") + key + "'");
  return obj.at(key).get<double>();
}

ShapeSpec shape_from(const json& o) {
  const std::string type = o.at("type").get<std::string>();
  if (type == "sphere") return SphereSpec{vec(o.at("center"), "center"), number(o, "radius")};
  if (type == "cylinder")
    return CylinderSpec{vec(o.at("base"), "base"), vec(o.at("axis"), "axis").normalized(), number(o, "radius"),
                        number(o, "height")};
  if (type == "cone")
    return ConeSpec{vec(o.at("base"), "base"), vec(o.at("axis"), "axis").normalized(), number(o, "base_radius"),
                    number(o, "height")};
  throw std::invalid_argument("scene: unknown object type '" + type + "'");
}

json shape_to(const ShapeSpec& shape) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SphereSpec>)
          return {{"type", "sphere"}, {"center", vec(s.center)}, {"radius", s.radius}};
        else if constexpr (std::is_same_v<T, CylinderSpec>)
          return {{"type", "cylinder"}, {"base", vec(s.base)}, {"axis", vec(s.axis)}, {"radius", s.radius}, {"height", s.height}};
        else
          return {{"type", "cone"}, {"base", vec(s.base)}, {"axis", vec(s.axis)}, {"base_radius", s.base_radius}, {"height", s.height}};
      },
      shape);
}

}  // namespace

SceneSpec scene_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("scene: top level must be an object");
    s.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.noise.sigma = n.value("sigma", 0.0);
      s.noise.sigma_per_meter = n.value("sigma_per_meter", 0.0);
    }
    for (const auto& p : j.value("planes", json::array()))
      s.planes.push_back({vec(p.at("normal"), "normal").normalized(), number(p, "offset")});
    int unnamed = 0;
    for (const auto& o : j.value("objects", json::array())) {
      SceneObject obj;
      obj.id = o.value("id", "object" + std::to_string(unnamed++));
      obj.shape = shape_from(o);
      if (o.contains("velocity")) obj.velocity = vec(o.at("velocity"), "velocity");
      s.objects.push_back(std::move(obj));
    }
    for (const auto& o : j.value("occluders", json::array()))
      s.occluders.push_back({o.at("object").get<std::string>(), number(o, "fraction")});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scene: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scene_to_json(const SceneSpec& scene) {
  json j;
  j["seed"] = scene.seed;
  j["noise"] = {{"sigma", scene.noise.sigma}, {"sigma_per_meter", scene.noise.sigma_per_meter}};
  j["planes"] = json::array();
  for (const auto& p : scene.planes) j["planes"].push_back({{"normal", vec(p.normal)}, {"offset", p.offset}});
  j["objects"] = json::array();
  for (const auto& o : scene.objects) {
    json oj = shape_to(o.shape);
    oj["id"] = o.id;
    if (!o.velocity.isZero()) oj["velocity"] = vec(o.velocity);
    j["objects"].push_back(oj);
  }
  j["occluders"] = json::array();
  for (const auto& o : scene.occluders) j["occluders"].push_back({{"object", o.object_id}, {"fraction", o.fraction}});
  return j.dump(2) + "\n";
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

void save_scene(const SceneSpec& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write scene file " + path.string());
  out << scene_to_json(scene);
  if (!out) throw IoError("write failed: " + path.string());
}

SceneSpec named_scene(const std::string& name, const NamedSceneParams& p) {
  if (name == "room") return room(p.sigma, p.seed);
  if (name == "trash_can") return trash_can_scene(p.sigma, p.seed);
  if (name == "parking_cone") return parking_cone_scene(p.sigma, p.seed, p.tilt_deg);
  if (name == "ball") return ball_scene(p.sigma, p.seed);
  if (name == "three_object") return three_object_scene(p.sigma, p.seed);
  if (name == "sphere_on_cylinder") return sphere_on_cylinder_scene(p.sigma, p.seed);
  if (name == "tilted_cylinder") return tilted_cylinder_scene(p.tilt_deg, p.sigma, p.seed);
  if (name == "cylinder") return cylinder_at(p.distance, p.sigma, p.seed);
  if (name == "occluded_cylinder") return occluded_cylinder_scene(p.fraction, p.distance, p.sigma, p.seed);
  if (name == "moving_cylinder") return moving_cylinder_scene(p.speed, p.distance, p.sigma, p.seed);
  throw std::invalid_argument("unknown scene '" + name + "'");
}

std::vector<std::string> scene_names() {
  return {"room", "trash_can", "parking_cone", "ball", "three_object", "sphere_on_cylinder",
          "tilted_cylinder", "cylinder", "occluded_cylinder", "moving_cylinder"};
}

}  // namespace conicscan
