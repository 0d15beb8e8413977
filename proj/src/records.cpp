#include "conicscan/records.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace conicscan {
namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("record: expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json line(const Line3D& l) { return {{"anchor", vec(l.anchor)}, {"direction", vec(l.direction)}}; }
Line3D line(const json& j) { return {vec(j.at("anchor")), vec(j.at("direction"))}; }

json primitive_json(const Primitive& p) {
  json j;
  j["kind"] = std::string(to_string(p.kind()));
  j["position"] = vec(p.position());
  j["radius"] = p.radius();
  std::visit(
      [&j](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          j["center"] = vec(s.center);
          j["sphere_radius"] = s.radius;
        } else if constexpr (std::is_same_v<T, Cylinder>) {
          j["axis"] = line(s.axis);
          j["cylinder_radius"] = s.radius;
          j["z_min"] = s.z_min;
          j["z_max"] = s.z_max;
        } else {
          j["axis"] = line(s.axis);
          j["apex"] = vec(s.apex);
          j["half_angle"] = s.half_angle;
          j["z_min"] = s.z_min;
          j["z_max"] = s.z_max;
          j["apex_reliable"] = s.apex_reliable;
        }
      },
      p.shape);
  j["support"] = p.support;
  j["residual"] = p.residual;
  j["surface_residual"] = p.surface_residual;
  j["coverage"] = p.coverage;
  j["zr_radius"] = p.zr_radius;
  j["first_row"] = p.first_row;
  j["last_row"] = p.last_row;
  j["rows"] = p.rows;
  return j;
}

Primitive primitive_from(const json& j) {
  Primitive p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == to_string(PrimitiveKind::Sphere)) {
    p.shape = Sphere{vec(j.at("center")), j.at("sphere_radius").get<double>()};
  } else if (kind == to_string(PrimitiveKind::Cylinder)) {
    p.shape = Cylinder{line(j.at("axis")), j.at("cylinder_radius").get<double>(), j.at("z_min").get<double>(),
                       j.at("z_max").get<double>()};
  } else if (kind == to_string(PrimitiveKind::Cone)) {
    p.shape = Cone{line(j.at("axis")),        vec(j.at("apex")),          j.at("half_angle").get<double>(),
                   j.at("z_min").get<double>(), j.at("z_max").get<double>(), j.at("apex_reliable").get<bool>()};
  } else {
    throw std::invalid_argument("record: unknown primitive kind '" + kind + "'");
  }
  p.support = j.at("support").get<int>();
  p.residual = j.at("residual").get<double>();
  p.surface_residual = j.value("surface_residual", 0.0);
  p.coverage = j.value("coverage", 0.0);
  p.zr_radius = j.value("zr_radius", 0.0);
  p.first_row = j.value("first_row", 0);
  p.last_row = j.value("last_row", 0);
  p.rows = j.value("rows", std::vector<int>{});
  return p;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DetectionRecord DetectionRecord::from(long frame_id, double timestamp, const DetectionResult& result) {
  return {frame_id, timestamp, result.primitives, result.timings};
}

std::string to_json_line(const DetectionRecord& rec) {
  json j;
  j["frame"] = rec.frame_id;
  j["timestamp"] = rec.timestamp;
  j["primitives"] = json::array();
  for (const auto& p : rec.primitives) j["primitives"].push_back(primitive_json(p));
  j["timing_us"] = {{"extract", rec.timings.extract_us},
                    {"prefilter", rec.timings.prefilter_us},
                    {"chain", rec.timings.chain_us},
                    {"classify", rec.timings.classify_us},
                    {"total", rec.timings.total_us}};
  return j.dump();
}

DetectionRecord parse_json_line(const std::string& text) {
  DetectionRecord rec;
  try {
    const json j = json::parse(text);
    rec.frame_id = j.at("frame").get<long>();
    rec.timestamp = j.at("timestamp").get<double>();
    for (const auto& p : j.at("primitives")) rec.primitives.push_back(primitive_from(p));
    const auto& t = j.at("timing_us");
    rec.timings.extract_us = t.at("extract").get<double>();
    rec.timings.prefilter_us = t.at("prefilter").get<double>();
    rec.timings.chain_us = t.at("chain").get<double>();
    rec.timings.classify_us = t.at("classify").get<double>();
    rec.timings.total_us = t.at("total").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("record: ") + e.what());
  }
  return rec;
}

std::string csv_header() {
  return "frame,timestamp,kind,x,y,z,radius,axis_x,axis_y,axis_z,half_angle,support,residual,surface_residual,"
         "coverage,total_us";
}

std::string to_csv_rows(const DetectionRecord& rec) {
  std::ostringstream out;
  for (const auto& p : rec.primitives) {
    const Vec3 pos = p.position();
    Vec3 axis = Vec3::Zero();
    double half_angle = 0.0;
    if (const auto* c = std::get_if<Cylinder>(&p.shape)) axis = c->axis.direction;
    if (const auto* k = std::get_if<Cone>(&p.shape)) {
      axis = k->axis.direction;
      half_angle = k->half_angle;
    }
    out << rec.frame_id << ',' << fmt(rec.timestamp) << ',' << to_string(p.kind()) << ',' << fmt(pos.x()) << ','
        << fmt(pos.y()) << ',' << fmt(pos.z()) << ',' << fmt(p.radius()) << ',' << fmt(axis.x()) << ','
        << fmt(axis.y()) << ',' << fmt(axis.z()) << ',' << fmt(half_angle) << ',' << p.support << ','
        << fmt(p.residual) << ',' << fmt(p.surface_residual) << ',' << fmt(p.coverage) << ','
        << fmt(rec.timings.total_us) << '\n';
  }
  return out.str();
}

}  // namespace conicscan
