// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include "conicscan/experiments.hpp"
#include "conicscan/pipeline.hpp"
#include "conicscan/synth.hpp"
#include "oracles.hpp"
#include "properties.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace conicscan;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class... T>
std::string str(const T&... v) {
  std::ostringstream out;
  out.precision(4);
  (out << ... << v);
  return out.str();
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized()))));
}

const Primitive* nearest(const std::vector<Primitive>& ps, PrimitiveKind k, const Vec3& at) {
  const Primitive* best = nullptr;
  for (const auto& p : ps)
    if (p.kind() == k && (!best || (p.position() - at).norm() < (best->position() - at).norm())) best = &p;
  return best;
}

// --- 1

Eigen::Matrix<double, 6, 1> unit(const ConicCoefficients& k) {
  Eigen::Matrix<double, 6, 1> v;
  v << k.a, k.b, k.c, k.d, k.e, k.f;
  v.normalize();
  return v(0) + v(2) < 0 ? Eigen::Matrix<double, 6, 1>(-v) : v;
}

Outcome incremental_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_sum = 0, worst_fit = 0;
  int fits = 0;
  for (int c = 0; c < 1000; ++c) {
    const double ra = 1 + 50 * u(rng), rb = ra * (0.1 + 0.9 * u(rng));
    const Vec2 center(100 * (u(rng) - 0.5), 100 * (u(rng) - 0.5));
    std::normal_distribution<double> n(0, 0.01 * rb);
    const auto pool = oracle::ellipse_points(center.x(), center.y(), ra, rb, M_PI * u(rng), 200);
    const Vec2 origin = pool[rng() % pool.size()];
    ScatterAccumulator acc(origin);
    std::vector<Vec2> live;
    const int ops = 1 + static_cast<int>(rng() % 200);
    for (int i = 0; i < ops; ++i) {
      if (!live.empty() && u(rng) < 0.3) {
        const size_t k = rng() % live.size();
        acc.remove(live[k]);
        live.erase(live.begin() + static_cast<long>(k));
      } else {
        live.push_back(pool[rng() % pool.size()] + Vec2(n(rng), n(rng)));
        acc.add(live.back());
      }
    }
    const auto got = oracle::as_vector(acc.sums());
    const auto want = oracle::as_vector(oracle::power_sums(live, origin));
    double scale = 1.0;
    for (double w : want) scale = std::max(scale, std::abs(w));
    for (size_t k = 0; k < got.size(); ++k) worst_sum = std::max(worst_sum, std::abs(got[k] - want[k]) / scale);

    ScatterAccumulator batch(origin);
    for (const auto& p : live) batch.add(p);
    const auto a = fit_local(acc), b = fit_local(batch);
    if (a.has_value() != b.has_value()) return {false, str("case ", c, ": fit exists for one side only")};
    if (a) {
      ++fits;
      worst_fit = std::max(worst_fit, (unit(*a) - unit(*b)).cwiseAbs().maxCoeff());
    }
  }
  const double secs = seconds_since(t0);
  return {worst_sum <= 1e-12 && worst_fit <= 1e-9 && secs < 10.0,
          str("1000 sequences, worst sum error ", worst_sum, ", worst conic error ", worst_fit, " over ", fits,
              " fits, ", secs, " s")};
}

// --- 2

Outcome exact_recovery() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  int ok = 0;
  double worst = 0;
  for (int c = 0; c < 100; ++c) {
    const double ra = 1 + 99 * u(rng), rb = ra * (0.05 + 0.95 * u(rng));
    const double cx = 200 * (u(rng) - 0.5), cy = 200 * (u(rng) - 0.5), th = M_PI * u(rng);
    const auto pts = oracle::ellipse_points(cx, cy, ra, rb, th, 100);
    const auto k = fit_points(pts);
    const auto g = k ? to_geometric(*k) : std::nullopt;
    if (!g) continue;
    const double e = oracle::relative_error(*g, cx, cy, ra, rb, th);
    worst = std::max(worst, e);
    ok += e < 1e-6;
  }
  return {ok == 100, str(ok, "/100 within 1e-6, worst relative error ", worst)};
}

// --- 3

Outcome noise_robustness(const Profile& prof) {
  NoiseOptions o;
  o.sigmas = {0.0, 1.0, 2.0};
  const auto rows = run_noise(o, prof);
  bool pass = true;
  std::string d;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    pass = pass && r.detected == r.trials;
    if (i > 0) pass = pass && r.r_major.std > rows[i - 1].r_major.std && r.r_minor.std > rows[i - 1].r_minor.std;
    d += str("sigma ", r.sigma, ": ", r.detected, "/", r.trials, " std(rMajor) ", r.r_major.std, " std(rMinor) ",
             r.r_minor.std, i + 1 < rows.size() ? "; " : "");
  }
  return {pass, d};
}

// --- 4

struct Truth {
  PrimitiveKind kind;
  Vec3 at;      // on the axis, or the sphere center
  Vec3 axis;    // towards the base for cones
  double size;  // cylinder / sphere radius, cone base radius
  double height = 0;
};

std::string check_primitive(const Primitive& p, const Truth& t) {
  if (p.kind() != t.kind) return "wrong kind";
  if (const auto* c = std::get_if<Cylinder>(&p.shape)) {
    if (std::abs(c->radius - t.size) > 0.03 * t.size) return str("cylinder radius ", c->radius);
    if (angle_between(c->axis.direction, t.axis) > 0.03) return "cylinder axis";
  } else if (const auto* k = std::get_if<Cone>(&p.shape)) {
    if (angle_between(k->axis.direction, t.axis) > 0.03) return "cone axis";
    // base radius of the fitted cone
    const double base = std::tan(k->half_angle) * (t.at - k->apex).dot(k->axis.direction);
    if (std::abs(base - t.size) > 0.03 * t.size) return str("cone base radius ", base);
    const double alpha = std::atan(t.size / t.height);
    // radius at the reported position against the true cone there
    const Vec3 apex = t.at + t.height * t.axis;
    const double h = (p.position() - apex).dot(-t.axis);
    const double r_true = h * std::tan(alpha);
    if (std::abs(p.radius() - r_true) > 0.03 * r_true) return str("cone radius ", p.radius(), " vs ", r_true);
  } else {
    const auto& s = std::get<Sphere>(p.shape);
    if (std::abs(s.radius - t.size) > 0.03 * t.size) return str("sphere radius ", s.radius);
    if ((s.center - t.at).norm() > 0.03 * t.size) return "sphere center";
  }
  return {};
}

Outcome classification(const Profile& prof) {
  const Truth can{PrimitiveKind::Cylinder, Vec3(0, 0.5, 2.5), Vec3::UnitY(), 0.2};
  const Truth cone{PrimitiveKind::Cone, Vec3(0, kFloorY, 2.2), -Vec3::UnitY(), 0.17, 0.7};
  const Truth ball{PrimitiveKind::Sphere, Vec3(0, kFloorY - 0.36, 2.5), Vec3::UnitY(), 0.36};
  struct Case {
    std::string name;
    std::function<SceneSpec(std::uint64_t)> scene;
    std::vector<Truth> truth;
  };
  Truth can3 = can, cone3 = cone, ball3 = ball;
  can3.at = Vec3(-0.9, 0.5, 2.5);
  cone3.at = Vec3(0, kFloorY, 2.3);
  ball3.at = Vec3(0.95, kFloorY - 0.36, 2.6);
  const std::vector<Case> cases{
      {"trash_can", [&](std::uint64_t s) { return trash_can_scene(prof.range_sigma, s); }, {can}},
      {"parking_cone", [&](std::uint64_t s) { return parking_cone_scene(prof.range_sigma, s); }, {cone}},
      {"ball", [&](std::uint64_t s) { return ball_scene(prof.range_sigma, s); }, {ball}},
      {"three_object", [&](std::uint64_t s) { return three_object_scene(prof.range_sigma, s); }, {can3, cone3, ball3}},
  };
  bool pass = true;
  std::string d;
  for (const auto& c : cases) {
    int ok = 0;
    std::string why;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto ps = detect_frame(render(c.scene(seed), CameraIntrinsics{}), prof.detector).primitives;
      std::string err = ps.size() == c.truth.size() ? "" : str(ps.size(), " primitives");
      for (const auto& t : c.truth) {
        if (!err.empty()) break;
        const auto* p = nearest(ps, t.kind, t.at);
        err = p ? check_primitive(*p, t) : "kind missing";
      }
      if (err.empty()) ++ok;
      else if (why.empty()) why = str(" (seed ", seed, ": ", err, ")");
    }
    pass = pass && ok == 20;
    d += str(c.name, " ", ok, "/20", why, "; ");
  }
  d.resize(d.size() - 2);
  return {pass, d};
}

// --- 5

Outcome separation(const Profile& prof) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto ps = detect_frame(render(sphere_on_cylinder_scene(prof.range_sigma, seed), CameraIntrinsics{}),
                                 prof.detector).primitives;
    if (ps.size() == 2 && nearest(ps, PrimitiveKind::Sphere, Vec3::Zero()) &&
        nearest(ps, PrimitiveKind::Cylinder, Vec3::Zero()))
      ++ok;
  }
  return {ok == 20, str(ok, "/20 runs gave exactly a sphere and a cylinder")};
}

// --- 6

Outcome tilt(const Profile& prof) {
  std::string d;
  bool pass = true;
  for (double deg : {5.0, 20.0, 40.0}) {
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto ps = detect_frame(render(parking_cone_scene(prof.range_sigma, seed, deg), CameraIntrinsics{}),
                                   prof.detector).primitives;
      ok += ps.size() == 1 && ps[0].kind() == PrimitiveKind::Cone;
    }
    pass = pass && ok == 20;
    d += str("cone ", deg, " deg ", ok, "/20; ");
  }
  const Vec3 mid(0, 0, 2);
  const auto found = [&](const std::vector<Primitive>& ps) {
    const auto* c = nearest(ps, PrimitiveKind::Cylinder, mid);
    return c && (c->position() - mid).norm() < 0.1;
  };
  int plain = 0, rotated = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto frame = render(tilted_cylinder_scene(60.0, prof.range_sigma, seed), CameraIntrinsics{});
    DetectorConfig cfg = prof.detector;
    cfg.transpose_pass = false;
    plain += found(detect_frame(frame, cfg).primitives);
    cfg.transpose_pass = true;
    rotated += found(detect_frame(frame, cfg).primitives);
  }
  pass = pass && plain == 0 && rotated == 20;
  d += str("cylinder 60 deg: ", plain, "/20 without transpose, ", rotated, "/20 with");
  return {pass, d};
}

// --- 7

Outcome occlusion(const Profile& prof) {
  const auto rows = run_occlusion(OcclusionOptions{}, prof);
  bool pass = true;
  std::string d;
  double last_r = 1e9;
  for (const auto& r : rows) {
    const int pct = static_cast<int>(std::lround(100 * r.fraction));
    if (pct >= 50) {
      pass = pass && r.detected == 0;
      d += str(pct, "%: ", r.detected, "/", r.frames, " detected; ");
    } else {
      pass = pass && r.detected == r.frames && r.radius.mean < last_r;
      last_r = r.radius.mean;
      d += str(pct, "%: R ", r.radius.mean, " (", r.detected, "/", r.frames, "); ");
    }
  }
  d.resize(d.size() - 2);
  return {pass, d};
}

// --- 8

Outcome kalman(const Profile& prof) {
  const auto rows = run_accuracy(AccuracyOptions{}, prof);
  bool pass = rows.size() == 3;
  std::string d;
  for (const auto& r : rows) {
    const bool ok = r.frames >= 50 && 5.0 * r.filtered.std <= r.measured.std &&
                    std::abs(r.filtered.mean - r.distance) <= 0.05 * r.distance &&
                    std::abs(r.measured.mean - r.distance) <= 0.05 * r.distance;
    pass = pass && ok;
    d += str("D_G ", r.distance, ": D_M ", r.measured.mean, " std ", r.measured.std, ", D_K ", r.filtered.mean,
             " std ", r.filtered.std, " (", r.frames, " frames); ");
  }
  d.resize(d.size() - 2);
  return {pass, d};
}

// --- 9

Outcome velocity(const Profile& prof) {
  const auto rows = run_velocity(VelocityOptions{}, prof);
  bool pass = rows.size() == 3;
  std::string d;
  for (const auto& r : rows) {
    if (r.speed < 1.0) {
      const double tol = r.speed < 0.5 ? 0.05 : 0.08;
      pass = pass && r.observations >= 60 && std::abs(r.filtered.mean - r.speed) <= tol;
    }
    d += str("V_G ", r.speed, ": V_K ", r.filtered.mean, ", V_M ", r.raw.mean, " (", r.observations, " obs)",
             r.speed >= 1.0 ? " report only" : "", "; ");
  }
  d.resize(d.size() - 2);
  return {pass, d};
}

// --- 10

Outcome ransac(const Profile& prof) {
  const int k = iteration_count(0.95, 0.3, 4);
  const auto rep = run_ransac_comparison(RansacOptions{}, prof);
  const bool pass = k == 369 && rep.ransac_degenerate * 10 > rep.trials && rep.incremental_degenerate == 0 &&
                    rep.incremental_us < rep.ransac_us;
  return {pass, str("k = ", k, "; wall-supported fits ransac ", rep.ransac_degenerate, "/", rep.trials,
                    ", incremental ", rep.incremental_degenerate, "/", rep.trials, "; ", rep.ransac_us, " us vs ",
                    rep.incremental_us, " us per slice")};
}

// --- 11

Outcome throughput(const Profile& prof) {
  const auto rep = run_bench(BenchOptions{}, prof);
  const auto* qvga = rep.find(320, 240);
  if (!qvga) return {false, "no 320x240 measurement"};
  const double fps = 1000.0 / qvga->ms_per_frame;
  std::string d = str(fps, " fps at 320x240, exponent ", rep.exponent, " (");
  for (const auto& s : rep.sizes) d += str(s.width, "x", s.height, " ", s.ms_per_frame, " ms ");
  d.back() = ')';
  return {fps >= 30.0 && rep.exponent <= 1.15, d};
}

// --- 12

Outcome property_suite() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> checks{
      {"partition", [] { return props::segments_partition(); }},
      {"residual bounds", [] { return props::segment_residuals(); }},
      {"incremental sums", [] { return props::incremental_sums(); }},
      {"offset invariance", [] { return props::offset_invariance(); }},
      {"transpose involution", [] { return props::transpose_involution(); }},
      {"chain paths", [] { return props::chain_paths(); }},
      {"PSD covariance", [] { return props::covariance_psd(); }},
  };
  for (const auto& [name, run] : checks) {
    const auto err = run();
    if (!err.empty()) return {false, name + ": " + err};
  }
  return {true, str(checks.size(), " invariants x 1000 cases")};
}

}  // namespace

int main() {
  const Profile prof = Profile::paper();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"incremental fit matches batch", incremental_equivalence},
      {"exact recovery of noise-free ellipses", exact_recovery},
      {"noise robustness", [&] { return noise_robustness(prof); }},
      {"pipeline classification", [&] { return classification(prof); }},
      {"sphere on cylinder separation", [&] { return separation(prof); }},
      {"tilt", [&] { return tilt(prof); }},
      {"occlusion trend and failure boundary", [&] { return occlusion(prof); }},
      {"kalman variance reduction", [&] { return kalman(prof); }},
      {"velocity", [&] { return velocity(prof); }},
      {"ransac comparison", [&] { return ransac(prof); }},
      {"throughput", [&] { return throughput(prof); }},
      {"property suite", property_suite},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
