#include "conicscan/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace conicscan {
namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

// The burn-in, shortened for series too short to afford it.
size_t burn_for(int burn_in, size_t n) { return std::min(static_cast<size_t>(burn_in), n / 2); }

const Primitive* nearest(const std::vector<Primitive>& prims, PrimitiveKind kind, const Vec3& target, double reach) {
  const Primitive* best = nullptr;
  double best_d = reach;
  for (const auto& p : prims) {
    if (p.kind() != kind) continue;
    const double d = (p.position() - target).norm();
    if (d <= best_d) {
      best = &p;
      best_d = d;
    }
  }
  return best;
}

// Distance of the cylinder's reference point from the can axis, in the
// horizontal plane.
double off_axis(const Primitive& p, const Vec3& axis_point) {
  const Vec3 d = p.position() - axis_point;
  return std::hypot(d.x(), d.z());
}

struct Observation {
  double t = 0.0;
  Measurement m;
};

// Filtered states after each observation of a single object.
std::vector<TrackState> filter_series(const std::vector<Observation>& obs, const KalmanConfig& cfg) {
  std::vector<TrackState> out;
  if (obs.empty()) return out;
  TrackState s = start_track(obs[0].m, PrimitiveKind::Cylinder, 1, obs[0].t, cfg);
  out.push_back(s);
  for (size_t i = 1; i < obs.size(); ++i) {
    s = update(predict(s, obs[i].t - s.time, cfg), obs[i].m, cfg);
    out.push_back(s);
  }
  return out;
}

std::string cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

SegmenterConfig slice_segmenter_config() {
  SegmenterConfig c;
  c.error_threshold = 3.0;
  c.radius_min = 5.0;
  c.radius_max = 200.0;
  return c;
}

Profile Profile::paper() { return Profile{}; }

Profile Profile::responsive() {
  Profile p;
  p.kalman = KalmanConfig{};
  return p;
}

Profile Profile::named(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "responsive") return responsive();
  throw std::invalid_argument("unknown profile '" + name + "'");
}

Stats Stats::of(const std::vector<double>& v) {
  Stats s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) {
    s.mean = s.std = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / s.n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / s.n);
  return s;
}

std::string Table::to_csv() const {
  std::ostringstream out;
  bool first = true;
  if (!label_column.empty()) {
    out << label_column;
    first = false;
  }
  for (const auto& c : columns) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << '\n';
  for (size_t r = 0; r < rows.size(); ++r) {
    first = true;
    if (!label_column.empty()) {
      out << labels.at(r);
      first = false;
    }
    for (double v : rows[r]) {
      out << (first ? "" : ",") << cell(v);
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<NoiseRow> run_noise(const NoiseOptions& opt, const Profile& profile) {
  std::vector<NoiseRow> out;
  for (double sigma : opt.sigmas) {
    NoiseRow row;
    row.sigma = sigma;
    std::vector<double> majors, minors;
    for (int i = 0; i < opt.trials; ++i) {
      EllipseSampleSpec spec;
      spec.r_major = opt.r_major;
      spec.r_minor = opt.r_minor;
      spec.arc_deg = opt.arc_deg;
      spec.count = opt.count;
      spec.sigma = sigma;
      spec.seed = opt.seed + static_cast<std::uint64_t>(i);
      const auto pts = sample_ellipse_2d(spec);
      // a bare point set: no sensor at the origin to measure range jumps from
      SegmenterConfig seg = profile.slice;
      seg.jump_ratio = 0.0;
      const auto segs = segment_scan(pts, {}, seg);
      ++row.trials;
      const FittedSegment* best = nullptr;
      for (const auto& g : segs)
        if (!best || g.support() > best->support()) best = &g;
      if (!best || 2 * best->support() < opt.count) continue;
      const auto& e = best->ellipse;
      const bool hit = std::hypot(e.cx - spec.center.x(), e.cy - spec.center.y()) < 5.0 &&
                       std::abs(e.r_major - opt.r_major) < 0.2 * opt.r_major &&
                       std::abs(e.r_minor - opt.r_minor) < 0.3 * opt.r_minor;
      if (!hit) continue;
      ++row.detected;
      majors.push_back(e.r_major);
      minors.push_back(e.r_minor);
    }
    row.r_major = Stats::of(majors);
    row.r_minor = Stats::of(minors);
    out.push_back(row);
  }
  return out;
}

Table noise_table(const std::vector<NoiseRow>& rows) {
  Table t;
  t.columns = {"sigma", "trials", "detected", "r_major", "r_major_std", "r_minor", "r_minor_std"};
  for (const auto& r : rows)
    t.rows.push_back({r.sigma, double(r.trials), double(r.detected), r.r_major.mean, r.r_major.std, r.r_minor.mean,
                      r.r_minor.std});
  return t;
}

std::vector<AccuracyRow> run_accuracy(const AccuracyOptions& opt, const Profile& profile) {
  std::vector<AccuracyRow> out;
  const CameraIntrinsics k;
  for (double d : opt.distances) {
    const SceneSpec scene = cylinder_at(d, profile.range_sigma, opt.seed);
    const Vec3 axis_point(0.0, 0.0, d);
    std::vector<Observation> obs;
    for (int f = 0; f < opt.frames; ++f) {
      const double t = f * profile.frame_dt;
      const auto res = detect_frame(render(scene, k, t), profile.detector);
      const Primitive* p = nearest(res.primitives, PrimitiveKind::Cylinder, axis_point, 0.5);
      if (p && off_axis(*p, axis_point) < 0.2) obs.push_back({t, Measurement::of(*p)});
    }
    const auto states = filter_series(obs, profile.kalman);
    const size_t skip = burn_for(profile.burn_in, obs.size());
    std::vector<double> dm, dk, rm, rk;
    for (size_t i = skip; i < obs.size(); ++i) {
      dm.push_back(obs[i].m.position.norm());
      rm.push_back(obs[i].m.radius);
      dk.push_back(states[i].distance());
      rk.push_back(states[i].radius());
    }
    AccuracyRow row;
    row.distance = d;
    row.measured = Stats::of(dm);
    row.filtered = Stats::of(dk);
    row.radius = Stats::of(rm);
    row.radius_filtered = Stats::of(rk);
    row.frames = opt.frames;
    out.push_back(row);
  }
  return out;
}

Table accuracy_table(const std::vector<AccuracyRow>& rows) {
  Table t;
  t.columns = {"D_G", "D_M", "D_sigma", "D_K", "D_Ksigma", "R_M", "R_sigma", "R_K", "R_Ksigma", "N"};
  for (const auto& r : rows)
    t.rows.push_back({r.distance, r.measured.mean, r.measured.std, r.filtered.mean, r.filtered.std, r.radius.mean,
                      r.radius.std, r.radius_filtered.mean, r.radius_filtered.std, double(r.measured.n)});
  return t;
}

std::vector<OcclusionRow> run_occlusion(const OcclusionOptions& opt, const Profile& profile) {
  std::vector<OcclusionRow> out;
  const CameraIntrinsics k;
  const Vec3 axis_point(0.0, 0.0, opt.distance);
  for (double f : opt.fractions) {
    const SceneSpec scene = occluded_cylinder_scene(f, opt.distance, profile.range_sigma, opt.seed);
    OcclusionRow row;
    row.fraction = f;
    std::vector<Observation> obs;
    std::vector<double> fit;
    for (int i = 0; i < opt.frames; ++i) {
      const double t = i * profile.frame_dt;
      const auto res = detect_frame(render(scene, k, t), profile.detector);
      ++row.frames;
      const Primitive* p = nearest(res.primitives, PrimitiveKind::Cylinder, axis_point, 0.5);
      if (!p || off_axis(*p, axis_point) > opt.radius) continue;
      ++row.detected;
      obs.push_back({t, {p->position(), p->zr_radius}});
      fit.push_back(p->radius());
    }
    const auto states = filter_series(obs, profile.kalman);
    const size_t skip = burn_for(profile.burn_in, obs.size());
    std::vector<double> r, rk;
    for (size_t i = 0; i < obs.size(); ++i) {
      r.push_back(obs[i].m.radius);
      if (i >= skip) rk.push_back(states[i].radius());
    }
    row.radius = Stats::of(r);
    row.radius_filtered = Stats::of(rk);
    row.radius_fit = Stats::of(fit);
    out.push_back(row);
  }
  return out;
}

Table occlusion_table(const std::vector<OcclusionRow>& rows) {
  Table t;
  t.columns = {"O_pct", "frames", "detected", "R", "R_sigma", "R_K", "R_Ksigma", "R_fit"};
  for (const auto& r : rows)
    t.rows.push_back({100.0 * r.fraction, double(r.frames), double(r.detected), r.radius.mean, r.radius.std,
                      r.radius_filtered.mean, r.radius_filtered.std, r.radius_fit.mean});
  return t;
}

std::vector<VelocityRow> run_velocity(const VelocityOptions& opt, const Profile& profile) {
  if (opt.speeds.size() != opt.observations.size())
    throw std::invalid_argument("velocity: one observation count per speed");
  std::vector<VelocityRow> out;
  const CameraIntrinsics k;
  for (size_t s = 0; s < opt.speeds.size(); ++s) {
    const double v = opt.speeds[s];
    const SceneSpec scene = moving_cylinder_scene(v, opt.start_distance, profile.range_sigma, opt.seed);
    std::vector<Observation> obs;
    for (int f = 0; f < opt.observations[s]; ++f) {
      const double t = f * profile.frame_dt;
      const Vec3 axis_point(0.0, 0.0, opt.start_distance + v * t);
      const auto res = detect_frame(render(scene, k, t), profile.detector);
      const Primitive* p = nearest(res.primitives, PrimitiveKind::Cylinder, axis_point, 0.5);
      if (p && off_axis(*p, axis_point) < 0.2) obs.push_back({t, Measurement::of(*p)});
    }
    const auto states = filter_series(obs, profile.kalman);
    const size_t skip = std::max<size_t>(1, burn_for(profile.burn_in, obs.size()));
    std::vector<double> raw, filt;
    for (size_t i = skip; i < states.size(); ++i) {
      const auto e = estimate_velocity(states[i]);
      if (!e) continue;
      raw.push_back(e->raw);
      filt.push_back(e->filtered);
    }
    VelocityRow row;
    row.speed = v;
    row.raw = Stats::of(raw);
    row.filtered = Stats::of(filt);
    row.observations = static_cast<int>(obs.size());
    out.push_back(row);
  }
  return out;
}

Table velocity_table(const std::vector<VelocityRow>& rows) {
  Table t;
  t.columns = {"V_G", "V_M", "V_sigma", "V_K", "V_Ksigma", "N"};
  for (const auto& r : rows)
    t.rows.push_back({r.speed, r.raw.mean, r.raw.std, r.filtered.mean, r.filtered.std, double(r.observations)});
  return t;
}

RansacReport run_ransac_comparison(const RansacOptions& opt, const Profile& profile) {
  RansacReport rep;
  rep.iterations = profile.ransac.iterations();
  rep.trials = opt.trials;
  double ransac_total = 0.0, incremental_total = 0.0;
  for (int i = 0; i < opt.trials; ++i) {
    SliceSceneSpec spec = opt.slice;
    spec.seed = opt.seed + static_cast<std::uint64_t>(i);
    const auto scan = render_slice(spec);
    std::vector<Vec2> pts;
    for (const auto& s : scan) pts.push_back(s.p);
    auto wall_share = [&](auto begin, auto end) {
      int wall = 0, n = 0;
      for (auto it = begin; it != end; ++it, ++n)
        if (!scan[static_cast<size_t>(*it)].on_object) ++wall;
      return n ? double(wall) / n : 0.0;
    };

    RansacTrial r;
    r.method = "ransac";
    r.trial = i;
    auto t0 = Clock::now();
    const auto fit = ransac_ellipse(pts, profile.ransac, spec.seed);
    r.time_us = micros_since(t0);
    if (fit) {
      r.found = true;
      r.ellipse = fit->ellipse;
      r.support = static_cast<int>(fit->inliers.size());
      r.degenerate = wall_share(fit->inliers.begin(), fit->inliers.end()) > 0.5;
    }
    ransac_total += r.time_us;
    rep.ransac_degenerate += r.degenerate;
    rep.runs.push_back(r);

    RansacTrial g;
    g.method = "incremental";
    g.trial = i;
    t0 = Clock::now();
    const auto segs = segment_scan(pts, {}, profile.slice);
    g.time_us = micros_since(t0);
    for (const auto& s : segs) {
      const auto& e = s.ellipse;
      const bool accepted = e.r_minor >= profile.slice.radius_min && e.r_minor <= profile.slice.radius_max &&
                            e.r_minor >= profile.slice.elongation_min * e.r_major;
      if (!accepted) continue;
      std::vector<int> idx(static_cast<size_t>(s.support()));
      for (int k = 0; k < s.support(); ++k) idx[k] = s.begin + k;
      if (wall_share(idx.begin(), idx.end()) > 0.5) {
        g.degenerate = true;
      } else if (!g.found || s.support() > g.support) {
        g.found = true;
        g.ellipse = e;
        g.support = s.support();
      }
    }
    incremental_total += g.time_us;
    rep.incremental_degenerate += g.degenerate;
    rep.incremental_found += g.found;
    rep.runs.push_back(g);
  }
  if (opt.trials > 0) {
    rep.ransac_us = ransac_total / opt.trials;
    rep.incremental_us = incremental_total / opt.trials;
  }
  return rep;
}

Table ransac_table(const RansacReport& rep) {
  Table t;
  t.label_column = "method";
  t.columns = {"trial", "time_us", "found", "cx", "cy", "r_major", "r_minor", "theta", "support", "degenerate"};
  for (const auto& r : rep.runs) {
    t.labels.push_back(r.method);
    const auto& e = r.ellipse;
    t.rows.push_back({double(r.trial), r.time_us, double(r.found), r.found ? e.cx : kNaN, r.found ? e.cy : kNaN,
                      r.found ? e.r_major : kNaN, r.found ? e.r_minor : kNaN, r.found ? e.theta : kNaN,
                      double(r.support), double(r.degenerate)});
  }
  return t;
}

const BenchSize* BenchReport::find(int width, int height) const {
  for (const auto& s : sizes)
    if (s.width == width && s.height == height) return &s;
  return nullptr;
}

BenchReport run_bench(const BenchOptions& opt, const Profile& profile) {
  BenchReport rep;
  const SceneSpec scene = three_object_scene(profile.range_sigma, opt.seed);
  std::vector<double> pixels, times;
  for (const auto& [w, h] : opt.sizes) {
    const auto k = CameraIntrinsics::for_resolution(w, h);
    std::vector<DepthFrame> frames;
    for (int f = 0; f < opt.frames; ++f) frames.push_back(render(scene, k, f * profile.frame_dt));
    for (int f = 0; f < opt.warmup && !frames.empty(); ++f) detect_frame(frames[0], profile.detector, opt.exec);

    BenchSize bs;
    bs.width = w;
    bs.height = h;
    double total = 0.0;
    for (size_t f = 0; f < frames.size(); ++f) {
      const auto t0 = Clock::now();
      const auto res = detect_frame(frames[f], profile.detector, opt.exec);
      total += micros_since(t0);
      bs.stages.extract_us += res.timings.extract_us;
      bs.stages.prefilter_us += res.timings.prefilter_us;
      bs.stages.chain_us += res.timings.chain_us;
      bs.stages.classify_us += res.timings.classify_us;
      bs.stages.total_us += res.timings.total_us;
      if (f == 0) bs.primitives = res.primitives.size();
    }
    const double n = std::max<size_t>(frames.size(), 1);
    bs.ms_per_frame = total / n / 1000.0;
    bs.stages.extract_us /= n;
    bs.stages.prefilter_us /= n;
    bs.stages.chain_us /= n;
    bs.stages.classify_us /= n;
    bs.stages.total_us /= n;
    rep.sizes.push_back(bs);
    pixels.push_back(double(w) * h);
    times.push_back(bs.ms_per_frame);
  }
  if (pixels.size() >= 2) rep.exponent = loglog_slope(pixels, times);
  return rep;
}

Table bench_table(const BenchReport& rep) {
  Table t;
  t.columns = {"width", "height", "ms_per_frame", "fps", "extract_us", "prefilter_us", "chain_us", "classify_us",
               "primitives"};
  for (const auto& s : rep.sizes)
    t.rows.push_back({double(s.width), double(s.height), s.ms_per_frame, 1000.0 / s.ms_per_frame,
                      s.stages.extract_us, s.stages.prefilter_us, s.stages.chain_us, s.stages.classify_us,
                      double(s.primitives)});
  return t;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more pairs");
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("loglog_slope: x values must differ");
  return sxy / sxx;
}

}  // namespace conicscan
