#pragma once

// Randomized invariants shared by the unit tests and the acceptance run. Each
// check returns an empty string on success and a description of the first
// counterexample otherwise.

#include "conicscan/chain.hpp"
#include "conicscan/scanline.hpp"
#include "conicscan/tracking.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <string>

namespace props {

using namespace conicscan;

inline constexpr int kCases = 1000;

template <class... T>
std::string fail(int c, const T&... what) {
  std::ostringstream out;
  out << "case " << c << ": ";
  (out << ... << what);
  return out.str();
}

// A noisy scan: elliptic arcs joined by straight runs.
inline std::vector<Vec2> random_scan(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 0.002 + 0.01 * u(rng));
  std::vector<Vec2> pts;
  Vec2 at(-1.5, 2.0 + u(rng));
  while (static_cast<int>(pts.size()) < n) {
    const int len = 8 + static_cast<int>(u(rng) * 40);
    if (u(rng) < 0.5) {
      const double r = 0.05 + 0.4 * u(rng);
      const Vec2 c = at + Vec2(r, 0);
      for (int i = 0; i < len; ++i) {
        const double t = M_PI - M_PI * i / len;
        pts.push_back(c + Vec2(r * std::cos(t), -r * std::sin(t)) + Vec2(noise(rng), noise(rng)));
      }
      at = c + Vec2(r, 0);
    } else {
      const Vec2 d = Vec2(1.0, u(rng) - 0.5).normalized() * 0.01;
      for (int i = 0; i < len; ++i) {
        at += d;
        pts.push_back(at + Vec2(noise(rng), noise(rng)));
      }
    }
  }
  pts.resize(n);
  return pts;
}

// Segments are ordered, disjoint, large enough, and the work stays linear.
inline std::string segments_partition(int cases = kCases, std::uint64_t seed = 101) {
  std::mt19937_64 rng(seed);
  const SegmenterConfig cfg;
  for (int c = 0; c < cases; ++c) {
    const int n = 20 + static_cast<int>(rng() % 280);
    const auto pts = random_scan(rng, n);
    SegmenterStats st;
    const auto segs = segment_scan(pts, {}, cfg, &st);
    int prev = 0;
    for (const auto& g : segs) {
      if (g.begin < prev || g.begin >= g.end || g.end > n) return fail(c, "segment [", g.begin, ", ", g.end, ") out of order");
      if (g.support() < cfg.min_support) return fail(c, "segment of ", g.support(), " points");
      prev = g.end;
    }
    // each point is added once, plus once more when it starts a new segment
    if (st.points != n || st.adds > 2L * n || st.removes > n || st.fits > 2L * n)
      return fail(c, "work counters ", st.adds, '/', st.removes, '/', st.fits, " for ", n, " points");
  }
  return {};
}

// Every saved segment fits within the threshold, recomputed from scratch.
inline std::string segment_residuals(int cases = kCases, std::uint64_t seed = 202) {
  std::mt19937_64 rng(seed);
  const SegmenterConfig cfg;
  for (int c = 0; c < cases; ++c) {
    const auto pts = random_scan(rng, 150);
    for (const auto& g : segment_scan(pts, {}, cfg)) {
      if (g.residual > cfg.error_threshold) return fail(c, "residual ", g.residual);
      const std::span<const Vec2> run(pts.data() + g.begin, static_cast<size_t>(g.support()));
      ScatterAccumulator acc(run[0]);
      for (const auto& p : run) acc.add(p);
      const auto local = fit_local(acc);
      if (!local) return fail(c, "segment does not refit");
      const double r = rms_residual(acc, *local);
      if (r > cfg.error_threshold * (1 + 1e-6)) return fail(c, "refit residual ", r);
      if (!(g.ellipse.r_minor > 0.0) || g.ellipse.r_major < g.ellipse.r_minor) return fail(c, "bad semi-axes");
    }
  }
  return {};
}

// Running sums after random add/remove sequences equal sums from scratch.
inline std::string incremental_sums(int cases = kCases, std::uint64_t seed = 303) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int c = 0; c < cases; ++c) {
    const Vec2 origin(5 * u(rng), 5 * u(rng));
    ScatterAccumulator acc(origin);
    std::vector<Vec2> live;
    const int ops = 1 + static_cast<int>(rng() % 200);
    for (int i = 0; i < ops; ++i) {
      if (!live.empty() && u(rng) < -0.4) {
        const size_t k = rng() % live.size();
        acc.remove(live[k]);
        live.erase(live.begin() + static_cast<long>(k));
      } else {
        live.emplace_back(origin.x() + 3 * u(rng), origin.y() + 3 * u(rng));
        acc.add(live.back());
      }
    }
    const auto got = oracle::as_vector(acc.sums());
    const auto want = oracle::as_vector(oracle::power_sums(live, origin));
    double scale = 1.0;
    for (double w : want) scale = std::max(scale, std::abs(w));
    for (size_t k = 0; k < got.size(); ++k)
      if (std::abs(got[k] - want[k]) > 1e-12 * scale) return fail(c, "sum ", k, ": ", got[k], " vs ", want[k]);
  }
  return {};
}

// Translating the points translates the fitted ellipse.
inline std::string offset_invariance(int cases = kCases, std::uint64_t seed = 404) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  int compared = 0;
  for (int c = 0; c < cases; ++c) {
    const double ra = 1 + 50 * u(rng), rb = ra * (0.1 + 0.9 * u(rng));
    auto pts = oracle::ellipse_points(0, 0, ra, rb, M_PI * u(rng), 30, 2 * M_PI * u(rng), M_PI * (0.5 + u(rng)));
    std::normal_distribution<double> n(0, 0.01 * rb);
    for (auto& p : pts) p += Vec2(n(rng), n(rng));
    const Vec2 off(1000 * (u(rng) - 0.5), 1000 * (u(rng) - 0.5));
    std::vector<Vec2> moved;
    for (const auto& p : pts) moved.push_back(p + off);
    const auto a = fit_points(pts), b = fit_points(moved);
    if (a.has_value() != b.has_value()) return fail(c, "fit exists for one copy only");
    if (!a) continue;
    const auto ga = to_geometric(*a), gb = to_geometric(*b);
    if (ga.has_value() != gb.has_value()) return fail(c, "ellipse for one copy only");
    if (!ga) continue;
    ++compared;
    const double tol = 1e-6 * ra;
    if (std::abs(gb->cx - ga->cx - off.x()) > tol || std::abs(gb->cy - ga->cy - off.y()) > tol ||
        std::abs(gb->r_major - ga->r_major) > tol || std::abs(gb->r_minor - ga->r_minor) > tol)
      return fail(c, "moved fit differs");
  }
  if (compared < cases * 9 / 10) return fail(cases, "only ", compared, " cases produced an ellipse");
  return {};
}

inline std::string transpose_involution(int cases = kCases, std::uint64_t seed = 505) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.5, 5.0);
  for (int c = 0; c < cases; ++c) {
    CameraIntrinsics k;
    k.width = 1 + static_cast<int>(rng() % 40);
    k.height = 1 + static_cast<int>(rng() % 40);
    k.fx = 20 + static_cast<double>(rng() % 100);
    k.fy = k.fx + static_cast<double>(rng() % 10);
    k.cx = 0.5 * k.width;
    k.cy = 0.5 * k.height;
    std::vector<double> depths(static_cast<size_t>(k.width) * k.height);
    for (auto& v : depths) v = d(rng);
    const DepthFrame f(k, depths, 0.25);
    const DepthFrame t = transpose_frame(f);
    if (t.width() != f.height() || !(t.intrinsics() == k.transposed())) return fail(c, "transposed shape");
    const DepthFrame back = transpose_frame(t);
    if (back.depths() != f.depths() || !(back.intrinsics() == k) || back.timestamp() != f.timestamp())
      return fail(c, "transposing twice changed the frame");
  }
  return {};
}

// Chains are row-increasing paths of linked ellipses, and no ellipse is shared.
inline std::string chain_paths(int cases = kCases, std::uint64_t seed = 606) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  const ChainConfig cfg;
  for (int c = 0; c < cases; ++c) {
    std::vector<Ellipse> es;
    const int rows = 5 + static_cast<int>(rng() % 40);
    for (int r = 0; r < rows; ++r) {
      const int per = static_cast<int>(rng() % 4);
      for (int j = 0; j < per; ++j) {
        Ellipse e;
        e.row = r;
        e.first_column = j * 50;
        e.center = Vec3(0.15 * j + 0.05 * u(rng), 0.01 * r, 2);
        e.r1 = e.r2 = 0.1;
        es.push_back(e);
      }
    }
    std::vector<std::pair<int, int>> seen;
    for (const auto& ch : build_components(es, cfg)) {
      if (static_cast<int>(ch.size()) < cfg.min_chain) return fail(c, "short chain");
      for (size_t i = 0; i < ch.size(); ++i) {
        seen.emplace_back(ch.ellipses[i].row, ch.ellipses[i].first_column);
        if (i == 0) continue;
        const auto& a = ch.ellipses[i - 1];
        const auto& b = ch.ellipses[i];
        if (b.row <= a.row || b.row - a.row > cfg.k_neighbors || (b.center - a.center).norm() > cfg.phi)
          return fail(c, "bad link at row ", b.row);
      }
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) return fail(c, "ellipse in two chains");
  }
  return {};
}

inline std::string covariance_psd(int cases = kCases, std::uint64_t seed = 707) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> n(0, 1);
  for (int c = 0; c < cases; ++c) {
    KalmanConfig cfg;
    cfg.process_noise = std::pow(10.0, -6 + 6 * u(rng));
    cfg.measurement_sigma = std::pow(10.0, -4 + 2 * u(rng));
    TrackState s = start_track({Vec3(n(rng), n(rng), 1 + 3 * u(rng)), 0.1 + u(rng)}, PrimitiveKind::Cone, 1, 0.0, cfg);
    for (int i = 0; i < 30; ++i) {
      s = predict(s, 0.001 + 0.2 * u(rng), cfg);
      if (!is_psd(s.P)) return fail(c, "P not PSD after predict ", i);
      if (u(rng) < 0.8) {
        const Measurement m{s.position() + 0.01 * Vec3(n(rng), n(rng), n(rng)), std::abs(s.radius() + 0.01 * n(rng))};
        s = update(s, m, cfg);
        if (!is_psd(s.P)) return fail(c, "P not PSD after update ", i);
        if (!(s.radius() > 0.0)) return fail(c, "radius ", s.radius());
      }
    }
  }
  return {};
}

}  // namespace props
