#include "conicscan/frame_io.hpp"
#include "conicscan/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

using namespace conicscan;

namespace {

DepthFrame uniform(const CameraIntrinsics& k, double depth) {
  return DepthFrame(k, std::vector<double>(static_cast<size_t>(k.width) * k.height, depth));
}

CameraIntrinsics tiny(int w, int h) {
  CameraIntrinsics k;
  k.width = w;
  k.height = h;
  k.fx = k.fy = 10.0;
  k.cx = (w - 1) / 2.0;
  k.cy = (h - 1) / 2.0;
  return k;
}

std::string pgm_bytes(int w, int h, const std::vector<int>& mm) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (int v : mm) {
    s.push_back(static_cast<char>((v >> 8) & 0xff));
    s.push_back(static_cast<char>(v & 0xff));
  }
  return s;
}

}  // namespace

TEST(Intrinsics, DefaultsAreTheHalfResolutionKinectModel) {
  const CameraIntrinsics k;
  EXPECT_EQ(k.fx, 262.5);
  EXPECT_EQ(k.fy, 262.5);
  EXPECT_EQ(k.cx, 159.5);
  EXPECT_EQ(k.cy, 119.5);
  EXPECT_EQ(k.width, 320);
  EXPECT_EQ(k.height, 240);
  EXPECT_NO_THROW(k.validate());
}

TEST(Intrinsics, RejectsBadModels) {
  CameraIntrinsics k;
  k.fx = 0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.cx = 320;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.cy = -1;
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Intrinsics, ForResolutionKeepsTheFieldOfView) {
  const auto k = CameraIntrinsics::for_resolution(640, 480);
  EXPECT_DOUBLE_EQ(k.fx, 525.0);
  EXPECT_DOUBLE_EQ(k.cx, 319.5);
  EXPECT_EQ(k.height, 480);
}

TEST(Projection, PrincipalPixel) {
  const CameraIntrinsics k;
  DepthFrame f = uniform(k, 2.0);
  const int row = 50;
  const auto pts = project_row(f, row);
  ASSERT_EQ(pts.size(), 320u);
  // u = cx is between two pixels; check the formula on both neighbours
  for (const auto& p : pts) {
    EXPECT_NEAR(p.p3d.x(), (p.u - k.cx) * 2.0 / k.fx, 1e-15);
    EXPECT_NEAR(p.p3d.y(), (row - k.cy) * 2.0 / k.fy, 1e-15);
    EXPECT_EQ(p.p3d.z(), 2.0);
  }
}

TEST(Projection, CenterPixelOfOddFrame) {
  const auto k = tiny(5, 5);
  DepthFrame f = uniform(k, 2.0);
  const auto pts = project_row(f, 1);
  const auto& c = pts[2];
  EXPECT_EQ(c.u, 2);
  EXPECT_NEAR(c.x, 0.0, 1e-15);
  EXPECT_NEAR(c.p3d.x(), 0.0, 1e-15);
  EXPECT_NEAR(c.p3d.y(), (1 - k.cy) * 2.0 / k.fy, 1e-15);
  EXPECT_EQ(c.p3d.z(), 2.0);
  // the scan plane distance is the length of the in-plane part of the ray
  EXPECT_NEAR(c.d, std::hypot(c.p3d.y(), c.p3d.z()), 1e-12);
  EXPECT_NEAR(ScanPlane::for_row(k, 1).lift(c.x, c.d).x(), c.p3d.x(), 1e-12);
}

TEST(Projection, InvalidPixelsAreSkipped) {
  const auto k = tiny(6, 2);
  std::vector<double> d{1, 0, std::numeric_limits<double>::quiet_NaN(), -1, 2, 3, 0, 0, 0, 0, 0, 0};
  DepthFrame f(k, d);
  const auto r0 = project_row(f, 0);
  ASSERT_EQ(r0.size(), 3u);
  EXPECT_EQ(r0[0].u, 0);
  EXPECT_EQ(r0[1].u, 4);
  EXPECT_EQ(r0[2].u, 5);
  EXPECT_TRUE(project_row(f, 1).empty());
  EXPECT_EQ(f.valid_count(), 3u);
}

TEST(Projection, ReprojectsWithinHalfPixel) {
  const CameraIntrinsics k;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> depth(0.4, 6.0);
  std::vector<double> d(static_cast<size_t>(k.width) * k.height);
  for (auto& v : d) v = depth(rng);
  DepthFrame f(k, d);
  for (int row = 0; row < k.height; row += 7) {
    int last = -1;
    for (const auto& p : project_row(f, row)) {
      const Vec2 uv = reproject(k, p.p3d);
      EXPECT_NEAR(uv.x(), p.u, 0.5);
      EXPECT_NEAR(uv.y(), row, 0.5);
      EXPECT_GT(p.u, last);
      last = p.u;
    }
  }
}

TEST(Transpose, SmallGrid) {
  const auto k = tiny(3, 2);
  DepthFrame f(k, {1, 2, 3, 4, 5, 6});
  const auto t = transpose_frame(f);
  ASSERT_EQ(t.width(), 2);
  ASSERT_EQ(t.height(), 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(t.at(j, i), f.at(i, j));
  EXPECT_EQ(t.intrinsics().fx, k.fy);
  EXPECT_EQ(t.intrinsics().cx, k.cy);
}

TEST(Transpose, Involution) {
  const CameraIntrinsics k;
  std::vector<double> d(static_cast<size_t>(k.width) * k.height);
  for (size_t i = 0; i < d.size(); ++i) d[i] = 0.5 + (i % 97) * 0.01;
  DepthFrame f(k, d, 1.5);
  const auto back = transpose_frame(transpose_frame(f));
  EXPECT_EQ(back.depths(), f.depths());
  EXPECT_EQ(back.intrinsics(), f.intrinsics());
  EXPECT_EQ(back.timestamp(), 1.5);
}

TEST(Transpose, SwapsCameraXAndY) {
  const CameraIntrinsics k;
  DepthFrame f = uniform(k, 1.0);
  const auto t = transpose_frame(f);
  const auto a = project_row(f, 30)[200].p3d;   // pixel (u = 200, v = 30)
  const auto b = project_row(t, 200)[30].p3d;   // the same pixel in the rotated view
  EXPECT_NEAR(a.x(), b.y(), 1e-12);
  EXPECT_NEAR(a.y(), b.x(), 1e-12);
  EXPECT_NEAR(a.z(), b.z(), 1e-12);
}

TEST(FrameIo, UniformPgmIsOneMeter) {
  const CameraIntrinsics k;
  const auto f = parse_frame(pgm_bytes(320, 240, std::vector<int>(320 * 240, 1000)), k);
  for (double d : f.depths()) EXPECT_EQ(d, 1.0);
}

TEST(FrameIo, MillimetersToMeters) {
  const auto k = tiny(4, 4);
  std::vector<int> mm{1, 2, 3, 4, 250, 500, 750, 1000, 1234, 2000, 4095, 8191, 0, 65535, 10, 999};
  const auto f = parse_frame(pgm_bytes(4, 4, mm), k);
  for (int i = 0; i < 16; ++i) {
    if (mm[i] == 0)
      EXPECT_FALSE(f.valid(i / 4, i % 4));
    else
      EXPECT_EQ(f.depths()[i], mm[i] / 1000.0);
  }
}

TEST(FrameIo, CsvGrid) {
  const auto k = tiny(3, 2);
  const auto f = parse_frame("1000,2000,0\n1500, 2500 ,3000\n", k);
  EXPECT_EQ(f.at(0, 1), 2.0);
  EXPECT_FALSE(f.valid(0, 2));
  EXPECT_EQ(f.at(1, 1), 2.5);
}

TEST(FrameIo, Errors) {
  const auto k = tiny(4, 4);
  EXPECT_THROW(parse_frame(pgm_bytes(3, 4, std::vector<int>(12, 5)), k), std::invalid_argument);
  EXPECT_THROW(parse_frame(pgm_bytes(4, 4, std::vector<int>(16, 0)), k), std::invalid_argument);
  EXPECT_NO_THROW(parse_frame(pgm_bytes(4, 4, std::vector<int>(16, 0)), k, {true}));
  EXPECT_THROW(parse_frame("1,2,x\n", tiny(3, 1)), IoError);
  EXPECT_THROW(load_frame("/nonexistent/frame.pgm", k), IoError);
}

TEST(FrameIo, PgmRoundTrip) {
  const auto k = tiny(5, 3);
  DepthFrame f(k, {0.5, 1.0, 0, 2.25, 3.0, 1.111, 0.7, 0.8, 0.9, 1.0, 65.535, 0.001, 0.002, 0.003, 4.0});
  const auto path = std::filesystem::temp_directory_path() / "conicscan_roundtrip.pgm";
  save_pgm(f, path);
  const auto g = load_frame(path, k);
  for (size_t i = 0; i < f.depths().size(); ++i) {
    if (f.depths()[i] == 0)
      EXPECT_FALSE(DepthFrame::is_valid_depth(g.depths()[i]));
    else
      EXPECT_NEAR(g.depths()[i], f.depths()[i], 0.0005 + 1e-12);
  }
  std::filesystem::remove(path);
}

TEST(FrameIo, IntrinsicsSidecar) {
  const auto k = parse_intrinsics("# kinect\nfx = 500\nfy: 501\ncx 300.5\ncy=200\nwidth 640\nheight 480\n", {});
  EXPECT_EQ(k.fx, 500);
  EXPECT_EQ(k.fy, 501);
  EXPECT_EQ(k.cx, 300.5);
  EXPECT_EQ(k.cy, 200);
  EXPECT_EQ(k.width, 640);
  const auto partial = parse_intrinsics("fx 300\n", {});
  EXPECT_EQ(partial.fy, 262.5);
}
