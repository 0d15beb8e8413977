#include "conicscan/experiments.hpp"
#include "conicscan/frame_io.hpp"
#include "conicscan/parallel.hpp"
#include "conicscan/pipeline.hpp"
#include "conicscan/records.hpp"
#include "conicscan/scene_io.hpp"
#include "conicscan/synth.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace conicscan;

namespace {

constexpr int kUsage = 1;
constexpr int kIo = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand that runs the detector.
struct DetectorFlags {
  std::string profile = "paper";
  std::string intrinsics;
  std::optional<double> threshold, phi, elongation_min, radius_min, radius_max;
  std::optional<int> k_neighbors;
  bool transpose = false;
  bool no_refine = false;

  void add_to(CLI::App* app) {
    app->add_option("--profile", profile, "settings preset: paper, responsive")->check(CLI::IsMember({"paper", "responsive"}));
    app->add_option("--intrinsics", intrinsics, "camera intrinsics file (fx, fy, cx, cy, width, height)");
    app->add_option("--threshold", threshold, "segmenter RMS error threshold, meters (default 0.01)");
    app->add_option("--phi", phi, "largest center distance of linked ellipses, meters (default 0.10)");
    app->add_option("--k-neighbors", k_neighbors, "rows looked ahead when linking (default 3)");
    app->add_option("--elongation-min", elongation_min, "smallest minor/major ratio kept (default 0.2)");
    app->add_option("--radius-min", radius_min, "smallest accepted radius, meters (default 0.03)");
    app->add_option("--radius-max", radius_max, "largest accepted radius, meters (default 1.0)");
    app->add_flag("--transpose", transpose, "also detect on the rotated view (objects tilted past 45 degrees)");
    app->add_flag("--no-refine", no_refine, "skip the 3D surface fit");
  }

  Profile make() const {
    Profile p = Profile::named(profile);
    auto& d = p.detector;
    if (threshold) d.segmenter.error_threshold = *threshold;
    if (phi) d.chain.phi = *phi;
    if (k_neighbors) d.chain.k_neighbors = *k_neighbors;
    if (elongation_min) d.segmenter.elongation_min = *elongation_min;
    if (radius_min) d.segmenter.radius_min = d.classifier.radius_min = *radius_min;
    if (radius_max) d.segmenter.radius_max = d.classifier.radius_max = *radius_max;
    d.transpose_pass = transpose;
    d.refine = !no_refine;
    try {
      d.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return p;
  }

  CameraIntrinsics camera(int width = 0, int height = 0) const {
    CameraIntrinsics k = width > 0 ? CameraIntrinsics::for_resolution(width, height) : CameraIntrinsics{};
    if (!intrinsics.empty()) k = load_intrinsics(intrinsics, k);
    k.validate();
    return k;
  }
};

// A scene given by file or by built-in name.
struct SceneFlags {
  std::string scene;
  NamedSceneParams params;
  bool have_sigma = false;

  void add_to(CLI::App* app) {
    app->add_option("--scene", scene, "scene JSON file or built-in scene name");
    app->add_option("--sigma", params.sigma, "range noise of built-in scenes, meters")->default_val(0.005);
    app->add_option("--seed", params.seed, "noise seed")->default_val(1);
    app->add_option("--tilt", params.tilt_deg, "tilt of parking_cone / tilted_cylinder, degrees");
    app->add_option("--distance", params.distance, "distance of the cylinder scenes, meters");
    app->add_option("--fraction", params.fraction, "hidden share of occluded_cylinder");
    app->add_option("--speed", params.speed, "speed of moving_cylinder, m/s");
  }

  SceneSpec make() const {
    const bool looks_like_path = scene.find('/') != std::string::npos || scene.ends_with(".json");
    if (looks_like_path || std::filesystem::exists(scene)) return load_scene(scene);
    try {
      return named_scene(scene, params);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string(e.what()) + " (neither a file nor one of the built-in scenes)");
    }
  }
};

void emit(const DetectionRecord& rec, const std::string& format, bool& header_done) {
  if (format == "csv") {
    if (!header_done) std::cout << csv_header() << '\n';
    header_done = true;
    std::cout << to_csv_rows(rec);
  } else {
    std::cout << to_json_line(rec) << '\n';
  }
  std::cout.flush();
}

int run_detect(const DetectorFlags& df, const SceneFlags& sf, const std::vector<std::string>& inputs, int frames,
               double fps, const std::string& format) {
  const Profile profile = df.make();
  bool header = false;
  if (!inputs.empty()) {
    const CameraIntrinsics k = df.camera();
    long id = 0;
    for (const auto& path : inputs) {
      LoadOptions lo;
      lo.allow_all_invalid = true;
      const DepthFrame frame = load_frame(path, k, lo);
      const auto res = detect_frame(frame, profile.detector);
      emit(DetectionRecord::from(id, frame.timestamp(), res), format, header);
      ++id;
    }
    return 0;
  }
  if (sf.scene.empty()) throw UsageError("detect needs input frames or --scene");
  const SceneSpec scene = sf.make();
  const CameraIntrinsics k = df.camera();
  for (int f = 0; f < frames; ++f) {
    const double t = f / fps;
    const auto res = detect_frame(render(scene, k, t), profile.detector);
    emit(DetectionRecord::from(f, t, res), format, header);
  }
  return 0;
}

int run_experiment(const std::string& name, const DetectorFlags& df, std::uint64_t seed, int trials) {
  const Profile profile = df.make();
  if (name == "noise") {
    NoiseOptions o;
    o.seed = seed;
    if (trials > 0) o.trials = trials;
    std::cout << noise_table(run_noise(o, profile)).to_csv();
  } else if (name == "accuracy") {
    AccuracyOptions o;
    o.seed = seed;
    if (trials > 0) o.frames = trials;
    std::cout << accuracy_table(run_accuracy(o, profile)).to_csv();
  } else if (name == "occlusion") {
    OcclusionOptions o;
    o.seed = seed;
    if (trials > 0) o.frames = trials;
    const auto rows = run_occlusion(o, profile);
    std::cout << occlusion_table(rows).to_csv();
    for (const auto& r : rows)
      if (r.detected == 0) std::cerr << "occlusion " << 100.0 * r.fraction << "%: detection failed\n";
  } else if (name == "velocity") {
    VelocityOptions o;
    o.seed = seed;
    std::cout << velocity_table(run_velocity(o, profile)).to_csv();
  } else if (name == "ransac") {
    RansacOptions o;
    o.seed = seed;
    if (trials > 0) o.trials = trials;
    const auto rep = run_ransac_comparison(o, profile);
    std::cout << ransac_table(rep).to_csv();
    std::fprintf(stderr,
                 "k = %d (n = 4 as printed: %d)\nwall-supported fits: ransac %d/%d, incremental %d/%d\n"
                 "mean time per slice: ransac %.1f us, incremental %.1f us, ratio %.1f\n",
                 rep.iterations, iteration_count(profile.ransac.confidence, profile.ransac.inlier_ratio, 4),
                 rep.ransac_degenerate, rep.trials, rep.incremental_degenerate, rep.trials, rep.ransac_us,
                 rep.incremental_us, rep.speedup());
  } else {
    throw UsageError("unknown experiment '" + name + "' (noise, accuracy, occlusion, velocity, ransac)");
  }
  return 0;
}

int run_bench_cmd(const DetectorFlags& df, int frames, bool serial, const std::string& format) {
  const Profile profile = df.make();
  BenchOptions o;
  o.frames = frames;
  o.exec = serial ? Execution::Serial : Execution::Parallel;
  const auto rep = run_bench(o, profile);
  if (format == "csv") {
    std::cout << bench_table(rep).to_csv();
  } else {
    std::printf("workers %d%s\n", serial ? 1 : worker_count(), openmp_enabled() ? "" : " (built without OpenMP)");
    for (const auto& s : rep.sizes)
      std::printf("%4dx%-4d %8.2f ms/frame %7.1f fps  extract %.0f  prefilter %.0f  chain %.0f  classify %.0f us  (%zu primitives)\n",
                  s.width, s.height, s.ms_per_frame, 1000.0 / s.ms_per_frame, s.stages.extract_us,
                  s.stages.prefilter_us, s.stages.chain_us, s.stages.classify_us, s.primitives);
    std::printf("scaling exponent (time vs pixels) %.3f\n", rep.exponent);
  }
  return 0;
}

int run_gen(const DetectorFlags& df, const SceneFlags& sf, const std::string& out, const std::string& scene_out,
            int frames, double fps, int width, int height) {
  if (sf.scene.empty()) throw UsageError("gen needs --scene");
  const SceneSpec scene = sf.make();
  if (!scene_out.empty()) save_scene(scene, scene_out);
  if (out.empty()) return 0;
  const CameraIntrinsics k = df.camera(width, height);
  if (frames == 1) {
    save_pgm(render(scene, k, 0.0), out);
    return 0;
  }
  const std::filesystem::path base(out);
  for (int f = 0; f < frames; ++f) {
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%04d", f);
    auto path = base.parent_path() / (base.stem().string() + suffix + base.extension().string());
    save_pgm(render(scene, k, f / fps), path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conicscan: cylinders, cones and spheres in depth images, one scan line at a time"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string format = "jsonl";
  auto add_format = [&format](CLI::App* sub) {
    sub->add_option("--format", format, "output format")->check(CLI::IsMember({"jsonl", "csv"}));
  };

  DetectorFlags df;
  SceneFlags sf;

  auto* detect = app.add_subcommand("detect", "detect primitives in depth frames (PGM/CSV, millimeters) or a rendered scene");
  std::vector<std::string> inputs;
  int frames = 1;
  double fps = 30.0;
  detect->add_option("inputs", inputs, "depth frames, processed in order");
  df.add_to(detect);
  sf.add_to(detect);
  detect->add_option("--frames", frames, "frames to render from --scene")->check(CLI::PositiveNumber);
  detect->add_option("--fps", fps, "frame rate of rendered scenes")->check(CLI::PositiveNumber);
  add_format(detect);

  auto* experiment = app.add_subcommand("experiment", "regenerate an experiment table as CSV");
  std::string name;
  std::uint64_t seed = 1;
  int trials = 0;
  experiment->add_option("name", name, "noise, accuracy, occlusion, velocity or ransac")->required();
  experiment->add_option("--seed", seed, "base seed")->default_val(1);
  experiment->add_option("--trials", trials, "trials (noise, ransac) or frames (accuracy, occlusion); 0 keeps the default");
  df.add_to(experiment);

  auto* bench = app.add_subcommand("bench", "frames per second of the detector at 160x120, 320x240 and 640x480");
  int bench_frames = 30;
  bool serial = false;
  bench->add_option("--frames", bench_frames, "frames per resolution")->check(CLI::PositiveNumber);
  bench->add_flag("--serial", serial, "use the serial reference kernels");
  df.add_to(bench);
  std::string bench_format = "text";
  bench->add_option("--format", bench_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

  auto* gen = app.add_subcommand("gen", "render a scene to 16-bit PGM");
  std::string out, scene_out;
  int width = 0, height = 0;
  gen->add_option("-o,--out", out, "output PGM; with --frames > 1 numbered files next to it");
  gen->add_option("--save-scene", scene_out, "also write the scene as JSON");
  gen->add_option("--frames", frames, "frames to render")->check(CLI::PositiveNumber);
  gen->add_option("--fps", fps, "frame rate")->check(CLI::PositiveNumber);
  gen->add_option("--width", width, "image width (scales the default intrinsics)");
  gen->add_option("--height", height, "image height");
  df.add_to(gen);
  sf.add_to(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*detect) return run_detect(df, sf, inputs, frames, fps, format);
    if (*experiment) return run_experiment(name, df, seed, trials);
    if (*bench) return run_bench_cmd(df, bench_frames, serial, bench_format);
    if (*gen) {
      if ((width > 0) != (height > 0)) throw UsageError("--width and --height go together");
      return run_gen(df, sf, out, scene_out, frames, fps, width, height);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    // malformed frame or scene content
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
