#pragma once

#include "conicscan/geometry.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace conicscan {

/// Raised for unreadable or malformed input files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadOptions {
  /// When false, a frame without a single valid pixel is rejected.
  bool allow_all_invalid = false;
};

/// Load a depth frame. Binary 16-bit PGM (P5) and CSV grids are accepted, both
/// holding millimeters with 0 marking an invalid pixel. The format is chosen by
/// content: files starting with "P5" are PGM, everything else is CSV.
///
/// Throws IoError when the file cannot be read or parsed, and
/// std::invalid_argument when the grid does not match `intrinsics` or is
/// entirely invalid (unless allowed).
DepthFrame load_frame(const std::filesystem::path& path, const CameraIntrinsics& intrinsics,
                      const LoadOptions& options = {});

/// Parse a PGM/CSV payload already in memory.
DepthFrame parse_frame(const std::string& bytes, const CameraIntrinsics& intrinsics,
                       const LoadOptions& options = {});

/// Write a frame as 16-bit PGM, depths rounded to whole millimeters.
void save_pgm(const DepthFrame& frame, const std::filesystem::path& path);
std::string encode_pgm(const DepthFrame& frame);

/// Write a frame as CSV of millimeter values.
void save_csv(const DepthFrame& frame, const std::filesystem::path& path);

/// Read intrinsics from a key-value sidecar (`fx`, `fy`, `cx`, `cy`, and
/// optionally `width`, `height`). Lines look like `fx = 262.5`, `fx: 262.5` or
/// `fx 262.5`; `#` starts a comment. Missing keys keep the values of `base`.
CameraIntrinsics load_intrinsics(const std::filesystem::path& path, CameraIntrinsics base);
CameraIntrinsics parse_intrinsics(const std::string& text, CameraIntrinsics base);

}  // namespace conicscan
