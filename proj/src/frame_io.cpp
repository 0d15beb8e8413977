#include "conicscan/frame_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace conicscan {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// PGM header tokens are separated by whitespace; '#' comments run to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& s) : s_(s) {}

  long next_int() {
    skip();
    size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw IoError("pgm: malformed header");
    return std::stol(s_.substr(start, pos_ - start));
  }
  // exactly one whitespace byte separates the header from the raster
  size_t raster_offset() const { return pos_ + 1; }
  void seek(size_t p) { pos_ = p; }

 private:
  void skip() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  const std::string& s_;
  size_t pos_ = 0;
};

std::vector<double> decode_pgm(const std::string& bytes, int& width, int& height) {
  HeaderReader header(bytes);
  header.seek(2);
  width = static_cast<int>(header.next_int());
  height = static_cast<int>(header.next_int());
  const long maxval = header.next_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    throw IoError("pgm: invalid dimensions or maxval");
  const size_t offset = header.raster_offset();
  const size_t bpp = maxval > 255 ? 2 : 1;
  const size_t n = static_cast<size_t>(width) * height;
  if (bytes.size() < offset + n * bpp) throw IoError("pgm: truncated raster");

  std::vector<double> depths(n);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  for (size_t i = 0; i < n; ++i) {
    unsigned mm = bpp == 2 ? (unsigned{raster[2 * i]} << 8) | raster[2 * i + 1] : raster[i];
    depths[i] = mm / 1000.0;
  }
  return depths;
}

std::vector<double> decode_csv(const std::string& text, int& width, int& height) {
  std::vector<double> depths;
  std::istringstream in(text);
  std::string line;
  width = -1;
  height = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    int cols = 0;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      if (first == std::string::npos) throw IoError("csv: empty cell in row " + std::to_string(height));
      cell = cell.substr(first, last - first + 1);
      double mm = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), mm);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw IoError("csv: bad value '" + cell + "' in row " + std::to_string(height));
      depths.push_back(mm / 1000.0);
      ++cols;
    }
    if (width >= 0 && cols != width) throw IoError("csv: ragged row " + std::to_string(height));
    width = cols;
    ++height;
  }
  if (height == 0 || width <= 0) throw IoError("csv: no data");
  return depths;
}

}  // namespace

DepthFrame parse_frame(const std::string& bytes, const CameraIntrinsics& intrinsics,
                       const LoadOptions& options) {
  int width = 0;
  int height = 0;
  std::vector<double> depths = bytes.rfind("P5", 0) == 0 ? decode_pgm(bytes, width, height)
                                                         : decode_csv(bytes, width, height);
  if (width != intrinsics.width || height != intrinsics.height)
    throw std::invalid_argument("frame is " + std::to_string(width) + "x" + std::to_string(height) +
                                ", intrinsics expect " + std::to_string(intrinsics.width) + "x" +
                                std::to_string(intrinsics.height));
  DepthFrame frame(intrinsics, std::move(depths));
  if (!options.allow_all_invalid && frame.valid_count() == 0)
    throw std::invalid_argument("frame has no valid pixels");
  return frame;
}

DepthFrame load_frame(const std::filesystem::path& path, const CameraIntrinsics& intrinsics,
                      const LoadOptions& options) {
  return parse_frame(read_file(path), intrinsics, options);
}

std::string encode_pgm(const DepthFrame& frame) {
  std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
                    "\n65535\n";
  out.reserve(out.size() + frame.depths().size() * 2);
  for (double d : frame.depths()) {
    long mm = DepthFrame::is_valid_depth(d) ? std::lround(d * 1000.0) : 0;
    mm = std::clamp(mm, 0L, 65535L);
    out.push_back(static_cast<char>((mm >> 8) & 0xff));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  return out;
}

void save_pgm(const DepthFrame& frame, const std::filesystem::path& path) {
  write_file(path, encode_pgm(frame));
}

void save_csv(const DepthFrame& frame, const std::filesystem::path& path) {
  std::ostringstream out;
  for (int r = 0; r < frame.height(); ++r) {
    for (int c = 0; c < frame.width(); ++c) {
      const double d = frame.at(r, c);
      if (c) out << ',';
      out << (DepthFrame::is_valid_depth(d) ? std::lround(d * 1000.0) : 0);
    }
    out << '\n';
  }
  write_file(path, out.str());
}

CameraIntrinsics parse_intrinsics(const std::string& text, CameraIntrinsics base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::replace(line.begin(), line.end(), ':', ' ');
    std::istringstream fields(line);
    std::string key;
    double value = 0.0;
    if (!(fields >> key)) continue;
    if (!(fields >> value)) throw IoError("intrinsics: missing value on line " + std::to_string(lineno));
    if (key == "fx") base.fx = value;
    else if (key == "fy") base.fy = value;
    else if (key == "cx") base.cx = value;
    else if (key == "cy") base.cy = value;
    else if (key == "width") base.width = static_cast<int>(value);
    else if (key == "height") base.height = static_cast<int>(value);
    else throw IoError("intrinsics: unknown key '" + key + "'");
  }
  base.validate();
  return base;
}

CameraIntrinsics load_intrinsics(const std::filesystem::path& path, CameraIntrinsics base) {
  return parse_intrinsics(read_file(path), base);
}

}  // namespace conicscan
