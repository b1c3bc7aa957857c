#include "mvfusion/dataset_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "mvfusion/errors.hpp"

namespace mvfusion {

static_assert(std::endian::native == std::endian::little,
              "PLY bodies are written by memcpy on little-endian hosts");

namespace {

// libpng reports errors through longjmp; the guarded sections below hold only
// trivially destructible locals.
struct PngHandle {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  bool writing = false;
  char message[256] = {};

  ~PngHandle() {
    if (png) {
      if (writing)
        png_destroy_write_struct(&png, info ? &info : nullptr);
      else
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
    if (file) std::fclose(file);
  }
};

void png_fail(png_structp png, png_const_charp msg) {
  auto* h = static_cast<PngHandle*>(png_get_error_ptr(png));
  std::snprintf(h->message, sizeof h->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

bool png_read_header(PngHandle& h, png_uint_32& w, png_uint_32& hgt, int& depth, int& color) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_init_io(h.png, h.file);
  png_read_info(h.png, h.info);
  int interlace = 0;
  png_get_IHDR(h.png, h.info, &w, &hgt, &depth, &color, &interlace, nullptr, nullptr);
  return true;
}

bool png_read_body(PngHandle& h, png_bytepp rows) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_read_image(h.png, rows);
  png_read_end(h.png, nullptr);
  return true;
}

bool png_write_all(PngHandle& h, png_uint_32 w, png_uint_32 hgt, png_bytepp rows) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_init_io(h.png, h.file);
  png_set_IHDR(h.png, h.info, w, hgt, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);
  png_write_image(h.png, rows);
  png_write_end(h.png, nullptr);
  return true;
}

std::string strip_comment(std::string line) {
  if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  return line;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

SequenceManifest read_manifest(const fs::path& dir, double depth_scale) {
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  SequenceManifest m;
  m.directory = dir;
  m.depth_scale = depth_scale;
  const fs::path list = dir / "depth.txt";
  std::ifstream in(list);
  if (!in) throw LoadError("missing manifest " + list.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(strip_comment(line));
    double t = 0.0;
    std::string rel;
    if (!(ls >> t)) {
      if (ls.eof()) continue;
      throw LoadError(list.string() + ":" + std::to_string(lineno) + ": bad timestamp");
    }
    if (!(ls >> rel)) throw LoadError(list.string() + ":" + std::to_string(lineno) + ": missing path");
    if (!m.frames.empty() && !(t > m.frames.back().timestamp))
      throw LoadError(list.string() + ":" + std::to_string(lineno) +
                      ": timestamps must be strictly increasing");
    fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : dir / rel;
    if (!fs::exists(p)) throw LoadError("depth image not found: " + p.string());
    m.frames.push_back({t, p});
  }
  if (m.frames.empty()) throw LoadError("manifest " + list.string() + " lists no frames");

  const fs::path gt = dir / "groundtruth.txt";
  if (fs::exists(gt)) m.groundtruth = read_trajectory(gt);
  return m;
}

Image16 read_png16(const fs::path& path) {
  PngHandle h;
  h.file = std::fopen(path.c_str(), "rb");
  if (!h.file) throw LoadError("cannot open image " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, h.file) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw LoadError("not a PNG file: " + path.string());
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &h, png_fail, png_warn);
  if (!h.png) throw LoadError("libpng initialisation failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw LoadError("libpng initialisation failed");
  png_set_sig_bytes(h.png, 8);

  png_uint_32 w = 0, hgt = 0;
  int depth = 0, color = 0;
  if (!png_read_header(h, w, hgt, depth, color))
    throw LoadError("unreadable PNG " + path.string() + ": " + h.message);
  if (depth != 16 || color != PNG_COLOR_TYPE_GRAY)
    throw LoadError("expected a 16-bit single-channel PNG: " + path.string() + " has bit depth " +
                    std::to_string(depth) + ", color type " + std::to_string(color));

  std::vector<png_byte> raw(static_cast<std::size_t>(w) * hgt * 2);
  std::vector<png_bytep> rows(hgt);
  for (png_uint_32 y = 0; y < hgt; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * w * 2;
  if (!png_read_body(h, rows.data()))
    throw LoadError("unreadable PNG " + path.string() + ": " + h.message);

  Image16 img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(hgt);
  img.pixels.resize(static_cast<std::size_t>(w) * hgt);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)  // PNG samples are big-endian
    img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return img;
}

void write_png16(const fs::path& path, const Image16& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw std::invalid_argument("write_png16: bad image dimensions");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<png_byte> raw(image.pixels.size() * 2);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    raw[2 * i] = static_cast<png_byte>(image.pixels[i] >> 8);
    raw[2 * i + 1] = static_cast<png_byte>(image.pixels[i] & 0xff);
  }
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = raw.data() + static_cast<std::size_t>(y) * image.width * 2;

  PngHandle h;
  h.writing = true;
  h.file = std::fopen(path.c_str(), "wb");
  if (!h.file) throw Error("cannot open " + path.string() + " for writing");
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &h, png_fail, png_warn);
  if (!h.png) throw Error("libpng initialisation failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw Error("libpng initialisation failed");
  if (!png_write_all(h, image.width, image.height, rows.data()))
    throw Error("PNG write failed for " + path.string() + ": " + h.message);
  if (std::fflush(h.file) != 0) throw Error("write failed: " + path.string());
}

DepthFrame read_depth_png(const fs::path& path, double depth_scale) {
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  const Image16 img = read_png16(path);
  std::vector<double> d(img.pixels.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = img.pixels[i] / depth_scale;
  return {img.width, img.height, std::move(d)};
}

void write_depth_png(const fs::path& path, const DepthFrame& frame, double depth_scale) {
  if (!(depth_scale > 0.0)) throw std::invalid_argument("depth_scale must be positive");
  Image16 img;
  img.width = frame.width();
  img.height = frame.height();
  img.pixels.reserve(frame.data().size());
  for (double d : frame.data()) {
    const double units = std::round(d * depth_scale);
    if (units > 65535.0)
      throw std::invalid_argument("write_depth_png: depth " + std::to_string(d) +
                                  " m exceeds the 16-bit range at this scale");
    img.pixels.push_back(static_cast<std::uint16_t>(units));
  }
  write_png16(path, img);
}

std::optional<Pose> associate(const std::vector<TimedPose>& groundtruth, double timestamp,
                              double tolerance) {
  const TimedPose* best = nullptr;
  double best_dt = tolerance;
  for (const TimedPose& tp : groundtruth) {
    const double dt = std::abs(tp.timestamp - timestamp);
    if (dt <= best_dt) {
      if (best && dt == best_dt) continue;
      best = &tp;
      best_dt = dt;
    }
  }
  if (!best) return std::nullopt;
  return best->pose;
}

SequenceReader::SequenceReader(const fs::path& dir, double depth_scale)
    : manifest_(read_manifest(dir, depth_scale)) {}

LoadedFrame SequenceReader::next() {
  if (done()) throw std::out_of_range("SequenceReader: no more frames");
  const ManifestEntry& e = manifest_.frames[next_++];
  LoadedFrame f;
  f.timestamp = e.timestamp;
  f.depth = read_depth_png(e.path, manifest_.depth_scale);
  f.groundtruth = associate(manifest_.groundtruth, e.timestamp);
  return f;
}

std::vector<LoadedFrame> load_sequence(const fs::path& dir, double depth_scale) {
  SequenceReader reader(dir, depth_scale);
  std::vector<LoadedFrame> frames;
  frames.reserve(reader.size());
  while (!reader.done()) frames.push_back(reader.next());
  return frames;
}

void write_sequence(const fs::path& dir, const SyntheticSequence& sequence, double depth_scale,
                    double fps) {
  if (!(fps > 0.0)) throw std::invalid_argument("write_sequence: fps must be positive");
  fs::create_directories(dir / "depth");
  std::ofstream list = open_out(dir / "depth.txt");
  list << "# timestamp filename\n";
  std::vector<TimedPose> poses;
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "depth/%06zu.png", i);
    const double t = static_cast<double>(i) / fps;
    write_depth_png(dir / name, sequence.frames[i], depth_scale);
    list << std::fixed << std::setprecision(6) << t << ' ' << name << '\n';
    if (i < sequence.poses.size()) poses.push_back({t, sequence.poses[i]});
  }
  check_written(list, dir / "depth.txt");
  if (!poses.empty()) write_trajectory(dir / "groundtruth.txt", poses);
}

std::vector<TimedPose> read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open trajectory " + path.string());
  std::vector<TimedPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(strip_comment(line));
    double v[8];
    int n = 0;
    while (n < 8 && ls >> v[n]) ++n;
    if (n == 0 && ls.eof()) continue;
    std::string extra;
    if (n != 8 || (ls >> extra))
      throw LoadError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 'timestamp tx ty tz qx qy qz qw'");
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.0)) throw LoadError(path.string() + ":" + std::to_string(lineno) + ": zero quaternion");
    out.push_back({v[0], Pose(q.normalized().toRotationMatrix(), Vector3d(v[1], v[2], v[3]))});
  }
  return out;
}

void write_trajectory(const fs::path& path, const std::vector<TimedPose>& poses) {
  std::ofstream out = open_out(path);
  out << "# timestamp tx ty tz qx qy qz qw\n" << std::setprecision(17);
  for (const TimedPose& tp : poses) {
    const Eigen::Quaterniond q(tp.pose.rotation());
    const Vector3d& t = tp.pose.translation();
    out << tp.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' '
        << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
  check_written(out, path);
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyInputError("write_ply: refusing to write an empty cloud");
  if (cloud.normals.size() != cloud.vertices.size())
    throw std::invalid_argument("write_ply: vertex and normal counts differ");
  std::ofstream out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property float nx\nproperty float ny\nproperty float nz\nend_header\n";
  std::vector<float> body;
  body.reserve(cloud.size() * 6);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) body.push_back(static_cast<float>(cloud.vertices[i][a]));
    for (int a = 0; a < 3; ++a) body.push_back(static_cast<float>(cloud.normals[i][a]));
  }
  out.write(reinterpret_cast<const char*>(body.data()),
            static_cast<std::streamsize>(body.size() * sizeof(float)));
  check_written(out, path);
}

PointCloud read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") break;
    header.push_back(line);
    if (header.size() > 64) throw FormatError("ply: header too long");
  }
  if (!in) throw FormatError("ply: missing end_header");
  const std::vector<std::string> props{"x", "y", "z", "nx", "ny", "nz"};
  std::size_t count = 0;
  bool have_count = false;
  std::size_t prop = 0;
  if (header.empty() || header[0] != "ply") throw FormatError("ply: bad magic");
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::istringstream ls(header[i]);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian" || ver != "1.0")
        throw FormatError("ply: only binary_little_endian 1.0 is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || have_count) throw FormatError("ply: expected a single vertex element");
      have_count = true;
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (prop >= props.size() || type != "float" || name != props[prop])
        throw FormatError("ply: unexpected property '" + header[i] + "'");
      ++prop;
    } else if (word != "comment" && word != "obj_info") {
      throw FormatError("ply: unexpected header line '" + header[i] + "'");
    }
  }
  if (!have_count || prop != props.size()) throw FormatError("ply: incomplete header");

  std::vector<float> body(count * 6);
  in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != body.size() * sizeof(float))
    throw FormatError("ply: truncated body");
  PointCloud cloud;
  cloud.vertices.reserve(count);
  cloud.normals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float* f = body.data() + 6 * i;
    cloud.vertices.emplace_back(f[0], f[1], f[2]);
    cloud.normals.emplace_back(f[3], f[4], f[5]);
  }
  return cloud;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_stats_csv(const fs::path& path, const std::vector<StatsRow>& rows) {
  std::ofstream out = open_out(path);
  out << "config_hash,vertices,mean,median,std,spf,slope,r2\n";
  for (const StatsRow& r : rows) {
    out << r.config_hash << ',' << r.stats.vertex_count << ',' << format_number(r.stats.mean) << ','
        << format_number(r.stats.median) << ',' << format_number(r.stats.std) << ','
        << format_number(r.seconds_per_frame) << ',' << format_number(r.slope) << ','
        << format_number(r.r2) << '\n';
  }
  check_written(out, path);
}

void write_transfer_csv(const fs::path& path, const std::vector<TransferRow>& rows) {
  std::ofstream out = open_out(path);
  out << "frame,uploads,downloads,bytes,live_count,resident_count\n";
  for (const TransferRow& r : rows)
    out << r.frame << ',' << r.uploads << ',' << r.downloads << ',' << r.bytes << ',' << r.live_count
        << ',' << r.resident_count << '\n';
  check_written(out, path);
}

void write_bench_csv(const fs::path& path, const BenchResult& bench) {
  std::ofstream out = open_out(path);
  out << "volumes,seconds_per_frame\n";
  for (const BenchRow& r : bench.rows) out << r.volumes << ',' << format_number(r.seconds_per_frame) << '\n';
  check_written(out, path);
}

}  // namespace mvfusion
