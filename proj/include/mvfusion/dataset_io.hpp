#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvfusion/evaluation.hpp"
#include "mvfusion/geometry.hpp"
#include "mvfusion/synth.hpp"
#include "mvfusion/tsdf.hpp"

namespace mvfusion {

namespace fs = std::filesystem;

inline constexpr double kDefaultDepthScale = 5000.0;
inline constexpr double kAssociationTolerance = 0.02;  // seconds

struct TimedPose {
  double timestamp = 0.0;
  Pose pose;
};

struct ManifestEntry {
  double timestamp = 0.0;
  fs::path path;  // absolute or relative to the sequence directory
};

struct SequenceManifest {
  fs::path directory;
  std::vector<ManifestEntry> frames;
  std::vector<TimedPose> groundtruth;  // empty when groundtruth.txt is absent
  double depth_scale = kDefaultDepthScale;
};

/// Reads depth.txt (and groundtruth.txt if present). Throws LoadError for a
/// missing manifest, malformed lines, non-increasing timestamps or missing images.
SequenceManifest read_manifest(const fs::path& dir, double depth_scale = kDefaultDepthScale);

struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;
};

/// Single-channel 16-bit PNG. Anything else is a LoadError.
Image16 read_png16(const fs::path& path);
void write_png16(const fs::path& path, const Image16& image);

DepthFrame read_depth_png(const fs::path& path, double depth_scale = kDefaultDepthScale);
/// Depths are rounded to the nearest unit; values beyond the 16-bit range throw.
void write_depth_png(const fs::path& path, const DepthFrame& frame,
                     double depth_scale = kDefaultDepthScale);

struct LoadedFrame {
  double timestamp = 0.0;
  DepthFrame depth;
  std::optional<Pose> groundtruth;
};

/// Nearest ground-truth pose within `tolerance` seconds, if any.
std::optional<Pose> associate(const std::vector<TimedPose>& groundtruth, double timestamp,
                              double tolerance = kAssociationTolerance);

/// Streams frames in manifest order.
class SequenceReader {
 public:
  explicit SequenceReader(const fs::path& dir, double depth_scale = kDefaultDepthScale);

  const SequenceManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.frames.size(); }
  bool done() const { return next_ >= manifest_.frames.size(); }
  LoadedFrame next();

 private:
  SequenceManifest manifest_;
  std::size_t next_ = 0;
};

std::vector<LoadedFrame> load_sequence(const fs::path& dir, double depth_scale = kDefaultDepthScale);

/// Writes depth/NNNNNN.png, depth.txt and groundtruth.txt. Frame i gets
/// timestamp i / fps.
void write_sequence(const fs::path& dir, const SyntheticSequence& sequence,
                    double depth_scale = kDefaultDepthScale, double fps = 30.0);

/// "timestamp tx ty tz qx qy qz qw" per line; '#' lines are comments.
std::vector<TimedPose> read_trajectory(const fs::path& path);
void write_trajectory(const fs::path& path, const std::vector<TimedPose>& poses);

/// Binary little-endian PLY with float x y z nx ny nz per vertex.
/// Throws EmptyInputError for an empty cloud.
void write_ply(const fs::path& path, const PointCloud& cloud);
/// Reads files produced by write_ply. Throws FormatError otherwise.
PointCloud read_ply(const fs::path& path);

struct StatsRow {
  std::string config_hash;
  ErrorStats stats;
  double seconds_per_frame = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

/// Header plus one line per row; numbers with 6 significant digits.
void write_stats_csv(const fs::path& path, const std::vector<StatsRow>& rows);

struct TransferRow {
  int frame = 0;
  std::uint64_t uploads = 0;
  std::uint64_t downloads = 0;
  std::uint64_t bytes = 0;  // uploaded + downloaded
  std::size_t live_count = 0;
  std::size_t resident_count = 0;
};

void write_transfer_csv(const fs::path& path, const std::vector<TransferRow>& rows);

/// "volumes,seconds_per_frame" plus one line per configuration.
void write_bench_csv(const fs::path& path, const BenchResult& bench);

/// %.6g without locale dependence.
std::string format_number(double v);

/// 16 hex digits of FNV-1a over `text`.
std::string fnv1a_hex(const std::string& text);

}  // namespace mvfusion
