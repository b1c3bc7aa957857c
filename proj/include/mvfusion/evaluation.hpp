#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvfusion/geometry.hpp"
#include "mvfusion/pipeline.hpp"
#include "mvfusion/synth.hpp"
#include "mvfusion/tsdf.hpp"

namespace mvfusion {

struct ErrorStats {
  std::size_t vertex_count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
};

/// Aggregates of a list of non-negative distances. Throws EmptyInputError.
ErrorStats summarize(std::vector<double> distances);

/// Per-vertex distance is the distance to the nearest primitive surface.
ErrorStats cloud_to_surface_stats(const PointCloud& cloud, const Scene& scene);

/// Error of a raw frame: every valid pixel unprojected and moved to world.
ErrorStats frame_to_surface_stats(const DepthFrame& frame, const Pose& pose,
                                  const CameraIntrinsics& intr, const Scene& scene);

/// |a| / |b|. Throws EmptyInputError when b is empty.
double resolution_ratio(const PointCloud& a, const PointCloud& b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct BenchRow {
  int volumes = 0;
  double seconds_per_frame = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  LinearFit fit;
};

struct BenchOptions {
  int resolution = 64;     // voxels per side of each volume
  double side = 0.8;       // meters per volume
  Vector3d center{0.0, 0.0, 0.8};  // every volume covers the same cube around this point
  double tau_multiplier = 4.0;
};

/// Times the per-frame volume loop with `count` identical, co-located volumes so
/// every volume carries the same workload, using the sequence's poses. The
/// first frame is excluded.
BenchResult runtime_bench(const SyntheticSequence& sequence, std::span<const int> volume_counts,
                          const BenchOptions& options = {});

struct EquivalenceReport {
  double max_raymap_diff = 0.0;   // meters, over pixels valid in both
  double max_tsdf_diff = 0.0;     // meters, over voxels shared by two or more tiles
  double max_voxel_diff = 0.0;    // meters, tiled vs single over every tiled voxel
  std::size_t validity_mismatches = 0;  // pixels valid in one raymap only
  std::size_t weight_mismatches = 0;    // voxels whose weights differ
  std::size_t compared_pixels = 0;
  std::size_t overlap_voxels = 0;
  int frames = 0;
};

/// Runs the single-volume grid (r_gpu = r) and the tiled grid on the same
/// frames with the trajectory's poses injected, and compares raymaps and voxels.
EquivalenceReport equivalence_check(const Scene& scene, const Trajectory& trajectory,
                                    const CameraIntrinsics& intr, double l, int r, int r_gpu,
                                    double tau_multiplier = 4.0);

}  // namespace mvfusion
