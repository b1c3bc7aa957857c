#include "mvfusion/evaluation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mvfusion/errors.hpp"

namespace mvfusion {

ErrorStats summarize(std::vector<double> d) {
  if (d.empty()) throw EmptyInputError("error statistics of an empty set");
  ErrorStats s;
  s.vertex_count = d.size();
  const double n = static_cast<double>(d.size());
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  std::sort(d.begin(), d.end());
  const std::size_t mid = d.size() / 2;
  s.median = d.size() % 2 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
  return s;
}

ErrorStats cloud_to_surface_stats(const PointCloud& cloud, const Scene& scene) {
  if (cloud.empty()) throw EmptyInputError("cloud_to_surface_stats: empty cloud");
  if (scene.empty()) throw std::invalid_argument("cloud_to_surface_stats: empty scene");
  std::vector<double> d;
  d.reserve(cloud.size());
  for (const Vector3d& v : cloud.vertices) d.push_back(scene.surface_distance(v));
  return summarize(std::move(d));
}

ErrorStats frame_to_surface_stats(const DepthFrame& frame, const Pose& pose,
                                  const CameraIntrinsics& intr, const Scene& scene) {
  std::vector<double> d;
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x)
      if (auto p = unproject(intr, x, y, frame.at(x, y)))
        d.push_back(scene.surface_distance(pose.apply(*p)));
  if (d.empty()) throw EmptyInputError("frame_to_surface_stats: frame has no valid pixels");
  return summarize(std::move(d));
}

double resolution_ratio(const PointCloud& a, const PointCloud& b) {
  if (b.empty()) throw EmptyInputError("resolution_ratio: empty divisor cloud");
  return static_cast<double>(a.size()) / static_cast<double>(b.size());
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

BenchResult runtime_bench(const SyntheticSequence& sequence, std::span<const int> volume_counts,
                          const BenchOptions& options) {
  if (sequence.frames.size() < 2) throw std::invalid_argument("runtime_bench: need at least two frames");
  if (sequence.poses.size() != sequence.frames.size())
    throw std::invalid_argument("runtime_bench: one pose per frame required");
  if (options.resolution < 2 || !(options.side > 0.0))
    throw std::invalid_argument("runtime_bench: bad volume size");

  const double vs = options.side / options.resolution;
  const std::int64_t res = options.resolution;
  // Minimum-corner voxel of a cube centered on options.center.
  const Index3 origin(std::llround(options.center.x() / vs) - res / 2, std::llround(options.center.y() / vs) - res / 2,
                      std::llround(options.center.z() / vs) - res / 2);

  BenchResult result;
  std::vector<double> xs, ys;
  for (int count : volume_counts) {
    if (count < 1) throw std::invalid_argument("runtime_bench: volume counts must be positive");
    PipelineOptions po;
    po.intrinsics = sequence.intrinsics;
    po.mode = LayoutMode::explicit_list;
    po.track = false;
    po.tau_multiplier = options.tau_multiplier;
    for (int k = 0; k < count; ++k) {
      VolumeParams p;
      // Translations must be distinct; a one-voxel shift keeps the workload equal.
      p.translation = origin + Index3(k, 0, 0);
      p.resolution = options.resolution;
      p.voxel_size = vs;
      po.volumes.emplace_back(LatticeKey{k, 0, 0}, p);
    }
    FusionPipeline pipe(std::move(po));

    double seconds = 0.0;
    for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      pipe.process(sequence.frames[i], sequence.poses[i]);
      const auto t1 = std::chrono::steady_clock::now();
      if (i > 0) seconds += std::chrono::duration<double>(t1 - t0).count();
    }
    const double spf = seconds / static_cast<double>(sequence.frames.size() - 1);
    result.rows.push_back({count, spf});
    xs.push_back(count);
    ys.push_back(spf);
  }
  if (xs.size() >= 2) result.fit = fit_line(xs, ys);
  return result;
}

namespace {

PipelineOptions grid_options(const CameraIntrinsics& intr, double l, int r, int r_gpu,
                             double tau_multiplier) {
  PipelineOptions o;
  o.intrinsics = intr;
  o.mode = LayoutMode::static_grid;
  o.l = l;
  o.r = r;
  o.r_gpu = r_gpu;
  o.track = false;
  o.tau_multiplier = tau_multiplier;
  return o;
}

}  // namespace

EquivalenceReport equivalence_check(const Scene& scene, const Trajectory& trajectory,
                                    const CameraIntrinsics& intr, double l, int r, int r_gpu,
                                    double tau_multiplier) {
  if (r_gpu <= 0 || r % r_gpu != 0)
    throw std::invalid_argument("equivalence_check: r must be a multiple of r_gpu");
  FusionPipeline single(grid_options(intr, l, r, r, tau_multiplier));
  FusionPipeline tiled(grid_options(intr, l, r, r_gpu, tau_multiplier));

  EquivalenceReport rep;
  for (const Pose& pose : trajectory) {
    const DepthFrame frame = render_depth(scene, pose, intr);
    single.process(frame, pose);
    tiled.process(frame, pose);
    const RayMap& a = single.raymap();
    const RayMap& b = tiled.raymap();
    for (std::size_t i = 0; i < a.distance.size(); ++i) {
      if (a.valid(i) != b.valid(i)) {
        ++rep.validity_mismatches;
      } else if (a.valid(i)) {
        ++rep.compared_pixels;
        rep.max_raymap_diff = std::max(rep.max_raymap_diff, std::abs(a.distance[i] - b.distance[i]));
      }
    }
    ++rep.frames;
  }

  const LatticeKey only = single.volumes().keys().front();
  const TsdfSubvolume ref = single.volumes().snapshot(only);
  const int per_axis = r / r_gpu;
  for (const LatticeKey& key : tiled.volumes().keys()) {
    const TsdfSubvolume tile = tiled.volumes().snapshot(key);
    const Index3 offset = tile.translation() - ref.translation();
    const int tr = tile.resolution();
    const std::array<int, 3> tile_index{key.x, key.y, key.z};
    auto shared = [&](int axis, int i) {
      return (i >= r_gpu && tile_index[axis] < per_axis - 1) || (i < 2 && tile_index[axis] > 0);
    };
    for (int z = 0; z < tr; ++z) {
      for (int y = 0; y < tr; ++y) {
        for (int x = 0; x < tr; ++x) {
          const Voxel& v = tile.at(x, y, z);
          const Voxel& w = ref.at(static_cast<int>(x + offset.x()), static_cast<int>(y + offset.y()),
                                  static_cast<int>(z + offset.z()));
          const double diff = std::abs(static_cast<double>(v.tsdf) - w.tsdf);
          if (v.weight != w.weight) ++rep.weight_mismatches;
          rep.max_voxel_diff = std::max(rep.max_voxel_diff, diff);
          if (shared(0, x) || shared(1, y) || shared(2, z)) {
            ++rep.overlap_voxels;
            rep.max_tsdf_diff = std::max(rep.max_tsdf_diff, diff);
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace mvfusion
