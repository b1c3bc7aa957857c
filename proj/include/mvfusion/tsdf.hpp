#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mvfusion/geometry.hpp"

namespace mvfusion {

using Index3 = Eigen::Matrix<std::int64_t, 3, 1>;

struct FusionParams {
  double truncation = 0.04;   // tau, meters
  float max_weight = 128.0f;
  float sample_weight = 1.0f;

  void validate() const;

  /// tau = multiplier * voxel_size.
  static FusionParams for_voxel_size(double voxel_size, double tau_multiplier = 4.0,
                                     float max_weight = 128.0f, float sample_weight = 1.0f);
};

/// Ray marching step sizes. Coarse steps are a fraction of tau and are taken
/// while |tsdf| > coarse_threshold * tau or the field is unobserved; fine steps
/// are multiples of the voxel size.
struct RaycastParams {
  double coarse_step = 0.5;       // x tau
  double fine_step = 1.0;         // x voxel_size
  double coarse_threshold = 0.5;  // x tau
  double refine_tolerance = 1e-10;  // meters, bisection bracket width
};

struct Voxel {
  float tsdf = 0.0f;
  float weight = 0.0f;
};
static_assert(sizeof(Voxel) == 8);

/// One cubic TSDF block. Voxel (i, j, k) sits at world position
/// voxel_size * ((i, j, k) + translation). Storage is x-fastest, then y, then z.
class TsdfSubvolume {
 public:
  TsdfSubvolume() = default;
  TsdfSubvolume(const Index3& translation, int resolution, double voxel_size);

  const Index3& translation() const { return translation_; }
  int resolution() const { return resolution_; }
  double voxel_size() const { return voxel_size_; }
  double side_length() const { return voxel_size_ * resolution_; }
  std::size_t voxel_count() const { return voxels_.size(); }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(resolution_) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(resolution_) * z);
  }
  Voxel& at(int x, int y, int z) { return voxels_[index(x, y, z)]; }
  const Voxel& at(int x, int y, int z) const { return voxels_[index(x, y, z)]; }

  std::span<Voxel> voxels() { return voxels_; }
  std::span<const Voxel> voxels() const { return voxels_; }
  std::vector<Voxel>& storage() { return voxels_; }

  Vector3d world_position(int x, int y, int z) const;
  /// World-space box spanned by voxel centers; the trilinear sampling domain.
  Eigen::AlignedBox3d sample_bounds() const;
  /// Continuous local voxel coordinate of a world point.
  Vector3d to_local(const Vector3d& world) const;

  void reset();

 private:
  Index3 translation_ = Index3::Zero();
  int resolution_ = 0;
  double voxel_size_ = 0.0;
  std::vector<Voxel> voxels_;
};

/// Raycast output for one frame. Distances are measured from the camera
/// center; +inf marks pixels without a hit.
struct RayMap {
  int width = 0;
  int height = 0;
  std::vector<Vector3d> vertices;
  std::vector<Vector3d> normals;
  std::vector<double> distance;

  RayMap() = default;
  RayMap(int w, int h);

  void reset();
  bool valid(std::size_t i) const { return std::isfinite(distance[i]); }
  std::size_t valid_count() const;
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  /// Writes a hit if it is closer than the stored one. Equal distances are
  /// resolved by comparing vertex then normal, so the result does not depend
  /// on the order in which hits are offered.
  void offer(std::size_t i, double dist, const Vector3d& vertex, const Vector3d& normal);

  /// Global-frame view as a vertex/normal map.
  VertexNormalMap to_vertex_normal_map() const;
};

struct PointCloud {
  std::vector<Vector3d> vertices;
  std::vector<Vector3d> normals;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  void append(const PointCloud& other);
};

/// Fuses one depth frame into the subvolume.
void integrate(TsdfSubvolume& subvol, const DepthFrame& frame, const Pose& pose,
               const CameraIntrinsics& intr, const FusionParams& params);

/// Trilinear TSDF value at continuous local coordinate q. nullopt when q is
/// outside [0, r-1]^3 or any of the 8 neighbours is unobserved.
std::optional<double> trilinear_sample(const TsdfSubvolume& subvol, const Vector3d& q);

/// Gradient of the trilinear interpolant at q (per voxel unit).
std::optional<Vector3d> trilinear_gradient(const TsdfSubvolume& subvol, const Vector3d& q);

/// Marches every pixel ray through this subvolume's box and merges the first
/// positive-to-negative crossing into `raymap` by minimum distance.
void raycast(const TsdfSubvolume& subvol, const Pose& pose, const CameraIntrinsics& intr,
             RayMap& raymap, const FusionParams& params, const RaycastParams& ray = {});

/// One vertex per voxel that has a sign change toward an observed +x, +y or +z
/// neighbour, placed at the nearest of those crossings.
PointCloud extract_points(const TsdfSubvolume& subvol);

}  // namespace mvfusion
