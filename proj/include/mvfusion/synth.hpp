#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvfusion/geometry.hpp"

namespace mvfusion {

struct Sphere {
  Vector3d center = Vector3d::Zero();
  double radius = 1.0;
};

struct Plane {
  Vector3d point = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();  // normalised on construction by Scene
};

/// Axis-aligned box.
struct Box {
  Vector3d min = Vector3d::Zero();
  Vector3d max = Vector3d::Ones();
};

using Primitive = std::variant<Sphere, Plane, Box>;

double signed_distance(const Primitive& prim, const Vector3d& p);
/// Smallest ray parameter s > 0 with origin + s * dir on the surface.
std::optional<double> intersect(const Primitive& prim, const Vector3d& origin, const Vector3d& dir);

/// A union of analytic primitives.
class Scene {
 public:
  Scene() = default;

  Scene& add(const Primitive& prim);
  const std::vector<Primitive>& primitives() const { return primitives_; }
  bool empty() const { return primitives_.empty(); }

  /// min over primitives.
  double signed_distance(const Vector3d& p) const;
  /// Distance to the closest primitive surface, min_i |sdf_i(p)|.
  double surface_distance(const Vector3d& p) const;
  std::optional<double> intersect(const Vector3d& origin, const Vector3d& dir) const;

  /// One primitive per line: "sphere cx cy cz r", "plane px py pz nx ny nz",
  /// "box x0 y0 z0 x1 y1 z1". Blank lines and '#' comments are ignored.
  static Scene parse(std::string_view text);
  static Scene load(const std::string& path);
  std::string to_text() const;

  /// Named presets: "sphere", "corridor", "room", "empty".
  static Scene preset(std::string_view name);

 private:
  std::vector<Primitive> primitives_;
};

struct NoiseModel {
  double sigma0 = 0.0;  // meters
  double sigma1 = 0.0;  // sigma(d) = sigma0 + sigma1 * d^2
  double dropout = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exact z-depth of the nearest surface per pixel; 0 where nothing is hit or
/// the depth exceeds max_depth.
DepthFrame render_depth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr,
                        double max_depth = std::numeric_limits<double>::infinity());

/// Gaussian depth noise plus per-pixel dropout; deterministic for a given seed.
DepthFrame add_noise(const DepthFrame& frame, const NoiseModel& model);

using Trajectory = std::vector<Pose>;

/// Camera pose at `eye` looking at `target`, with image y along world +y
/// projected off the view direction.
Pose look_at(const Vector3d& eye, const Vector3d& target);

/// Poses on a horizontal circle around `center`, all looking at it. Frame 0
/// sits at center - radius * z.
Trajectory orbit_trajectory(const Vector3d& center, double radius, int frames);

/// Pure forward translation along +z from the origin, identity rotation.
Trajectory corridor_trajectory(double length, int frames);

struct SyntheticSequence {
  CameraIntrinsics intrinsics;
  std::vector<DepthFrame> frames;
  Trajectory poses;
};

/// Renders every pose; noise (if any) uses seed + frame index per frame.
SyntheticSequence render_sequence(const Scene& scene, const Trajectory& trajectory,
                                  const CameraIntrinsics& intr,
                                  const std::optional<NoiseModel>& noise = std::nullopt,
                                  double max_depth = std::numeric_limits<double>::infinity());

}  // namespace mvfusion
