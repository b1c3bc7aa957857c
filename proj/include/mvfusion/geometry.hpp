#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mvfusion {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

/// Pinhole camera model. Pixel (x, y) has x along the image width.
struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;

  /// Intrinsics for an image downsampled by 2^level with 2x2 block averaging.
  CameraIntrinsics pyramid_level(int level) const;

  /// Same field of view at a smaller image size (integer divisor).
  CameraIntrinsics scaled_down(int divisor) const;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Rigid camera-to-world transform p_world = R * p_cam + t.
class Pose {
 public:
  Pose() : rotation_(Matrix3d::Identity()), translation_(Vector3d::Zero()) {}
  Pose(const Matrix3d& rotation, const Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vector3d& t) { return {Matrix3d::Identity(), t}; }
  static Pose from_axis_angle(const Vector3d& axis, double angle_rad,
                              const Vector3d& t = Vector3d::Zero());

  const Matrix3d& rotation() const { return rotation_; }
  const Vector3d& translation() const { return translation_; }

  Vector3d apply(const Vector3d& p) const { return rotation_ * p + translation_; }
  Vector3d rotate(const Vector3d& v) const { return rotation_ * v; }

  Pose inverse() const;
  /// (a * b) applies b first, then a.
  Pose operator*(const Pose& other) const;

  /// Projects the rotation back onto SO(3) (polar decomposition).
  Pose orthonormalized() const;

  /// max |R^T R - I|
  double orthonormality_error() const;

  /// Rotation angle of this transform in radians.
  double rotation_angle() const;

 private:
  Matrix3d rotation_;
  Vector3d translation_;
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose invert(const Pose& a) { return a.inverse(); }

/// One metric depth image; 0 marks a pixel with no return.
class DepthFrame {
 public:
  DepthFrame() = default;
  DepthFrame(int width, int height);
  /// Throws std::invalid_argument on size mismatch, negative or non-finite depths.
  DepthFrame(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  double& at(int x, int y) { return data_[index(x, y)]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::size_t valid_count() const;

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  bool operator==(const DepthFrame&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel vertices and normals plus a validity mask. Invalid entries hold zeros.
struct VertexNormalMap {
  int width = 0;
  int height = 0;
  std::vector<Vector3d> vertices;
  std::vector<Vector3d> normals;
  std::vector<std::uint8_t> vertex_valid;
  std::vector<std::uint8_t> normal_valid;

  VertexNormalMap() = default;
  VertexNormalMap(int w, int h);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool valid(std::size_t i) const { return vertex_valid[i] && normal_valid[i]; }
  std::size_t valid_count() const;
};

/// Back-projects pixel (x, y) at z-depth `depth`. Returns nullopt for depth <= 0.
std::optional<Vector3d> unproject(const CameraIntrinsics& intr, double x, double y, double depth);

/// Continuous pixel coordinates of a camera-frame point. nullopt when z <= 0.
std::optional<Vector2d> project(const CameraIntrinsics& intr, const Vector3d& point);

/// Unit-norm correction between a pixel's ray length and its z-depth.
double ray_length_factor(const CameraIntrinsics& intr, double x, double y);

/// Camera-frame vertex map of a depth frame; normals left invalid.
VertexNormalMap depth_to_vertex_map(const CameraIntrinsics& intr, const DepthFrame& frame);

/// Forward-difference normals oriented toward the camera (n . v < 0).
/// The last row and column and pixels next to invalid vertices are masked.
VertexNormalMap compute_normal_map(VertexNormalMap map);

/// depth_to_vertex_map followed by compute_normal_map.
VertexNormalMap convert_depth(const CameraIntrinsics& intr, const DepthFrame& frame);

/// Applies R v + t to vertices and R n to normals. Masks carry over.
VertexNormalMap transform_map(const Pose& pose, const VertexNormalMap& local);

/// 2x2 block average of valid vertices (within `max_depth_jump` of the block's
/// first valid vertex); normals are recomputed.
VertexNormalMap downsample_vertex_map(const VertexNormalMap& map, double max_depth_jump = 0.05);

}  // namespace mvfusion
