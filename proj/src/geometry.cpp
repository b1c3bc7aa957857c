#include "mvfusion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace mvfusion {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside the image");
}

CameraIntrinsics CameraIntrinsics::pyramid_level(int level) const {
  CameraIntrinsics out = *this;
  for (int i = 0; i < level; ++i) {
    out.fx *= 0.5;
    out.fy *= 0.5;
    out.cx = (out.cx - 0.5) * 0.5;
    out.cy = (out.cy - 0.5) * 0.5;
    out.width /= 2;
    out.height /= 2;
  }
  return out;
}

CameraIntrinsics CameraIntrinsics::scaled_down(int divisor) const {
  if (divisor <= 0) throw std::invalid_argument("intrinsics: divisor must be positive");
  CameraIntrinsics out = *this;
  out.fx /= divisor;
  out.fy /= divisor;
  out.cx /= divisor;
  out.cy /= divisor;
  out.width /= divisor;
  out.height /= divisor;
  return out;
}

Pose Pose::from_axis_angle(const Vector3d& axis, double angle_rad, const Vector3d& t) {
  return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), t};
}

Pose Pose::inverse() const {
  Matrix3d rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

Pose Pose::operator*(const Pose& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
}

Pose Pose::orthonormalized() const {
  Eigen::JacobiSVD<Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, translation_};
}

double Pose::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

double Pose::rotation_angle() const {
  double c = std::clamp((rotation_.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

DepthFrame::DepthFrame(int width, int height)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, 0.0) {
  if (width < 0 || height < 0) throw std::invalid_argument("depth frame: negative size");
}

DepthFrame::DepthFrame(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw std::invalid_argument("depth frame: negative size");
  if (data_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("depth frame: expected " + std::to_string(width * height) +
                                " values, got " + std::to_string(data_.size()));
  for (double d : data_) {
    if (!std::isfinite(d) || d < 0.0)
      throw std::invalid_argument("depth frame: depths must be finite and non-negative");
  }
}

std::size_t DepthFrame::valid_count() const {
  std::size_t n = 0;
  for (double d : data_) n += d > 0.0;
  return n;
}

VertexNormalMap::VertexNormalMap(int w, int h)
    : width(w),
      height(h),
      vertices(static_cast<std::size_t>(w) * h, Vector3d::Zero()),
      normals(static_cast<std::size_t>(w) * h, Vector3d::Zero()),
      vertex_valid(static_cast<std::size_t>(w) * h, 0),
      normal_valid(static_cast<std::size_t>(w) * h, 0) {}

std::size_t VertexNormalMap::valid_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) n += valid(i);
  return n;
}

std::optional<Vector3d> unproject(const CameraIntrinsics& intr, double x, double y,
                                  double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) return std::nullopt;
  return Vector3d((x - intr.cx) / intr.fx * depth, (y - intr.cy) / intr.fy * depth, depth);
}

std::optional<Vector2d> project(const CameraIntrinsics& intr, const Vector3d& p) {
  if (!(p.z() > 0.0)) return std::nullopt;
  return Vector2d(intr.fx * p.x() / p.z() + intr.cx, intr.fy * p.y() / p.z() + intr.cy);
}

double ray_length_factor(const CameraIntrinsics& intr, double x, double y) {
  return Vector3d((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0).norm();
}

VertexNormalMap depth_to_vertex_map(const CameraIntrinsics& intr, const DepthFrame& frame) {
  VertexNormalMap map(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      std::size_t i = map.index(x, y);
      if (auto v = unproject(intr, x, y, frame.at(x, y))) {
        map.vertices[i] = *v;
        map.vertex_valid[i] = 1;
      }
    }
  }
  return map;
}

VertexNormalMap compute_normal_map(VertexNormalMap map) {
  const int w = map.width;
  const int h = map.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = map.index(x, y);
      map.normal_valid[i] = 0;
      map.normals[i].setZero();
      if (x + 1 >= w || y + 1 >= h) continue;
      std::size_t ix = map.index(x + 1, y);
      std::size_t iy = map.index(x, y + 1);
      if (!map.vertex_valid[i] || !map.vertex_valid[ix] || !map.vertex_valid[iy]) continue;
      const Vector3d& v = map.vertices[i];
      Vector3d n = (map.vertices[ix] - v).cross(map.vertices[iy] - v);
      double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      n /= len;
      if (n.dot(v) > 0.0) n = -n;
      map.normals[i] = n;
      map.normal_valid[i] = 1;
    }
  }
  return map;
}

VertexNormalMap convert_depth(const CameraIntrinsics& intr, const DepthFrame& frame) {
  return compute_normal_map(depth_to_vertex_map(intr, frame));
}

VertexNormalMap transform_map(const Pose& pose, const VertexNormalMap& local) {
  VertexNormalMap out = local;
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    if (out.vertex_valid[i]) out.vertices[i] = pose.apply(local.vertices[i]);
    if (out.normal_valid[i]) out.normals[i] = pose.rotate(local.normals[i]);
  }
  return out;
}

VertexNormalMap downsample_vertex_map(const VertexNormalMap& map, double max_depth_jump) {
  VertexNormalMap out(map.width / 2, map.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      Vector3d sum = Vector3d::Zero();
      int count = 0;
      double ref_z = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          std::size_t j = map.index(2 * x + dx, 2 * y + dy);
          if (!map.vertex_valid[j]) continue;
          const Vector3d& v = map.vertices[j];
          if (count == 0) ref_z = v.z();
          if (std::abs(v.z() - ref_z) > max_depth_jump) continue;
          sum += v;
          ++count;
        }
      }
      if (count > 0) {
        std::size_t i = out.index(x, y);
        out.vertices[i] = sum / count;
        out.vertex_valid[i] = 1;
      }
    }
  }
  return compute_normal_map(std::move(out));
}

}  // namespace mvfusion
