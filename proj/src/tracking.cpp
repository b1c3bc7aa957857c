#include "mvfusion/tracking.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace mvfusion {

namespace {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

// 2x2 block average for a global-frame map: vertices within `max_jump` of the
// block's first valid vertex are averaged, normals averaged and renormalised.
VertexNormalMap downsample_global(const VertexNormalMap& map, double max_jump = 0.05) {
  VertexNormalMap out(map.width / 2, map.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      Vector3d vsum = Vector3d::Zero();
      Vector3d nsum = Vector3d::Zero();
      Vector3d ref = Vector3d::Zero();
      int count = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          std::size_t j = map.index(2 * x + dx, 2 * y + dy);
          if (!map.valid(j)) continue;
          if (count == 0) ref = map.vertices[j];
          if ((map.vertices[j] - ref).norm() > max_jump) continue;
          vsum += map.vertices[j];
          nsum += map.normals[j];
          ++count;
        }
      }
      const double len = nsum.norm();
      if (count == 0 || !(len > 0.0)) continue;
      std::size_t i = out.index(x, y);
      out.vertices[i] = vsum / count;
      out.normals[i] = nsum / len;
      out.vertex_valid[i] = 1;
      out.normal_valid[i] = 1;
    }
  }
  return out;
}

struct LinearSystem {
  Matrix6d a = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double sse = 0.0;
  int count = 0;

  double mse() const { return count > 0 ? sse / count : 0.0; }
};

LinearSystem build_system(const VertexNormalMap& predicted, const VertexNormalMap& current,
                          const Pose& estimate, const Pose& previous_inv,
                          const CameraIntrinsics& intr, const IcpParams& params) {
  LinearSystem sys;
  const double cos_limit = std::cos(params.max_normal_angle_deg * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < current.vertices.size(); ++i) {
    if (!current.valid(i)) continue;
    const Vector3d p = estimate.apply(current.vertices[i]);
    const Vector3d pn = estimate.rotate(current.normals[i]);
    auto pix = project(intr, previous_inv.apply(p));
    if (!pix) continue;
    const int u = static_cast<int>(std::floor(pix->x() + 0.5));
    const int v = static_cast<int>(std::floor(pix->y() + 0.5));
    if (u < 0 || v < 0 || u >= predicted.width || v >= predicted.height) continue;
    const std::size_t j = predicted.index(u, v);
    if (!predicted.valid(j)) continue;
    const Vector3d& q = predicted.vertices[j];
    const Vector3d& nq = predicted.normals[j];
    const Vector3d diff = p - q;
    if (diff.norm() > params.max_correspondence_distance) continue;
    if (pn.dot(nq) < cos_limit) continue;

    const double r = nq.dot(diff);
    Vector6d jac;
    jac.head<3>() = p.cross(nq);
    jac.tail<3>() = nq;
    sys.a.noalias() += jac * jac.transpose();
    sys.b -= jac * r;
    sys.sse += r * r;
    ++sys.count;
  }
  return sys;
}

bool is_singular(const Matrix6d& a) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(a, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return !(ev.maxCoeff() > 0.0) || ev.minCoeff() <= 1e-12 * ev.maxCoeff();
}

Pose increment_pose(const Vector6d& x) {
  const Vector3d w = x.head<3>();
  const double angle = w.norm();
  Matrix3d r = Matrix3d::Identity();
  if (angle > 0.0) r = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  return {r, x.tail<3>()};
}

}  // namespace

void IcpParams::validate() const {
  if (pyramid_levels <= 0) throw std::invalid_argument("icp: pyramid_levels must be positive");
  if (static_cast<int>(iterations.size()) != pyramid_levels)
    throw std::invalid_argument("icp: need one iteration count per pyramid level");
  for (int n : iterations)
    if (n <= 0) throw std::invalid_argument("icp: iteration counts must be positive");
  if (!(max_correspondence_distance > 0.0) || !(max_normal_angle_deg > 0.0))
    throw std::invalid_argument("icp: rejection thresholds must be positive");
  if (min_correspondences < 6) throw std::invalid_argument("icp: min_correspondences must be >= 6");
}

const char* to_string(TrackingStatus status) {
  switch (status) {
    case TrackingStatus::ok: return "ok";
    case TrackingStatus::tracking_lost: return "tracking_lost";
    case TrackingStatus::singular_system: return "singular_system";
  }
  return "unknown";
}

IcpResult icp_track(const RayMap& predicted, const VertexNormalMap& current,
                    const Pose& previous_pose, const CameraIntrinsics& intr,
                    const IcpParams& params) {
  return icp_track(predicted.to_vertex_normal_map(), current, previous_pose, intr, params);
}

IcpResult icp_track(const VertexNormalMap& predicted_global, const VertexNormalMap& current,
                    const Pose& previous_pose, const CameraIntrinsics& intr,
                    const IcpParams& params) {
  params.validate();
  if (current.width != intr.width || current.height != intr.height ||
      predicted_global.width != intr.width || predicted_global.height != intr.height)
    throw std::invalid_argument("icp: map sizes do not match intrinsics");

  const int levels = params.pyramid_levels;
  std::vector<VertexNormalMap> cur_pyr{current};
  std::vector<VertexNormalMap> pred_pyr{predicted_global};
  for (int l = 1; l < levels; ++l) {
    cur_pyr.push_back(downsample_vertex_map(cur_pyr.back()));
    pred_pyr.push_back(downsample_global(pred_pyr.back()));
  }

  IcpResult result;
  result.pose = previous_pose;
  const Pose previous_inv = previous_pose.inverse();
  Pose estimate = previous_pose;
  result.initial_residual = build_system(pred_pyr[0], cur_pyr[0], estimate, previous_inv, intr, params).mse();

  auto fail = [&](TrackingStatus status, int count) {
    IcpResult lost;
    lost.pose = previous_pose;
    lost.status = status;
    lost.correspondences = count;
    lost.residuals = std::move(result.residuals);
    lost.initial_residual = result.initial_residual;
    return lost;
  };

  for (int level = levels - 1; level >= 0; --level) {
    const CameraIntrinsics level_intr = intr.pyramid_level(level);
    const bool finest = level == 0;
    for (int it = 0; it < params.iterations[level]; ++it) {
      LinearSystem sys =
          build_system(pred_pyr[level], cur_pyr[level], estimate, previous_inv, level_intr, params);
      if (finest) {
        result.residuals.push_back(sys.mse());
        result.correspondences = sys.count;
        if (sys.count < params.min_correspondences)
          return fail(TrackingStatus::tracking_lost, sys.count);
      } else if (sys.count < 6) {
        break;
      }
      if (is_singular(sys.a)) {
        if (finest) return fail(TrackingStatus::singular_system, sys.count);
        break;
      }
      const Vector6d x = sys.a.ldlt().solve(sys.b);
      if (!x.allFinite()) {
        if (finest) return fail(TrackingStatus::singular_system, sys.count);
        break;
      }
      if (x.norm() < 1e-14) break;
      estimate = (increment_pose(x) * estimate).orthonormalized();
    }
  }

  LinearSystem final_sys =
      build_system(pred_pyr[0], cur_pyr[0], estimate, previous_inv, intr, params);
  result.residuals.push_back(final_sys.mse());
  result.pose = estimate;
  return result;
}

}  // namespace mvfusion
