#pragma once

#include <vector>

#include "mvfusion/geometry.hpp"
#include "mvfusion/tsdf.hpp"

namespace mvfusion {

struct IcpParams {
  int pyramid_levels = 3;
  /// Iterations per level, finest level first.
  std::vector<int> iterations{10, 5, 4};
  double max_correspondence_distance = 0.10;  // meters
  double max_normal_angle_deg = 20.0;
  /// Minimum correspondences at the finest level before tracking counts as lost.
  int min_correspondences = 1000;

  void validate() const;
};

enum class TrackingStatus { ok, tracking_lost, singular_system };

const char* to_string(TrackingStatus status);

struct IcpResult {
  Pose pose;
  TrackingStatus status = TrackingStatus::ok;
  int correspondences = 0;  // at the last finest-level iteration
  /// Mean squared point-to-plane residual at the finest level: one entry per
  /// iteration (before its update) plus the residual after the last update.
  std::vector<double> residuals;
  /// Finest-level residual at the starting pose, before any update.
  double initial_residual = 0.0;

  bool lost() const { return status != TrackingStatus::ok; }
};

/// Aligns `current` (camera-frame map of frame i) against `predicted`
/// (global-frame raycast of frame i-1, rendered from `previous_pose`).
/// Projective association, point-to-plane error, coarse-to-fine.
/// On failure the result carries `previous_pose` and a non-ok status.
IcpResult icp_track(const RayMap& predicted, const VertexNormalMap& current,
                    const Pose& previous_pose, const CameraIntrinsics& intr,
                    const IcpParams& params = {});

/// Same as above with a global-frame vertex/normal map as the prediction.
IcpResult icp_track(const VertexNormalMap& predicted_global, const VertexNormalMap& current,
                    const Pose& previous_pose, const CameraIntrinsics& intr,
                    const IcpParams& params = {});

}  // namespace mvfusion
