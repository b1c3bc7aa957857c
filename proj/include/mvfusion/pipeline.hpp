#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mvfusion/geometry.hpp"
#include "mvfusion/tracking.hpp"
#include "mvfusion/tsdf.hpp"
#include "mvfusion/volume_manager.hpp"

namespace mvfusion {

enum class LayoutMode { static_grid, dynamic, explicit_list };

struct PipelineOptions {
  CameraIntrinsics intrinsics;
  LayoutMode mode = LayoutMode::static_grid;

  // static grid
  double l = 1.6;
  int r = 124;
  int r_gpu = 124;

  DynamicGrid dynamic;

  // explicit_list: used verbatim, all sharing one voxel size
  std::vector<std::pair<LatticeKey, VolumeParams>> volumes;

  double tau_multiplier = 4.0;
  float max_weight = 128.0f;
  VolumeBudget budget;
  RaycastParams raycast;

  IcpParams icp;
  /// When false every frame needs a supplied pose and ICP is skipped.
  bool track = true;
  bool fatal_tracking_loss = false;

  void validate() const;
};

struct FrameReport {
  int frame = 0;
  Pose pose;
  bool tracked = false;
  TrackingStatus status = TrackingStatus::ok;
  int correspondences = 0;
  EndpointHistogram histogram;  // dynamic mode only
  AllocationResult allocation;
  TransferCounters transfers;   // this frame only
  std::size_t live_count = 0;
  std::size_t resident_count = 0;
  std::size_t raymap_valid = 0;
};

/// Per-frame model building: depth conversion, tracking, then for each live
/// volume in key order memory passing, integration and raycasting, then the
/// allocation update.
class FusionPipeline {
 public:
  explicit FusionPipeline(PipelineOptions options);

  /// `pose` overrides tracking for this frame (ground truth injection). It is
  /// required when tracking is disabled.
  const FrameReport& process(const DepthFrame& frame, const std::optional<Pose>& pose = std::nullopt);

  const PipelineOptions& options() const { return options_; }
  const FusionParams& fusion() const { return volumes_.fusion(); }
  double voxel_size() const { return voxel_size_; }
  VolumeSet& volumes() { return volumes_; }
  const VolumeSet& volumes() const { return volumes_; }
  const RayMap& raymap() const { return raymap_; }
  const Pose& pose() const { return pose_; }
  int frames_processed() const { return static_cast<int>(reports_.size()); }
  const std::vector<FrameReport>& reports() const { return reports_; }
  /// Every lattice cell that has held a volume at some point.
  const std::set<LatticeKey>& ever_allocated() const { return ever_allocated_; }
  /// Clouds extracted from volumes removed so far.
  const PointCloud& removed_cloud() const { return cloud_store_; }

  /// Removed clouds followed by an extraction of every live volume, in key order.
  PointCloud finish() const;

 private:
  void allocate(const EndpointHistogram& hist, FrameReport& report);

  PipelineOptions options_;
  double voxel_size_ = 0.0;
  VolumeSet volumes_;
  std::unique_ptr<TopEndpointPolicy> policy_;
  RayMap raymap_;
  VertexNormalMap previous_global_;
  Pose pose_;
  PointCloud cloud_store_;
  std::set<LatticeKey> ever_allocated_;
  std::vector<FrameReport> reports_;
};

}  // namespace mvfusion
