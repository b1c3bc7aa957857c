#include "mvfusion/pipeline.hpp"

#include <stdexcept>
#include <string>

#include "mvfusion/errors.hpp"

namespace mvfusion {

void PipelineOptions::validate() const {
  intrinsics.validate();
  switch (mode) {
    case LayoutMode::static_grid:
      if (!(l > 0.0) || r <= 0 || r_gpu <= 0)
        throw std::invalid_argument("pipeline: static grid needs l, r, r_gpu > 0");
      break;
    case LayoutMode::dynamic:
      dynamic.validate();
      break;
    case LayoutMode::explicit_list:
      if (volumes.empty()) throw std::invalid_argument("pipeline: explicit layout needs volumes");
      for (const auto& [_, p] : volumes)
        if (p.voxel_size != volumes.front().second.voxel_size || p.resolution < 2)
          throw std::invalid_argument("pipeline: explicit volumes must share one voxel size");
      break;
  }
  if (!(tau_multiplier > 0.0)) throw std::invalid_argument("pipeline: tau multiplier must be positive");
  if (track) icp.validate();
}

namespace {

double layout_voxel_size(const PipelineOptions& o) {
  switch (o.mode) {
    case LayoutMode::static_grid: return plan_grid(o.l, o.r, o.r_gpu).voxel_size;
    case LayoutMode::dynamic: return o.dynamic.voxel_size();
    case LayoutMode::explicit_list: return o.volumes.front().second.voxel_size;
  }
  return 0.0;
}

VolumeBudget effective_budget(const PipelineOptions& o) {
  VolumeBudget b = o.budget;
  if (o.mode == LayoutMode::dynamic) b.max_live = std::min(b.max_live, o.dynamic.max_live);
  return b;
}

}  // namespace

FusionPipeline::FusionPipeline(PipelineOptions options)
    : options_((options.validate(), std::move(options))),
      voxel_size_(layout_voxel_size(options_)),
      volumes_(effective_budget(options_),
               FusionParams::for_voxel_size(voxel_size_, options_.tau_multiplier, options_.max_weight)),
      raymap_(options_.intrinsics.width, options_.intrinsics.height) {
  switch (options_.mode) {
    case LayoutMode::static_grid:
      for (const auto& [key, params] : plan_grid(options_.l, options_.r, options_.r_gpu).volumes)
        volumes_.insert(key, params);
      break;
    case LayoutMode::explicit_list:
      for (const auto& [key, params] : options_.volumes) volumes_.insert(key, params);
      break;
    case LayoutMode::dynamic:
      policy_ = std::make_unique<TopEndpointPolicy>(options_.dynamic);
      break;
  }
  for (const LatticeKey& k : volumes_.keys()) ever_allocated_.insert(k);
}

void FusionPipeline::allocate(const EndpointHistogram& hist, FrameReport& report) {
  AllocationResult res = update_allocation(volumes_, hist, *policy_, cloud_store_);
  for (const LatticeKey& k : res.added) ever_allocated_.insert(k);
  report.allocation.added.insert(report.allocation.added.end(), res.added.begin(), res.added.end());
  report.allocation.removed.insert(report.allocation.removed.end(), res.removed.begin(),
                                   res.removed.end());
}

const FrameReport& FusionPipeline::process(const DepthFrame& frame, const std::optional<Pose>& pose) {
  const CameraIntrinsics& intr = options_.intrinsics;
  if (frame.width() != intr.width || frame.height() != intr.height)
    throw std::invalid_argument("pipeline: frame size does not match intrinsics");

  FrameReport report;
  report.frame = frames_processed();
  const TransferCounters before = volumes_.counters();

  // Depth map conversion.
  const VertexNormalMap local = convert_depth(intr, frame);

  // Camera tracking.
  if (pose) {
    pose_ = *pose;
  } else if (!options_.track) {
    throw std::invalid_argument("pipeline: tracking disabled but no pose supplied for frame " +
                                std::to_string(report.frame));
  } else if (report.frame > 0) {
    IcpResult icp;
    if (raymap_.valid_count() >= static_cast<std::size_t>(options_.icp.min_correspondences))
      icp = icp_track(raymap_, local, pose_, intr, options_.icp);
    else
      icp = icp_track(previous_global_, local, pose_, intr, options_.icp);
    report.tracked = true;
    report.status = icp.status;
    report.correspondences = icp.correspondences;
    if (icp.lost() && options_.fatal_tracking_loss)
      throw TrackingLostError("tracking lost at frame " + std::to_string(report.frame) + " (" +
                              to_string(icp.status) + ", " + std::to_string(icp.correspondences) +
                              " correspondences)");
    pose_ = icp.pose;
  }
  report.pose = pose_;

  EndpointHistogram hist;
  if (options_.mode == LayoutMode::dynamic) {
    hist = bin_endpoints(frame, pose_, intr, options_.dynamic.cell_size);
    // Initialisation: an empty model is seeded from the first frame's endpoints.
    if (volumes_.size() == 0) allocate(hist, report);
  }

  // Per-volume memory passing, integration and raycasting.
  raymap_.reset();
  for (const LatticeKey& key : volumes_.keys())
    volume_update(volumes_, key, frame, pose_, intr, raymap_, options_.raycast);

  if (options_.mode == LayoutMode::dynamic) allocate(hist, report);

  previous_global_ = transform_map(pose_, local);
  report.histogram = std::move(hist);
  report.transfers = volumes_.counters() - before;
  report.live_count = volumes_.size();
  report.resident_count = volumes_.resident_count();
  report.raymap_valid = raymap_.valid_count();
  reports_.push_back(std::move(report));
  return reports_.back();
}

PointCloud FusionPipeline::finish() const {
  PointCloud out = cloud_store_;
  for (const LatticeKey& key : volumes_.keys()) out.append(volumes_.extract(key));
  return out;
}

}  // namespace mvfusion
