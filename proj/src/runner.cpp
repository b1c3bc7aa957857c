#include "mvfusion/runner.hpp"

#include <chrono>
#include <limits>

#include "mvfusion/errors.hpp"

namespace mvfusion {

Scene resolve_scene(const std::string& name_or_path) {
  for (const char* preset : {"sphere", "corridor", "room", "empty"})
    if (name_or_path == preset) return Scene::preset(preset);
  return Scene::load(name_or_path);
}

RunInput make_input(const RunConfig& config) {
  config.validate();
  RunInput in;
  in.intrinsics = config.camera;
  if (!config.dataset.empty()) {
    for (LoadedFrame& f : load_sequence(config.dataset, config.depth_scale)) {
      if (f.depth.width() != config.camera.width || f.depth.height() != config.camera.height)
        throw LoadError("dataset frame size " + std::to_string(f.depth.width()) + "x" +
                        std::to_string(f.depth.height()) + " does not match the camera settings");
      in.frames.push_back(std::move(f.depth));
      in.groundtruth.push_back(f.groundtruth);
    }
    return in;
  }
  in.scene = resolve_scene(config.scene);
  const Trajectory traj = config.trajectory == "corridor"
                              ? corridor_trajectory(config.corridor_length, config.frames)
                              : orbit_trajectory(config.orbit_center, config.orbit_radius, config.frames);
  const double max_depth =
      config.max_depth > 0.0 ? config.max_depth : std::numeric_limits<double>::infinity();
  std::optional<NoiseModel> noise;
  if (config.noisy()) noise = config.noise();
  SyntheticSequence seq = render_sequence(*in.scene, traj, config.camera, noise, max_depth);
  in.frames = std::move(seq.frames);
  for (const Pose& p : seq.poses) in.groundtruth.emplace_back(p);
  return in;
}

RunResult run_pipeline(const RunConfig& config) { return run_pipeline(config, make_input(config)); }

RunResult run_pipeline(const RunConfig& config, const RunInput& input) {
  PipelineOptions opts = config.pipeline_options();
  opts.intrinsics = input.intrinsics;
  FusionPipeline pipe(std::move(opts));

  RunResult res;
  res.config_hash = fnv1a_hex(config.to_text());
  double seconds = 0.0;
  for (std::size_t i = 0; i < input.frames.size(); ++i) {
    std::optional<Pose> pose;
    if (config.use_groundtruth) {
      pose = i < input.groundtruth.size() ? input.groundtruth[i] : std::nullopt;
      if (!pose && !config.track)
        throw LoadError("frame " + std::to_string(i) + " has no ground-truth pose");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const FrameReport& rep = pipe.process(input.frames[i], pose);
    const auto t1 = std::chrono::steady_clock::now();
    if (i > 0) seconds += std::chrono::duration<double>(t1 - t0).count();
    if (rep.tracked && rep.status != TrackingStatus::ok) ++res.lost_frames;
    res.poses.push_back(rep.pose);
    res.transfers.push_back({rep.frame, rep.transfers.uploads, rep.transfers.downloads,
                             rep.transfers.bytes_uploaded + rep.transfers.bytes_downloaded,
                             rep.live_count, rep.resident_count});
  }
  if (input.frames.size() > 1)
    res.seconds_per_frame = seconds / static_cast<double>(input.frames.size() - 1);
  res.cloud = pipe.finish();
  if (input.scene && !input.scene->empty() && !res.cloud.empty())
    res.stats = cloud_to_surface_stats(res.cloud, *input.scene);
  return res;
}

std::filesystem::path write_run_outputs(const RunConfig& config, const RunResult& result) {
  const std::filesystem::path dir = config.out_dir;
  std::filesystem::create_directories(dir);
  const auto ply = dir / config.ply;
  write_ply(ply, result.cloud);
  StatsRow row;
  row.config_hash = result.config_hash;
  row.stats = result.stats.value_or(ErrorStats{result.cloud.size(), 0.0, 0.0, 0.0});
  row.seconds_per_frame = result.seconds_per_frame;
  write_stats_csv(dir / config.stats_csv, {row});
  write_transfer_csv(dir / config.transfer_csv, result.transfers);
  return ply;
}

}  // namespace mvfusion
