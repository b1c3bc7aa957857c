#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "mvfusion/config.hpp"
#include "mvfusion/dataset_io.hpp"
#include "mvfusion/evaluation.hpp"
#include "mvfusion/pipeline.hpp"

namespace mvfusion {

struct RunResult {
  PointCloud cloud;
  std::optional<ErrorStats> stats;  // only when the input is a synthetic scene
  std::vector<TransferRow> transfers;
  std::vector<Pose> poses;
  int lost_frames = 0;
  double seconds_per_frame = 0.0;  // frame 0 excluded
  std::string config_hash;
};

struct RunInput {
  CameraIntrinsics intrinsics;
  std::vector<DepthFrame> frames;
  std::vector<std::optional<Pose>> groundtruth;  // one per frame
  std::optional<Scene> scene;                    // set for synthetic input
};

/// Frames from the configured dataset, or rendered from the configured scene
/// and trajectory with noise when configured.
RunInput make_input(const RunConfig& config);

/// Loads a preset name or a scene file.
Scene resolve_scene(const std::string& name_or_path);

RunResult run_pipeline(const RunConfig& config);
RunResult run_pipeline(const RunConfig& config, const RunInput& input);

/// PLY, stats CSV and transfer CSV under config.out_dir. Returns the PLY path.
std::filesystem::path write_run_outputs(const RunConfig& config, const RunResult& result);

}  // namespace mvfusion
