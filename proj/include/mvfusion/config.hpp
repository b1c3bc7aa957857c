#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvfusion/pipeline.hpp"
#include "mvfusion/synth.hpp"

namespace mvfusion {

/// Every tunable of a run. Keys are "section.name" (see README for the list).
struct RunConfig {
  CameraIntrinsics camera;

  bool static_grid = true;
  bool dynamic = false;

  double l = 1.6;
  int r = 124;
  int r_gpu = 62;

  double d_l = 1.0;
  int d_v = 34;
  int n = 8;
  double hysteresis = 1.5;

  double tau_multiplier = 4.0;
  double max_weight = 128.0;
  int max_resident = 1;

  bool track = true;
  int icp_levels = 3;
  std::vector<int> icp_iterations{10, 5, 4};
  double icp_max_distance = 0.10;
  double icp_max_angle_deg = 20.0;
  int icp_min_correspondences = 1000;
  bool fatal_tracking_loss = false;

  double noise_sigma0 = 0.0;
  double noise_sigma1 = 0.0;
  double noise_dropout = 0.0;

  std::uint64_t seed = 0;

  std::string scene = "sphere";       // preset name or scene file path
  std::string trajectory = "orbit";   // orbit | corridor
  int frames = 60;
  Vector3d orbit_center{0.0, 0.0, 0.8};
  double orbit_radius = 0.8;
  double corridor_length = 10.0;
  double max_depth = 0.0;             // 0 = unlimited
  std::string dataset;                // non-empty: read frames from this directory
  double depth_scale = 5000.0;
  bool use_groundtruth = false;       // inject dataset / synthetic poses

  std::string out_dir = "out";
  std::string ply = "cloud.ply";
  std::string stats_csv = "stats.csv";
  std::string transfer_csv = "transfers.csv";

  /// Sets one field from its textual value. Throws ConfigError for an unknown
  /// key or an unparsable value.
  void set(std::string_view key, std::string_view value);

  /// Every violated range, one message per line, or empty.
  std::vector<std::string> problems() const;
  /// Throws ConfigError listing every problem.
  void validate() const;

  /// Canonical "key = value" dump, stable across runs.
  std::string to_text() const;

  static std::vector<std::string> keys();

  PipelineOptions pipeline_options() const;
  NoiseModel noise() const;
  bool noisy() const { return noise_sigma0 > 0.0 || noise_sigma1 > 0.0 || noise_dropout > 0.0; }
};

/// Applies "key = value" lines with optional [section] headers on top of
/// `base`. Collects all parse and validation errors before throwing ConfigError.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Applies overrides ("key=value") then validates, listing all errors at once.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

}  // namespace mvfusion
