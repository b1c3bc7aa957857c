// mvfusion: command-line driver for the multi-volume fusion pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mvfusion/config.hpp"
#include "mvfusion/dataset_io.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/evaluation.hpp"
#include "mvfusion/runner.hpp"
#include "mvfusion/synth.hpp"

namespace {

using namespace mvfusion;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool verbose = false;
  bool static_grid = false;
  bool dynamic = false;
  std::vector<std::string> overrides;
};

// Config file first, then --set, then the dedicated flags.
RunConfig build_config(const GlobalFlags& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_config(g.config_path);
  std::vector<std::string> sets = g.overrides;
  if (g.seed) sets.push_back("run.seed=" + std::to_string(*g.seed));
  if (!g.out_dir.empty()) sets.push_back("output.dir=" + g.out_dir);
  if (g.static_grid && g.dynamic) {
    sets.push_back("mode.static_grid=true");
    sets.push_back("mode.dynamic=true");
  } else if (g.static_grid) {
    sets.push_back("mode.static_grid=true");
    sets.push_back("mode.dynamic=false");
  } else if (g.dynamic) {
    sets.push_back("mode.static_grid=false");
    sets.push_back("mode.dynamic=true");
  }
  apply_overrides(cfg, sets);
  return cfg;
}

std::vector<int> parse_counts(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--volumes: bad count '" + part + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void print_stats(const ErrorStats& s) {
  std::printf("vertices %zu  mean %s  median %s  std %s\n", s.vertex_count,
              format_number(s.mean).c_str(), format_number(s.median).c_str(),
              format_number(s.std).c_str());
}

int cmd_run(const GlobalFlags& g) {
  const RunConfig cfg = build_config(g);
  if (g.verbose) std::cerr << cfg.to_text();
  const RunResult res = run_pipeline(cfg);
  const auto ply = write_run_outputs(cfg, res);
  std::printf("frames %zu  lost %d  s/frame %s\n", res.poses.size(), res.lost_frames,
              format_number(res.seconds_per_frame).c_str());
  if (res.stats) print_stats(*res.stats);
  else std::printf("vertices %zu\n", res.cloud.size());
  std::printf("wrote %s\n", ply.string().c_str());
  return 0;
}

int cmd_synth(const GlobalFlags& g) {
  const RunConfig cfg = build_config(g);
  RunConfig synthetic = cfg;
  synthetic.dataset.clear();
  const RunInput in = make_input(synthetic);
  SyntheticSequence seq;
  seq.intrinsics = in.intrinsics;
  seq.frames = in.frames;
  for (const auto& p : in.groundtruth) seq.poses.push_back(*p);
  write_sequence(cfg.out_dir, seq, cfg.depth_scale);
  std::printf("wrote %zu frames to %s\n", seq.frames.size(), cfg.out_dir.c_str());
  return 0;
}

int cmd_bench(const GlobalFlags& g, const std::string& volumes,
              int resolution, double side) {
  const RunConfig cfg = build_config(g);
  const std::vector<int> counts = parse_counts(volumes);
  const RunInput in = make_input(cfg);
  SyntheticSequence seq;
  seq.intrinsics = in.intrinsics;
  seq.frames = in.frames;
  for (const auto& p : in.groundtruth) {
    if (!p) throw LoadError("bench needs a pose for every frame");
    seq.poses.push_back(*p);
  }
  BenchOptions bo;
  bo.resolution = resolution;
  bo.side = side;
  bo.tau_multiplier = cfg.tau_multiplier;
  const BenchResult bench = runtime_bench(seq, counts, bo);
  std::filesystem::create_directories(cfg.out_dir);
  write_bench_csv(std::filesystem::path(cfg.out_dir) / "bench.csv", bench);
  StatsRow row;
  row.config_hash = fnv1a_hex(cfg.to_text());
  row.slope = bench.fit.slope;
  row.r2 = bench.fit.r2;
  if (!bench.rows.empty()) row.seconds_per_frame = bench.rows.front().seconds_per_frame;
  write_stats_csv(std::filesystem::path(cfg.out_dir) / cfg.stats_csv, {row});
  std::printf("volumes,seconds_per_frame\n");
  for (const BenchRow& r : bench.rows)
    std::printf("%d,%s\n", r.volumes, format_number(r.seconds_per_frame).c_str());
  std::printf("slope %s s/volume  r2 %s\n", format_number(bench.fit.slope).c_str(),
              format_number(bench.fit.r2).c_str());
  return 0;
}

int cmd_equiv(const GlobalFlags& g, double threshold) {
  const RunConfig cfg = build_config(g);
  const Scene scene = resolve_scene(cfg.scene);
  const Trajectory traj = cfg.trajectory == "corridor"
                              ? corridor_trajectory(cfg.corridor_length, cfg.frames)
                              : orbit_trajectory(cfg.orbit_center, cfg.orbit_radius, cfg.frames);
  const EquivalenceReport rep =
      equivalence_check(scene, traj, cfg.camera, cfg.l, cfg.r, cfg.r_gpu, cfg.tau_multiplier);
  const bool pass = rep.max_raymap_diff <= threshold && rep.validity_mismatches == 0;
  std::printf("frames %d  compared pixels %zu  validity mismatches %zu\n", rep.frames,
              rep.compared_pixels, rep.validity_mismatches);
  std::printf("max raymap diff %s m\n", format_number(rep.max_raymap_diff).c_str());
  std::printf("max overlap tsdf diff %s m over %zu voxels\n", format_number(rep.max_tsdf_diff).c_str(),
              rep.overlap_voxels);
  std::printf("%s (threshold %s m)\n", pass ? "PASS" : "FAIL", format_number(threshold).c_str());
  return pass ? 0 : 1;
}

int cmd_eval(const GlobalFlags& g, const std::string& ply) {
  const RunConfig cfg = build_config(g);
  const PointCloud cloud = read_ply(ply);
  const ErrorStats stats = cloud_to_surface_stats(cloud, resolve_scene(cfg.scene));
  print_stats(stats);
  StatsRow row;
  row.config_hash = fnv1a_hex(cfg.to_text());
  row.stats = stats;
  write_stats_csv(std::filesystem::path(cfg.out_dir) / cfg.stats_csv, {row});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-volume TSDF depth fusion"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config_path, "Config file (key = value with [section] headers)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_flag("-v,--verbose", g.verbose, "Print the effective configuration");
  app.add_flag("--static-grid", g.static_grid, "Static grid of subvolumes");
  app.add_flag("--dynamic", g.dynamic, "Dynamic subvolume allocation");
  app.add_option("--set", g.overrides, "Override a setting, e.g. --set static.r=64")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  std::string scene;
  std::optional<int> frames;
  auto add_input_flags = [&](CLI::App* sub) {
    sub->add_option("--scene", scene, "Scene preset or file");
    sub->add_option("--frames", frames, "Number of frames");
  };

  auto* run = app.add_subcommand("run", "Fuse a sequence and write the cloud and statistics");
  add_input_flags(run);
  auto* synth = app.add_subcommand("synth", "Write a synthetic depth sequence to disk");
  add_input_flags(synth);
  auto* bench = app.add_subcommand("bench", "Seconds per frame against volume count");
  add_input_flags(bench);
  std::string volumes = "1,2,4,8";
  int resolution = 64;
  double side = 0.8;
  bench->add_option("--volumes", volumes, "Comma-separated volume counts");
  bench->add_option("--resolution", resolution, "Voxels per side of each volume");
  bench->add_option("--side", side, "Side length of each volume in meters");
  auto* equiv = app.add_subcommand("equiv", "Single volume against tiled volumes");
  add_input_flags(equiv);
  double threshold = 1e-5;
  equiv->add_option("--threshold", threshold, "Maximum raymap difference in meters");
  auto* eval = app.add_subcommand("eval", "Statistics of a PLY cloud against a scene");
  std::string ply;
  eval->add_option("ply", ply, "PLY file")->required()->check(CLI::ExistingFile);
  eval->add_option("--scene", scene, "Scene preset or file");

  for (auto* sub : {run, synth, bench, equiv, eval}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (!scene.empty()) g.overrides.push_back("input.scene=" + scene);
  if (frames) g.overrides.push_back("input.frames=" + std::to_string(*frames));

  try {
    if (*run) return cmd_run(g);
    if (*synth) return cmd_synth(g);
    if (*bench) return cmd_bench(g, volumes, resolution, side);
    if (*equiv) return cmd_equiv(g, threshold);
    if (*eval) return cmd_eval(g, ply);
  } catch (const TrackingLostError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
