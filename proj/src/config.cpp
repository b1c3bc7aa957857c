#include "mvfusion/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mvfusion/dataset_io.hpp"
#include "mvfusion/errors.hpp"

namespace mvfusion {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(std::string(key) + ": cannot parse '" + std::string(v) + "' as a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (true) {
    const auto c = v.find(',');
    out.push_back(trim(v.substr(0, c)));
    if (c == std::string_view::npos) break;
    v.remove_prefix(c + 1);
  }
  return out;
}

std::string fmt(double v) { return format_number(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MV_DOUBLE(name, member)                                                        \
  Field {                                                                              \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_number<double>(name, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                               \
  }
#define MV_INT(name, member)                                                        \
  Field {                                                                           \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_number<int>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                 \
  }
#define MV_BOOL(name, member)                                                 \
  Field {                                                                     \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); }, \
        [](const RunConfig& c) { return fmt(c.member); }                      \
  }
#define MV_STRING(name, member)                                                 \
  Field {                                                                       \
    name, [](RunConfig& c, std::string_view v) { c.member = std::string(v); },  \
        [](const RunConfig& c) { return c.member; }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      MV_DOUBLE("camera.fx", camera.fx),
      MV_DOUBLE("camera.fy", camera.fy),
      MV_DOUBLE("camera.cx", camera.cx),
      MV_DOUBLE("camera.cy", camera.cy),
      MV_INT("camera.width", camera.width),
      MV_INT("camera.height", camera.height),
      MV_BOOL("mode.static_grid", static_grid),
      MV_BOOL("mode.dynamic", dynamic),
      MV_DOUBLE("static.l", l),
      MV_INT("static.r", r),
      MV_INT("static.r_gpu", r_gpu),
      MV_DOUBLE("dynamic.d_l", d_l),
      MV_INT("dynamic.d_v", d_v),
      MV_INT("dynamic.n", n),
      MV_DOUBLE("dynamic.hysteresis", hysteresis),
      MV_DOUBLE("fusion.tau_multiplier", tau_multiplier),
      MV_DOUBLE("fusion.max_weight", max_weight),
      MV_INT("fusion.max_resident", max_resident),
      MV_BOOL("icp.track", track),
      MV_INT("icp.levels", icp_levels),
      Field{"icp.iterations",
            [](RunConfig& c, std::string_view v) {
              std::vector<int> its;
              for (auto part : split_list(v)) its.push_back(parse_number<int>("icp.iterations", part));
              c.icp_iterations = std::move(its);
            },
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.icp_iterations.size(); ++i)
                s += (i ? "," : "") + std::to_string(c.icp_iterations[i]);
              return s;
            }},
      MV_DOUBLE("icp.max_distance", icp_max_distance),
      MV_DOUBLE("icp.max_angle_deg", icp_max_angle_deg),
      MV_INT("icp.min_correspondences", icp_min_correspondences),
      MV_BOOL("icp.fatal_loss", fatal_tracking_loss),
      MV_DOUBLE("noise.sigma0", noise_sigma0),
      MV_DOUBLE("noise.sigma1", noise_sigma1),
      MV_DOUBLE("noise.dropout", noise_dropout),
      Field{"run.seed",
            [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("run.seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      MV_STRING("input.scene", scene),
      MV_STRING("input.trajectory", trajectory),
      MV_INT("input.frames", frames),
      Field{"input.orbit_center",
            [](RunConfig& c, std::string_view v) {
              auto parts = split_list(v);
              if (parts.size() != 3) throw ConfigError("input.orbit_center: expected 'x,y,z'");
              for (int i = 0; i < 3; ++i)
                c.orbit_center[i] = parse_number<double>("input.orbit_center", parts[i]);
            },
            [](const RunConfig& c) {
              return fmt(c.orbit_center.x()) + "," + fmt(c.orbit_center.y()) + "," +
                     fmt(c.orbit_center.z());
            }},
      MV_DOUBLE("input.orbit_radius", orbit_radius),
      MV_DOUBLE("input.corridor_length", corridor_length),
      MV_DOUBLE("input.max_depth", max_depth),
      MV_STRING("input.dataset", dataset),
      MV_DOUBLE("input.depth_scale", depth_scale),
      MV_BOOL("input.use_groundtruth", use_groundtruth),
      MV_STRING("output.dir", out_dir),
      MV_STRING("output.ply", ply),
      MV_STRING("output.stats_csv", stats_csv),
      MV_STRING("output.transfer_csv", transfer_csv),
  };
  return table;
}

#undef MV_DOUBLE
#undef MV_INT
#undef MV_BOOL
#undef MV_STRING

[[noreturn]] void throw_all(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError("unknown setting '" + std::string(key) + "'");
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> p;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) p.push_back(msg);
  };
  if (static_grid && dynamic)
    p.push_back("mode: both static_grid and dynamic are set; choose exactly one");
  if (!static_grid && !dynamic) p.push_back("mode: neither static_grid nor dynamic is set");

  need(camera.fx > 0.0 && camera.fy > 0.0, "camera: fx and fy must be positive");
  need(camera.width > 0 && camera.height > 0, "camera: width and height must be positive");
  need(l > 0.0, "static.l must be positive");
  need(r > 0, "static.r must be positive");
  need(r_gpu > 0, "static.r_gpu must be positive");
  need(d_l > 0.0, "dynamic.d_l must be positive");
  need(d_v > 2, "dynamic.d_v must be greater than 2");
  need(n >= 1, "dynamic.n must be at least 1");
  need(hysteresis >= 1.0, "dynamic.hysteresis must be >= 1");
  need(tau_multiplier > 0.0, "fusion.tau_multiplier must be positive");
  need(max_weight >= 1.0, "fusion.max_weight must be >= 1");
  need(max_resident >= 1, "fusion.max_resident must be >= 1");
  need(icp_levels >= 1, "icp.levels must be >= 1");
  need(static_cast<int>(icp_iterations.size()) == icp_levels,
       "icp.iterations needs one count per level (" + std::to_string(icp_levels) + ")");
  for (int it : icp_iterations) need(it > 0, "icp.iterations must all be positive");
  need(icp_max_distance > 0.0, "icp.max_distance must be positive");
  need(icp_max_angle_deg > 0.0 && icp_max_angle_deg <= 180.0, "icp.max_angle_deg must be in (0, 180]");
  need(icp_min_correspondences >= 6, "icp.min_correspondences must be >= 6");
  need(noise_sigma0 >= 0.0 && noise_sigma1 >= 0.0, "noise: sigma must be >= 0");
  need(noise_dropout >= 0.0 && noise_dropout <= 1.0, "noise.dropout must be in [0, 1]");
  need(trajectory == "orbit" || trajectory == "corridor",
       "input.trajectory must be 'orbit' or 'corridor'");
  need(frames >= 1, "input.frames must be >= 1");
  need(orbit_radius > 0.0, "input.orbit_radius must be positive");
  need(corridor_length >= 0.0, "input.corridor_length must be >= 0");
  need(max_depth >= 0.0, "input.max_depth must be >= 0");
  need(depth_scale > 0.0, "input.depth_scale must be positive");
  need(track || use_groundtruth, "icp.track = false requires input.use_groundtruth = true");
  return p;
}

void RunConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw_all(p);
}

PipelineOptions RunConfig::pipeline_options() const {
  validate();
  PipelineOptions o;
  o.intrinsics = camera;
  if (dynamic) {
    o.mode = LayoutMode::dynamic;
    o.dynamic.cell_size = d_l;
    o.dynamic.voxels_per_side = d_v;
    o.dynamic.max_live = static_cast<std::size_t>(n);
    o.dynamic.hysteresis = hysteresis;
  } else {
    o.mode = LayoutMode::static_grid;
    o.l = l;
    o.r = r;
    o.r_gpu = r_gpu;
  }
  o.tau_multiplier = tau_multiplier;
  o.max_weight = static_cast<float>(max_weight);
  o.budget.max_resident = static_cast<std::size_t>(max_resident);
  o.track = track;
  o.fatal_tracking_loss = fatal_tracking_loss;
  o.icp.pyramid_levels = icp_levels;
  o.icp.iterations = icp_iterations;
  o.icp.max_correspondence_distance = icp_max_distance;
  o.icp.max_normal_angle_deg = icp_max_angle_deg;
  o.icp.min_correspondences = icp_min_correspondences;
  return o;
}

NoiseModel RunConfig::noise() const { return {noise_sigma0, noise_sigma1, noise_dropout, seed}; }

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::vector<std::string> errors;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "unterminated section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    else if (key == "seed") key = "run.seed";
    try {
      base.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      errors.push_back(where + e.what());
    }
  }
  for (auto& p : base.problems()) errors.push_back(std::move(p));
  if (!errors.empty()) throw_all(errors);
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
  std::vector<std::string> errors;
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      errors.push_back("override '" + a + "': expected key=value");
      continue;
    }
    try {
      config.set(trim(std::string_view(a).substr(0, eq)), std::string_view(a).substr(eq + 1));
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  }
  for (auto& p : config.problems()) errors.push_back(std::move(p));
  if (!errors.empty()) throw_all(errors);
}

}  // namespace mvfusion
