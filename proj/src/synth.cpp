#include "mvfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mvfusion/errors.hpp"

namespace mvfusion {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::optional<double> smallest_positive_root(double a, double b, double c) {
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0 || a == 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double r0 = q / a;
  double r1 = q != 0.0 ? c / q : r0;
  if (r0 > r1) std::swap(r0, r1);
  if (r0 > 0.0) return r0;
  if (r1 > 0.0) return r1;
  return std::nullopt;
}

std::optional<double> hit_sphere(const Sphere& s, const Vector3d& o, const Vector3d& d) {
  const Vector3d oc = o - s.center;
  return smallest_positive_root(d.dot(d), 2.0 * oc.dot(d), oc.dot(oc) - s.radius * s.radius);
}

std::optional<double> hit_plane(const Plane& p, const Vector3d& o, const Vector3d& d) {
  const double denom = p.normal.dot(d);
  if (denom == 0.0) return std::nullopt;
  const double s = p.normal.dot(p.point - o) / denom;
  if (s > 0.0) return s;
  return std::nullopt;
}

std::optional<double> hit_box(const Box& b, const Vector3d& o, const Vector3d& d) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double lo = (b.min[a] - o[a]) / d[a];
    double hi = (b.max[a] - o[a]) / d[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  if (t0 > t1) return std::nullopt;
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

Primitive normalized(const Primitive& prim) {
  if (const auto* p = std::get_if<Plane>(&prim)) {
    const double n = p->normal.norm();
    if (!(n > 0.0) || !p->point.allFinite()) throw std::invalid_argument("plane: degenerate normal");
    return Plane{p->point, p->normal / n};
  }
  if (const auto* s = std::get_if<Sphere>(&prim)) {
    if (!(s->radius > 0.0) || !s->center.allFinite())
      throw std::invalid_argument("sphere: radius must be positive");
  }
  if (const auto* b = std::get_if<Box>(&prim)) {
    if (!(b->min.array() < b->max.array()).all())
      throw std::invalid_argument("box: min must be below max on every axis");
  }
  return prim;
}

}  // namespace

double signed_distance(const Primitive& prim, const Vector3d& p) {
  return std::visit(
      Overloaded{
          [&](const Sphere& s) { return (p - s.center).norm() - s.radius; },
          [&](const Plane& pl) { return pl.normal.dot(p - pl.point); },
          [&](const Box& b) {
            const Vector3d c = 0.5 * (b.min + b.max);
            const Vector3d half = 0.5 * (b.max - b.min);
            const Vector3d q = (p - c).cwiseAbs() - half;
            const double outside = q.cwiseMax(0.0).norm();
            const double inside = std::min(q.maxCoeff(), 0.0);
            return outside + inside;
          },
      },
      prim);
}

std::optional<double> intersect(const Primitive& prim, const Vector3d& origin, const Vector3d& dir) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return hit_sphere(s, origin, dir); },
                        [&](const Plane& p) { return hit_plane(p, origin, dir); },
                        [&](const Box& b) { return hit_box(b, origin, dir); },
                    },
                    prim);
}

Scene& Scene::add(const Primitive& prim) {
  primitives_.push_back(normalized(prim));
  return *this;
}

double Scene::signed_distance(const Vector3d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : primitives_) best = std::min(best, mvfusion::signed_distance(prim, p));
  return best;
}

double Scene::surface_distance(const Vector3d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& prim : primitives_)
    best = std::min(best, std::abs(mvfusion::signed_distance(prim, p)));
  return best;
}

std::optional<double> Scene::intersect(const Vector3d& origin, const Vector3d& dir) const {
  std::optional<double> best;
  for (const auto& prim : primitives_) {
    auto s = mvfusion::intersect(prim, origin, dir);
    if (s && (!best || *s < *best)) best = s;
  }
  return best;
}

Scene Scene::parse(std::string_view text) {
  Scene scene;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    std::vector<double> v;
    for (double x; ls >> x;) v.push_back(x);
    if (!ls.eof()) throw ConfigError("scene line " + std::to_string(lineno) + ": bad number");
    auto need = [&](std::size_t n) {
      if (v.size() != n)
        throw ConfigError("scene line " + std::to_string(lineno) + ": " + kind + " takes " +
                          std::to_string(n) + " numbers, got " + std::to_string(v.size()));
    };
    try {
      if (kind == "sphere") {
        need(4);
        scene.add(Sphere{{v[0], v[1], v[2]}, v[3]});
      } else if (kind == "plane") {
        need(6);
        scene.add(Plane{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
      } else if (kind == "box") {
        need(6);
        scene.add(Box{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
      } else {
        throw ConfigError("scene line " + std::to_string(lineno) + ": unknown primitive '" + kind + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scene line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scene;
}

Scene Scene::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open scene file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string Scene::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  auto vec = [&](const Vector3d& v) { out << ' ' << v.x() << ' ' << v.y() << ' ' << v.z(); };
  for (const auto& prim : primitives_) {
    std::visit(Overloaded{
                   [&](const Sphere& s) { out << "sphere"; vec(s.center); out << ' ' << s.radius; },
                   [&](const Plane& p) { out << "plane"; vec(p.point); vec(p.normal); },
                   [&](const Box& b) { out << "box"; vec(b.min); vec(b.max); },
               },
               prim);
    out << '\n';
  }
  return out.str();
}

Scene Scene::preset(std::string_view name) {
  Scene s;
  if (name == "sphere") {
    s.add(Sphere{{0.0, 0.0, 0.8}, 0.3});
  } else if (name == "corridor") {
    // Two 20 cm thick walls at x = +-1.5 running along +z.
    s.add(Box{{-1.7, -1.0, -2.0}, {-1.5, 1.0, 30.0}});
    s.add(Box{{1.5, -1.0, -2.0}, {1.7, 1.0, 30.0}});
  } else if (name == "room") {
    s.add(Plane{{0.0, 1.2, 0.0}, {0.0, -1.0, 0.0}});
    s.add(Plane{{0.0, 0.0, 3.0}, {0.0, 0.0, -1.0}});
    s.add(Sphere{{-0.4, 0.3, 1.6}, 0.25});
    s.add(Box{{0.2, 0.4, 1.4}, {0.7, 1.2, 1.9}});
  } else if (name != "empty") {
    throw ConfigError("unknown scene preset '" + std::string(name) + "'");
  }
  return s;
}

void NoiseModel::validate() const {
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0)) throw std::invalid_argument("noise: sigma must be >= 0");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw std::invalid_argument("noise: dropout must be in [0, 1]");
}

DepthFrame render_depth(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr,
                        double max_depth) {
  intr.validate();
  DepthFrame frame(intr.width, intr.height);
  if (scene.empty()) return frame;
  const Vector3d origin = pose.translation();
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      // Unit z in the camera frame, so the ray parameter is the z-depth.
      const Vector3d d_cam((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
      auto s = scene.intersect(origin, pose.rotate(d_cam));
      if (s && *s <= max_depth) frame.at(x, y) = *s;
    }
  }
  return frame;
}

DepthFrame add_noise(const DepthFrame& frame, const NoiseModel& model) {
  model.validate();
  DepthFrame out = frame;
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (double& d : out.data()) {
    // Draw both variates for every pixel so the stream does not depend on content.
    const double g = gauss(rng);
    const double u = uniform(rng);
    if (d <= 0.0) continue;
    if (u < model.dropout) {
      d = 0.0;
      continue;
    }
    const double noisy = d + (model.sigma0 + model.sigma1 * d * d) * g;
    d = noisy > 0.0 ? noisy : 0.0;
  }
  return out;
}

Pose look_at(const Vector3d& eye, const Vector3d& target) {
  const Vector3d z = (target - eye).normalized();
  Vector3d x = Vector3d::UnitY().cross(z);
  if (x.norm() < 1e-12) throw std::invalid_argument("look_at: view direction parallel to y");
  x.normalize();
  const Vector3d y = z.cross(x);
  Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

Trajectory orbit_trajectory(const Vector3d& center, double radius, int frames) {
  if (frames < 1) throw std::invalid_argument("orbit: frames must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("orbit: radius must be positive");
  Trajectory traj;
  traj.reserve(frames);
  for (int k = 0; k < frames; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / frames;
    const Vector3d eye = center + radius * Vector3d(std::sin(theta), 0.0, -std::cos(theta));
    traj.push_back(look_at(eye, center));
  }
  return traj;
}

Trajectory corridor_trajectory(double length, int frames) {
  if (frames < 1) throw std::invalid_argument("corridor: frames must be >= 1");
  if (!(length >= 0.0)) throw std::invalid_argument("corridor: length must be >= 0");
  Trajectory traj;
  traj.reserve(frames);
  for (int k = 0; k < frames; ++k) {
    const double z = frames > 1 ? length * k / (frames - 1) : 0.0;
    traj.push_back(Pose::from_translation({0.0, 0.0, z}));
  }
  return traj;
}

SyntheticSequence render_sequence(const Scene& scene, const Trajectory& trajectory,
                                  const CameraIntrinsics& intr,
                                  const std::optional<NoiseModel>& noise, double max_depth) {
  SyntheticSequence seq;
  seq.intrinsics = intr;
  seq.poses = trajectory;
  seq.frames.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    DepthFrame f = render_depth(scene, trajectory[i], intr, max_depth);
    if (noise) {
      NoiseModel m = *noise;
      m.seed += i;
      f = add_noise(f, m);
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace mvfusion
