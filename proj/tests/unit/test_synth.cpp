#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvfusion/synth.hpp"

using namespace mvfusion;

namespace {

const CameraIntrinsics kCamera{100.0, 100.0, 40.0, 30.0, 80, 60};

double angle_between(const Vector3d& a, const Vector3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

}  // namespace

TEST_CASE("frontal plane renders its z-depth everywhere") {
  Scene scene;
  scene.add(Plane{Vector3d(0, 0, 2), Vector3d(0, 0, -1)});
  const DepthFrame f = render_depth(scene, Pose::identity(), kCamera);
  for (double d : f.data()) CHECK(d == 2.0);
}

TEST_CASE("sphere depth at the center pixel") {
  Scene scene;
  scene.add(Sphere{Vector3d(0, 0, 3), 1.0});
  const DepthFrame f = render_depth(scene, Pose::identity(), kCamera);
  CHECK(f.at(40, 30) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.at(0, 0) == 0.0);  // the corner ray misses
}

TEST_CASE("empty scene renders nothing") {
  const DepthFrame f = render_depth(Scene::preset("empty"), Pose::identity(), kCamera);
  CHECK(f.valid_count() == 0);
}

TEST_CASE("max depth cuts far returns") {
  Scene scene;
  scene.add(Plane{Vector3d(0, 0, 5), Vector3d(0, 0, -1)});
  CHECK(render_depth(scene, Pose::identity(), kCamera, 4.0).valid_count() == 0);
  CHECK(render_depth(scene, Pose::identity(), kCamera, 6.0).valid_count() == kCamera.pixel_count());
}

TEST_CASE("rendering follows the camera pose") {
  Scene scene;
  scene.add(Plane{Vector3d(0, 0, 2), Vector3d(0, 0, -1)});
  const Pose back = Pose::from_translation(Vector3d(0.3, -0.2, -1.0));
  const DepthFrame f = render_depth(scene, back, kCamera);
  CHECK(f.at(10, 50) == doctest::Approx(3.0));
  // Turned 180 degrees the camera faces away from the plane.
  const Pose away = Pose::from_axis_angle(Vector3d::UnitY(), std::numbers::pi);
  CHECK(render_depth(scene, away, kCamera).valid_count() == 0);
}

TEST_CASE("primitive distances and intersections") {
  const Primitive box = Box{Vector3d(-1, -1, -1), Vector3d(1, 1, 1)};
  CHECK(signed_distance(box, Vector3d(0, 0, 0)) == doctest::Approx(-1.0));
  CHECK(signed_distance(box, Vector3d(3, 0, 0)) == doctest::Approx(2.0));
  CHECK(signed_distance(box, Vector3d(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(*intersect(box, Vector3d(0, 0, -5), Vector3d(0, 0, 1)) == doctest::Approx(4.0));
  CHECK(*intersect(box, Vector3d(0, 0, 0), Vector3d(0, 0, 1)) == doctest::Approx(1.0));  // from inside
  CHECK_FALSE(intersect(box, Vector3d(0, 3, -5), Vector3d(0, 0, 1)).has_value());

  const Primitive sphere = Sphere{Vector3d(0, 0, 0), 2.0};
  CHECK(signed_distance(sphere, Vector3d(0, 3, 0)) == doctest::Approx(1.0));
  CHECK(*intersect(sphere, Vector3d(0, 0, 0), Vector3d(1, 0, 0)) == doctest::Approx(2.0));
  CHECK_FALSE(intersect(sphere, Vector3d(0, 0, 5), Vector3d(0, 0, 1)).has_value());

  const Primitive plane = Plane{Vector3d(0, 1, 0), Vector3d(0, 1, 0)};
  CHECK(signed_distance(plane, Vector3d(5, 3, 2)) == doctest::Approx(2.0));
  CHECK_FALSE(intersect(plane, Vector3d(0, 0, 0), Vector3d(1, 0, 0)).has_value());
}

TEST_CASE("scene union and surface distance") {
  Scene scene;
  scene.add(Sphere{Vector3d(0, 0, 0), 1.0}).add(Sphere{Vector3d(3, 0, 0), 1.0});
  CHECK(scene.signed_distance(Vector3d(1.5, 0, 0)) == doctest::Approx(0.5));
  CHECK(scene.surface_distance(Vector3d(0.5, 0, 0)) == doctest::Approx(0.5));
  CHECK(scene.signed_distance(Vector3d(0.5, 0, 0)) == doctest::Approx(-0.5));
  CHECK_THROWS_AS(scene.add(Sphere{Vector3d::Zero(), -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(scene.add(Plane{Vector3d::Zero(), Vector3d::Zero()}), std::invalid_argument);
  CHECK_THROWS_AS(scene.add(Box{Vector3d(1, 1, 1), Vector3d(0, 2, 2)}), std::invalid_argument);
}

TEST_CASE("scene text format round trips") {
  const Scene scene = Scene::parse(
      "# demo\n"
      "sphere 0 0 3 1\n"
      "\n"
      "plane 0 0 5  0 0 -2\n"
      "box -1 -1 4 1 1 4.5\n");
  REQUIRE(scene.primitives().size() == 3);
  CHECK(std::get<Plane>(scene.primitives()[1]).normal == Vector3d(0, 0, -1));
  const Scene again = Scene::parse(scene.to_text());
  CHECK(again.to_text() == scene.to_text());
  CHECK_THROWS(Scene::parse("cone 1 2 3\n"));
  CHECK_THROWS(Scene::parse("sphere 1 2\n"));
  CHECK_THROWS(Scene::parse("sphere 1 2 3 x\n"));
  CHECK_THROWS(Scene::preset("nope"));
  CHECK_THROWS(Scene::load("/nonexistent/scene.txt"));
}

TEST_CASE("noise model") {
  DepthFrame flat(400, 250);
  for (double& d : flat.data()) d = 2.0;

  SUBCASE("zero noise is the identity") {
    CHECK(add_noise(flat, NoiseModel{}) == flat);
  }
  SUBCASE("same seed, same output; other seed, other output") {
    const NoiseModel m{0.005, 0.001, 0.1, 9};
    CHECK(add_noise(flat, m) == add_noise(flat, m));
    NoiseModel other = m;
    other.seed = 10;
    CHECK_FALSE(add_noise(flat, m) == add_noise(flat, other));
  }
  SUBCASE("sample standard deviation matches sigma") {
    const DepthFrame noisy = add_noise(flat, NoiseModel{0.005, 0.0, 0.0, 1});
    double sum = 0.0, sq = 0.0;
    const auto n = static_cast<double>(noisy.data().size());
    CHECK(n == 100000);
    for (double d : noisy.data()) sum += d - 2.0;
    const double mean = sum / n;
    for (double d : noisy.data()) sq += (d - 2.0 - mean) * (d - 2.0 - mean);
    const double std = std::sqrt(sq / (n - 1));
    CHECK(std::abs(std - 0.005) <= 0.05 * 0.005);
    CHECK(std::abs(mean) < 1e-4);
  }
  SUBCASE("depth-dependent sigma") {
    const DepthFrame noisy = add_noise(flat, NoiseModel{0.0, 0.002, 0.0, 1});
    double sq = 0.0;
    for (double d : noisy.data()) sq += (d - 2.0) * (d - 2.0);
    CHECK(std::sqrt(sq / 100000.0) == doctest::Approx(0.008).epsilon(0.05));
  }
  SUBCASE("dropout fraction and invalid pixels") {
    DepthFrame holes = flat;
    holes.at(0, 0) = 0.0;
    const DepthFrame noisy = add_noise(holes, NoiseModel{0.0, 0.0, 0.25, 3});
    CHECK(noisy.at(0, 0) == 0.0);
    const double kept = static_cast<double>(noisy.valid_count()) / 100000.0;
    CHECK(kept == doctest::Approx(0.75).epsilon(0.02));
  }
  SUBCASE("invalid models") {
    CHECK_THROWS(add_noise(flat, NoiseModel{-0.1, 0.0, 0.0, 0}));
    CHECK_THROWS(add_noise(flat, NoiseModel{0.0, 0.0, 1.5, 0}));
  }
}

TEST_CASE("look_at points the optical axis at the target") {
  const Pose p = look_at(Vector3d(1, 2, 3), Vector3d(-1, 0, 5));
  CHECK((p.rotate(Vector3d::UnitZ()) - Vector3d(-1, -1, 1).normalized()).norm() < 1e-12);
  CHECK(p.orthonormality_error() < 1e-12);
  CHECK(p.rotation().determinant() == doctest::Approx(1.0));
  CHECK((p.translation() - Vector3d(1, 2, 3)).norm() < 1e-15);
}

TEST_CASE("orbit trajectory") {
  const Vector3d center(0, 0, 0.8);
  const Trajectory t = orbit_trajectory(center, 2.0, 4);
  REQUIRE(t.size() == 4);
  for (int i = 0; i < 4; ++i) {
    const Vector3d eye = t[i].translation();
    CHECK((eye - center).norm() == doctest::Approx(2.0));
    CHECK(std::abs(eye.y() - center.y()) < 1e-12);
    const Vector3d axis = t[i].rotate(Vector3d::UnitZ());
    CHECK((axis - (center - eye).normalized()).norm() < 1e-9);
    const Vector3d next = t[(i + 1) % 4].translation();
    CHECK(angle_between(eye - center, next - center) == doctest::Approx(std::numbers::pi / 2));
  }
  CHECK((t[0].translation() - Vector3d(0, 0, -1.2)).norm() < 1e-12);

  const Trajectory t7 = orbit_trajectory(center, 1.0, 7);
  for (int i = 0; i + 1 < 7; ++i)
    CHECK((t7[i].inverse() * t7[i + 1]).rotation_angle() == doctest::Approx(2 * std::numbers::pi / 7));
  CHECK_THROWS(orbit_trajectory(center, 1.0, 0));
}

TEST_CASE("corridor trajectory") {
  const Trajectory t = corridor_trajectory(10.0, 11);
  REQUIRE(t.size() == 11);
  for (int k = 0; k <= 10; ++k) {
    CHECK((t[k].translation() - Vector3d(0, 0, k)).norm() < 1e-12);
    CHECK(t[k].rotation() == Matrix3d::Identity());
  }
  CHECK(corridor_trajectory(5.0, 1).size() == 1);
}

TEST_CASE("render_sequence seeds noise per frame") {
  const Scene scene = Scene::preset("sphere");
  const Trajectory traj = orbit_trajectory(Vector3d(0, 0, 0.8), 0.8, 3);
  const NoiseModel noise{0.002, 0.0, 0.0, 5};
  const SyntheticSequence a = render_sequence(scene, traj, kCamera, noise);
  const SyntheticSequence b = render_sequence(scene, traj, kCamera, noise);
  REQUIRE(a.frames.size() == 3);
  CHECK(a.frames == b.frames);
  NoiseModel frame1 = noise;
  frame1.seed = noise.seed + 1;
  CHECK(a.frames[1] == add_noise(render_depth(scene, traj[1], kCamera), frame1));
}

TEST_CASE("presets") {
  const Scene corridor = Scene::preset("corridor");
  // Two walls with free space between them along the walk.
  CHECK(corridor.signed_distance(Vector3d(0, 0, 5)) > 1.0);
  CHECK(corridor.signed_distance(Vector3d(1.6, 0, 5)) < 0.0);
  CHECK(corridor.signed_distance(Vector3d(-1.6, 0, 5)) < 0.0);
  const Scene sphere = Scene::preset("sphere");
  CHECK(sphere.signed_distance(Vector3d(0, 0, 0.8)) == doctest::Approx(-0.3));
  CHECK_FALSE(Scene::preset("room").empty());
}
