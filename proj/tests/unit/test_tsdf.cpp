#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mvfusion/synth.hpp"
#include "mvfusion/tsdf.hpp"

using namespace mvfusion;

namespace {

CameraIntrinsics small_camera() { return {100.0, 100.0, 32.0, 24.0, 64, 48}; }

DepthFrame constant_frame(const CameraIntrinsics& intr, double depth) {
  DepthFrame f(intr.width, intr.height);
  for (double& d : f.data()) d = depth;
  return f;
}

FusionParams params_with_tau(double tau) {
  FusionParams p;
  p.truncation = tau;
  return p;
}

double angle_deg(const Vector3d& a, const Vector3d& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

// Volume whose voxel column (half, half, k) lies on the optical axis.
TsdfSubvolume axis_volume(int resolution, double vs, double z_start) {
  return TsdfSubvolume(Index3(-resolution / 2, -resolution / 2, std::llround(z_start / vs)), resolution, vs);
}

}  // namespace

TEST_CASE("subvolume geometry") {
  const TsdfSubvolume v(Index3(-2, 3, 10), 4, 0.5);
  CHECK(v.voxel_count() == 64);
  CHECK(v.side_length() == doctest::Approx(2.0));
  CHECK((v.world_position(1, 0, 2) - Vector3d(-0.5, 1.5, 6.0)).norm() < 1e-12);
  CHECK((v.to_local(Vector3d(-0.5, 1.5, 6.0)) - Vector3d(1, 0, 2)).norm() < 1e-12);
  CHECK(v.index(1, 2, 3) == 1 + 4 * (2 + 4 * 3));
  CHECK_THROWS(TsdfSubvolume(Index3::Zero(), 0, 0.1));
  CHECK_THROWS(TsdfSubvolume(Index3::Zero(), 4, 0.0));
}

TEST_CASE("first observation and running weighted mean") {
  const auto intr = small_camera();
  TsdfSubvolume v(Index3(0, 0, 100), 2, 0.01);  // one voxel at (0, 0, 1.0)
  const auto params = params_with_tau(0.1);

  integrate(v, constant_frame(intr, 1.03), Pose::identity(), intr, params);
  CHECK(v.at(0, 0, 0).tsdf == doctest::Approx(0.03).epsilon(1e-5));
  CHECK(v.at(0, 0, 0).weight == 1.0f);

  v.at(0, 0, 0) = {0.06f, 2.0f};
  integrate(v, constant_frame(intr, 1.03), Pose::identity(), intr, params);
  CHECK(v.at(0, 0, 0).tsdf == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(v.at(0, 0, 0).weight == 3.0f);
}

TEST_CASE("truncation, skipping and the weight cap") {
  const auto intr = small_camera();
  TsdfSubvolume v(Index3(0, 0, 100), 2, 0.01);
  auto params = params_with_tau(0.1);
  params.max_weight = 3.0f;

  integrate(v, constant_frame(intr, 0.85), Pose::identity(), intr, params);  // sdf -0.15
  CHECK(v.at(0, 0, 0).weight == 0.0f);
  integrate(v, constant_frame(intr, 0.0), Pose::identity(), intr, params);  // no data
  CHECK(v.at(0, 0, 0).weight == 0.0f);

  for (int i = 0; i < 5; ++i) integrate(v, constant_frame(intr, 1.5), Pose::identity(), intr, params);
  CHECK(v.at(0, 0, 0).tsdf == doctest::Approx(0.1));
  CHECK(v.at(0, 0, 0).weight == 3.0f);

  // Inside the negative band the value is kept, clamped at -tau.
  integrate(v, constant_frame(intr, 0.95), Pose::identity(), intr, params);
  CHECK(v.at(0, 0, 0).tsdf == doctest::Approx((3 * 0.1 - 0.05) / 4).epsilon(1e-5));
  CHECK(v.at(0, 0, 0).weight == 3.0f);
}

TEST_CASE("voxels outside the image are untouched") {
  const auto intr = small_camera();
  TsdfSubvolume v(Index3(0, 0, -100), 2, 0.01);  // behind the camera
  integrate(v, constant_frame(intr, 1.0), Pose::identity(), intr, params_with_tau(0.1));
  CHECK(v.at(0, 0, 0).weight == 0.0f);
  TsdfSubvolume side(Index3(1000, 0, 100), 2, 0.01);  // far off to the side
  integrate(side, constant_frame(intr, 1.0), Pose::identity(), intr, params_with_tau(0.1));
  CHECK(side.at(0, 0, 0).weight == 0.0f);
}

TEST_CASE("plane at z = 2: zero crossing and raycast hit") {
  const CameraIntrinsics intr;  // 640x480, principal point on a pixel center
  const double vs = 0.02;
  TsdfSubvolume v = axis_volume(32, vs, 1.7);
  const auto params = FusionParams::for_voxel_size(vs);
  CHECK(params.truncation == doctest::Approx(4 * vs));
  for (int i = 0; i < 10; ++i) integrate(v, constant_frame(intr, 2.0), Pose::identity(), intr, params);

  // Linear zero crossing along the optical axis.
  const int c = 16;
  bool found = false;
  for (int z = 0; z + 1 < 32; ++z) {
    const Voxel a = v.at(c, c, z), b = v.at(c, c, z + 1);
    if (a.weight > 0 && b.weight > 0 && a.tsdf > 0 && b.tsdf <= 0) {
      const double za = v.world_position(c, c, z).z();
      const double zero = za + vs * a.tsdf / (a.tsdf - b.tsdf);
      CHECK(std::abs(zero - 2.0) <= vs / 4);
      found = true;
    }
  }
  CHECK(found);

  RayMap rm(intr.width, intr.height);
  raycast(v, Pose::identity(), intr, rm, params);
  const std::size_t center = rm.index(320, 240);
  REQUIRE(rm.valid(center));
  CHECK(std::abs(rm.vertices[center].z() - 2.0) <= vs / 2);
  CHECK(std::abs(rm.vertices[center].x()) < 1e-9);
  CHECK(rm.distance[center] == doctest::Approx(rm.vertices[center].norm()));
  CHECK(angle_deg(rm.normals[center], Vector3d(0, 0, -1)) < 2.0);
}

TEST_CASE("raycast of an empty subvolume leaves the raymap unchanged") {
  const auto intr = small_camera();
  TsdfSubvolume v = axis_volume(16, 0.05, 0.5);
  RayMap rm(intr.width, intr.height);
  rm.offer(5, 1.0, Vector3d(0, 0, 1), Vector3d(0, 0, -1));
  const RayMap before = rm;
  raycast(v, Pose::identity(), intr, rm, FusionParams::for_voxel_size(0.05));
  CHECK(rm.distance == before.distance);
  CHECK(rm.valid_count() == 1);
}

TEST_CASE("nearest hit wins regardless of raycast order") {
  const auto intr = small_camera();
  const double vs = 0.02;
  const auto params = FusionParams::for_voxel_size(vs);
  TsdfSubvolume near_vol(Index3(-20, -20, 80), 40, vs);  // z in [1.6, 2.38]
  TsdfSubvolume far_vol(Index3(-20, -20, 130), 40, vs);  // z in [2.6, 3.38]
  for (int i = 0; i < 3; ++i) {
    integrate(near_vol, constant_frame(intr, 2.0), Pose::identity(), intr, params);
    integrate(far_vol, constant_frame(intr, 3.0), Pose::identity(), intr, params);
  }
  const std::size_t center = static_cast<std::size_t>(24) * intr.width + 32;

  RayMap far_first(intr.width, intr.height), near_first(intr.width, intr.height);
  raycast(far_vol, Pose::identity(), intr, far_first, params);
  CHECK(far_first.distance[center] == doctest::Approx(3.0).epsilon(vs / 2 / 3.0));
  raycast(near_vol, Pose::identity(), intr, far_first, params);
  raycast(near_vol, Pose::identity(), intr, near_first, params);
  raycast(far_vol, Pose::identity(), intr, near_first, params);

  CHECK(std::abs(far_first.distance[center] - 2.0) <= vs / 2);
  CHECK(far_first.distance == near_first.distance);
  CHECK(far_first.vertices == near_first.vertices);
}

TEST_CASE("raymap offer keeps the minimum with a deterministic tie-break") {
  RayMap a(1, 1), b(1, 1);
  const Vector3d n(0, 0, -1);
  a.offer(0, 2.0, Vector3d(0, 0, 2), n);
  a.offer(0, 2.0, Vector3d(0, 1e-3, 2), n);
  b.offer(0, 2.0, Vector3d(0, 1e-3, 2), n);
  b.offer(0, 2.0, Vector3d(0, 0, 2), n);
  CHECK(a.vertices[0] == b.vertices[0]);
  a.offer(0, 3.0, Vector3d(0, 0, 3), n);
  CHECK(a.distance[0] == 2.0);
  a.offer(0, 1.0, Vector3d(0, 0, 1), n);
  CHECK(a.distance[0] == 1.0);
  a.reset();
  CHECK(a.valid_count() == 0);
}

TEST_CASE("trilinear interpolation") {
  TsdfSubvolume v(Index3::Zero(), 4, 0.1);
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) v.at(x, y, z) = {static_cast<float>(z - 1.5), 1.0f};

  CHECK(*trilinear_sample(v, Vector3d(1, 2, 3)) == doctest::Approx(1.5));
  CHECK(*trilinear_sample(v, Vector3d(0.3, 2.7, 1.5)) == doctest::Approx(0.0));
  CHECK(*trilinear_sample(v, Vector3d(2.2, 0.1, 0.25)) == doctest::Approx(-1.25));
  const Vector3d g = *trilinear_gradient(v, Vector3d(1.3, 1.1, 1.6));
  CHECK((g - Vector3d(0, 0, 1)).norm() < 1e-9);

  for (auto& vox : v.voxels()) vox = {0.25f, 1.0f};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 100; ++i) CHECK(*trilinear_sample(v, Vector3d(u(rng), u(rng), u(rng))) == doctest::Approx(0.25));

  CHECK_FALSE(trilinear_sample(v, Vector3d(3.5, 1, 1)).has_value());
  CHECK_FALSE(trilinear_sample(v, Vector3d(-0.1, 1, 1)).has_value());
  v.at(1, 1, 1).weight = 0.0f;
  CHECK_FALSE(trilinear_sample(v, Vector3d(0.5, 0.5, 0.5)).has_value());
  CHECK(trilinear_sample(v, Vector3d(2.5, 2.5, 2.5)).has_value());
}

TEST_CASE("extraction of an unobserved volume is empty") {
  const TsdfSubvolume v(Index3::Zero(), 8, 0.1);
  CHECK(extract_points(v).empty());
}

TEST_CASE("extracted sphere vertices lie on the sphere") {
  const double vs = 0.05;
  const int res = 64;
  TsdfSubvolume v(Index3(-res / 2, -res / 2, -res / 2), res, vs);
  const auto params = FusionParams::for_voxel_size(vs);
  Scene scene;
  scene.add(Sphere{Vector3d::Zero(), 1.0});
  const CameraIntrinsics intr{262.5, 262.5, 160.0, 120.0, 320, 240};
  const std::vector<Vector3d> eyes{{0, 0, -3}, {0, 0, 3}, {3, 0, 0}, {-3, 0, 0}, {0, 3, 0.01}, {0, -3, 0.01}};
  for (const Vector3d& eye : eyes) {
    const Pose pose = look_at(eye, Vector3d::Zero());
    integrate(v, render_depth(scene, pose, intr), pose, intr, params);
  }
  const PointCloud cloud = extract_points(v);
  REQUIRE(cloud.size() > 1000);
  CHECK(cloud.size() <= v.voxel_count());
  CHECK(cloud.normals.size() == cloud.size());
  double worst = 0.0, worst_normal = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    worst = std::max(worst, std::abs(cloud.vertices[i].norm() - 1.0));
    worst_normal = std::max(worst_normal, angle_deg(cloud.normals[i], cloud.vertices[i]));
    CHECK(std::abs(cloud.normals[i].norm() - 1.0) < 1e-9);
  }
  CHECK(worst <= vs);
  // Gradients of a projective field from six views are skewed near view seams,
  // but every normal still points out of the sphere.
  CHECK(worst_normal < 90.0);
}

TEST_CASE("point cloud append") {
  PointCloud a, b;
  a.vertices = {Vector3d(1, 0, 0)};
  a.normals = {Vector3d(0, 0, 1)};
  b = a;
  a.append(b);
  CHECK(a.size() == 2);
  CHECK(a.normals.size() == 2);
}
