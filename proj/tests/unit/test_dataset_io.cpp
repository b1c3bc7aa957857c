#include <doctest.h>

#include <png.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mvfusion/dataset_io.hpp"
#include "mvfusion/errors.hpp"

using namespace mvfusion;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_png8(const fs::path& p, int w, int h) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> data(static_cast<std::size_t>(w) * h, 100);
  REQUIRE(png_image_write_to_file(&img, p.c_str(), 0, data.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("16-bit PNG round trip and depth scaling") {
  TempDir dir("mvfusion_test_png");
  Image16 img{3, 2, {0, 1, 5000, 65535, 256, 12345}};
  write_png16(dir.path / "a.png", img);
  const Image16 back = read_png16(dir.path / "a.png");
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.pixels == img.pixels);

  const DepthFrame d = read_depth_png(dir.path / "a.png", 5000.0);
  CHECK(d.at(0, 0) == 0.0);
  CHECK(d.at(2, 0) == 1.0);
  CHECK(d.at(0, 1) == doctest::Approx(65535 / 5000.0));
  CHECK(d.valid_count() == 5);

  DepthFrame f(2, 1, {1.23456, 0.0});
  write_depth_png(dir.path / "b.png", f);
  CHECK(read_png16(dir.path / "b.png").pixels == std::vector<std::uint16_t>{6173, 0});
  DepthFrame too_far(1, 1, {14.0});
  CHECK_THROWS(write_depth_png(dir.path / "c.png", too_far));
}

TEST_CASE("PNG errors are load errors") {
  TempDir dir("mvfusion_test_png_bad");
  write_png8(dir.path / "eight.png", 4, 4);
  CHECK_THROWS_AS(read_png16(dir.path / "eight.png"), LoadError);
  spit(dir.path / "text.png", "not a png at all");
  CHECK_THROWS_AS(read_png16(dir.path / "text.png"), LoadError);
  CHECK_THROWS_AS(read_png16(dir.path / "missing.png"), LoadError);
}

TEST_CASE("manifest validation") {
  TempDir dir("mvfusion_test_manifest");
  write_png16(dir.path / "a.png", Image16{1, 1, {5000}});
  write_png16(dir.path / "b.png", Image16{1, 1, {0}});

  CHECK_THROWS_AS(read_manifest(dir.path), LoadError);  // no depth.txt

  spit(dir.path / "depth.txt", "# comment\n1.0 a.png\n0.5 b.png\n");
  CHECK_THROWS_AS(read_manifest(dir.path), LoadError);

  spit(dir.path / "depth.txt", "1.0 a.png\n2.0 c.png\n");
  CHECK_THROWS_AS(read_manifest(dir.path), LoadError);

  spit(dir.path / "depth.txt", "1.0 a.png\nxyz b.png\n");
  CHECK_THROWS_AS(read_manifest(dir.path), LoadError);

  spit(dir.path / "depth.txt", "# only comments\n");
  CHECK_THROWS_AS(read_manifest(dir.path), LoadError);

  spit(dir.path / "depth.txt", "1.0 a.png\n2.0 b.png\n");
  const SequenceManifest m = read_manifest(dir.path);
  CHECK(m.frames.size() == 2);
  CHECK(m.groundtruth.empty());
  const auto frames = load_sequence(dir.path);
  CHECK(frames[0].depth.at(0, 0) == 1.0);
  CHECK(frames[1].depth.valid_count() == 0);
  CHECK_FALSE(frames[0].groundtruth.has_value());
}

TEST_CASE("ground truth association by nearest timestamp") {
  const std::vector<TimedPose> gt{{1.0, Pose::from_translation(Vector3d(1, 0, 0))},
                                  {2.0, Pose::from_translation(Vector3d(2, 0, 0))}};
  CHECK(associate(gt, 1.01)->translation().x() == 1.0);
  CHECK(associate(gt, 1.99)->translation().x() == 2.0);
  CHECK_FALSE(associate(gt, 1.5).has_value());
  CHECK_FALSE(associate({}, 1.0).has_value());
}

TEST_CASE("trajectory files round trip") {
  TempDir dir("mvfusion_test_traj");
  const std::vector<TimedPose> poses{
      {0.0, Pose::identity()},
      {0.5, Pose::from_axis_angle(Vector3d(1, 2, 3).normalized(), 1.1, Vector3d(0.1, -0.2, 0.3))}};
  write_trajectory(dir.path / "gt.txt", poses);
  const auto back = read_trajectory(dir.path / "gt.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[1].timestamp == 0.5);
  CHECK((back[1].pose.rotation() - poses[1].pose.rotation()).norm() < 1e-12);
  CHECK((back[1].pose.translation() - poses[1].pose.translation()).norm() < 1e-15);

  spit(dir.path / "bad.txt", "0 1 2 3 0 0 0\n");
  CHECK_THROWS_AS(read_trajectory(dir.path / "bad.txt"), LoadError);
  spit(dir.path / "zero.txt", "0 1 2 3 0 0 0 0\n");
  CHECK_THROWS_AS(read_trajectory(dir.path / "zero.txt"), LoadError);
}

TEST_CASE("synthetic sequences survive a trip through disk") {
  TempDir dir("mvfusion_test_seq");
  const CameraIntrinsics intr{40.0, 40.0, 16.0, 12.0, 32, 24};
  const SyntheticSequence seq = render_sequence(Scene::preset("sphere"),
                                                orbit_trajectory(Vector3d(0, 0, 0.8), 0.8, 5), intr);
  write_sequence(dir.path, seq);
  CHECK(fs::exists(dir.path / "depth" / "000004.png"));
  SequenceReader reader(dir.path);
  CHECK(reader.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE_FALSE(reader.done());
    const LoadedFrame f = reader.next();
    CHECK(f.timestamp == doctest::Approx(i / 30.0));
    REQUIRE(f.groundtruth.has_value());
    CHECK((f.groundtruth->translation() - seq.poses[i].translation()).norm() < 1e-12);
    for (int y = 0; y < intr.height; ++y)
      for (int x = 0; x < intr.width; ++x)
        CHECK(std::abs(f.depth.at(x, y) - seq.frames[i].at(x, y)) <= 0.5 / 5000.0 + 1e-12);
  }
  CHECK(reader.done());
}

TEST_CASE("PLY layout") {
  TempDir dir("mvfusion_test_ply");
  PointCloud c;
  c.vertices = {{1.0, 2.0, 3.0}, {-0.1, 0.2, 1e-3}};
  c.normals = {{0, 0, 1}, {0.6, 0.8, 0}};
  write_ply(dir.path / "c.ply", c);
  const std::string bytes = slurp(dir.path / "c.ply");
  const std::string end = "end_header\n";
  const auto header_end = bytes.find(end);
  REQUIRE(header_end != std::string::npos);
  const std::string header = bytes.substr(0, header_end);
  CHECK(header.rfind("ply\nformat binary_little_endian 1.0\n", 0) == 0);
  CHECK(header.find("element vertex 2\n") != std::string::npos);
  for (const char* prop : {"x", "y", "z", "nx", "ny", "nz"})
    CHECK(header.find(std::string("property float ") + prop + "\n") != std::string::npos);
  CHECK(bytes.size() - header_end - end.size() == 48);

  float first[6];
  std::memcpy(first, bytes.data() + header_end + end.size(), sizeof first);
  CHECK(first[0] == 1.0f);
  CHECK(first[2] == 3.0f);
  CHECK(first[5] == 1.0f);

  const PointCloud back = read_ply(dir.path / "c.ply");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 0; k < 3; ++k) {
      CHECK(back.vertices[i][k] == static_cast<double>(static_cast<float>(c.vertices[i][k])));
      CHECK(back.normals[i][k] == static_cast<double>(static_cast<float>(c.normals[i][k])));
    }

  CHECK_THROWS_AS(write_ply(dir.path / "e.ply", PointCloud{}), EmptyInputError);
  spit(dir.path / "t.ply", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_ply(dir.path / "t.ply"), FormatError);
  spit(dir.path / "a.ply", "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(read_ply(dir.path / "a.ply"), FormatError);
}

TEST_CASE("CSV outputs") {
  TempDir dir("mvfusion_test_csv");
  write_stats_csv(dir.path / "none.csv", {});
  CHECK(lines_of(dir.path / "none.csv") == std::vector<std::string>{"config_hash,vertices,mean,median,std,spf,slope,r2"});

  StatsRow row;
  row.config_hash = "abc";
  row.stats = ErrorStats{10, 0.0123456789, 0.01, 1234567.0};
  row.seconds_per_frame = 0.5;
  write_stats_csv(dir.path / "one.csv", {row});
  const auto lines = lines_of(dir.path / "one.csv");
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "abc,10,0.0123457,0.01,1.23457e+06,0.5,0,0");

  write_transfer_csv(dir.path / "t.csv", {{0, 3, 3, 96, 3, 0}});
  CHECK(lines_of(dir.path / "t.csv") ==
        std::vector<std::string>{"frame,uploads,downloads,bytes,live_count,resident_count", "0,3,3,96,3,0"});

  BenchResult bench;
  bench.rows = {{1, 0.25}, {2, 0.5}};
  write_bench_csv(dir.path / "b.csv", bench);
  CHECK(lines_of(dir.path / "b.csv") == std::vector<std::string>{"volumes,seconds_per_frame", "1,0.25", "2,0.5"});

  spit(dir.path / "file", "");
  CHECK_THROWS(write_stats_csv(dir.path / "file" / "x.csv", {}));
}

TEST_CASE("number formatting and hashing") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(1.0 / 3.0) == "0.333333");
  CHECK(format_number(-2.5e-7) == "-2.5e-07");
  CHECK(format_number(123456789.0) == "1.23457e+08");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
