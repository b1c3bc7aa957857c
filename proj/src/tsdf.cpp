#include "mvfusion/tsdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace mvfusion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Tolerance, in voxel units, for points that land a rounding error outside
// the sampling domain.
constexpr double kDomainEps = 1e-6;

struct Cell {
  std::array<int, 3> base;
  Vector3d frac;
  std::array<double, 8> v;  // index bit 0 = +x, bit 1 = +y, bit 2 = +z
};

std::optional<Cell> load_cell(const TsdfSubvolume& sv, const Vector3d& q) {
  const int r = sv.resolution();
  if (r < 2) return std::nullopt;
  const double hi = r - 1;
  Cell cell;
  for (int a = 0; a < 3; ++a) {
    double c = q[a];
    if (!(c >= -kDomainEps && c <= hi + kDomainEps)) return std::nullopt;
    c = std::clamp(c, 0.0, hi);
    int b = std::min(static_cast<int>(std::floor(c)), r - 2);
    cell.base[a] = b;
    cell.frac[a] = c - b;
  }
  for (int n = 0; n < 8; ++n) {
    const Voxel& vox = sv.at(cell.base[0] + (n & 1), cell.base[1] + ((n >> 1) & 1),
                             cell.base[2] + ((n >> 2) & 1));
    if (!(vox.weight > 0.0f)) return std::nullopt;
    cell.v[n] = vox.tsdf;
  }
  return cell;
}

bool intersect_box(const Eigen::AlignedBox3d& box, const Vector3d& o, const Vector3d& d,
                   double& t_near, double& t_far) {
  t_near = -kInf;
  t_far = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min()[a] || o[a] > box.max()[a]) return false;
      continue;
    }
    double t1 = (box.min()[a] - o[a]) / d[a];
    double t2 = (box.max()[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  return t_near <= t_far;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

auto tie_key(const Vector3d& v, const Vector3d& n) {
  return std::make_tuple(v.x(), v.y(), v.z(), n.x(), n.y(), n.z());
}

}  // namespace

void FusionParams::validate() const {
  if (!(truncation > 0.0)) throw std::invalid_argument("fusion: truncation must be positive");
  if (!(sample_weight > 0.0f)) throw std::invalid_argument("fusion: sample weight must be positive");
  if (!(max_weight >= sample_weight))
    throw std::invalid_argument("fusion: max weight must be at least the sample weight");
}

FusionParams FusionParams::for_voxel_size(double voxel_size, double tau_multiplier,
                                          float max_weight, float sample_weight) {
  return {tau_multiplier * voxel_size, max_weight, sample_weight};
}

TsdfSubvolume::TsdfSubvolume(const Index3& translation, int resolution, double voxel_size)
    : translation_(translation), resolution_(resolution), voxel_size_(voxel_size) {
  if (resolution < 2) throw std::invalid_argument("subvolume: resolution must be at least 2");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("subvolume: voxel size must be positive");
  voxels_.resize(static_cast<std::size_t>(resolution) * resolution * resolution);
}

Vector3d TsdfSubvolume::world_position(int x, int y, int z) const {
  // Global integer index first so that tiled and single volumes agree bitwise.
  return voxel_size_ * Vector3d(static_cast<double>(x + translation_.x()),
                                static_cast<double>(y + translation_.y()),
                                static_cast<double>(z + translation_.z()));
}

Eigen::AlignedBox3d TsdfSubvolume::sample_bounds() const {
  Vector3d lo = voxel_size_ * translation_.cast<double>();
  Vector3d hi = voxel_size_ * (translation_.cast<double>() + Vector3d::Constant(resolution_ - 1));
  return {lo, hi};
}

Vector3d TsdfSubvolume::to_local(const Vector3d& world) const {
  return world / voxel_size_ - translation_.cast<double>();
}

void TsdfSubvolume::reset() { std::fill(voxels_.begin(), voxels_.end(), Voxel{}); }

RayMap::RayMap(int w, int h)
    : width(w),
      height(h),
      vertices(static_cast<std::size_t>(w) * h, Vector3d::Zero()),
      normals(static_cast<std::size_t>(w) * h, Vector3d::Zero()),
      distance(static_cast<std::size_t>(w) * h, kInf) {}

void RayMap::reset() {
  std::fill(vertices.begin(), vertices.end(), Vector3d::Zero());
  std::fill(normals.begin(), normals.end(), Vector3d::Zero());
  std::fill(distance.begin(), distance.end(), kInf);
}

std::size_t RayMap::valid_count() const {
  std::size_t n = 0;
  for (double d : distance) n += std::isfinite(d);
  return n;
}

void RayMap::offer(std::size_t i, double dist, const Vector3d& vertex, const Vector3d& normal) {
  if (dist < distance[i] ||
      (dist == distance[i] && tie_key(vertex, normal) < tie_key(vertices[i], normals[i]))) {
    distance[i] = dist;
    vertices[i] = vertex;
    normals[i] = normal;
  }
}

VertexNormalMap RayMap::to_vertex_normal_map() const {
  VertexNormalMap map(width, height);
  for (std::size_t i = 0; i < distance.size(); ++i) {
    if (!valid(i)) continue;
    map.vertices[i] = vertices[i];
    map.normals[i] = normals[i];
    map.vertex_valid[i] = 1;
    map.normal_valid[i] = 1;
  }
  return map;
}

void PointCloud::append(const PointCloud& other) {
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  normals.insert(normals.end(), other.normals.begin(), other.normals.end());
}

void integrate(TsdfSubvolume& subvol, const DepthFrame& frame, const Pose& pose,
               const CameraIntrinsics& intr, const FusionParams& params) {
  params.validate();
  if (frame.width() != intr.width || frame.height() != intr.height)
    throw std::invalid_argument("integrate: frame size does not match intrinsics");

  const Matrix3d world_to_cam = pose.rotation().transpose();
  const Vector3d cam_center = pose.translation();
  const Vector3d offset = -(world_to_cam * cam_center);
  const float tau = static_cast<float>(params.truncation);
  const double sw = params.sample_weight;
  const int r = subvol.resolution();

  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const Vector3d p = subvol.world_position(x, y, z);
        const Vector3d pc = world_to_cam * p + offset;
        auto pix = project(intr, pc);
        if (!pix) continue;
        const int px = static_cast<int>(std::floor((*pix).x() + 0.5));
        const int py = static_cast<int>(std::floor((*pix).y() + 0.5));
        if (px < 0 || py < 0 || px >= intr.width || py >= intr.height) continue;
        const double d = frame.at(px, py);
        if (!(d > 0.0)) continue;

        const double lambda = ray_length_factor(intr, (*pix).x(), (*pix).y());
        const double sdf = d - (p - cam_center).norm() / lambda;
        if (sdf < -params.truncation) continue;

        const float clamped = std::clamp(static_cast<float>(sdf), -tau, tau);
        Voxel& vox = subvol.at(x, y, z);
        const double w = vox.weight;
        const double value = (w * vox.tsdf + sw * clamped) / (w + sw);
        vox.tsdf = std::clamp(static_cast<float>(value), -tau, tau);
        vox.weight = static_cast<float>(std::min(w + sw, static_cast<double>(params.max_weight)));
      }
    }
  }
}

std::optional<double> trilinear_sample(const TsdfSubvolume& subvol, const Vector3d& q) {
  auto cell = load_cell(subvol, q);
  if (!cell) return std::nullopt;
  const auto& v = cell->v;
  const double fx = cell->frac.x(), fy = cell->frac.y(), fz = cell->frac.z();
  const double c00 = v[0] * (1 - fx) + v[1] * fx;
  const double c10 = v[2] * (1 - fx) + v[3] * fx;
  const double c01 = v[4] * (1 - fx) + v[5] * fx;
  const double c11 = v[6] * (1 - fx) + v[7] * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

std::optional<Vector3d> trilinear_gradient(const TsdfSubvolume& subvol, const Vector3d& q) {
  auto cell = load_cell(subvol, q);
  if (!cell) return std::nullopt;
  const auto& v = cell->v;
  const double fx = cell->frac.x(), fy = cell->frac.y(), fz = cell->frac.z();
  const double gx = (1 - fy) * (1 - fz) * (v[1] - v[0]) + fy * (1 - fz) * (v[3] - v[2]) +
                    (1 - fy) * fz * (v[5] - v[4]) + fy * fz * (v[7] - v[6]);
  const double gy = (1 - fx) * (1 - fz) * (v[2] - v[0]) + fx * (1 - fz) * (v[3] - v[1]) +
                    (1 - fx) * fz * (v[6] - v[4]) + fx * fz * (v[7] - v[5]);
  const double gz = (1 - fx) * (1 - fy) * (v[4] - v[0]) + fx * (1 - fy) * (v[5] - v[1]) +
                    (1 - fx) * fy * (v[6] - v[2]) + fx * fy * (v[7] - v[3]);
  return Vector3d(gx, gy, gz);
}

void raycast(const TsdfSubvolume& subvol, const Pose& pose, const CameraIntrinsics& intr,
             RayMap& raymap, const FusionParams& params, const RaycastParams& ray) {
  if (raymap.width != intr.width || raymap.height != intr.height)
    throw std::invalid_argument("raycast: raymap size does not match intrinsics");

  const Eigen::AlignedBox3d box = subvol.sample_bounds();
  const Vector3d origin = pose.translation();
  const double tau = params.truncation;
  // Samples sit on a lattice of fine steps measured from the camera center, so
  // overlapping subvolumes sample the same points once they refine.
  const double fine = ray.fine_step * subvol.voxel_size();
  const auto coarse_mult =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(ray.coarse_step * tau / fine)));
  const double coarse_threshold = ray.coarse_threshold * tau;

  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const std::size_t i = raymap.index(x, y);
      const Vector3d dir =
          pose.rotate(Vector3d((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0).normalized());
      double t_near, t_far;
      if (!intersect_box(box, origin, dir, t_near, t_far)) continue;
      t_near = std::max(t_near, 0.0);
      if (t_near > t_far || t_near > raymap.distance[i]) continue;

      auto sample = [&](std::int64_t k) {
        return trilinear_sample(subvol, subvol.to_local(origin + (static_cast<double>(k) * fine) * dir));
      };

      // Only lattice points inside the box are sampled. The hit is the first
      // pair (k, k + 1) of observed samples going from positive to non-positive;
      // coarse steps skip an interval only when both its ends are observed and
      // far from the surface.
      std::int64_t k = static_cast<std::int64_t>(std::ceil(t_near / fine));
      const auto k_last = static_cast<std::int64_t>(std::floor(t_far / fine));
      if (k > k_last) continue;
      std::optional<double> f_prev = sample(k);
      while (k < k_last) {
        if (f_prev && *f_prev > coarse_threshold) {
          const std::int64_t kc = std::min((floor_div(k, coarse_mult) + 1) * coarse_mult, k_last);
          if (kc > k + 1) {
            std::optional<double> f_c = sample(kc);
            if (f_c && *f_c > coarse_threshold) {
              k = kc;
              f_prev = f_c;
              if (static_cast<double>(k) * fine > raymap.distance[i]) break;
              continue;
            }
          }
        }
        std::optional<double> f_next = sample(k + 1);
        if (f_prev && f_next && *f_prev > 0.0 && *f_next <= 0.0) {
          double lo = static_cast<double>(k) * fine, hi = static_cast<double>(k + 1) * fine;
          double f_lo = *f_prev, f_hi = *f_next;
          for (int it = 0; it < 80 && hi - lo > ray.refine_tolerance; ++it) {
            const double mid = 0.5 * (lo + hi);
            auto f_mid = trilinear_sample(subvol, subvol.to_local(origin + mid * dir));
            if (!f_mid) break;
            if (*f_mid > 0.0) {
              lo = mid;
              f_lo = *f_mid;
            } else {
              hi = mid;
              f_hi = *f_mid;
            }
          }
          const double t_hit = lo + (hi - lo) * f_lo / (f_lo - f_hi);
          const Vector3d vertex = origin + t_hit * dir;
          auto grad = trilinear_gradient(subvol, subvol.to_local(vertex));
          if (grad && grad->norm() > 0.0) raymap.offer(i, t_hit, vertex, grad->normalized());
          break;
        }
        ++k;
        f_prev = f_next;
        if (static_cast<double>(k) * fine > raymap.distance[i]) break;
      }
    }
  }
}

PointCloud extract_points(const TsdfSubvolume& subvol) {
  PointCloud cloud;
  const int r = subvol.resolution();
  const double vs = subvol.voxel_size();
  const Vector3d shift = subvol.translation().cast<double>();

  auto observed = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < r && y < r && z < r && subvol.at(x, y, z).weight > 0.0f;
  };

  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        if (!observed(x, y, z)) continue;
        const double v = subvol.at(x, y, z).tsdf;
        const std::array<int, 3> p{x, y, z};
        double best_f = kInf;
        int best_axis = -1;
        double best_vn = 0.0;
        for (int a = 0; a < 3; ++a) {
          std::array<int, 3> n = p;
          ++n[a];
          if (!observed(n[0], n[1], n[2])) continue;
          const double vn = subvol.at(n[0], n[1], n[2]).tsdf;
          if ((v < 0.0) == (vn < 0.0)) continue;
          const double f = v / (v - vn);
          if (f < best_f) {
            best_f = f;
            best_axis = a;
            best_vn = vn;
          }
        }
        if (best_axis < 0) continue;

        Vector3d local(x, y, z);
        local[best_axis] += best_f;

        Vector3d grad = Vector3d::Zero();
        for (int a = 0; a < 3; ++a) {
          std::array<int, 3> lo = p, hi = p;
          --lo[a];
          ++hi[a];
          const bool has_lo = observed(lo[0], lo[1], lo[2]);
          const bool has_hi = observed(hi[0], hi[1], hi[2]);
          const double v_lo = has_lo ? subvol.at(lo[0], lo[1], lo[2]).tsdf : v;
          const double v_hi = has_hi ? subvol.at(hi[0], hi[1], hi[2]).tsdf : v;
          if (has_lo && has_hi)
            grad[a] = 0.5 * (v_hi - v_lo);
          else
            grad[a] = v_hi - v_lo;
        }
        if (!(grad.norm() > 0.0)) {
          grad.setZero();
          grad[best_axis] = best_vn > v ? 1.0 : -1.0;
        }
        cloud.vertices.push_back(vs * (local + shift));
        cloud.normals.push_back(grad.normalized());
      }
    }
  }
  return cloud;
}

}  // namespace mvfusion
