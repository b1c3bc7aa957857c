#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "mvfusion/geometry.hpp"
#include "mvfusion/tsdf.hpp"

namespace mvfusion {

/// Integer cell of the subvolume lattice. Ordered lexicographically (x, y, z).
struct LatticeKey {
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const LatticeKey&) const = default;
};

/// The (h_l, h_r, h_t) triple that fully describes a subvolume's placement.
struct VolumeParams {
  Index3 translation = Index3::Zero();
  int resolution = 0;
  double voxel_size = 0.0;

  double side_length() const { return voxel_size * resolution; }
  bool operator==(const VolumeParams&) const = default;
};

enum class Residency { resident, host, disk };

const char* to_string(Residency r);

struct VolumeBudget {
  std::size_t max_resident = 1;
  std::size_t max_live = std::numeric_limits<std::size_t>::max();
};

struct TransferCounters {
  std::uint64_t uploads = 0;
  std::uint64_t downloads = 0;
  std::uint64_t bytes_uploaded = 0;
  std::uint64_t bytes_downloaded = 0;
  std::uint64_t disk_writes = 0;
  std::uint64_t disk_reads = 0;
  std::uint64_t disk_bytes_written = 0;
  std::uint64_t disk_bytes_read = 0;

  TransferCounters operator-(const TransferCounters& o) const;
};

/// The live set H. Each subvolume lives in exactly one tier: resident (the
/// bounded fast tier), host memory, or a spill file on disk. Moving data
/// between resident and host copies the voxel payload and is counted as an
/// upload or download.
class VolumeSet {
 public:
  VolumeSet(VolumeBudget budget, FusionParams fusion);

  VolumeSet(VolumeSet&&) = default;
  VolumeSet& operator=(VolumeSet&&) = default;

  const VolumeBudget& budget() const { return budget_; }
  const FusionParams& fusion() const { return fusion_; }

  /// New zero-initialised subvolume in the host tier. Throws std::invalid_argument
  /// for a duplicate key, a duplicate translation, or when |H| would exceed max_live.
  void insert(const LatticeKey& key, const VolumeParams& params);
  /// Adds a volume read from a spill file; it stays on disk until acquired or loaded.
  void adopt_spill_file(const LatticeKey& key, const std::filesystem::path& path);
  /// Drops the volume and returns its extracted point cloud.
  PointCloud remove(const LatticeKey& key);

  bool contains(const LatticeKey& key) const { return entries_.count(key) > 0; }
  bool has_translation(const Index3& t) const { return translations_.count({t.x(), t.y(), t.z()}) > 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t resident_count() const { return resident_.size(); }
  std::vector<LatticeKey> keys() const;
  Residency residency(const LatticeKey& key) const;
  const VolumeParams& params(const LatticeKey& key) const;
  /// Total voxels over all volumes ever inserted into this set.
  std::uint64_t allocated_voxels() const { return allocated_voxels_; }

  /// Brings the volume into the resident tier, demoting the least recently
  /// used resident volume first if the tier is full. Throws LookupError.
  TsdfSubvolume& acquire(const LatticeKey& key);
  /// Downloads a resident volume back to host memory.
  void release(const LatticeKey& key);
  /// Writes a host-tier volume to `path` and frees its memory. Returns bytes written.
  std::size_t spill(const LatticeKey& key, const std::filesystem::path& path);
  /// Reads a spilled volume back into host memory. Returns bytes read.
  std::size_t load(const LatticeKey& key);

  /// Read-only copy of the voxel data from whichever tier holds it (no transfer counted).
  TsdfSubvolume snapshot(const LatticeKey& key) const;
  PointCloud extract(const LatticeKey& key) const;

  const TransferCounters& counters() const { return counters_; }

 private:
  struct Entry {
    VolumeParams params;
    Residency state = Residency::host;
    TsdfSubvolume host;  // empty storage unless state == host
    std::filesystem::path spill_path;
    std::uint64_t last_use = 0;
  };

  Entry& entry(const LatticeKey& key);
  const Entry& entry(const LatticeKey& key) const;
  TsdfSubvolume read_spill(const Entry& e) const;
  void demote_lru();

  VolumeBudget budget_;
  FusionParams fusion_;
  std::map<LatticeKey, Entry> entries_;
  std::map<LatticeKey, TsdfSubvolume> resident_;
  std::set<std::array<std::int64_t, 3>> translations_;
  TransferCounters counters_;
  std::uint64_t clock_ = 0;
  std::uint64_t allocated_voxels_ = 0;
};

/// Static cube of subvolumes with the composite back-center voxel at the origin.
struct GridLayout {
  int requested_r = 0;
  int effective_r = 0;  // rounded up to a multiple of r_gpu
  int per_axis = 0;
  double voxel_size = 0.0;
  std::vector<std::pair<LatticeKey, VolumeParams>> volumes;

  bool rounded_up() const { return effective_r != requested_r; }
};

/// Each of the (r / r_gpu)^3 subvolumes has r_gpu + 2 voxels per side so
/// neighbours share two voxel planes.
GridLayout plan_grid(double l, int r, int r_gpu);

struct GridInit {
  VolumeSet volumes;
  GridLayout layout;
};

/// plan_grid + a populated VolumeSet. Fusion params default to tau = 4 voxels.
GridInit init_grid(double l, int r, int r_gpu, VolumeBudget budget = {},
                   std::optional<FusionParams> fusion = std::nullopt);

/// Lattice parameters of the dynamic allocator: cells of physical pitch
/// `cell_size` (d_l), subvolumes of `voxels_per_side` (d_v) voxels placed at
/// h_t = k (d_v - 2), at most `max_live` (n) live at once.
struct DynamicGrid {
  double cell_size = 1.0;
  int voxels_per_side = 64;
  std::size_t max_live = 8;
  double hysteresis = 1.5;

  void validate() const;
  double voxel_size() const { return cell_size / (voxels_per_side - 2); }
  VolumeParams params_for(const LatticeKey& key) const;
};

/// Lattice key for h_t = k * spacing.
LatticeKey key_for_point(const Vector3d& p, double cell_size);

struct EndpointHistogram {
  std::map<LatticeKey, std::uint64_t> counts;

  std::uint64_t count(const LatticeKey& key) const;
  std::uint64_t total() const;
};

/// Bins each valid pixel's ray endpoint, the measured point in the global
/// frame (its distance from the camera center is depth times the ray length
/// factor), into the lattice cell floor(e / cell_size).
EndpointHistogram bin_endpoints(const DepthFrame& frame, const Pose& pose,
                                const CameraIntrinsics& intr, double cell_size);

struct VolumeCandidate {
  LatticeKey key;
  VolumeParams params;
};

/// Insertion hook f and removal hook g.
class AllocationPolicy {
 public:
  virtual ~AllocationPolicy() = default;
  /// f(H, L, c(L)): volumes to mark for addition.
  virtual std::vector<VolumeCandidate> propose_additions(const VolumeSet& live,
                                                         const EndpointHistogram& hist) = 0;
  /// g(h, ...): whether live volume `key` should be removed.
  virtual bool should_remove(const LatticeKey& key, const VolumeSet& live,
                             const EndpointHistogram& hist,
                             std::span<const VolumeCandidate> marked) = 0;
};

/// Keeps the n cells with the largest endpoint counts. A new cell replaces
/// the weakest live one only if its count exceeds hysteresis x that count.
class TopEndpointPolicy : public AllocationPolicy {
 public:
  explicit TopEndpointPolicy(DynamicGrid grid);

  std::vector<VolumeCandidate> propose_additions(const VolumeSet& live,
                                                 const EndpointHistogram& hist) override;
  bool should_remove(const LatticeKey& key, const VolumeSet& live, const EndpointHistogram& hist,
                     std::span<const VolumeCandidate> marked) override;

  const DynamicGrid& grid() const { return grid_; }

 private:
  DynamicGrid grid_;
  std::set<LatticeKey> planned_removals_;
};

struct AllocationResult {
  std::vector<LatticeKey> added;
  std::vector<LatticeKey> removed;
};

/// Runs f, then g over H, cancels add/remove pairs with identical parameters,
/// extracts removed volumes into `cloud_store`, and inserts the additions.
AllocationResult update_allocation(VolumeSet& set, const EndpointHistogram& hist,
                                   AllocationPolicy& policy, PointCloud& cloud_store);

/// acquire -> integrate -> raycast -> release for one volume.
void volume_update(VolumeSet& set, const LatticeKey& key, const DepthFrame& frame,
                   const Pose& pose, const CameraIntrinsics& intr, RayMap& raymap,
                   const RaycastParams& ray = {});

}  // namespace mvfusion
