#include "mvfusion/volume_manager.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "mvfusion/errors.hpp"
#include "mvfusion/subvolume_io.hpp"

namespace mvfusion {

namespace {

std::string describe(const LatticeKey& k) {
  return "(" + std::to_string(k.x) + ", " + std::to_string(k.y) + ", " + std::to_string(k.z) + ")";
}

std::size_t payload_bytes(const VolumeParams& p) {
  return static_cast<std::size_t>(p.resolution) * p.resolution * p.resolution * sizeof(Voxel);
}

}  // namespace

const char* to_string(Residency r) {
  switch (r) {
    case Residency::resident: return "resident";
    case Residency::host: return "host";
    case Residency::disk: return "disk";
  }
  return "unknown";
}

TransferCounters TransferCounters::operator-(const TransferCounters& o) const {
  return {uploads - o.uploads,
          downloads - o.downloads,
          bytes_uploaded - o.bytes_uploaded,
          bytes_downloaded - o.bytes_downloaded,
          disk_writes - o.disk_writes,
          disk_reads - o.disk_reads,
          disk_bytes_written - o.disk_bytes_written,
          disk_bytes_read - o.disk_bytes_read};
}

VolumeSet::VolumeSet(VolumeBudget budget, FusionParams fusion)
    : budget_(budget), fusion_(fusion) {
  if (budget_.max_resident < 1) throw std::invalid_argument("volume set: max_resident must be >= 1");
  if (budget_.max_live < 1) throw std::invalid_argument("volume set: max_live must be >= 1");
  fusion_.validate();
}

VolumeSet::Entry& VolumeSet::entry(const LatticeKey& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw LookupError("no live subvolume at lattice key " + describe(key));
  return it->second;
}

const VolumeSet::Entry& VolumeSet::entry(const LatticeKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw LookupError("no live subvolume at lattice key " + describe(key));
  return it->second;
}

void VolumeSet::insert(const LatticeKey& key, const VolumeParams& params) {
  if (contains(key)) throw std::invalid_argument("volume set: key " + describe(key) + " already live");
  if (has_translation(params.translation))
    throw std::invalid_argument("volume set: translation already used by another subvolume");
  if (entries_.size() >= budget_.max_live)
    throw std::invalid_argument("volume set: live volume cap reached");
  Entry e;
  e.params = params;
  e.host = TsdfSubvolume(params.translation, params.resolution, params.voxel_size);
  e.state = Residency::host;
  entries_.emplace(key, std::move(e));
  translations_.insert({params.translation.x(), params.translation.y(), params.translation.z()});
  allocated_voxels_ += static_cast<std::uint64_t>(params.resolution) * params.resolution * params.resolution;
}

void VolumeSet::adopt_spill_file(const LatticeKey& key, const std::filesystem::path& path) {
  SpilledSubvolume spilled = read_subvolume(path);
  VolumeParams params{spilled.volume.translation(), spilled.volume.resolution(),
                      spilled.volume.voxel_size()};
  insert(key, params);
  Entry& e = entry(key);
  e.host = TsdfSubvolume();
  e.state = Residency::disk;
  e.spill_path = path;
}

PointCloud VolumeSet::remove(const LatticeKey& key) {
  PointCloud cloud = extract(key);
  const Entry& e = entry(key);
  translations_.erase({e.params.translation.x(), e.params.translation.y(), e.params.translation.z()});
  resident_.erase(key);
  entries_.erase(key);
  return cloud;
}

std::vector<LatticeKey> VolumeSet::keys() const {
  std::vector<LatticeKey> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

Residency VolumeSet::residency(const LatticeKey& key) const { return entry(key).state; }

const VolumeParams& VolumeSet::params(const LatticeKey& key) const { return entry(key).params; }

void VolumeSet::demote_lru() {
  auto victim = resident_.end();
  std::uint64_t oldest = std::numeric_limits<std::uint64_t>::max();
  for (auto it = resident_.begin(); it != resident_.end(); ++it) {
    std::uint64_t used = entries_.at(it->first).last_use;
    if (used < oldest) {
      oldest = used;
      victim = it;
    }
  }
  if (victim != resident_.end()) release(victim->first);
}

TsdfSubvolume& VolumeSet::acquire(const LatticeKey& key) {
  Entry& e = entry(key);
  e.last_use = ++clock_;
  if (auto it = resident_.find(key); it != resident_.end()) return it->second;

  if (e.state == Residency::disk) load(key);
  while (resident_.size() >= budget_.max_resident) demote_lru();

  auto [it, _] = resident_.emplace(key, e.host);
  e.state = Residency::resident;
  ++counters_.uploads;
  counters_.bytes_uploaded += payload_bytes(e.params);
  return it->second;
}

void VolumeSet::release(const LatticeKey& key) {
  Entry& e = entry(key);
  auto it = resident_.find(key);
  if (it == resident_.end()) throw LookupError("volume set: " + describe(key) + " is not resident");
  const auto src = it->second.voxels();
  std::copy(src.begin(), src.end(), e.host.voxels().begin());
  resident_.erase(it);
  e.state = Residency::host;
  ++counters_.downloads;
  counters_.bytes_downloaded += payload_bytes(e.params);
}

std::size_t VolumeSet::spill(const LatticeKey& key, const std::filesystem::path& path) {
  Entry& e = entry(key);
  if (e.state != Residency::host)
    throw std::logic_error("volume set: only host-tier volumes can be spilled (" + describe(key) +
                           " is " + to_string(e.state) + ")");
  const std::size_t bytes = write_subvolume(path, e.host, fusion_);
  e.host = TsdfSubvolume();
  e.state = Residency::disk;
  e.spill_path = path;
  ++counters_.disk_writes;
  counters_.disk_bytes_written += bytes;
  return bytes;
}

TsdfSubvolume VolumeSet::read_spill(const Entry& e) const {
  SpilledSubvolume spilled = read_subvolume(e.spill_path);
  if (spilled.volume.resolution() != e.params.resolution ||
      spilled.volume.translation() != e.params.translation)
    throw FormatError("spill: " + e.spill_path.string() + " does not match its subvolume");
  // Keep the exact voxel size from the live parameters; the file stores h_l.
  TsdfSubvolume out(e.params.translation, e.params.resolution, e.params.voxel_size);
  out.storage() = std::move(spilled.volume.storage());
  return out;
}

std::size_t VolumeSet::load(const LatticeKey& key) {
  Entry& e = entry(key);
  if (e.state != Residency::disk) return 0;
  e.host = read_spill(e);
  e.state = Residency::host;
  const std::size_t bytes = spill_file_size(e.params.resolution);
  ++counters_.disk_reads;
  counters_.disk_bytes_read += bytes;
  return bytes;
}

TsdfSubvolume VolumeSet::snapshot(const LatticeKey& key) const {
  const Entry& e = entry(key);
  switch (e.state) {
    case Residency::resident: return resident_.at(key);
    case Residency::host: return e.host;
    case Residency::disk: return read_spill(e);
  }
  return {};
}

PointCloud VolumeSet::extract(const LatticeKey& key) const {
  const Entry& e = entry(key);
  switch (e.state) {
    case Residency::resident: return extract_points(resident_.at(key));
    case Residency::host: return extract_points(e.host);
    case Residency::disk: return extract_points(read_spill(e));
  }
  return {};
}

GridLayout plan_grid(double l, int r, int r_gpu) {
  if (!(l > 0.0)) throw std::invalid_argument("grid: l must be positive");
  if (r <= 0 || r_gpu <= 0) throw std::invalid_argument("grid: r and r_gpu must be positive");
  GridLayout layout;
  layout.requested_r = r;
  layout.per_axis = (r + r_gpu - 1) / r_gpu;
  layout.effective_r = layout.per_axis * r_gpu;
  layout.voxel_size = l / layout.effective_r;
  const std::int64_t half = layout.effective_r / 2;
  const Index3 base(-half, -half, 0);
  for (int i = 0; i < layout.per_axis; ++i) {
    for (int j = 0; j < layout.per_axis; ++j) {
      for (int k = 0; k < layout.per_axis; ++k) {
        LatticeKey key{i, j, k};
        VolumeParams p;
        p.translation = base + Index3(i, j, k) * r_gpu;
        p.resolution = r_gpu + 2;
        p.voxel_size = layout.voxel_size;
        layout.volumes.emplace_back(key, p);
      }
    }
  }
  return layout;
}

GridInit init_grid(double l, int r, int r_gpu, VolumeBudget budget,
                   std::optional<FusionParams> fusion) {
  GridLayout layout = plan_grid(l, r, r_gpu);
  FusionParams fp = fusion.value_or(FusionParams::for_voxel_size(layout.voxel_size));
  VolumeSet set(budget, fp);
  for (const auto& [key, params] : layout.volumes) set.insert(key, params);
  return {std::move(set), std::move(layout)};
}

void DynamicGrid::validate() const {
  if (!(cell_size > 0.0)) throw std::invalid_argument("dynamic grid: d_l must be positive");
  if (voxels_per_side <= 2) throw std::invalid_argument("dynamic grid: d_v must exceed 2");
  if (max_live < 1) throw std::invalid_argument("dynamic grid: n must be at least 1");
  if (!(hysteresis >= 1.0)) throw std::invalid_argument("dynamic grid: hysteresis must be >= 1");
}

VolumeParams DynamicGrid::params_for(const LatticeKey& key) const {
  VolumeParams p;
  p.translation = Index3(key.x, key.y, key.z) * (voxels_per_side - 2);
  p.resolution = voxels_per_side;
  p.voxel_size = voxel_size();
  return p;
}

LatticeKey key_for_point(const Vector3d& p, double cell_size) {
  return {static_cast<int>(std::floor(p.x() / cell_size)),
          static_cast<int>(std::floor(p.y() / cell_size)),
          static_cast<int>(std::floor(p.z() / cell_size))};
}

std::uint64_t EndpointHistogram::count(const LatticeKey& key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

std::uint64_t EndpointHistogram::total() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

EndpointHistogram bin_endpoints(const DepthFrame& frame, const Pose& pose,
                                const CameraIntrinsics& intr, double cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("bin_endpoints: cell size must be positive");
  EndpointHistogram hist;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      auto local = unproject(intr, x, y, frame.at(x, y));
      if (!local) continue;
      ++hist.counts[key_for_point(pose.apply(*local), cell_size)];
    }
  }
  return hist;
}

TopEndpointPolicy::TopEndpointPolicy(DynamicGrid grid) : grid_(grid) { grid_.validate(); }

std::vector<VolumeCandidate> TopEndpointPolicy::propose_additions(const VolumeSet& live,
                                                                  const EndpointHistogram& hist) {
  planned_removals_.clear();
  const std::size_t cap = std::min(grid_.max_live, live.budget().max_live);

  std::vector<std::pair<LatticeKey, std::uint64_t>> ranked(hist.counts.begin(), hist.counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap) ranked.resize(cap);

  // Weakest live volume first; among equal counts the larger key goes first.
  std::vector<std::pair<std::uint64_t, LatticeKey>> weakest;
  for (const LatticeKey& k : live.keys()) weakest.emplace_back(hist.count(k), k);
  std::sort(weakest.begin(), weakest.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : b.second < a.second;
  });
  std::deque<std::pair<std::uint64_t, LatticeKey>> evictable(weakest.begin(), weakest.end());

  std::vector<VolumeCandidate> additions;
  std::size_t live_count = live.size();
  for (const auto& [key, count] : ranked) {
    if (live.contains(key)) continue;
    if (live_count < cap) {
      additions.push_back({key, grid_.params_for(key)});
      ++live_count;
      continue;
    }
    if (evictable.empty()) break;
    const auto& [weak_count, weak_key] = evictable.front();
    if (!(static_cast<double>(count) > grid_.hysteresis * static_cast<double>(weak_count))) break;
    planned_removals_.insert(weak_key);
    evictable.pop_front();
    additions.push_back({key, grid_.params_for(key)});
  }
  return additions;
}

bool TopEndpointPolicy::should_remove(const LatticeKey& key, const VolumeSet&,
                                      const EndpointHistogram&, std::span<const VolumeCandidate>) {
  return planned_removals_.count(key) > 0;
}

AllocationResult update_allocation(VolumeSet& set, const EndpointHistogram& hist,
                                   AllocationPolicy& policy, PointCloud& cloud_store) {
  std::vector<VolumeCandidate> marked = policy.propose_additions(set, hist);
  std::vector<LatticeKey> removals;
  for (const LatticeKey& key : set.keys())
    if (policy.should_remove(key, set, hist, marked)) removals.push_back(key);

  // A volume slated for removal that f asks to add again is left alone.
  for (auto it = removals.begin(); it != removals.end();) {
    auto same = std::find_if(marked.begin(), marked.end(), [&](const VolumeCandidate& c) {
      return c.key == *it && c.params == set.params(*it);
    });
    if (same != marked.end()) {
      marked.erase(same);
      it = removals.erase(it);
    } else {
      ++it;
    }
  }

  AllocationResult result;
  for (const LatticeKey& key : removals) {
    cloud_store.append(set.remove(key));
    result.removed.push_back(key);
  }
  for (const VolumeCandidate& c : marked) {
    if (set.contains(c.key) || set.has_translation(c.params.translation)) continue;
    if (set.size() >= set.budget().max_live) break;
    set.insert(c.key, c.params);
    result.added.push_back(c.key);
  }
  return result;
}

void volume_update(VolumeSet& set, const LatticeKey& key, const DepthFrame& frame,
                   const Pose& pose, const CameraIntrinsics& intr, RayMap& raymap,
                   const RaycastParams& ray) {
  TsdfSubvolume& subvol = set.acquire(key);
  integrate(subvol, frame, pose, intr, set.fusion());
  raycast(subvol, pose, intr, raymap, set.fusion(), ray);
  set.release(key);
}

}  // namespace mvfusion
