#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "mvfusion/tsdf.hpp"

namespace mvfusion {

// Little-endian spill layout:
//   "TSDV" | version u32 | h_r u32 | h_l f64 | h_t 3 x i64 | max_weight f32 | tau f32
//   then h_r^3 (tsdf f32, weight f32) pairs, x fastest, then y, then z.
inline constexpr char kSpillMagic[4] = {'T', 'S', 'D', 'V'};
inline constexpr std::uint32_t kSpillVersion = 1;
inline constexpr std::size_t kSpillHeaderBytes = 4 + 4 + 4 + 8 + 3 * 8 + 4 + 4;

inline std::size_t spill_file_size(int resolution) {
  return kSpillHeaderBytes + static_cast<std::size_t>(resolution) * resolution * resolution * 8;
}

struct SpilledSubvolume {
  TsdfSubvolume volume;
  float max_weight = 0.0f;
  float truncation = 0.0f;
  std::size_t bytes_read = 0;
};

/// Returns the number of bytes written.
std::size_t write_subvolume(std::ostream& out, const TsdfSubvolume& subvol, const FusionParams& params);
std::size_t write_subvolume(const std::filesystem::path& path, const TsdfSubvolume& subvol,
                            const FusionParams& params);

/// Throws FormatError on a bad magic, unsupported version or truncated body.
SpilledSubvolume read_subvolume(std::istream& in);
SpilledSubvolume read_subvolume(const std::filesystem::path& path);

}  // namespace mvfusion
