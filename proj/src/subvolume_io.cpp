#include "mvfusion/subvolume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mvfusion/errors.hpp"

namespace mvfusion {

namespace {

static_assert(std::endian::native == std::endian::little,
              "spill files are written by memcpy on little-endian hosts");

template <typename T>
void put(std::vector<char>& buf, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T take(const char*& p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  p += sizeof(T);
  return value;
}

}  // namespace

std::size_t write_subvolume(std::ostream& out, const TsdfSubvolume& subvol,
                            const FusionParams& params) {
  std::vector<char> header;
  header.reserve(kSpillHeaderBytes);
  header.insert(header.end(), kSpillMagic, kSpillMagic + 4);
  put<std::uint32_t>(header, kSpillVersion);
  put<std::uint32_t>(header, static_cast<std::uint32_t>(subvol.resolution()));
  put<double>(header, subvol.side_length());
  for (int a = 0; a < 3; ++a) put<std::int64_t>(header, subvol.translation()[a]);
  put<float>(header, params.max_weight);
  put<float>(header, static_cast<float>(params.truncation));

  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto voxels = subvol.voxels();
  out.write(reinterpret_cast<const char*>(voxels.data()),
            static_cast<std::streamsize>(voxels.size_bytes()));
  if (!out) throw Error("spill: write failed");
  return header.size() + voxels.size_bytes();
}

std::size_t write_subvolume(const std::filesystem::path& path, const TsdfSubvolume& subvol,
                            const FusionParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("spill: cannot open " + path.string() + " for writing");
  return write_subvolume(out, subvol, params);
}

SpilledSubvolume read_subvolume(std::istream& in) {
  char header[kSpillHeaderBytes];
  in.read(header, kSpillHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kSpillHeaderBytes))
    throw FormatError("spill: truncated header");
  if (std::memcmp(header, kSpillMagic, 4) != 0) throw FormatError("spill: bad magic");

  const char* p = header + 4;
  const auto version = take<std::uint32_t>(p);
  if (version != kSpillVersion)
    throw FormatError("spill: unsupported version " + std::to_string(version));
  const auto resolution = take<std::uint32_t>(p);
  const auto side = take<double>(p);
  Index3 translation;
  for (int a = 0; a < 3; ++a) translation[a] = take<std::int64_t>(p);
  SpilledSubvolume out;
  out.max_weight = take<float>(p);
  out.truncation = take<float>(p);
  if (resolution < 2 || resolution > 4096 || !(side > 0.0))
    throw FormatError("spill: implausible volume dimensions");

  out.volume = TsdfSubvolume(translation, static_cast<int>(resolution), side / resolution);
  auto voxels = out.volume.voxels();
  in.read(reinterpret_cast<char*>(voxels.data()), static_cast<std::streamsize>(voxels.size_bytes()));
  if (in.gcount() != static_cast<std::streamsize>(voxels.size_bytes()))
    throw FormatError("spill: truncated body");
  out.bytes_read = kSpillHeaderBytes + voxels.size_bytes();
  return out;
}

SpilledSubvolume read_subvolume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("spill: cannot open " + path.string());
  return read_subvolume(in);
}

}  // namespace mvfusion
