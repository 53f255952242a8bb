#include "roiloc/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "roiloc/error.hpp"

namespace roiloc {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(IntensityUnits units) {
  return units == IntensityUnits::HU ? "HU" : "arb";
}

IntensityUnits units_from_string(std::string_view text) {
  if (text == "HU") return IntensityUnits::HU;
  if (text == "arb") return IntensityUnits::Arbitrary;
  throw Error("unknown intensity units '" + std::string(text) + "'");
}

Volume::Volume(Index3 dims, Vec3 spacing_mm, IntensityUnits units,
               std::vector<std::int16_t> voxels)
    : dims_(dims), spacing_(spacing_mm), units_(units), voxels_(std::move(voxels)) {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] < 8) throw Error("volume dims must be >= 8 on every axis");
    if (!(spacing_[a] > 0.0)) throw Error("non-positive spacing");
  }
  const auto expected = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  if (voxels_.size() != expected) throw Error("voxel count does not match dims");
}

namespace {

fs::path sidecar_path(const fs::path& raw_path) {
  fs::path p = raw_path;
  p.replace_extension(".json");
  return p;
}

std::uint16_t to_le(std::uint16_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return static_cast<std::uint16_t>((v >> 8) | (v << 8));
}

}  // namespace

void save_volume(const Volume& volume, const fs::path& raw_path) {
  if (raw_path.has_parent_path()) fs::create_directories(raw_path.parent_path());
  {
    std::ofstream out(raw_path, std::ios::binary);
    if (!out) throw Error("cannot write " + raw_path.string());
    std::vector<char> bytes(volume.voxels().size() * 2);
    for (std::size_t i = 0; i < volume.voxels().size(); ++i) {
      const auto v = to_le(static_cast<std::uint16_t>(volume.voxels()[i]));
      bytes[2 * i] = static_cast<char>(v & 0xff);
      bytes[2 * i + 1] = static_cast<char>(v >> 8);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + raw_path.string());
  }
  json side;
  side["dims"] = volume.dims();
  side["spacing_mm"] = volume.spacing();
  side["dtype"] = "i16le";
  side["units"] = std::string(to_string(volume.units()));
  std::ofstream out(sidecar_path(raw_path));
  if (!out) throw Error("cannot write sidecar for " + raw_path.string());
  out << side.dump(2) << '\n';
}

Volume load_volume(const fs::path& raw_path) {
  const fs::path side_path = sidecar_path(raw_path);
  std::ifstream side_in(side_path);
  if (!side_in) throw Error("missing sidecar " + side_path.string());
  json side;
  try {
    side = json::parse(side_in);
  } catch (const json::exception& e) {
    throw Error("unparsable sidecar " + side_path.string() + ": " + e.what());
  }

  Index3 dims{};
  Vec3 spacing{};
  IntensityUnits units = IntensityUnits::HU;
  try {
    dims = side.at("dims").get<Index3>();
    spacing = side.at("spacing_mm").get<Vec3>();
    if (side.value("dtype", std::string("i16le")) != "i16le") {
      throw Error("unsupported dtype in " + side_path.string());
    }
    units = units_from_string(side.value("units", std::string("HU")));
  } catch (const json::exception& e) {
    throw Error("unparsable sidecar " + side_path.string() + ": " + e.what());
  }
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw Error("non-positive dims in " + side_path.string());
    if (!(spacing[a] > 0.0)) throw Error("non-positive spacing in " + side_path.string());
  }

  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw Error("missing payload " + raw_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (bytes.size() != count * 2) {
    throw Error("payload size mismatch: " + raw_path.string() + " has " +
                std::to_string(bytes.size()) + " bytes, expected " + std::to_string(count * 2));
  }
  std::vector<std::int16_t> voxels(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto lo = static_cast<std::uint8_t>(bytes[2 * i]);
    const auto hi = static_cast<std::uint8_t>(bytes[2 * i + 1]);
    voxels[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  return Volume(dims, spacing, units, std::move(voxels));
}

Patch extract_patch(const Volume& volume, const BoundingBox& box, const Index3& out_shape,
                    const PatchConfig& config) {
  const BoundingBox region = clip_to(box, volume.dims());
  if (!region.valid()) throw Error("degenerate box after clipping");
  for (int a = 0; a < 3; ++a) {
    if (out_shape[a] < 2) throw Error("patch shape components must be >= 2");
  }

  // Per-axis sample coordinates: voxel centres sit at integer positions, so
  // sample j of n spans the box at lower + (j + 0.5) * size / n - 0.5.
  struct Tap {
    int i0, i1;
    double t;
  };
  std::array<std::vector<Tap>, 3> taps;
  for (int a = 0; a < 3; ++a) {
    const double step = static_cast<double>(region.size[a]) / out_shape[a];
    const double first = region.lower[a];
    const double last = region.lower[a] + region.size[a] - 1;
    taps[a].resize(out_shape[a]);
    for (int j = 0; j < out_shape[a]; ++j) {
      const double u = std::clamp(region.lower[a] + (j + 0.5) * step - 0.5, first, last);
      const int i0 = static_cast<int>(std::floor(u));
      const int i1 = std::min(i0 + 1, static_cast<int>(last));
      taps[a][j] = {i0, i1, u - i0};
    }
  }

  Patch patch;
  patch.shape = out_shape;
  patch.values.resize(static_cast<std::size_t>(out_shape[0]) * out_shape[1] * out_shape[2]);
  std::size_t n = 0;
  for (const Tap& tz : taps[2]) {
    for (const Tap& ty : taps[1]) {
      for (const Tap& tx : taps[0]) {
        auto v = [&](int x, int y, int z) { return static_cast<double>(volume.at(x, y, z)); };
        const double c00 = v(tx.i0, ty.i0, tz.i0) * (1 - tx.t) + v(tx.i1, ty.i0, tz.i0) * tx.t;
        const double c10 = v(tx.i0, ty.i1, tz.i0) * (1 - tx.t) + v(tx.i1, ty.i1, tz.i0) * tx.t;
        const double c01 = v(tx.i0, ty.i0, tz.i1) * (1 - tx.t) + v(tx.i1, ty.i0, tz.i1) * tx.t;
        const double c11 = v(tx.i0, ty.i1, tz.i1) * (1 - tx.t) + v(tx.i1, ty.i1, tz.i1) * tx.t;
        const double c0 = c00 * (1 - ty.t) + c10 * ty.t;
        const double c1 = c01 * (1 - ty.t) + c11 * ty.t;
        patch.values[n++] = static_cast<float>(c0 * (1 - tz.t) + c1 * tz.t);
      }
    }
  }

  double lo = config.window_low;
  double hi = config.window_high;
  if (volume.units() == IntensityUnits::Arbitrary) {
    const auto [mn, mx] = std::minmax_element(patch.values.begin(), patch.values.end());
    lo = *mn;
    hi = *mx;
  }
  const double range = hi - lo;
  for (float& value : patch.values) {
    if (range <= 0.0) {
      value = 0.0f;
      continue;
    }
    const double clamped = std::clamp(static_cast<double>(value), lo, hi);
    value = static_cast<float>((clamped - lo) / range);
  }
  return patch;
}

}  // namespace roiloc
