#pragma once

// Triangle meshes and STL (binary write, binary/ASCII read).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "duomorph/error.hpp"

namespace duomorph::mesh {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 cross(Vec3 a, Vec3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }

inline Vec3 unit_normal(const std::array<Vec3, 3>& t) {
  const Vec3 n = cross(t[1] - t[0], t[2] - t[0]);
  const double len = std::sqrt(n.x * n.x + n.y * n.y + n.z * n.z);
  if (len == 0.0) return {};
  return {n.x / len, n.y / len, n.z / len};
}

using Triangle = std::array<Vec3, 3>;

struct Box3 {
  Vec3 min{HUGE_VAL, HUGE_VAL, HUGE_VAL};
  Vec3 max{-HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
  void add(Vec3 p) {
    min = {std::min(min.x, p.x), std::min(min.y, p.y), std::min(min.z, p.z)};
    max = {std::max(max.x, p.x), std::max(max.y, p.y), std::max(max.z, p.z)};
  }
  bool empty() const { return min.x > max.x; }
};

struct Mesh {
  std::vector<Triangle> triangles;

  Box3 bounds() const {
    Box3 b;
    for (const auto& t : triangles)
      for (const auto& v : t) b.add(v);
    return b;
  }
  void append(const Mesh& other) { triangles.insert(triangles.end(), other.triangles.begin(), other.triangles.end()); }
};

// ---------------------------------------------------------------------------
// Binary STL: 80-byte header, uint32 count, 50-byte records, little-endian.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline double get_f32(std::string_view in, std::size_t at) { return std::bit_cast<float>(get_u32(in, at)); }

}  // namespace detail

inline constexpr std::size_t kStlHeaderSize = 80;
inline constexpr std::size_t kStlRecordSize = 50;

// The header must not begin with "solid" or readers will take it for ASCII.
inline std::string write_binary_stl(const Mesh& mesh, std::string_view header = "binary STL") {
  if (header.substr(0, 5) == "solid") throw GeometryError("stl_header", "binary STL header may not start with 'solid'");
  std::string out(kStlHeaderSize, '\0');
  std::memcpy(out.data(), header.data(), std::min(header.size(), kStlHeaderSize));
  detail::put_u32(out, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Vec3 n = unit_normal(t);
    detail::put_f32(out, n.x);
    detail::put_f32(out, n.y);
    detail::put_f32(out, n.z);
    for (const auto& v : t) {
      detail::put_f32(out, v.x);
      detail::put_f32(out, v.y);
      detail::put_f32(out, v.z);
    }
    out.push_back('\0');
    out.push_back('\0');
  }
  return out;
}

inline Mesh read_ascii_stl(std::string_view data) {
  Mesh mesh;
  std::istringstream in{std::string(data)};
  std::string word;
  Triangle tri{};
  int corner = 0;
  while (in >> word) {
    if (word == "vertex") {
      Vec3 v;
      if (!(in >> v.x >> v.y >> v.z)) throw GeometryError("stl_parse", "malformed vertex in ASCII STL");
      if (corner >= 3) throw GeometryError("stl_parse", "facet with more than three vertices");
      tri[corner++] = v;
    } else if (word == "endfacet") {
      if (corner != 3) throw GeometryError("stl_parse", "facet with fewer than three vertices");
      mesh.triangles.push_back(tri);
      corner = 0;
    }
  }
  return mesh;
}

inline Mesh read_stl(std::string_view data) {
  if (data.size() >= kStlHeaderSize + 4) {
    const std::uint32_t n = detail::get_u32(data, kStlHeaderSize);
    if (data.size() == kStlHeaderSize + 4 + std::size_t{n} * kStlRecordSize) {
      Mesh mesh;
      mesh.triangles.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = kStlHeaderSize + 4 + i * kStlRecordSize + 12;
        Triangle t;
        for (std::size_t c = 0; c < 3; ++c) {
          t[c] = {detail::get_f32(data, at + c * 12), detail::get_f32(data, at + c * 12 + 4),
                  detail::get_f32(data, at + c * 12 + 8)};
        }
        mesh.triangles.push_back(t);
      }
      return mesh;
    }
  }
  if (data.substr(0, 5) == "solid") return read_ascii_stl(data);
  throw GeometryError("stl_parse", "not a binary STL (size mismatch) or ASCII STL");
}

// Axis-aligned box, outward-facing triangles (12).
inline Mesh make_box(Vec3 lo, Vec3 hi) {
  const Vec3 c[8] = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
                     {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
  static constexpr int faces[12][3] = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                                       {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  Mesh m;
  for (const auto& f : faces) m.triangles.push_back({c[f[0]], c[f[1]], c[f[2]]});
  return m;
}

}  // namespace duomorph::mesh
