#include <gtest/gtest.h>

#include "duomorph/merger.hpp"
#include "duomorph/mesh.hpp"
#include "stl_check.hpp"

using namespace duomorph;
using namespace duomorph::mesh;

TEST(Stl, BinaryRoundTripThroughIndependentReader) {
  const auto box = make_box({1, 2, 3}, {4, 6, 8});
  const std::string bytes = write_binary_stl(box, "test box");
  ASSERT_EQ(bytes.size(), 84u + 50u * 12u);
  const auto f = stlcheck::read(bytes);
  EXPECT_EQ(f.declared, 12u);
  EXPECT_EQ(f.tris.size(), 12u);
  EXPECT_EQ(f.header.substr(0, 8), "test box");
  EXPECT_TRUE(stlcheck::watertight(f.tris));
  EXPECT_NEAR(stlcheck::signed_volume(f.tris), 3.0 * 4.0 * 5.0, 1e-4);
  const auto back = read_stl(bytes);
  ASSERT_EQ(back.triangles.size(), 12u);
  EXPECT_EQ(back.triangles, box.triangles);  // exactly representable in float
}

TEST(Stl, HeaderMustNotLookAscii) {
  EXPECT_THROW(write_binary_stl(make_box({0, 0, 0}, {1, 1, 1}), "solid thing"), GeometryError);
}

TEST(Stl, AsciiReader) {
  const std::string text =
      "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n"
      " endfacet\nendsolid t\n";
  const auto m = read_stl(text);
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_EQ(m.triangles[0][1], (Vec3{1, 0, 0}));
  EXPECT_THROW(read_stl("garbage"), GeometryError);
  EXPECT_THROW(read_ascii_stl("solid x\nfacet\nvertex 1 2\nendfacet"), GeometryError);
}

TEST(Marker, MeshIsClosedOutwardAndSized) {
  merger::AlignmentMarker marker;
  marker.center = {12.5, -3.0};
  const auto m = merger::export_marker_mesh(marker);
  ASSERT_EQ(m.triangles.size(), 44u);
  const auto f = stlcheck::read(write_binary_stl(m));
  EXPECT_EQ(f.tris.size(), 44u);
  EXPECT_TRUE(stlcheck::watertight(f.tris));
  // Cross area: two 10x2 bars minus the shared 2x2 square, times height.
  EXPECT_NEAR(stlcheck::signed_volume(f.tris), (2 * 10.0 * 2.0 - 4.0) * 0.2, 1e-4);
  const auto b = m.bounds();
  EXPECT_NEAR(b.min.x, 7.5, 1e-12);
  EXPECT_NEAR(b.max.y, 2.0, 1e-12);
  EXPECT_EQ(b.max.z, 0.2);
}

TEST(Marker, Validation) {
  merger::AlignmentMarker m;
  m.height = 0.5;
  EXPECT_THROW(m.validate(), MergeError);
  m = {};
  m.arm_length = 6.0;
  EXPECT_THROW(m.validate(), MergeError);
  m = {};
  EXPECT_NO_THROW(m.validate());
}

TEST(Marker, PartsExportAppendsMarker) {
  const auto box = make_box({20, 20, 0}, {30, 30, 5});
  const auto out = merger::export_parts_with_marker({box, box}, merger::AlignmentMarker{});
  EXPECT_EQ(out.mesh.triangles.size(), 24u + 44u);
  EXPECT_TRUE(out.warnings.empty());
  const auto f = stlcheck::read(write_binary_stl(out.mesh));
  EXPECT_EQ(f.tris.size(), 68u);
  const auto only = merger::export_parts_with_marker({}, merger::AlignmentMarker{});
  EXPECT_EQ(only.mesh.triangles.size(), 44u);
  EXPECT_EQ(only.warnings.size(), 1u);
}
