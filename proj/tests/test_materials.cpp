#include <gtest/gtest.h>

#include <set>

#include "duomorph/materials.hpp"

using namespace duomorph;
using namespace duomorph::materials;

// Temperatures and speed as stated for the three sheet pairings: the top
// sheet decides 250/50 (film) or 280/70 (coated fabric); 5 mm/s throughout.
TEST(Stacks, BuiltinParameters) {
  const auto stacks = builtin_stacks();
  ASSERT_EQ(stacks.size(), 3u);
  for (const auto& s : stacks) {
    EXPECT_EQ(s.seal_speed, 5.0) << s.name;
    if (s.top.kind == SheetKind::tpu_film) {
      EXPECT_EQ(s.nozzle_temp, 250.0) << s.name;
      EXPECT_EQ(s.bed_temp, 50.0) << s.name;
    } else {
      EXPECT_EQ(s.nozzle_temp, 280.0) << s.name;
      EXPECT_EQ(s.bed_temp, 70.0) << s.name;
    }
    ASSERT_TRUE(s.protector);
    EXPECT_EQ(s.protector->thickness, 0.1);
  }
}

TEST(Stacks, SheetThicknesses) {
  EXPECT_EQ(tpu_film().thickness, 0.2);
  EXPECT_DOUBLE_EQ(tpu_coated_fabric().thickness, 0.2 + 0.03);
  EXPECT_EQ(ptfe_protector().thickness, 0.1);
  EXPECT_EQ(tpu_film().thermal_conductivity, 0.2);
  EXPECT_EQ(ptfe_protector().thermal_conductivity, 0.23);
}

TEST(Stacks, SealZIsStackThicknessUnlessOverridden) {
  auto s = default_profile().stack("film_film");
  EXPECT_DOUBLE_EQ(s.seal_z(), 0.2 + 0.2 + 0.1);
  EXPECT_DOUBLE_EQ(default_profile().stack("fabric_fabric").seal_z(), 0.23 + 0.23 + 0.1);
  s.seal_z_override = 0.35;
  EXPECT_EQ(s.seal_z(), 0.35);
}

TEST(Stacks, ValidationRejectsNonsense) {
  auto s = builtin_stacks().front();
  s.seal_speed = 0.0;
  EXPECT_THROW(s.validate(), MaterialError);
  s = builtin_stacks().front();
  s.nozzle_temp = 400.0;
  EXPECT_THROW(s.validate(), MaterialError);
  EXPECT_THROW(SheetMaterial("x", SheetKind::tpu_film, 0.0, 0.1), MaterialError);
  EXPECT_THROW(default_profile().stack("nope"), MaterialError);
}

TEST(Compatibility, MatrixIsComplete) {
  std::set<std::pair<int, int>> seen;
  for (const auto& e : adhesion_matrix()) seen.insert({int(e.filament), int(e.substrate)});
  EXPECT_EQ(seen.size(), 9u);
  EXPECT_EQ(adhesion_matrix().size(), 9u);
  for (auto f : {FilamentKind::pla, FilamentKind::tpu, FilamentKind::conductive_tpu}) {
    for (auto s : {SubstrateKind::tpu_film, SubstrateKind::tpu_coated_fabric_hand, SubstrateKind::tpu_coated_fabric_machine}) {
      EXPECT_NO_THROW(check_compatibility(f, s));
    }
  }
}

TEST(Compatibility, KeyPairings) {
  const auto& strong = check_compatibility(FilamentKind::tpu, SubstrateKind::tpu_film);
  EXPECT_EQ(strong.tensile_class, AdhesionClass::strong);
  const auto& weak = check_compatibility(FilamentKind::pla, SubstrateKind::tpu_film);
  EXPECT_EQ(weak.tensile_class, AdhesionClass::weak);
  EXPECT_NE(weak.recommendation.find("interlayer"), std::string::npos);
  EXPECT_EQ(check_compatibility(FilamentKind::conductive_tpu, SubstrateKind::tpu_film).tensile_class, AdhesionClass::strong);
  EXPECT_THROW(check_compatibility(FilamentKind::pva_support, SubstrateKind::tpu_film), MaterialError);
}

TEST(Compatibility, MachineLaminationNeverWorseThanHand) {
  for (auto f : {FilamentKind::pla, FilamentKind::tpu, FilamentKind::conductive_tpu}) {
    EXPECT_GE(int(check_compatibility(f, SubstrateKind::tpu_coated_fabric_machine).tensile_class),
              int(check_compatibility(f, SubstrateKind::tpu_coated_fabric_hand).tensile_class));
  }
}

TEST(Enums, StringRoundTrip) {
  for (auto k : {FilamentKind::pla, FilamentKind::tpu, FilamentKind::conductive_tpu, FilamentKind::pva_support}) {
    EXPECT_EQ(filament_kind_from(to_string(k)), k);
  }
  for (auto k : {SheetKind::tpu_film, SheetKind::tpu_coated_fabric, SheetKind::ptfe_protector}) {
    EXPECT_EQ(sheet_kind_from(to_string(k)), k);
  }
  EXPECT_THROW(filament_kind_from("abs"), MaterialError);
}

TEST(Profile, DefaultsMatchPrinterSetup) {
  const auto p = default_profile();
  EXPECT_EQ(p.printer.bed_ceiling, 30.0);
  EXPECT_EQ(p.sealing.sample_interval, 0.5);
  EXPECT_EQ(p.printer.pause_macro, "M400 U1");
  EXPECT_EQ(p.printer.alert_tones.size(), 3u);
}

TEST(Profile, JsonRoundTrip) {
  auto p = default_profile();
  p.printer.name = "Test Printer";
  p.stacks[0].seal_z_override = 0.42;
  p.sealing.lift_clearance = 3.0;
  const auto back = parse_profile(dump_profile(p));
  EXPECT_EQ(back, p);
  EXPECT_EQ(dump_profile(back), dump_profile(p));
}

TEST(Profile, PartialDocumentsFallBackToDefaults) {
  const auto p = parse_profile(R"({"printer": {"bed_ceiling_c": 25, "supports_tone": false}})");
  EXPECT_EQ(p.printer.bed_ceiling, 25.0);
  EXPECT_FALSE(p.printer.supports_tone);
  EXPECT_EQ(p.stacks, default_profile().stacks);
}

TEST(Profile, SchemaErrors) {
  EXPECT_THROW(parse_profile("{"), MaterialError);
  EXPECT_THROW(parse_profile("[]"), MaterialError);
  EXPECT_THROW(parse_profile(R"({"stacks": {"x": {"top": "missing", "bottom": "tpu_film_0.2",
      "nozzle_temp_c": 250, "bed_temp_c": 50, "seal_speed_mm_s": 5}}})"),
               MaterialError);
  EXPECT_THROW(parse_profile(R"({"sealing": {"sample_interval_mm": 0}})"), MaterialError);
  EXPECT_THROW(parse_profile(R"({"printer": {"pause_macro": ""}})"), MaterialError);
  try {
    parse_profile(R"({"sheets": {"a": {"kind": "paper", "thickness_mm": 1}}})");
    FAIL();
  } catch (const MaterialError& e) {
    EXPECT_EQ(e.code(), "unknown_sheet_kind");
  }
}
