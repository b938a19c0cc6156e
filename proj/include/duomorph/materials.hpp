#pragma once

// Sheet materials, sealing stacks, filaments, the filament/substrate adhesion
// matrix, and the printer profile file that carries all of them.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "duomorph/error.hpp"

namespace duomorph::materials {

using Json = nlohmann::ordered_json;

enum class SheetKind { tpu_film, tpu_coated_fabric, ptfe_protector };
enum class FilamentKind { pla, tpu, conductive_tpu, pva_support };
enum class SubstrateKind { tpu_film, tpu_coated_fabric_hand, tpu_coated_fabric_machine };
enum class AdhesionClass { weak = 0, medium = 1, strong = 2 };

inline std::string_view to_string(AdhesionClass c) {
  switch (c) {
    case AdhesionClass::weak: return "weak";
    case AdhesionClass::medium: return "medium";
    case AdhesionClass::strong: return "strong";
  }
  return "unknown";
}

inline std::string_view to_string(FilamentKind k) {
  switch (k) {
    case FilamentKind::pla: return "pla";
    case FilamentKind::tpu: return "tpu";
    case FilamentKind::conductive_tpu: return "conductive_tpu";
    case FilamentKind::pva_support: return "pva_support";
  }
  return "unknown";
}

inline std::string_view to_string(SubstrateKind k) {
  switch (k) {
    case SubstrateKind::tpu_film: return "tpu_film";
    case SubstrateKind::tpu_coated_fabric_hand: return "tpu_coated_fabric_hand";
    case SubstrateKind::tpu_coated_fabric_machine: return "tpu_coated_fabric_machine";
  }
  return "unknown";
}

inline std::string_view to_string(SheetKind k) {
  switch (k) {
    case SheetKind::tpu_film: return "tpu_film";
    case SheetKind::tpu_coated_fabric: return "tpu_coated_fabric";
    case SheetKind::ptfe_protector: return "ptfe_protector";
  }
  return "unknown";
}

// Inverse of to_string for the enums above; unknown names are an error.
template <typename Enum, std::size_t N>
Enum enum_from_string(std::string_view text, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  throw MaterialError("unknown_" + std::string(what), "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

inline SheetKind sheet_kind_from(std::string_view s) {
  return enum_from_string(s, std::array{SheetKind::tpu_film, SheetKind::tpu_coated_fabric, SheetKind::ptfe_protector},
                          "sheet_kind");
}
inline FilamentKind filament_kind_from(std::string_view s) {
  return enum_from_string(
      s, std::array{FilamentKind::pla, FilamentKind::tpu, FilamentKind::conductive_tpu, FilamentKind::pva_support},
      "filament_kind");
}
inline SubstrateKind substrate_kind_from(std::string_view s) {
  return enum_from_string(s,
                          std::array{SubstrateKind::tpu_film, SubstrateKind::tpu_coated_fabric_hand,
                                     SubstrateKind::tpu_coated_fabric_machine},
                          "substrate_kind");
}

struct SheetMaterial {
  std::string name;
  SheetKind kind = SheetKind::tpu_film;
  double thickness = 0.0;             // mm
  double thermal_conductivity = 0.0;  // W/(m K), documentation only

  SheetMaterial() = default;
  SheetMaterial(std::string n, SheetKind k, double t, double conductivity)
      : name(std::move(n)), kind(k), thickness(t), thermal_conductivity(conductivity) {
    if (!(thickness > 0.0)) throw MaterialError("invalid_sheet", "sheet '" + name + "' must have positive thickness");
  }
  friend bool operator==(const SheetMaterial&, const SheetMaterial&) = default;
};

struct MaterialStack {
  std::string name;
  SheetMaterial top;
  SheetMaterial bottom;
  std::optional<SheetMaterial> protector;
  double nozzle_temp = 250.0;  // celsius
  double bed_temp = 50.0;      // celsius
  double seal_speed = 5.0;     // mm/s
  std::optional<double> seal_z_override;

  // Nozzle height during sealing: the stack thickness unless overridden.
  double seal_z() const {
    if (seal_z_override) return *seal_z_override;
    return top.thickness + bottom.thickness + (protector ? protector->thickness : 0.0);
  }

  void validate() const {
    if (!(seal_speed > 0.0)) throw MaterialError("invalid_stack", "stack '" + name + "': seal speed must be positive");
    if (!(nozzle_temp >= 180.0 && nozzle_temp <= 300.0)) {
      throw MaterialError("invalid_stack", "stack '" + name + "': nozzle temperature must be within [180, 300] C");
    }
    if (!(bed_temp >= 0.0 && bed_temp <= 110.0)) {
      throw MaterialError("invalid_stack", "stack '" + name + "': bed temperature must be within [0, 110] C");
    }
    if (seal_z_override && !(*seal_z_override > 0.0)) {
      throw MaterialError("invalid_stack", "stack '" + name + "': seal_z override must be positive");
    }
  }
  friend bool operator==(const MaterialStack&, const MaterialStack&) = default;
};

struct Filament {
  std::string name;
  FilamentKind kind = FilamentKind::pla;
  friend bool operator==(const Filament&, const Filament&) = default;
};

struct AdhesionEntry {
  FilamentKind filament;
  SubstrateKind substrate;
  AdhesionClass tensile_class;
  std::string shear_note;
  std::string recommendation;
};

// Sheets as used for sealing. The coated fabric is a 0.2 mm nylon weave with a
// 0.03 mm TPU lamination.
inline SheetMaterial tpu_film() { return {"tpu_film_0.2", SheetKind::tpu_film, 0.2, 0.2}; }
inline SheetMaterial tpu_coated_fabric() { return {"tpu_coated_nylon_0.23", SheetKind::tpu_coated_fabric, 0.23, 0.25}; }
inline SheetMaterial ptfe_protector() { return {"ptfe_0.1", SheetKind::ptfe_protector, 0.1, 0.23}; }

// The top sheet decides the temperatures: film-topped stacks run at
// 250 C nozzle / 50 C bed, coated-fabric-topped stacks at 280 C / 70 C.
// Sealing always runs at 5 mm/s.
inline std::vector<MaterialStack> builtin_stacks() {
  std::vector<MaterialStack> stacks{
      {"film_film", tpu_film(), tpu_film(), ptfe_protector(), 250.0, 50.0, 5.0, std::nullopt},
      {"fabric_fabric", tpu_coated_fabric(), tpu_coated_fabric(), ptfe_protector(), 280.0, 70.0, 5.0, std::nullopt},
      {"film_on_fabric", tpu_film(), tpu_coated_fabric(), ptfe_protector(), 250.0, 50.0, 5.0, std::nullopt},
  };
  for (const auto& s : stacks) s.validate();
  return stacks;
}

inline std::vector<Filament> builtin_filaments() {
  return {{"bambu_pla", FilamentKind::pla},
          {"bambu_tpu", FilamentKind::tpu},
          {"conductive_tpu", FilamentKind::conductive_tpu},
          {"pva_support", FilamentKind::pva_support}};
}

inline constexpr std::string_view kInterlayerAdvice =
    "print a thin intermediate TPU interlayer first, then build the PLA structure on it";

inline const std::vector<AdhesionEntry>& adhesion_matrix() {
  using F = FilamentKind;
  using S = SubstrateKind;
  using A = AdhesionClass;
  static const std::vector<AdhesionEntry> matrix{
      {F::tpu, S::tpu_film, A::strong, "film tears before the joint shears",
       "preferred pairing; the film ruptures before the bond separates"},
      {F::conductive_tpu, S::tpu_film, A::strong, "film tears before the joint shears",
       "bonds like regular TPU; use for sensing traces directly on film"},
      {F::pla, S::tpu_film, A::weak, "film tears before the joint shears", std::string(kInterlayerAdvice)},
      {F::tpu, S::tpu_coated_fabric_hand, A::medium, "coating peels from the nylon before the joint shears",
       "limited by the hand-laminated coating; prefer machine-laminated double-sided fabric"},
      {F::conductive_tpu, S::tpu_coated_fabric_hand, A::medium, "coating peels from the nylon before the joint shears",
       "limited by the hand-laminated coating; prefer machine-laminated double-sided fabric"},
      {F::pla, S::tpu_coated_fabric_hand, A::weak, "coating peels from the nylon before the joint shears",
       std::string(kInterlayerAdvice) + "; machine-laminated fabric also improves the bond"},
      {F::tpu, S::tpu_coated_fabric_machine, A::strong, "not characterized in shear",
       "machine lamination roughly triples the tensile bond of TPU"},
      {F::conductive_tpu, S::tpu_coated_fabric_machine, A::strong, "not characterized in shear",
       "TPU-based; treated like regular TPU on machine-laminated fabric"},
      {F::pla, S::tpu_coated_fabric_machine, A::medium, "not characterized in shear",
       "bond improves about fourfold over hand lamination; a TPU interlayer is still advisable under load"},
  };
  return matrix;
}

inline const AdhesionEntry& check_compatibility(FilamentKind filament, SubstrateKind substrate) {
  if (filament == FilamentKind::pva_support) {
    throw MaterialError("support_filament", "pva_support is a dissolvable support material, not a structural filament");
  }
  for (const auto& entry : adhesion_matrix()) {
    if (entry.filament == filament && entry.substrate == substrate) return entry;
  }
  throw MaterialError("missing_entry", "no adhesion entry for " + std::string(to_string(filament)) + " on " +
                                           std::string(to_string(substrate)));
}

inline const AdhesionEntry& check_compatibility(const Filament& filament, SubstrateKind substrate) {
  return check_compatibility(filament.kind, substrate);
}

// ---------------------------------------------------------------------------
// Profile file

struct AlertTone {
  double frequency_hz = 440.0;
  double duration_ms = 200.0;
  friend bool operator==(const AlertTone&, const AlertTone&) = default;
};

struct PrinterProfile {
  std::string name = "Bambu Lab A1";
  double bed_width = 256.0;
  double bed_depth = 256.0;
  std::string pause_macro = "M400 U1";
  bool supports_tone = true;
  std::vector<AlertTone> alert_tones{{440.0, 200.0}, {554.0, 200.0}, {659.0, 200.0}};
  double bed_ceiling = 30.0;
  friend bool operator==(const PrinterProfile&, const PrinterProfile&) = default;
};

struct SealingSettings {
  double sample_interval = 0.5;  // mm
  double lift_clearance = 2.0;   // mm above seal_z between curves
  double travel_speed = 50.0;    // mm/s
  friend bool operator==(const SealingSettings&, const SealingSettings&) = default;
};

struct ArchThresholds {
  double support_span = 8.0;        // spans above this get a support advisory
  double interlayer_foot_width = 2.0;  // feet narrower than this get an interlayer advisory
  friend bool operator==(const ArchThresholds&, const ArchThresholds&) = default;
};

struct Profile {
  PrinterProfile printer;
  SealingSettings sealing;
  std::vector<SheetMaterial> sheets;
  std::vector<MaterialStack> stacks;
  std::vector<Filament> filaments;
  ArchThresholds arch;

  const MaterialStack& stack(std::string_view name) const {
    for (const auto& s : stacks) {
      if (s.name == name) return s;
    }
    throw MaterialError("unknown_stack", "unknown material stack '" + std::string(name) + "'");
  }
  bool has_stack(std::string_view name) const {
    for (const auto& s : stacks) {
      if (s.name == name) return true;
    }
    return false;
  }
  friend bool operator==(const Profile&, const Profile&) = default;
};

inline Profile default_profile() {
  Profile p;
  p.sheets = {tpu_film(), tpu_coated_fabric(), ptfe_protector()};
  p.stacks = builtin_stacks();
  p.filaments = builtin_filaments();
  return p;
}

namespace detail {

template <typename T>
T required(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw MaterialError("profile_schema", where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw MaterialError("profile_schema", where + "." + key + ": " + e.what());
  }
}

template <typename T>
T optional_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return required<T>(j, key, where);
}

inline Json sheet_to_json(const SheetMaterial& s) {
  return Json{{"kind", to_string(s.kind)}, {"thickness_mm", s.thickness}, {"thermal_conductivity_w_mk", s.thermal_conductivity}};
}

}  // namespace detail

inline Json profile_to_json(const Profile& p) {
  Json j;
  Json printer{{"name", p.printer.name},
               {"bed_width_mm", p.printer.bed_width},
               {"bed_depth_mm", p.printer.bed_depth},
               {"pause_macro", p.printer.pause_macro},
               {"supports_tone", p.printer.supports_tone},
               {"alert_tones", Json::array()},
               {"bed_ceiling_c", p.printer.bed_ceiling}};
  for (const auto& t : p.printer.alert_tones) {
    printer["alert_tones"].push_back(Json{{"frequency_hz", t.frequency_hz}, {"duration_ms", t.duration_ms}});
  }
  j["printer"] = printer;
  j["sealing"] = Json{{"sample_interval_mm", p.sealing.sample_interval},
                      {"lift_clearance_mm", p.sealing.lift_clearance},
                      {"travel_speed_mm_s", p.sealing.travel_speed}};
  j["sheets"] = Json::object();
  for (const auto& s : p.sheets) j["sheets"][s.name] = detail::sheet_to_json(s);
  j["stacks"] = Json::object();
  for (const auto& s : p.stacks) {
    Json st{{"top", s.top.name}, {"bottom", s.bottom.name}};
    st["protector"] = s.protector ? Json(s.protector->name) : Json(nullptr);
    st["nozzle_temp_c"] = s.nozzle_temp;
    st["bed_temp_c"] = s.bed_temp;
    st["seal_speed_mm_s"] = s.seal_speed;
    if (s.seal_z_override) st["seal_z_mm"] = *s.seal_z_override;
    j["stacks"][s.name] = st;
  }
  j["filaments"] = Json::object();
  for (const auto& f : p.filaments) j["filaments"][f.name] = Json{{"kind", to_string(f.kind)}};
  j["arch"] = Json{{"support_span_threshold_mm", p.arch.support_span},
                   {"interlayer_foot_width_threshold_mm", p.arch.interlayer_foot_width}};
  return j;
}

// Missing sections fall back to the built-in defaults; stacks reference sheets
// by name.
inline Profile profile_from_json(const Json& j) {
  using detail::optional_or;
  using detail::required;
  if (!j.is_object()) throw MaterialError("profile_schema", "profile must be a JSON object");
  Profile p = default_profile();
  if (j.contains("printer")) {
    const Json& pj = j.at("printer");
    const std::string w = "printer";
    p.printer.name = optional_or<std::string>(pj, "name", p.printer.name, w);
    p.printer.bed_width = optional_or<double>(pj, "bed_width_mm", p.printer.bed_width, w);
    p.printer.bed_depth = optional_or<double>(pj, "bed_depth_mm", p.printer.bed_depth, w);
    p.printer.pause_macro = optional_or<std::string>(pj, "pause_macro", p.printer.pause_macro, w);
    p.printer.supports_tone = optional_or<bool>(pj, "supports_tone", p.printer.supports_tone, w);
    p.printer.bed_ceiling = optional_or<double>(pj, "bed_ceiling_c", p.printer.bed_ceiling, w);
    if (pj.contains("alert_tones")) {
      p.printer.alert_tones.clear();
      for (const auto& t : pj.at("alert_tones")) {
        p.printer.alert_tones.push_back({required<double>(t, "frequency_hz", "printer.alert_tones"),
                                         required<double>(t, "duration_ms", "printer.alert_tones")});
      }
    }
    if (p.printer.pause_macro.empty()) throw MaterialError("profile_schema", "printer.pause_macro must not be empty");
  }
  if (j.contains("sealing")) {
    const Json& sj = j.at("sealing");
    p.sealing.sample_interval = optional_or<double>(sj, "sample_interval_mm", p.sealing.sample_interval, "sealing");
    p.sealing.lift_clearance = optional_or<double>(sj, "lift_clearance_mm", p.sealing.lift_clearance, "sealing");
    p.sealing.travel_speed = optional_or<double>(sj, "travel_speed_mm_s", p.sealing.travel_speed, "sealing");
    if (!(p.sealing.sample_interval > 0.0) || !(p.sealing.lift_clearance > 0.0) || !(p.sealing.travel_speed > 0.0)) {
      throw MaterialError("profile_schema", "sealing settings must be positive");
    }
  }
  if (j.contains("sheets")) {
    p.sheets.clear();
    for (const auto& [name, sj] : j.at("sheets").items()) {
      p.sheets.emplace_back(name, sheet_kind_from(required<std::string>(sj, "kind", "sheets." + name)),
                            required<double>(sj, "thickness_mm", "sheets." + name),
                            optional_or<double>(sj, "thermal_conductivity_w_mk", 0.0, "sheets." + name));
    }
  }
  auto sheet = [&](const std::string& name, const std::string& where) {
    for (const auto& s : p.sheets) {
      if (s.name == name) return s;
    }
    throw MaterialError("profile_schema", where + ": unknown sheet '" + name + "'");
  };
  if (j.contains("stacks")) {
    p.stacks.clear();
    for (const auto& [name, sj] : j.at("stacks").items()) {
      const std::string w = "stacks." + name;
      MaterialStack s;
      s.name = name;
      s.top = sheet(required<std::string>(sj, "top", w), w);
      s.bottom = sheet(required<std::string>(sj, "bottom", w), w);
      if (sj.contains("protector") && !sj.at("protector").is_null()) {
        s.protector = sheet(required<std::string>(sj, "protector", w), w);
      }
      s.nozzle_temp = required<double>(sj, "nozzle_temp_c", w);
      s.bed_temp = required<double>(sj, "bed_temp_c", w);
      s.seal_speed = required<double>(sj, "seal_speed_mm_s", w);
      if (sj.contains("seal_z_mm")) s.seal_z_override = required<double>(sj, "seal_z_mm", w);
      s.validate();
      p.stacks.push_back(std::move(s));
    }
  }
  if (j.contains("filaments")) {
    p.filaments.clear();
    for (const auto& [name, fj] : j.at("filaments").items()) {
      p.filaments.push_back({name, filament_kind_from(required<std::string>(fj, "kind", "filaments." + name))});
    }
  }
  if (j.contains("arch")) {
    const Json& aj = j.at("arch");
    p.arch.support_span = optional_or<double>(aj, "support_span_threshold_mm", p.arch.support_span, "arch");
    p.arch.interlayer_foot_width =
        optional_or<double>(aj, "interlayer_foot_width_threshold_mm", p.arch.interlayer_foot_width, "arch");
  }
  return p;
}

inline Profile parse_profile(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw MaterialError("profile_syntax", std::string("profile is not valid JSON: ") + e.what());
  }
  return profile_from_json(j);
}

inline std::string dump_profile(const Profile& p) { return profile_to_json(p).dump(2) + "\n"; }

}  // namespace duomorph::materials
