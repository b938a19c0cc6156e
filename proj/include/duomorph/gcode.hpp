#pragma once

// Lossless G-code model. Every input line becomes exactly one Command: either
// a structured command or verbatim Passthrough. Parsed commands keep their
// original text and are re-emitted byte-for-byte until a transform edits them.

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "duomorph/geometry.hpp"

namespace duomorph::gcode {

enum class Phase { preamble, sealing, pause, printing, postamble };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::preamble: return "preamble";
    case Phase::sealing: return "sealing";
    case Phase::pause: return "pause";
    case Phase::printing: return "printing";
    case Phase::postamble: return "postamble";
  }
  return "unknown";
}

struct Move {
  bool rapid = false;  // G0 vs G1
  std::optional<double> x, y, z, e, f;
  friend bool operator==(const Move&, const Move&) = default;
};

struct Home {
  std::string axes;  // letters as written, e.g. "XY"; empty = all axes
  friend bool operator==(const Home&, const Home&) = default;
};

struct NozzleTemp {
  double celsius = 0.0;
  bool wait = false;
  char letter = 'S';
  std::optional<int> tool;
  friend bool operator==(const NozzleTemp&, const NozzleTemp&) = default;
};

struct BedTemp {
  double celsius = 0.0;
  bool wait = false;
  char letter = 'S';
  friend bool operator==(const BedTemp&, const BedTemp&) = default;
};

struct Fan {
  double duty = 0.0;  // 0..255
  bool off_command = false;  // written as M107
  std::optional<int> index;
  friend bool operator==(const Fan&, const Fan&) = default;
};

struct Tone {
  double frequency_hz = 0.0;
  double duration_ms = 0.0;
  friend bool operator==(const Tone&, const Tone&) = default;
};

struct PauseMacro {
  std::string text;
  friend bool operator==(const PauseMacro&, const PauseMacro&) = default;
};

struct Comment {
  std::string text;  // without the leading ';'
  friend bool operator==(const Comment&, const Comment&) = default;
};

struct Passthrough {
  std::string text;
  friend bool operator==(const Passthrough&, const Passthrough&) = default;
};

using Kind = std::variant<Move, Home, NozzleTemp, BedTemp, Fan, Tone, PauseMacro, Comment, Passthrough>;

inline constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();

// Modal machine state *after* the command has executed.
struct ModalState {
  bool absolute_xyz = true;
  bool absolute_e = true;
  double x = kUnknown, y = kUnknown, z = kUnknown;
  double e = 0.0;  // logical extruder position, accumulated in relative mode
  double feed = kUnknown;  // mm/min
};

struct Command {
  Kind kind;
  std::string trailing_comment;  // "; ..." suffix of a structured line
  std::size_t source_line = 0;   // 1-based; 0 for synthesized commands
  Phase phase = Phase::printing;
  std::optional<int> layer;      // set on layer-change marker comments
  ModalState state;
  std::optional<std::string> raw;  // original text; cleared by edits

  template <typename T>
  const T* as() const { return std::get_if<T>(&kind); }
  template <typename T>
  T* as() { return std::get_if<T>(&kind); }
};

struct PhaseRange {
  Phase phase;
  std::size_t begin;
  std::size_t end;  // exclusive
  friend bool operator==(const PhaseRange&, const PhaseRange&) = default;
};

struct LayerMark {
  int layer;
  std::size_t index;
  friend bool operator==(const LayerMark&, const LayerMark&) = default;
};

struct Diagnostic {
  std::size_t line;
  std::string message;
};

struct Program {
  std::vector<Command> commands;
  std::vector<Diagnostic> diagnostics;
  // Line terminator of the source ("\n" or "\r\n") and whether the last line
  // had one; emit() reproduces both.
  std::string newline = "\n";
  bool final_newline = true;

  std::vector<PhaseRange> phases() const {
    std::vector<PhaseRange> out;
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (out.empty() || out.back().phase != commands[i].phase) {
        out.push_back({commands[i].phase, i, i + 1});
      } else {
        out.back().end = i + 1;
      }
    }
    return out;
  }

  std::vector<LayerMark> layer_marks() const {
    std::vector<LayerMark> out;
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (commands[i].layer) out.push_back({*commands[i].layer, i});
    }
    return out;
  }

  // [begin, end) of the first detected layer, if any.
  std::optional<std::pair<std::size_t, std::size_t>> first_layer() const {
    const auto marks = layer_marks();
    if (marks.empty()) return std::nullopt;
    const std::size_t end = marks.size() > 1 ? marks[1].index : commands.size();
    return std::make_pair(marks[0].index, end);
  }
};

// ---------------------------------------------------------------------------
// Number formatting

// Fixed-point rendering; exact binary-to-decimal conversion, ties to even.
inline std::string format_fixed(double value, int decimals) {
  char buf[512];
  auto result = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, decimals);
  std::string s(buf, result.ptr);
  if (!s.empty() && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string format_trimmed(double value, int decimals) {
  std::string s = format_fixed(value, decimals);
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

inline constexpr int kCoordinateDecimals = 3;
inline constexpr int kExtrusionDecimals = 5;

// ---------------------------------------------------------------------------
// Emission

inline std::string render_body(const Command& cmd) {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Move>) {
          std::string s = k.rapid ? "G0" : "G1";
          if (k.x) s += " X" + format_fixed(*k.x, kCoordinateDecimals);
          if (k.y) s += " Y" + format_fixed(*k.y, kCoordinateDecimals);
          if (k.z) s += " Z" + format_fixed(*k.z, kCoordinateDecimals);
          if (k.e) s += " E" + format_fixed(*k.e, kExtrusionDecimals);
          if (k.f) s += " F" + format_trimmed(*k.f, kCoordinateDecimals);
          return s;
        } else if constexpr (std::is_same_v<T, Home>) {
          std::string s = "G28";
          for (char axis : k.axes) s += std::string(" ") + axis;
          return s;
        } else if constexpr (std::is_same_v<T, NozzleTemp>) {
          std::string s = k.wait ? "M109" : "M104";
          s += std::string(" ") + k.letter + format_trimmed(k.celsius, kCoordinateDecimals);
          if (k.tool) s += " T" + std::to_string(*k.tool);
          return s;
        } else if constexpr (std::is_same_v<T, BedTemp>) {
          return std::string(k.wait ? "M190" : "M140") + " " + k.letter + format_trimmed(k.celsius, kCoordinateDecimals);
        } else if constexpr (std::is_same_v<T, Fan>) {
          std::string s = k.off_command ? "M107" : "M106 S" + format_trimmed(k.duty, kCoordinateDecimals);
          if (k.index) s += " P" + std::to_string(*k.index);
          return s;
        } else if constexpr (std::is_same_v<T, Tone>) {
          return "M300 S" + format_trimmed(k.frequency_hz, kCoordinateDecimals) + " P" +
                 format_trimmed(k.duration_ms, kCoordinateDecimals);
        } else if constexpr (std::is_same_v<T, PauseMacro>) {
          return k.text;
        } else if constexpr (std::is_same_v<T, Comment>) {
          return ";" + k.text;
        } else {
          return k.text;
        }
      },
      cmd.kind);
}

// Canonical rendering, ignoring any preserved source text.
inline std::string render(const Command& cmd) {
  std::string s = render_body(cmd);
  if (!cmd.trailing_comment.empty()) s += " " + cmd.trailing_comment;
  return s;
}

inline std::string emit_line(const Command& cmd) { return cmd.raw ? *cmd.raw : render(cmd); }

inline std::string emit(const Program& program) {
  std::string out;
  out.reserve(program.commands.size() * 24);
  for (std::size_t i = 0; i < program.commands.size(); ++i) {
    out += emit_line(program.commands[i]);
    if (i + 1 < program.commands.size() || program.final_newline) out += program.newline;
  }
  return out;
}

// Two commands are equivalent when they render identically at emission
// precision.
inline bool equivalent(const Command& a, const Command& b) { return render(a) == render(b); }

// ---------------------------------------------------------------------------
// Parsing

struct ParseOptions {
  // Whole-line bodies recognized as pause macros.
  std::vector<std::string> pause_macros{"M400 U1", "M0", "M1", "M25", "M601", "PAUSE"};
};

namespace detail {

struct Word {
  char letter;
  std::string_view text;  // numeric text, may be empty
  std::optional<double> value;
  bool malformed = false;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool is_number_char(char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+'; }

// Splits "G1X10 Y-2.5 F300" into words. Returns nullopt if the body contains
// something that is not a letter-number word.
inline std::optional<std::vector<Word>> split_words(std::string_view body) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < body.size()) {
    const char c = body[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
    Word w{static_cast<char>(std::toupper(static_cast<unsigned char>(c))), {}, std::nullopt, false};
    std::size_t j = i + 1;
    while (j < body.size() && is_number_char(body[j])) ++j;
    w.text = body.substr(i + 1, j - i - 1);
    if (!w.text.empty()) {
      std::string_view t = w.text;
      if (t.front() == '+') t.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(v)) {
        w.value = v;
      } else {
        w.malformed = true;
      }
    }
    words.push_back(w);
    i = j;
  }
  return words;
}

enum class LayerStyle { none, cura, prusa, bambu };

struct LayerDetector {
  LayerStyle style = LayerStyle::none;
  int counter = 0;

  std::optional<int> check(std::string_view comment_text) {
    const std::string_view t = trim(comment_text);
    LayerStyle seen = LayerStyle::none;
    std::optional<int> number;
    if (t.starts_with("LAYER:")) {
      std::string_view n = trim(t.substr(6));
      int v = 0;
      auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), v);
      if (ec != std::errc() || ptr != n.data() + n.size()) return std::nullopt;
      seen = LayerStyle::cura;
      number = v;
    } else if (t == "LAYER_CHANGE") {
      seen = LayerStyle::prusa;
    } else if (t == "CHANGE_LAYER") {
      seen = LayerStyle::bambu;
    } else {
      return std::nullopt;
    }
    if (style == LayerStyle::none) style = seen;
    if (seen != style) return std::nullopt;
    if (number) return number;
    return counter++;
  }
};

inline bool has_control_bytes(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u < 0x20 && c != '\t') || u == 0x7f;
  });
}

}  // namespace detail

// Parses one line (without its terminator) into a command, updating modal
// state. Never fails; unknown or malformed lines become Passthrough.
inline Command parse_line(std::string_view line, std::size_t line_number, ModalState& state,
                          detail::LayerDetector& layers, const ParseOptions& options,
                          std::vector<Diagnostic>& diagnostics) {
  using namespace detail;
  Command cmd;
  cmd.source_line = line_number;
  cmd.raw = std::string(line);

  auto passthrough = [&]() {
    cmd.kind = Passthrough{std::string(line)};
    cmd.trailing_comment.clear();
  };

  std::string_view visible = line;
  if (!visible.empty() && visible.back() == '\r') visible.remove_suffix(1);
  if (has_control_bytes(visible)) diagnostics.push_back({line_number, "line contains control bytes"});

  const std::string_view trimmed = trim(line);
  if (trimmed.empty()) {
    passthrough();
    cmd.state = state;
    return cmd;
  }
  if (trimmed.front() == ';') {
    cmd.kind = Comment{std::string(trimmed.substr(1))};
    cmd.layer = layers.check(trimmed.substr(1));
    cmd.state = state;
    return cmd;
  }

  for (const auto& macro : options.pause_macros) {
    const std::size_t semi = trimmed.find(';');
    const std::string_view body = trim(trimmed.substr(0, semi));
    if (body == macro) {
      cmd.kind = PauseMacro{std::string(body)};
      if (semi != std::string_view::npos) cmd.trailing_comment = std::string(trimmed.substr(semi));
      cmd.state = state;
      return cmd;
    }
  }

  const std::size_t semi = trimmed.find(';');
  const std::string_view body = trim(trimmed.substr(0, semi));
  if (semi != std::string_view::npos) cmd.trailing_comment = std::string(trimmed.substr(semi));

  const auto words_opt = split_words(body);
  if (!words_opt || words_opt->empty() || !words_opt->front().value) {
    passthrough();
    cmd.state = state;
    return cmd;
  }
  const auto& words = *words_opt;
  const char letter = words.front().letter;
  const double code = *words.front().value;
  const bool integral = words.front().text.find('.') == std::string_view::npos;
  const int icode = integral ? static_cast<int>(code) : -1;

  auto any_malformed = [&](std::string_view letters) {
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (letters.find(words[i].letter) != std::string_view::npos && (words[i].malformed || !words[i].value)) return true;
    }
    return false;
  };
  auto only_letters = [&](std::string_view letters) {
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (letters.find(words[i].letter) == std::string_view::npos) return false;
    }
    return true;
  };
  auto value_of = [&](char l) -> std::optional<double> {
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (words[i].letter == l) return words[i].value;
    }
    return std::nullopt;
  };
  auto has = [&](char l) {
    return std::any_of(words.begin() + 1, words.end(), [&](const Word& w) { return w.letter == l; });
  };
  auto malformed = [&](const char* what) {
    diagnostics.push_back({line_number, std::string("malformed ") + what + ": '" + std::string(trimmed) + "'"});
    passthrough();
  };

  auto apply_xyz = [&](std::optional<double> x, std::optional<double> y, std::optional<double> z) {
    if (state.absolute_xyz) {
      if (x) state.x = *x;
      if (y) state.y = *y;
      if (z) state.z = *z;
    } else {
      if (x) state.x += *x;
      if (y) state.y += *y;
      if (z) state.z += *z;
    }
  };

  if (letter == 'G' && (icode == 0 || icode == 1)) {
    if (any_malformed("XYZEF")) {
      malformed("move coordinates");
    } else if (!only_letters("XYZEF")) {
      passthrough();
    } else {
      Move m;
      m.rapid = icode == 0;
      m.x = value_of('X');
      m.y = value_of('Y');
      m.z = value_of('Z');
      m.e = value_of('E');
      m.f = value_of('F');
      apply_xyz(m.x, m.y, m.z);
      if (m.e) state.e = state.absolute_e ? *m.e : state.e + *m.e;
      if (m.f) state.feed = *m.f;
      cmd.kind = m;
    }
  } else if (letter == 'G' && (icode == 2 || icode == 3)) {
    passthrough();
    if (!any_malformed("XYZEF")) {
      apply_xyz(value_of('X'), value_of('Y'), value_of('Z'));
      if (auto e = value_of('E')) state.e = state.absolute_e ? *e : state.e + *e;
      if (auto f = value_of('F')) state.feed = *f;
    }
  } else if (letter == 'G' && icode == 28) {
    std::string axes;
    bool ok = true;
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (words[i].malformed || (words[i].value && *words[i].value != 0.0)) ok = false;
      axes += words[i].letter;
    }
    if (ok && only_letters("XYZ")) {
      cmd.kind = Home{axes};
    } else {
      passthrough();
    }
    const bool all = axes.empty() || !only_letters("XYZ");
    if (all || axes.find('X') != std::string::npos) state.x = kUnknown;
    if (all || axes.find('Y') != std::string::npos) state.y = kUnknown;
    if (all || axes.find('Z') != std::string::npos) state.z = kUnknown;
  } else if (letter == 'G' && (icode == 90 || icode == 91) && words.size() == 1) {
    state.absolute_xyz = icode == 90;
    state.absolute_e = icode == 90;
    passthrough();
  } else if (letter == 'M' && (icode == 82 || icode == 83) && words.size() == 1) {
    state.absolute_e = icode == 82;
    passthrough();
  } else if (letter == 'G' && icode == 92) {
    passthrough();
    if (!any_malformed("XYZE")) {
      if (auto x = value_of('X')) state.x = *x;
      if (auto y = value_of('Y')) state.y = *y;
      if (auto z = value_of('Z')) state.z = *z;
      if (auto e = value_of('E')) state.e = *e;
      if (words.size() == 1) state.e = 0.0;
    }
  } else if (letter == 'M' && (icode == 104 || icode == 109)) {
    const char tl = has('R') && icode == 109 ? 'R' : 'S';
    if (any_malformed("SRT")) {
      malformed("nozzle temperature");
    } else if (only_letters(tl == 'R' ? "RT" : "ST") && value_of(tl)) {
      NozzleTemp t{*value_of(tl), icode == 109, tl, std::nullopt};
      if (auto tool = value_of('T')) t.tool = static_cast<int>(*tool);
      cmd.kind = t;
    } else {
      passthrough();
    }
  } else if (letter == 'M' && (icode == 140 || icode == 190)) {
    const char tl = has('R') && icode == 190 ? 'R' : 'S';
    if (any_malformed("SR")) {
      malformed("bed temperature");
    } else if (words.size() == 2 && value_of(tl)) {
      cmd.kind = BedTemp{*value_of(tl), icode == 190, tl};
    } else {
      if (words.size() > 2) diagnostics.push_back({line_number, "bed temperature with extra parameters kept verbatim"});
      passthrough();
    }
  } else if (letter == 'M' && (icode == 106 || icode == 107)) {
    if (any_malformed("SP")) {
      malformed("fan command");
    } else if (only_letters(icode == 106 ? "SP" : "P")) {
      Fan f;
      f.off_command = icode == 107;
      f.duty = icode == 107 ? 0.0 : value_of('S').value_or(255.0);
      if (auto p = value_of('P')) f.index = static_cast<int>(*p);
      cmd.kind = f;
    } else {
      passthrough();
    }
  } else if (letter == 'M' && icode == 300) {
    if (any_malformed("SP")) {
      malformed("tone");
    } else if (only_letters("SP") && value_of('S') && value_of('P')) {
      cmd.kind = Tone{*value_of('S'), *value_of('P')};
    } else {
      passthrough();
    }
  } else {
    passthrough();
  }
  cmd.state = state;
  return cmd;
}

inline void assign_parse_phases(Program& program) {
  const auto marks = program.layer_marks();
  const std::size_t first = marks.empty() ? 0 : marks.front().index;
  for (std::size_t i = 0; i < program.commands.size(); ++i) {
    program.commands[i].phase = i < first ? Phase::preamble : Phase::printing;
  }
}

// Total function: accepts arbitrary bytes. LF or CRLF line endings.
inline Program parse(std::string_view text, const ParseOptions& options = {}) {
  Program program;
  ModalState state;
  detail::LayerDetector layers;
  std::size_t pos = 0;
  std::size_t line_number = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    std::string_view line = text.substr(pos, last ? std::string_view::npos : nl - pos);
    // The first terminator decides the style; in CRLF files every '\r'
    // before '\n' is stripped, in LF files it stays part of the line.
    if (!last && line_number == 0 && !line.empty() && line.back() == '\r') program.newline = "\r\n";
    if (!last && program.newline.size() == 2 && !line.empty() && line.back() == '\r') line.remove_suffix(1);
    program.final_newline = !last;
    ++line_number;
    program.commands.push_back(parse_line(line, line_number, state, layers, options, program.diagnostics));
    if (last) break;
    pos = nl + 1;
  }
  assign_parse_phases(program);
  return program;
}

// Number of lines as parse() counts them.
inline std::size_t count_lines(std::string_view text) {
  if (text.empty()) return 0;
  const auto n = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  return text.back() == '\n' ? n : n + 1;
}

// ---------------------------------------------------------------------------
// Transforms

struct BedRewrite {
  Program program;
  std::size_t replacements = 0;
};

inline BedRewrite rewrite_bed_temps(Program program, double ceiling) {
  BedRewrite out;
  for (auto& cmd : program.commands) {
    if (auto* bed = cmd.as<BedTemp>(); bed && bed->celsius > ceiling) {
      bed->celsius = ceiling;
      cmd.raw.reset();
      ++out.replacements;
    }
  }
  out.program = std::move(program);
  return out;
}

struct TranslateResult {
  Program program;
  std::size_t relative_moves_skipped = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Shifts the X/Y words of an arc line in place, leaving all other bytes alone.
inline std::optional<std::string> shift_words_in_text(std::string_view line, double dx, double dy) {
  const std::size_t semi = line.find(';');
  const std::string_view body = line.substr(0, semi);
  std::string out;
  std::size_t i = 0;
  bool changed = false;
  while (i < body.size()) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(body[i])));
    if ((c == 'X' || c == 'Y') && (i == 0 || !std::isalpha(static_cast<unsigned char>(body[i - 1])))) {
      std::size_t j = i + 1;
      while (j < body.size() && is_number_char(body[j])) ++j;
      std::string_view num = body.substr(i + 1, j - i - 1);
      if (!num.empty() && num.front() == '+') num.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
      if (ec != std::errc() || ptr != num.data() + num.size()) return std::nullopt;
      out += body[i];
      out += format_fixed(v + (c == 'X' ? dx : dy), kCoordinateDecimals);
      i = j;
      changed = true;
      continue;
    }
    out += body[i++];
  }
  if (semi != std::string_view::npos) out += line.substr(semi);
  if (!changed) return std::nullopt;
  return out;
}

inline bool is_arc_line(std::string_view text) {
  const auto t = trim(text);
  if (t.size() < 2 || (t[0] != 'G' && t[0] != 'g')) return false;
  std::size_t j = 1;
  while (j < t.size() && t[j] == '0') ++j;
  return j < t.size() && (t[j] == '2' || t[j] == '3') && (j + 1 == t.size() || !std::isdigit(static_cast<unsigned char>(t[j + 1])));
}

}  // namespace detail

// Shifts every absolute-mode XY coordinate. Relative-mode motion is left alone
// and reported. Arc lines (G2/G3) have their endpoint words shifted textually.
inline TranslateResult translate_xy(Program program, double dx, double dy) {
  TranslateResult out;
  if (dx == 0.0 && dy == 0.0) {
    out.program = std::move(program);
    return out;
  }
  for (auto& cmd : program.commands) {
    if (auto* m = cmd.as<Move>(); m && (m->x || m->y)) {
      if (!cmd.state.absolute_xyz) {
        ++out.relative_moves_skipped;
      } else {
        if (m->x) *m->x += dx;
        if (m->y) *m->y += dy;
        cmd.raw.reset();
      }
    } else if (auto* p = cmd.as<Passthrough>(); p && detail::is_arc_line(p->text)) {
      if (!cmd.state.absolute_xyz) {
        ++out.relative_moves_skipped;
      } else if (auto shifted = detail::shift_words_in_text(p->text, dx, dy)) {
        p->text = *shifted;
        cmd.raw.reset();
      }
    }
    // Tracked positions follow the shifted frame regardless of mode.
    cmd.state.x += dx;
    cmd.state.y += dy;
  }
  if (out.relative_moves_skipped > 0) {
    out.warnings.push_back(std::to_string(out.relative_moves_skipped) +
                           " relative-mode XY moves were left untranslated");
  }
  out.program = std::move(program);
  return out;
}

// ---------------------------------------------------------------------------
// Motion extraction

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct MotionSegment {
  Point3 from;
  Point3 to;
  double extrusion = 0.0;  // E advance (mm of filament), negative = retract
  double feed = kUnknown;  // mm/min
  bool rapid = false;
  std::size_t command_index = 0;

  bool extruding() const { return extrusion > 0.0 && (from.x != to.x || from.y != to.y); }
  double xy_length() const { return std::hypot(to.x - from.x, to.y - from.y); }
};

// XY/Z motion of Move commands in [begin, end) whose start and end positions
// are known. Uses the modal state recorded at parse time.
inline std::vector<MotionSegment> motion_segments(const Program& program, std::size_t begin = 0,
                                                  std::size_t end = std::numeric_limits<std::size_t>::max()) {
  std::vector<MotionSegment> out;
  end = std::min(end, program.commands.size());
  ModalState prev = begin > 0 ? program.commands[begin - 1].state : ModalState{};
  for (std::size_t i = begin; i < end; ++i) {
    const auto& cmd = program.commands[i];
    if (const auto* m = cmd.as<Move>()) {
      const auto& s = cmd.state;
      if (std::isfinite(prev.x) && std::isfinite(prev.y) && std::isfinite(s.x) && std::isfinite(s.y)) {
        const double pz = std::isfinite(prev.z) ? prev.z : 0.0;
        const double sz = std::isfinite(s.z) ? s.z : 0.0;
        out.push_back({{prev.x, prev.y, pz}, {s.x, s.y, sz}, s.e - prev.e, s.feed, m->rapid, i});
      }
    }
    prev = cmd.state;
  }
  return out;
}

// Construction helpers for synthesized commands.
inline Command make(Kind kind, Phase phase, std::string trailing_comment = {}) {
  Command cmd;
  cmd.kind = std::move(kind);
  cmd.phase = phase;
  cmd.trailing_comment = std::move(trailing_comment);
  return cmd;
}

// Recomputes modal state for synthesized programs by re-parsing the emitted
// text line by line.
inline void recompute_state(Program& program, const ParseOptions& options = {}) {
  ModalState state;
  detail::LayerDetector layers;
  std::vector<Diagnostic> sink;
  for (auto& cmd : program.commands) {
    const std::string text = emit_line(cmd);
    std::size_t pos = 0;
    while (true) {
      const std::size_t nl = text.find('\n', pos);
      const auto line = std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      parse_line(line, 0, state, layers, options, sink);
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    cmd.state = state;
  }
}

}  // namespace duomorph::gcode
