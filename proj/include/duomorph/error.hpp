#pragma once

#include <stdexcept>
#include <string>

namespace duomorph {

// Error codes are stable strings; the server returns them verbatim and the
// CLI maps them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

  // User/input problems (bad files, out-of-region geometry, merge guards)
  // as opposed to internal failures.
  virtual bool is_user_error() const noexcept { return true; }

 private:
  std::string code_;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class SvgParseError : public Error {
 public:
  SvgParseError(std::size_t command_index, const std::string& message)
      : Error("svg_parse", message), command_index_(command_index) {}
  std::size_t command_index() const noexcept { return command_index_; }

 private:
  std::size_t command_index_;
};

class MaterialError : public Error {
 public:
  using Error::Error;
};

class SealError : public Error {
 public:
  using Error::Error;
};

class MergeError : public Error {
 public:
  using Error::Error;
};

class Morph4dError : public Error {
 public:
  using Error::Error;
};

class ProjectError : public Error {
 public:
  ProjectError(std::string code, const std::string& message, std::string field = {})
      : Error(std::move(code), message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace duomorph
