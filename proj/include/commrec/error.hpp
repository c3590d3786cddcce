#ifndef COMMREC_ERROR_HPP
#define COMMREC_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace commrec {

/// Base of every error raised by the library. `code()` is a short
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Malformed record in a line-oriented input stream.
class ParseError : public Error {
 public:
  ParseError(std::string stream, std::size_t line, const std::string& what)
      : Error("parse", stream + ":" + std::to_string(line) + ": " + what),
        stream_(std::move(stream)),
        line_(line) {}
  const std::string& stream() const noexcept { return stream_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string stream_;
  std::size_t line_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate_id", "duplicate id '" + id + "'") {}
};

class Untrainable : public Error {
 public:
  explicit Untrainable(const std::string& detail) : Error("untrainable", "untrainable: " + detail) {}
};

class NoModel : public Error {
 public:
  explicit NoModel(const std::string& detail) : Error("no_model", "no model: " + detail) {}
};

}  // namespace commrec

#endif  // COMMREC_ERROR_HPP
