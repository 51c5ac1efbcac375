#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctpd {

/// Base for every data-level failure raised by the library. The CLI maps
/// these to exit code 1; anything else is a usage or internal error.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
  ParseError(std::size_t line, const std::string &what)
      : DataError("line " + std::to_string(line) + ": parse error: " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class TilingViolation : public DataError {
public:
  TilingViolation(std::size_t line, std::string tokenizer_id,
                  std::size_t byte_index, const std::string &detail)
      : DataError("line " + std::to_string(line) + ": tokenizer '" +
                  tokenizer_id + "' does not tile the text at byte " +
                  std::to_string(byte_index) + " (" + detail + ")"),
        line_(line), tokenizer_id_(std::move(tokenizer_id)),
        byte_index_(byte_index) {}
  std::size_t line() const { return line_; }
  const std::string &tokenizer_id() const { return tokenizer_id_; }
  std::size_t byte_index() const { return byte_index_; }

private:
  std::size_t line_;
  std::string tokenizer_id_;
  std::size_t byte_index_;
};

class TextMismatch : public DataError {
public:
  explicit TextMismatch(std::size_t line, const std::string &detail = {})
      : DataError("line " + std::to_string(line) +
                  ": teacher and student texts differ" +
                  (detail.empty() ? "" : " (" + detail + ")")),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class TrackLengthMismatch : public DataError {
public:
  TrackLengthMismatch(std::size_t line, std::string role,
                      const std::string &detail)
      : DataError("line " + std::to_string(line) + ": track '" + role +
                  "' length mismatch: " + detail),
        line_(line), role_(std::move(role)) {}
  std::size_t line() const { return line_; }
  const std::string &role() const { return role_; }

private:
  std::size_t line_;
  std::string role_;
};

/// Any other invariant violation found while loading (invalid UTF-8,
/// positive log-prob, bad span weights, ...).
class ValidationError : public DataError {
public:
  ValidationError(std::size_t line, const std::string &detail)
      : DataError("line " + std::to_string(line) + ": " + detail),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class MissingTrack : public DataError {
public:
  explicit MissingTrack(std::string role)
      : DataError("missing log-prob track for role '" + role + "'"),
        role_(std::move(role)) {}
  const std::string &role() const { return role_; }

private:
  std::string role_;
};

class TokenizerSideUnknown : public DataError {
public:
  explicit TokenizerSideUnknown(const std::string &tokenizer_id)
      : DataError("tokenizer '" + tokenizer_id +
                  "' matches neither side of the partition") {}
};

class LengthMismatch : public DataError {
public:
  LengthMismatch(const std::string &what, std::size_t got,
                 std::size_t expected)
      : DataError(what + ": length " + std::to_string(got) + ", expected " +
                  std::to_string(expected)) {}
};

class SeedRequired : public std::invalid_argument {
public:
  SeedRequired()
      : std::invalid_argument("the random weighting strategy needs a seed") {}
};

class TargetOutsideSupport : public DataError {
public:
  using DataError::DataError;
};

class DegenerateRewards : public DataError {
public:
  using DataError::DataError;
};

class SpecInvalid : public DataError {
public:
  explicit SpecInvalid(const std::string &what)
      : DataError("invalid experiment spec: " + what) {}
};

} // namespace ctpd
