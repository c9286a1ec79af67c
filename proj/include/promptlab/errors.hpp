// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace promptlab {

/// Base for every error raised by the library. `code()` is a stable
/// machine-readable name (e.g. "SyntaxError", "MissingField") that the
/// HTTP layer forwards verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message,
        std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(message), code_(std::move(code)), offset_(offset) {}

  const std::string& code() const noexcept { return code_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  std::string code_;
  std::optional<std::size_t> offset_;
};

// Codes: UnterminatedDelimiter, SyntaxError. Offset is a byte offset into
// the template source.
class TemplateError : public Error {
 public:
  using Error::Error;
};

// Codes: MissingField, TypeMismatch, ChoiceError, DivisionByZero,
// IndexOutOfRange, VariantLimitExceeded.
class RenderError : public Error {
 public:
  using Error::Error;
};

// Codes: MultipleSeparators, EmptyChoices, InvalidPrompt, InvalidStrategy.
class PromptError : public Error {
 public:
  using Error::Error;
};

// Codes: NotFound, SchemaError, TemplateError, DuplicateName, InvalidKey,
// IoError.
class StoreError : public Error {
 public:
  using Error::Error;
};

// Code: ParseError. `line()` is the 1-based physical line number.
class DataError : public Error {
 public:
  DataError(const std::string& message, std::size_t line)
      : Error("ParseError", message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace promptlab
