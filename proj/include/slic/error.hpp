#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slic {

// Base of every error raised by the library. Callers that only care about
// "something in slic failed" catch this; the subclasses carry the error
// names used throughout the docs and the HTTP API.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define SLIC_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                            \
  public:                                                                \
    explicit Name(const std::string& what) : Error(#Name, what) {}       \
  }

SLIC_DEFINE_ERROR(IdentityMismatch);
SLIC_DEFINE_ERROR(OverlappingRules);
SLIC_DEFINE_ERROR(EmptyVocabulary);
SLIC_DEFINE_ERROR(ZeroVector);
SLIC_DEFINE_ERROR(MissingAnchor);
SLIC_DEFINE_ERROR(IncompleteDecisions);
SLIC_DEFINE_ERROR(DimensionError);
SLIC_DEFINE_ERROR(DegenerateLabels);
SLIC_DEFINE_ERROR(UnknownLabel);
SLIC_DEFINE_ERROR(UnknownProperty);
SLIC_DEFINE_ERROR(EmbeddingDimensionMismatch);
SLIC_DEFINE_ERROR(EmptyStore);
SLIC_DEFINE_ERROR(EmptyQuestion);
SLIC_DEFINE_ERROR(SynthesisFailed);
SLIC_DEFINE_ERROR(ConfigError);
SLIC_DEFINE_ERROR(FormatError);
SLIC_DEFINE_ERROR(LlmUnavailable);

#undef SLIC_DEFINE_ERROR

class ParseError : public Error {
public:
  ParseError(int line, int column, std::vector<std::string> expected,
             const std::string& message)
      : Error("ParseError", describe(line, column, expected, message)),
        line_(line), column_(column), expected_(std::move(expected)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
  static std::string describe(int line, int column,
                              const std::vector<std::string>& expected,
                              const std::string& message) {
    std::string out = std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    if (!expected.empty()) {
      out += " (expected one of:";
      for (const auto& e : expected) out += " " + e;
      out += ")";
    }
    return out;
  }

  int line_;
  int column_;
  std::vector<std::string> expected_;
};

}  // namespace slic
