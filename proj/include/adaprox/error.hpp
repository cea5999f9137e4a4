#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adaprox {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A solver/preset configuration that violates a hypothesis of its regime.
struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Unsupported : std::logic_error {
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace adaprox
