#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace refcut {

/// Bad arguments or violated preconditions. CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File contents do not parse under the requested format.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Every source-to-sink path is made of infinite arcs, so no finite cut exists.
class InfeasibleCutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Refinement seeds whose forced boundary depths cannot hold at the same time.
class InfeasibleRefinementError : public InfeasibleCutError {
 public:
  InfeasibleRefinementError(const std::string& what, std::vector<std::string> seed_ids)
      : InfeasibleCutError(what), ids_(std::move(seed_ids)) {}

  const std::vector<std::string>& seed_ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

}  // namespace refcut
