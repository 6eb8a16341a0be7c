#pragma once

#include <stdexcept>
#include <string>

namespace dgrd {

// Precondition / contract violations (bad action index, cap exceeded, ...).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values detected during training (loss or gradient NaN/Inf).
class NumericFault : public std::runtime_error {
 public:
  explicit NumericFault(const std::string& msg) : std::runtime_error(msg) {}
};

enum class IoErrorKind {
  kOpenFailed,
  kMagicMismatch,
  kVersionMismatch,
  kTruncated,
  kChecksumMismatch,
  kSpecMismatch,
};

inline const char* to_string(IoErrorKind k) {
  switch (k) {
    case IoErrorKind::kOpenFailed: return "open_failed";
    case IoErrorKind::kMagicMismatch: return "magic_mismatch";
    case IoErrorKind::kVersionMismatch: return "version_mismatch";
    case IoErrorKind::kTruncated: return "truncated";
    case IoErrorKind::kChecksumMismatch: return "checksum_mismatch";
    case IoErrorKind::kSpecMismatch: return "spec_mismatch";
  }
  return "unknown";
}

// File-format errors carry a machine-checkable kind so callers (and tests)
// can distinguish a bad magic from a bad checksum.
class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

}  // namespace dgrd
