// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fusionforge {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that is well-formed but violates a documented precondition
/// (duplicate ids, out-of-range labels, bad arity, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration (unknown modality, vocab mismatch).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A sample referenced by the manifest is missing from a modality file.
class ResolutionError : public ValidationError {
 public:
  using Missing = std::pair<std::string, std::string>;  // (modality, sample_id)

  ResolutionError(const std::string& what, std::vector<Missing> missing)
      : ValidationError(what), missing_(std::move(missing)) {}

  const std::vector<Missing>& missing() const noexcept { return missing_; }

 private:
  std::vector<Missing> missing_;
};

enum class FormatErrorCode {
  kBadMagic,
  kTruncated,
  kCountMismatch,
  kDimMismatch,
  kUnsupportedVersion,
  kMalformed,
};

/// Binary or text file that does not match its documented layout.
class FormatError : public Error {
 public:
  FormatError(FormatErrorCode code, const std::string& what,
              std::optional<std::uint64_t> offset = std::nullopt)
      : Error(what), code_(code), offset_(offset) {}

  FormatErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }

 private:
  FormatErrorCode code_;
  std::optional<std::uint64_t> offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training could not start (no data) or diverged.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what,
                         std::optional<std::size_t> epoch = std::nullopt)
      : Error(what), epoch_(epoch) {}

  std::optional<std::size_t> epoch() const noexcept { return epoch_; }

 private:
  std::optional<std::size_t> epoch_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace fusionforge
