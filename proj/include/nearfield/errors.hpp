#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nearfield {

/// Malformed or truncated dataset/model file. offset is the byte position at
/// which decoding failed; record is the record index when one applies.
class FormatError : public std::runtime_error {
 public:
  static constexpr std::uint64_t kNoRecord = ~std::uint64_t{0};

  FormatError(const std::string& what, std::uint64_t offset, std::uint64_t record = kNoRecord);

  std::uint64_t offset() const { return offset_; }
  std::uint64_t record() const { return record_; }

 private:
  std::uint64_t offset_;
  std::uint64_t record_;
};

/// Bad or missing configuration (scenario file, CLI flags, missing model).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by training when the loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace nearfield
