#include "nearfield/errors.hpp"

namespace nearfield {

FormatError::FormatError(const std::string& what, std::uint64_t offset, std::uint64_t record)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) +
                         (record == kNoRecord ? std::string() : ", record " + std::to_string(record)) + ")"),
      offset_(offset),
      record_(record) {}

}  // namespace nearfield
