#pragma once

#include <filesystem>
#include <iosfwd>

#include "nearfield/model.hpp"

namespace nearfield {

/// Text header (architecture, label box, tensor table) followed by every
/// state array as little-endian float64 in declaration order.
void write_model(LocatorModel& model, std::ostream& out);
void write_model(LocatorModel& model, const std::filesystem::path& path);

/// Throws FormatError carrying the byte offset of the first bad field.
LocatorModel read_model(std::istream& in);
LocatorModel read_model(const std::filesystem::path& path);

}  // namespace nearfield
