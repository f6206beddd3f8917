#pragma once

#include <string>

namespace emsco {

std::string read_file(const std::string& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial artifact.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace emsco
