#pragma once

#include <cstdio>
#include <string>

#include "fgp/error.hpp"

namespace fgp {

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

// Writes content to path via a temp file + rename, so readers never observe
// a partial file and failed runs leave no output behind.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace fgp
