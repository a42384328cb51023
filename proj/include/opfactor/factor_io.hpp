#pragma once

#include <string>

#include "opfactor/recovery.hpp"

namespace opfactor {

/// Writes the factor to the binary container documented in
/// docs/file-formats.md (little-endian; raw IEEE doubles, so round trips are
/// bit-exact).
void write_factor(const SparseFactor& factor, const std::string& path);

/// Reads a factor container; rejects bad magic, truncated files, and
/// inconsistent index data.
SparseFactor read_factor(const std::string& path);

}  // namespace opfactor
