#pragma once

#include <filesystem>

#include "tge/token_grid.hpp"

namespace tge {

// TGR1 grid files store one TokenGrid:
//
//   magic   "TGR1"   4 bytes
//   version u16      = 1
//   rows    u32
//   cols    u32
//   dim     u32
//   tag_len u16      followed by tag_len bytes of UTF-8 tag
//   payload rows*cols*dim little-endian float32, row-major
//
// All multi-byte integers little-endian. Round-trips are bit-exact.

void save_grid(const TokenGrid& grid, const std::filesystem::path& path);

TokenGrid load_grid(const std::filesystem::path& path);

}  // namespace tge
