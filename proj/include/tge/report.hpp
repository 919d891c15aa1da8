#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "tge/token_grid.hpp"

namespace tge {

// Table-style display of a token count: thousands with one decimal,
// round-half-up (13968 -> "14.0k").
std::string format_thousands(int64_t count);

// Layout fingerprint used to group report rows (16 hex chars, FNV-1a 64).
std::string layout_hash(const GridLayout& layout);

nlohmann::json layout_to_json(const GridLayout& layout);
GridLayout layout_from_json(const nlohmann::json& j);

// Summary of one compression run as written by the CLI. context_tokens is
// the pooled whole-image view counted by the display figure alongside the
// retained tokens; visual_tokens itself stays the raw retained count.
nlohmann::json compression_summary_json(const CompressionReport& report,
                                        const GridLayout& layout, int64_t context_tokens);

}  // namespace tge
