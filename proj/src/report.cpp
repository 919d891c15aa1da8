#include "tge/report.hpp"

#include <nlohmann/json.hpp>

namespace tge {

std::string format_thousands(int64_t count) {
    if (count < 0) {
        throw Error(ErrorKind::input, "cannot format a negative token count");
    }
    const int64_t tenths = (count + 50) / 100;  // round-half-up of count/100
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "k";
}

std::string layout_hash(const GridLayout& layout) {
    uint64_t h = 0xcbf29ce484222325ull;
    const auto mix = [&h](int64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= static_cast<uint64_t>(v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    mix(layout.image_width);
    mix(layout.image_height);
    mix(layout.grid_side_px);
    mix(layout.patch_px);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json layout_to_json(const GridLayout& layout) {
    return nlohmann::json{{"image_width", layout.image_width},
                          {"image_height", layout.image_height},
                          {"grid_side_px", layout.grid_side_px},
                          {"patch_px", layout.patch_px}};
}

GridLayout layout_from_json(const nlohmann::json& j) {
    return GridLayout(j.at("image_width").get<int64_t>(), j.at("image_height").get<int64_t>(),
                      j.at("grid_side_px").get<int64_t>(), j.at("patch_px").get<int64_t>());
}

nlohmann::json compression_summary_json(const CompressionReport& report,
                                        const GridLayout& layout, int64_t context_tokens) {
    const PatchCount counts = patch_count(layout);
    nlohmann::json j;
    j["schema"] = "tge.compress_report.v1";
    j["layout"] = layout_to_json(layout);
    j["layout_hash"] = layout_hash(layout);
    j["grids_total"] = counts.grids_total;
    j["tokens_per_grid_raw"] = counts.tokens_per_grid_raw;
    j["tokens_per_grid"] = report.tokens_per_grid;
    j["original_tokens"] = report.original_token_count;
    j["visual_tokens"] = report.retained_token_count;
    j["context_tokens"] = context_tokens;
    j["visual_tokens_display"] = format_thousands(report.retained_token_count + context_tokens);
    j["compression_ratio"] = report.compression_ratio;
    j["estimated_tflops"] = report.estimated_tflops;
    j["cluster_count"] = report.cluster_sizes.size();
    j["retained_indices"] = report.retained_indices;
    return j;
}

}  // namespace tge
