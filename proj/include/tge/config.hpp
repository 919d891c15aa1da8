#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tge/affinity.hpp"
#include "tge/encoder.hpp"
#include "tge/selection.hpp"
#include "tge/token_grid.hpp"

namespace tge {

// Flat key-value run configuration with dotted section keys
// (affinity.join_threshold=0.85). Every field has a default; unknown keys
// are rejected and all referenced-config constraints re-validate at load.
struct RunConfig {
    int64_t layout_image_width = 8064;
    int64_t layout_image_height = 8064;
    int64_t layout_grid_side_px = 336;
    int64_t layout_patch_px = 14;

    int encoder_dim = 32;
    int encoder_layers = 3;
    int encoder_vocab = 64;
    uint64_t encoder_seed = 42;

    int affinity_neighborhood = 8;  // 4 or 8
    int affinity_steps_n = 3;
    double affinity_join_threshold = 0.85;
    double affinity_temperature = 0.1;

    double selection_ratio_r = 1.0;
    int64_t selection_budget = 24;  // 0 disables the absolute budget

    int64_t influence_d_out = 8192;
    double influence_keep_fraction = 0.7;
    int influence_warmup_steps = 10;
    double influence_lr = 0.01;
    uint64_t influence_sketch_seed = 7;
    int influence_rank = 2;
    int influence_classes = 4;
    uint64_t influence_model_seed = 1;

    int ablation_rank = 4;
    int ablation_classes = 8;
    uint64_t ablation_model_seed = 11;
    int ablation_target_class = 1;

    std::string flops_calibration = "13824:198.06,10368:149.08,6912:100.11,3456:51.13";

    // tokens of the pooled whole-image context view counted by report
    // displays; empty = auto ((grid_side/patch)^2 / 4)
    std::optional<int64_t> report_context_tokens;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");

    void validate() const;

    GridLayout layout() const;
    EncoderParams encoder_params() const;
    AffinityConfig affinity() const;
    SelectionConfig selection() const;
    FlopsModel flops_model() const;
    int64_t context_tokens() const;

    // reference config text listing every key and its default
    static std::string reference_text();
};

}  // namespace tge
