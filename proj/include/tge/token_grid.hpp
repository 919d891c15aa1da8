#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tge/errors.hpp"

namespace tge {

// A rows x cols lattice of fixed-dimension embedding vectors, row-major.
// The unit of compression. Immutable after construction; every component
// is checked finite.
class TokenGrid {
public:
    TokenGrid(uint32_t rows, uint32_t cols, uint32_t dim, std::vector<float> data,
              std::string tag = "");

    uint32_t rows() const noexcept { return rows_; }
    uint32_t cols() const noexcept { return cols_; }
    uint32_t dim() const noexcept { return dim_; }
    const std::string& tag() const noexcept { return tag_; }

    std::size_t token_count() const noexcept {
        return static_cast<std::size_t>(rows_) * cols_;
    }

    std::span<const float> data() const noexcept { return data_; }

    std::span<const float> token(std::size_t index) const {
        return std::span<const float>(data_).subspan(index * dim_, dim_);
    }

private:
    uint32_t rows_, cols_, dim_;
    std::string tag_;
    std::vector<float> data_;
};

// Pixel geometry of a mosaic image: grids_per_side x grids_per_side grids of
// grid_side_px pixels, each split into patch_px patches. Dimensions must be
// exactly divisible; anything else is rejected rather than padded.
struct GridLayout {
    int64_t image_width;
    int64_t image_height;
    int64_t grid_side_px = 336;
    int64_t patch_px = 14;

    GridLayout(int64_t width, int64_t height, int64_t grid_side, int64_t patch);

    int64_t grids_x() const noexcept { return image_width / grid_side_px; }
    int64_t grids_y() const noexcept { return image_height / grid_side_px; }
    int64_t patches_per_side() const noexcept { return grid_side_px / patch_px; }
};

struct PatchCount {
    int64_t grids_total;
    int64_t tokens_per_grid_raw;
    int64_t tokens_total_raw;
};

PatchCount patch_count(const GridLayout& layout);

// Total visual tokens when each grid keeps tokens_per_grid tokens.
int64_t token_budget(const GridLayout& layout, int64_t tokens_per_grid);

// Affine model of inference cost in visual token count.
struct FlopsModel {
    double slope_tflops_per_token;
    double intercept_tflops;
};

// Least-squares line through (visual_tokens, tflops) calibration rows.
FlopsModel fit_flops_model(std::span<const std::pair<int64_t, double>> rows);

double estimate_flops(const FlopsModel& model, int64_t visual_tokens);

// The published calibration table this project ships as the default
// FLOPs model: {13824:198.06, 10368:149.08, 6912:100.11, 3456:51.13}.
std::span<const std::pair<int64_t, double>> default_flops_calibration();
FlopsModel default_flops_model();

// k x k mean pooling; rows and cols must be divisible by k.
TokenGrid pool_baseline(const TokenGrid& grid, int k);

// Provenance and accounting of one compression run.
struct CompressionReport {
    int64_t original_token_count = 0;
    int64_t retained_token_count = 0;
    int64_t tokens_per_grid = 0;
    double compression_ratio = 1.0;  // original / retained per grid
    double estimated_tflops = 0.0;
    std::vector<int64_t> retained_indices;
    std::vector<int64_t> cluster_sizes;

    void validate() const;
};

}  // namespace tge
