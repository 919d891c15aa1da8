#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tge/config.hpp"
#include "tge/token_grid.hpp"

namespace tge {

// Deterministic fixture sets for the CLI pipelines. Pixel scenarios write
// one TGR1 file per grid (rows = cols = grid_side_px, dim = 1); the
// outlier-norm scenario writes a token grid directly.
//
//   uniform      one grid of constant pixels
//   two-region   one grid, left/right halves with distinct patch patterns
//   outlier-norm 10 x 10 token grid, 99 unit-norm tokens and 1 of norm 10
//   uhr-mosaic   full configured layout (default 8064 x 8064, 576 grids)
struct FixtureManifest {
    std::string scenario;
    std::string kind;  // "pixels" or "tokens"
    uint64_t seed = 0;
    GridLayout layout{336, 336, 336, 14};
    int encoder_dim = 32;
    int encoder_layers = 3;
    int encoder_vocab = 64;
    std::vector<std::string> grid_files;  // relative to the manifest directory
};

bool is_known_scenario(const std::string& scenario);

FixtureManifest generate_fixtures(const RunConfig& config, const std::filesystem::path& out_dir,
                                  uint64_t seed, const std::string& scenario);

void write_manifest(const FixtureManifest& manifest, const std::filesystem::path& path);
FixtureManifest load_manifest(const std::filesystem::path& path);

// Mosaic pixel synthesis for one grid, shared by the generator and tests:
// four quadrant fields of repeated patch patterns with seeded noise patches
// scattered over them, so clustering always finds clusters while plenty of
// distinct tokens survive to selection.
std::vector<float> mosaic_grid_pixels(const GridLayout& layout, uint64_t seed,
                                      int64_t grid_index);

}  // namespace tge
