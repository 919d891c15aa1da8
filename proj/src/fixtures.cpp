#include "tge/fixtures.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tge/grid_io.hpp"
#include "tge/report.hpp"
#include "tge/rng.hpp"

namespace tge {

namespace {

std::string grid_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "grid_%04zu.tgr", index);
    return buf;
}

// one sign pattern over a patch, +-amp per pixel
std::vector<float> sign_pattern(Xoshiro256& rng, int patch_len, float amp) {
    std::vector<float> p(patch_len);
    for (auto& v : p) v = rng.next_sign() ? -amp : amp;
    return p;
}

TokenGrid pixel_grid(std::vector<float> pixels, int side, const std::string& tag) {
    return TokenGrid(static_cast<uint32_t>(side), static_cast<uint32_t>(side), 1,
                     std::move(pixels), tag);
}

std::vector<float> uniform_pixels(const GridLayout& layout, uint64_t seed) {
    Xoshiro256 rng(seed);
    const float value = static_cast<float>(rng.uniform(0.2, 0.8));
    return std::vector<float>(
        static_cast<std::size_t>(layout.grid_side_px) * layout.grid_side_px, value);
}

std::vector<float> two_region_pixels(const GridLayout& layout, uint64_t seed) {
    const int side = static_cast<int>(layout.grid_side_px);
    const int patch = static_cast<int>(layout.patch_px);
    Xoshiro256 rng(seed);
    const std::vector<float> left = sign_pattern(rng, patch * patch, 1.0f);
    const std::vector<float> right = sign_pattern(rng, patch * patch, 1.0f);
    std::vector<float> pixels(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const auto& pattern = (x < side / 2) ? left : right;
            pixels[static_cast<std::size_t>(y) * side + x] =
                pattern[static_cast<std::size_t>(y % patch) * patch + (x % patch)];
        }
    }
    return pixels;
}

TokenGrid outlier_norm_grid(int dim, uint64_t seed) {
    Xoshiro256 rng(seed);
    std::vector<float> u(dim), v(dim);
    double nu = 0.0, nv = 0.0;
    for (int d = 0; d < dim; ++d) {
        u[d] = static_cast<float>(rng.uniform(-1.0, 1.0));
        v[d] = static_cast<float>(rng.uniform(-1.0, 1.0));
        nu += static_cast<double>(u[d]) * u[d];
        nv += static_cast<double>(v[d]) * v[d];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    for (int d = 0; d < dim; ++d) {
        u[d] = static_cast<float>(u[d] / nu);
        v[d] = static_cast<float>(v[d] / nv * 10.0);
    }
    const std::size_t outlier = rng.next_below(100);
    std::vector<float> data(100 * static_cast<std::size_t>(dim));
    for (std::size_t t = 0; t < 100; ++t) {
        const auto& src = (t == outlier) ? v : u;
        std::copy(src.begin(), src.end(), data.begin() + t * dim);
    }
    return TokenGrid(10, 10, static_cast<uint32_t>(dim), std::move(data), "outlier-norm");
}

}  // namespace

std::vector<float> mosaic_grid_pixels(const GridLayout& layout, uint64_t seed,
                                      int64_t grid_index) {
    const int side = static_cast<int>(layout.grid_side_px);
    const int patch = static_cast<int>(layout.patch_px);
    const int patch_len = patch * patch;
    const int m = static_cast<int>(layout.patches_per_side());

    SplitMix64 mixer(seed);
    const uint64_t base = mixer.next();
    Xoshiro256 rng(base ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(grid_index + 1)));

    std::vector<std::vector<float>> fields;
    fields.reserve(4);
    for (int f = 0; f < 4; ++f) fields.push_back(sign_pattern(rng, patch_len, 1.0f));

    std::vector<float> pixels(static_cast<std::size_t>(side) * side);
    std::vector<float> noise(patch_len);
    for (int pr = 0; pr < m; ++pr) {
        for (int pc = 0; pc < m; ++pc) {
            const float* src;
            if (rng.uniform01() < 0.4) {  // scattered distinct "object" patch
                for (auto& v : noise) v = static_cast<float>(rng.uniform(-1.0, 1.0));
                src = noise.data();
            } else {
                const int field = (pr < m / 2 ? 0 : 2) + (pc < m / 2 ? 0 : 1);
                src = fields[field].data();
            }
            for (int py = 0; py < patch; ++py) {
                float* dst = pixels.data() + (static_cast<std::size_t>(pr) * patch + py) * side +
                             static_cast<std::size_t>(pc) * patch;
                std::copy(src + static_cast<std::size_t>(py) * patch,
                          src + static_cast<std::size_t>(py + 1) * patch, dst);
            }
        }
    }
    return pixels;
}

bool is_known_scenario(const std::string& scenario) {
    return scenario == "uniform" || scenario == "two-region" || scenario == "outlier-norm" ||
           scenario == "uhr-mosaic";
}

FixtureManifest generate_fixtures(const RunConfig& config, const std::filesystem::path& out_dir,
                                  uint64_t seed, const std::string& scenario) {
    if (!is_known_scenario(scenario)) {
        throw Error(ErrorKind::usage,
                    "unknown scenario '" + scenario +
                        "' (expected uniform, two-region, outlier-norm or uhr-mosaic)");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());
    }

    FixtureManifest manifest;
    manifest.scenario = scenario;
    manifest.seed = seed;
    manifest.encoder_dim = config.encoder_dim;
    manifest.encoder_layers = config.encoder_layers;
    manifest.encoder_vocab = config.encoder_vocab;

    const int64_t side = config.layout_grid_side_px;
    if (scenario == "uhr-mosaic") {
        manifest.kind = "pixels";
        manifest.layout = config.layout();
        const PatchCount counts = patch_count(manifest.layout);
        for (int64_t g = 0; g < counts.grids_total; ++g) {
            const std::string name = grid_file_name(static_cast<std::size_t>(g));
            const TokenGrid grid = pixel_grid(mosaic_grid_pixels(manifest.layout, seed, g),
                                              static_cast<int>(side), "pixels:" + std::to_string(g));
            save_grid(grid, out_dir / name);
            manifest.grid_files.push_back(name);
        }
    } else if (scenario == "uniform" || scenario == "two-region") {
        manifest.kind = "pixels";
        manifest.layout = GridLayout(side, side, side, config.layout_patch_px);
        std::vector<float> pixels = (scenario == "uniform")
                                        ? uniform_pixels(manifest.layout, seed)
                                        : two_region_pixels(manifest.layout, seed);
        const std::string name = grid_file_name(0);
        save_grid(pixel_grid(std::move(pixels), static_cast<int>(side), "pixels:0"),
                  out_dir / name);
        manifest.grid_files.push_back(name);
    } else {  // outlier-norm
        manifest.kind = "tokens";
        manifest.layout = GridLayout(side, side, side, config.layout_patch_px);
        const std::string name = grid_file_name(0);
        save_grid(outlier_norm_grid(config.encoder_dim, seed), out_dir / name);
        manifest.grid_files.push_back(name);
    }

    write_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

void write_manifest(const FixtureManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["schema"] = "tge.fixture_manifest.v1";
    j["scenario"] = manifest.scenario;
    j["kind"] = manifest.kind;
    j["seed"] = manifest.seed;
    j["layout"] = layout_to_json(manifest.layout);
    j["grids_total"] = patch_count(manifest.layout).grids_total;
    j["params"] = {{"dim", manifest.encoder_dim},
                   {"layers", manifest.encoder_layers},
                   {"vocab", manifest.encoder_vocab}};
    j["grids"] = manifest.grid_files;
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
}

FixtureManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open manifest " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
        FixtureManifest m;
        m.scenario = j.at("scenario").get<std::string>();
        m.kind = j.at("kind").get<std::string>();
        m.seed = j.at("seed").get<uint64_t>();
        m.layout = layout_from_json(j.at("layout"));
        m.encoder_dim = j.at("params").at("dim").get<int>();
        m.encoder_layers = j.at("params").at("layers").get<int>();
        m.encoder_vocab = j.at("params").at("vocab").get<int>();
        m.grid_files = j.at("grids").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::manifest, path.string() + ": " + e.what());
    }
}

}  // namespace tge
