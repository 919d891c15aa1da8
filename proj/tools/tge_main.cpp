#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tge/analysis.hpp"
#include "tge/config.hpp"
#include "tge/fixtures.hpp"
#include "tge/grid_io.hpp"
#include "tge/influence.hpp"
#include "tge/log.hpp"
#include "tge/report.hpp"
#include "tge/selection.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::usage:
        case ErrorKind::config:
            return kExitUsage;
        default:
            return kExitData;
    }
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return RunConfig::load(path);
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << text;
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string file_stem_index(std::size_t index, const char* prefix) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%04zu", prefix, index);
    return buf;
}

// grid-file inputs of compress/ablate: either one fixture manifest or
// explicit .tgr paths
struct GridInputs {
    std::optional<FixtureManifest> manifest;
    std::vector<fs::path> files;
};

GridInputs resolve_grid_inputs(const std::vector<std::string>& inputs) {
    if (inputs.empty()) {
        throw Error(ErrorKind::usage, "no input grids given");
    }
    GridInputs out;
    if (inputs.size() == 1 && inputs[0].ends_with(".json")) {
        out.manifest = load_manifest(inputs[0]);
        const fs::path base = fs::path(inputs[0]).parent_path();
        for (const auto& name : out.manifest->grid_files) out.files.push_back(base / name);
    } else {
        for (const auto& p : inputs) out.files.emplace_back(p);
    }
    return out;
}

// ---- gen-fixtures ----------------------------------------------------------

int run_gen_fixtures(const std::string& config_path, const std::string& out_dir, uint64_t seed,
                     const std::string& scenario) {
    const RunConfig cfg = load_config(config_path);
    const FixtureManifest manifest = generate_fixtures(cfg, out_dir, seed, scenario);
    std::cout << "wrote " << manifest.grid_files.size() << " grid(s) and manifest.json to "
              << out_dir << " (scenario " << scenario << ", seed " << seed << ")\n";
    return kExitOk;
}

// ---- compress ---------------------------------------------------------------

int run_compress(const std::string& config_path, const std::vector<std::string>& inputs,
                 const std::string& out_dir, int jobs, bool as_json,
                 std::optional<uint64_t> seed_override) {
    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.encoder_seed = *seed_override;

    const GridInputs grids = resolve_grid_inputs(inputs);
    if (grids.manifest && grids.manifest->kind != "pixels") {
        throw Error(ErrorKind::input, "compress expects pixel-grid fixtures, got kind '" +
                                          grids.manifest->kind + "'");
    }
    const GridLayout layout = grids.manifest ? grids.manifest->layout : cfg.layout();
    const PatchCount counts = patch_count(layout);
    if (static_cast<int64_t>(grids.files.size()) != counts.grids_total) {
        throw Error(ErrorKind::input,
                    "layout expects " + std::to_string(counts.grids_total) + " grid files, got " +
                        std::to_string(grids.files.size()));
    }

    log_info("compress: assembling " + std::to_string(grids.files.size()) + " grids");
    const int64_t side = layout.grid_side_px;
    std::vector<float> pixels(
        static_cast<std::size_t>(layout.image_width) * layout.image_height);
    for (std::size_t g = 0; g < grids.files.size(); ++g) {
        const TokenGrid grid = load_grid(grids.files[g]);
        if (grid.rows() != side || grid.cols() != side || grid.dim() != 1) {
            throw Error(ErrorKind::input, grids.files[g].string() + ": expected a " +
                                              std::to_string(side) + "x" + std::to_string(side) +
                                              " pixel grid with dim 1");
        }
        const int64_t gr = static_cast<int64_t>(g) / layout.grids_x();
        const int64_t gc = static_cast<int64_t>(g) % layout.grids_x();
        for (int64_t y = 0; y < side; ++y) {
            std::copy(grid.data().begin() + y * side, grid.data().begin() + (y + 1) * side,
                      pixels.begin() + (gr * side + y) * layout.image_width + gc * side);
        }
    }

    const EncoderParams encoder = cfg.encoder_params();
    const ImageCompression result = compress_image(pixels, layout, encoder, cfg.affinity(),
                                                   cfg.selection(), cfg.flops_model(), jobs);

    ensure_out_dir(out_dir);
    const fs::path out(out_dir);
    for (std::size_t g = 0; g < result.per_grid.size(); ++g) {
        const RetainedTokens& kept = result.per_grid[g];
        const std::string stem = file_stem_index(g, "retained");
        save_grid(TokenGrid(1, static_cast<uint32_t>(kept.count()), kept.dim,
                            std::vector<float>(kept.vectors), "retained:" + std::to_string(g)),
                  out / (stem + ".tgr"));

        json sidecar;
        sidecar["schema"] = "tge.retained_sidecar.v1";
        sidecar["grid_index"] = g;
        sidecar["source_indices"] = kept.source_indices;
        sidecar["scores"] = kept.scores;
        sidecar["cluster_sizes"] = result.per_grid_reports[g].cluster_sizes;
        sidecar["cluster_of"] = result.per_grid_assignments[g].cluster_of;
        write_json_file(out / (stem + ".json"), sidecar);
    }

    const json summary = compression_summary_json(result.report, layout, cfg.context_tokens());
    write_json_file(out / "report.json", summary);

    if (as_json) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::ostringstream line;
        line << "grids " << counts.grids_total << " | tokens/grid "
             << result.report.tokens_per_grid << " | visual tokens "
             << result.report.retained_token_count << " ("
             << summary["visual_tokens_display"].get<std::string>() << ") | ratio " << std::fixed
             << std::setprecision(1) << result.report.compression_ratio << "x | est. "
             << std::setprecision(2) << result.report.estimated_tflops << " TFLOPs";
        std::cout << line.str() << "\n";
    }
    return kExitOk;
}

// ---- select-data ------------------------------------------------------------

std::vector<DataSample> load_sample_manifest(const fs::path& path, int classes) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open sample manifest " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::manifest, path.string() + ": " + e.what());
    }
    if (!j.contains("samples") || !j["samples"].is_array()) {
        throw Error(ErrorKind::manifest, path.string() + ": missing samples array");
    }
    const fs::path base = path.parent_path();
    std::vector<DataSample> samples;
    for (const auto& entry : j["samples"]) {
        DataSample s;
        try {
            s.id = entry.at("id").get<std::string>();
            s.label = entry.at("label").get<int>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::manifest, path.string() + ": bad sample entry: " + e.what());
        }
        const fs::path file = base / entry.at("file").get<std::string>();
        if (!fs::exists(file)) {
            throw Error(ErrorKind::manifest,
                        "sample '" + s.id + "': missing file " + file.string());
        }
        const TokenGrid grid = load_grid(file);
        s.features.assign(grid.data().begin(), grid.data().end());
        if (s.label < 0 || s.label >= classes) {
            throw Error(ErrorKind::manifest, "sample '" + s.id + "': label " +
                                                 std::to_string(s.label) + " outside 0.." +
                                                 std::to_string(classes - 1));
        }
        samples.push_back(std::move(s));
    }
    if (samples.empty()) {
        throw Error(ErrorKind::manifest, path.string() + ": no samples");
    }
    return samples;
}

int run_select_data(const std::string& config_path, const std::string& train_path,
                    const std::string& val_path, const std::string& out_dir, bool as_json) {
    const RunConfig cfg = load_config(config_path);
    const auto train = load_sample_manifest(train_path, cfg.influence_classes);
    const auto val = load_sample_manifest(val_path, cfg.influence_classes);

    const int in_dim = static_cast<int>(train.front().features.size());
    for (const auto& s : train) {
        if (static_cast<int>(s.features.size()) != in_dim) {
            throw Error(ErrorKind::manifest, "sample '" + s.id + "': feature dim mismatch");
        }
    }
    for (const auto& s : val) {
        if (static_cast<int>(s.features.size()) != in_dim) {
            throw Error(ErrorKind::manifest, "sample '" + s.id + "': feature dim mismatch");
        }
    }

    const AdapterModel model = AdapterModel::create(in_dim, cfg.influence_rank,
                                                    cfg.influence_classes,
                                                    cfg.influence_model_seed);
    const FeaturizeResult features =
        warmup_and_featurize(model, train, val, cfg.influence_warmup_steps, cfg.influence_lr,
                             cfg.influence_sketch_seed, cfg.influence_d_out);
    const auto [ranking, selected] =
        rank_and_select(features.train, features.val, cfg.influence_keep_fraction);

    ensure_out_dir(out_dir);
    const fs::path out(out_dir);

    // persist the projected gradient features next to the ranking
    const fs::path feature_dir = out / "features";
    ensure_out_dir(feature_dir);
    const auto persist = [&](const std::vector<GradientFeature>& features, const char* prefix) {
        for (const auto& f : features) {
            std::vector<float> data(f.vec.begin(), f.vec.end());
            save_grid(TokenGrid(1, 1, static_cast<uint32_t>(f.vec.size()), std::move(data),
                                f.sample_id),
                      feature_dir / (std::string(prefix) + "_" + f.sample_id + ".tgr"));
        }
    };
    persist(features.train, "train");
    persist(features.val, "val");

    std::set<std::string> selected_set(selected.begin(), selected.end());
    std::ostringstream jsonl;
    for (const auto& entry : ranking.entries) {
        json line;
        line["sample_id"] = entry.sample_id;
        line["score"] = entry.score;
        line["selected"] = selected_set.count(entry.sample_id) > 0;
        jsonl << line.dump() << "\n";
    }
    write_text(out / "ranking.jsonl", jsonl.str());
    std::ostringstream ids;
    for (const auto& id : selected) ids << id << "\n";
    write_text(out / "selected.txt", ids.str());

    if (as_json) {
        json summary;
        summary["schema"] = "tge.selection_summary.v1";
        summary["train_samples"] = train.size();
        summary["validation_samples"] = val.size();
        summary["keep_fraction"] = cfg.influence_keep_fraction;
        summary["selected"] = selected.size();
        std::cout << summary.dump(2) << "\n";
    } else {
        std::cout << "selected " << selected.size() << " of " << train.size()
                  << " training samples (keep_fraction " << cfg.influence_keep_fraction << ")\n";
    }
    return kExitOk;
}

// ---- ablate ------------------------------------------------------------------

std::optional<AblationSpec> parse_spec(const json& j, int* target_class) {
    AblationSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "object" || kind == "object_buffer") {
        spec.kind = kind == "object" ? AblationSpec::Kind::object
                                     : AblationSpec::Kind::object_buffer;
        const auto& box = j.at("bbox");
        spec.bbox = PixelBox{box.at(0).get<int64_t>(), box.at(1).get<int64_t>(),
                             box.at(2).get<int64_t>(), box.at(3).get<int64_t>()};
        if (kind == "object_buffer") spec.buffer_k = j.value("k", 1);
    } else if (kind == "register") {
        spec.kind = AblationSpec::Kind::register_tokens;
    } else if (kind == "random") {
        spec.kind = AblationSpec::Kind::random;
        spec.random_n = j.at("n").get<int64_t>();
        spec.seed = j.value("seed", 0ull);
    } else {
        throw Error(ErrorKind::input, "unknown ablation kind '" + kind + "'");
    }
    if (j.contains("target_class")) *target_class = j["target_class"].get<int>();
    spec.validate();
    return spec;
}

int run_ablate(const std::string& config_path, const std::vector<std::string>& grid_inputs,
               const std::string& specs_path, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path);
    const GridInputs grids = resolve_grid_inputs(grid_inputs);
    if (grids.manifest && grids.manifest->kind != "tokens") {
        throw Error(ErrorKind::input, "ablate expects token grids, got kind '" +
                                          grids.manifest->kind + "'");
    }

    std::vector<TokenGrid> loaded;
    std::vector<std::string> grid_ids;
    for (const auto& file : grids.files) {
        loaded.push_back(load_grid(file));
        grid_ids.push_back(file.filename().string());
    }
    const uint32_t dim = loaded.front().dim();
    for (const auto& g : loaded) {
        if (g.dim() != dim) {
            throw Error(ErrorKind::input, "ablation grids have mixed dimensions");
        }
    }

    // fixed average embedding: the mean of all tokens across the input grids
    std::vector<double> acc(dim, 0.0);
    std::size_t total = 0;
    for (const auto& g : loaded) {
        for (std::size_t t = 0; t < g.token_count(); ++t) {
            const auto tok = g.token(t);
            for (uint32_t d = 0; d < dim; ++d) acc[d] += tok[d];
        }
        total += g.token_count();
    }
    std::vector<float> corpus_mean(dim);
    double norm2 = 0.0;
    for (uint32_t d = 0; d < dim; ++d) {
        corpus_mean[d] = static_cast<float>(acc[d] / static_cast<double>(total));
        norm2 += static_cast<double>(corpus_mean[d]) * corpus_mean[d];
    }
    const double replacement_norm = std::sqrt(norm2);

    const AdapterModel proxy = AdapterModel::create(static_cast<int>(dim), cfg.ablation_rank,
                                                    cfg.ablation_classes, cfg.ablation_model_seed);

    std::ifstream specs(specs_path);
    if (!specs) {
        throw Error(ErrorKind::io, "cannot open specs file " + specs_path);
    }

    ensure_out_dir(out_dir);
    std::ostringstream jsonl;
    bool any_failed = false;
    std::string spec_line;
    std::size_t lineno = 0;
    while (std::getline(specs, spec_line)) {
        ++lineno;
        if (spec_line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json parsed;
        std::optional<AblationSpec> spec;
        int target_class = cfg.ablation_target_class;
        std::string spec_error;
        try {
            parsed = json::parse(spec_line);
            spec = parse_spec(parsed, &target_class);
        } catch (const std::exception& e) {
            spec_error = e.what();
        }
        for (std::size_t g = 0; g < loaded.size(); ++g) {
            json row;
            row["grid_id"] = grid_ids[g];
            if (!spec) {
                row["spec_text"] = spec_line;
                row["error"] = spec_error;
                any_failed = true;
                jsonl << row.dump() << "\n";
                continue;
            }
            row["spec"] = parsed;
            try {
                const TokenGrid& grid = loaded[g];
                // bbox coordinates live in a patch-lattice pixel space
                // spanning this grid
                if ((spec->kind == AblationSpec::Kind::object ||
                     spec->kind == AblationSpec::Kind::object_buffer) &&
                    grid.rows() != grid.cols()) {
                    throw Error(ErrorKind::input, "object specs need square token grids");
                }
                const GridLayout grid_layout(grid.cols() * cfg.layout_patch_px,
                                             grid.rows() * cfg.layout_patch_px,
                                             grid.cols() * cfg.layout_patch_px,
                                             cfg.layout_patch_px);
                const auto [ablated, indices] =
                    ablate_tokens(grid, *spec, corpus_mean, grid_layout);
                AblationResult result =
                    degradation_metric(proxy, grid, ablated, target_class);
                result.ablated_indices = indices;
                result.replacement_norm = replacement_norm;
                row["ablated_count"] = indices.size();
                row["replacement_norm"] = result.replacement_norm;
                row["metric_before"] = result.metric_before;
                row["metric_after"] = result.metric_after;
                row["decrease_percent"] = result.decrease_percent;
            } catch (const Error& e) {
                row["error"] = e.what();
                any_failed = true;
            }
            jsonl << row.dump() << "\n";
        }
    }
    write_text(fs::path(out_dir) / "ablation.jsonl", jsonl.str());
    std::cout << "ablation sweep over " << loaded.size() << " grid(s) written to " << out_dir
              << "/ablation.jsonl\n";
    return any_failed ? kExitPartial : kExitOk;
}

// ---- stats -------------------------------------------------------------------

int run_stats(const std::vector<std::string>& report_paths, bool as_json) {
    struct Row {
        int64_t tokens_per_grid;
        int64_t visual_tokens;
        std::string display;
        double tflops;
    };
    std::map<std::string, std::vector<Row>> groups;
    for (const auto& path : report_paths) {
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorKind::io, "cannot open report " + path);
        }
        json j;
        try {
            in >> j;
            groups[j.at("layout_hash").get<std::string>()].push_back(
                Row{j.at("tokens_per_grid").get<int64_t>(), j.at("visual_tokens").get<int64_t>(),
                    j.at("visual_tokens_display").get<std::string>(),
                    j.at("estimated_tflops").get<double>()});
        } catch (const json::exception& e) {
            throw Error(ErrorKind::format, path + ": " + e.what());
        }
    }
    for (auto& [hash, rows] : groups) {
        std::sort(rows.begin(), rows.end(),
                  [](const Row& a, const Row& b) { return a.visual_tokens > b.visual_tokens; });
    }

    if (as_json) {
        json out;
        out["schema"] = "tge.stats.v1";
        out["groups"] = json::array();
        for (const auto& [hash, rows] : groups) {
            json g;
            g["layout_hash"] = hash;
            g["rows"] = json::array();
            for (const Row& r : rows) {
                g["rows"].push_back({{"tokens_per_grid", r.tokens_per_grid},
                                     {"visual_tokens", r.visual_tokens},
                                     {"visual_tokens_display", r.display},
                                     {"estimated_tflops", r.tflops}});
            }
            out["groups"].push_back(std::move(g));
        }
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << std::left << std::setw(18) << "layout" << std::setw(13) << "tokens/grid"
                  << std::setw(15) << "visual tokens" << "TFLOPs\n";
        for (const auto& [hash, rows] : groups) {
            for (const Row& r : rows) {
                std::ostringstream tokens;
                tokens << r.visual_tokens << " (" << r.display << ")";
                std::cout << std::left << std::setw(18) << hash << std::setw(13)
                          << r.tokens_per_grid << std::setw(15) << tokens.str() << std::fixed
                          << std::setprecision(2) << r.tflops << "\n";
            }
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-grid compression, data selection and ablation toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_path, out_dir, scenario, train_path, val_path, specs_path;
    std::vector<std::string> inputs;
    uint64_t seed = 42;
    bool seed_given = false;
    int jobs = 0;
    bool as_json = false;

    auto* gen = app.add_subcommand("gen-fixtures", "generate deterministic fixture grids");
    gen->add_option("--config", config_path, "config file");
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--seed", seed, "fixture seed (default 42)");
    gen->add_option("--scenario", scenario,
                    "uniform | two-region | outlier-norm | uhr-mosaic")
        ->required();

    auto* compress = app.add_subcommand("compress", "encode and compress pixel grids");
    compress->add_option("inputs", inputs, "fixture manifest.json or pixel .tgr files")
        ->required();
    compress->add_option("--config", config_path, "config file");
    compress->add_option("--out", out_dir, "output directory")->required();
    compress->add_option("--jobs", jobs, "worker threads (0 = auto)");
    compress->add_flag("--json", as_json, "print the report JSON on stdout");
    compress
        ->add_option("--seed", seed, "override encoder.seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* select = app.add_subcommand("select-data", "influence-rank training samples");
    select->add_option("--config", config_path, "config file");
    select->add_option("--train", train_path, "training sample manifest")->required();
    select->add_option("--val", val_path, "validation sample manifest")->required();
    select->add_option("--out", out_dir, "output directory")->required();
    select->add_flag("--json", as_json, "print a summary JSON on stdout");

    auto* ablate = app.add_subcommand("ablate", "token-ablation sweep with a proxy metric");
    ablate->add_option("--grids", inputs, "token-grid manifest.json or .tgr files")->required();
    ablate->add_option("--specs", specs_path, "ablation specs, one JSON object per line")
        ->required();
    ablate->add_option("--config", config_path, "config file");
    ablate->add_option("--out", out_dir, "output directory")->required();

    auto* stats = app.add_subcommand("stats", "tabulate compression reports");
    stats->add_option("reports", inputs, "report.json files")->required();
    stats->add_flag("--json", as_json, "machine-readable output");

    auto* reference = app.add_subcommand("reference-config", "print the default config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen_fixtures(config_path, out_dir, seed, scenario);
        if (compress->parsed()) {
            return run_compress(config_path, inputs, out_dir, jobs, as_json,
                                seed_given ? std::optional<uint64_t>(seed) : std::nullopt);
        }
        if (select->parsed()) {
            return run_select_data(config_path, train_path, val_path, out_dir, as_json);
        }
        if (ablate->parsed()) return run_ablate(config_path, inputs, specs_path, out_dir);
        if (stats->parsed()) return run_stats(inputs, as_json);
        if (reference->parsed()) {
            std::cout << RunConfig::reference_text();
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "tge: " << error_kind_name(e.kind()) << " error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "tge: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
