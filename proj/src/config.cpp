#include "tge/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tge {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int64_t v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::config, "key " + key + ": expected integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const uint64_t v = std::stoull(value, &used);
        if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::config,
                    "key " + key + ": expected unsigned integer, got '" + value + "'");
    }
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::config, "key " + key + ": expected number, got '" + value + "'");
    }
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::config, "cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"layout.image_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.layout_image_width = parse_i64(k, v); }},
        {"layout.image_height", [](RunConfig& c, const std::string& k, const std::string& v) { c.layout_image_height = parse_i64(k, v); }},
        {"layout.grid_side_px", [](RunConfig& c, const std::string& k, const std::string& v) { c.layout_grid_side_px = parse_i64(k, v); }},
        {"layout.patch_px", [](RunConfig& c, const std::string& k, const std::string& v) { c.layout_patch_px = parse_i64(k, v); }},
        {"encoder.dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder_dim = static_cast<int>(parse_i64(k, v)); }},
        {"encoder.layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder_layers = static_cast<int>(parse_i64(k, v)); }},
        {"encoder.vocab", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder_vocab = static_cast<int>(parse_i64(k, v)); }},
        {"encoder.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder_seed = parse_u64(k, v); }},
        {"affinity.neighborhood", [](RunConfig& c, const std::string& k, const std::string& v) { c.affinity_neighborhood = static_cast<int>(parse_i64(k, v)); }},
        {"affinity.steps_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.affinity_steps_n = static_cast<int>(parse_i64(k, v)); }},
        {"affinity.join_threshold", [](RunConfig& c, const std::string& k, const std::string& v) { c.affinity_join_threshold = parse_f64(k, v); }},
        {"affinity.temperature", [](RunConfig& c, const std::string& k, const std::string& v) { c.affinity_temperature = parse_f64(k, v); }},
        {"selection.ratio_r", [](RunConfig& c, const std::string& k, const std::string& v) { c.selection_ratio_r = parse_f64(k, v); }},
        {"selection.budget", [](RunConfig& c, const std::string& k, const std::string& v) { c.selection_budget = parse_i64(k, v); }},
        {"influence.d_out", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_d_out = parse_i64(k, v); }},
        {"influence.keep_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_keep_fraction = parse_f64(k, v); }},
        {"influence.warmup_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_warmup_steps = static_cast<int>(parse_i64(k, v)); }},
        {"influence.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_lr = parse_f64(k, v); }},
        {"influence.sketch_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_sketch_seed = parse_u64(k, v); }},
        {"influence.rank", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_rank = static_cast<int>(parse_i64(k, v)); }},
        {"influence.classes", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_classes = static_cast<int>(parse_i64(k, v)); }},
        {"influence.model_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.influence_model_seed = parse_u64(k, v); }},
        {"ablation.rank", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablation_rank = static_cast<int>(parse_i64(k, v)); }},
        {"ablation.classes", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablation_classes = static_cast<int>(parse_i64(k, v)); }},
        {"ablation.model_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablation_model_seed = parse_u64(k, v); }},
        {"ablation.target_class", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablation_target_class = static_cast<int>(parse_i64(k, v)); }},
        {"flops.calibration", [](RunConfig& c, const std::string&, const std::string& v) { c.flops_calibration = v; }},
        {"report.context_tokens", [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "auto") { c.report_context_tokens.reset(); return; }
             c.report_context_tokens = parse_i64(k, v);
         }},
    };

    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::config,
                        origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw Error(ErrorKind::config,
                        origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    try {
        layout();
        if (encoder_dim <= 0 || encoder_vocab <= 0) {
            throw Error(ErrorKind::config, "encoder.dim and encoder.vocab must be positive");
        }
        if (encoder_layers < 2) {
            throw Error(ErrorKind::config, "encoder.layers must be >= 2");
        }
        if (affinity_neighborhood != 4 && affinity_neighborhood != 8) {
            throw Error(ErrorKind::config, "affinity.neighborhood must be 4 or 8");
        }
        affinity().validate();
        selection().validate();
        if (selection_budget < 0) {
            throw Error(ErrorKind::config, "selection.budget must be >= 0");
        }
        if (influence_d_out < 1) {
            throw Error(ErrorKind::config, "influence.d_out must be >= 1");
        }
        if (!(influence_keep_fraction > 0.0 && influence_keep_fraction <= 1.0)) {
            throw Error(ErrorKind::config, "influence.keep_fraction must be in (0, 1]");
        }
        if (influence_warmup_steps < 0) {
            throw Error(ErrorKind::config, "influence.warmup_steps must be >= 0");
        }
        if (influence_rank < 1 || influence_classes < 2) {
            throw Error(ErrorKind::config, "influence.rank >= 1 and influence.classes >= 2");
        }
        if (!(influence_lr >= 0.0)) {
            throw Error(ErrorKind::config, "influence.lr must be >= 0");
        }
        if (ablation_rank < 1 || ablation_classes < 2 ||
            ablation_rank >= std::min(encoder_dim, ablation_classes)) {
            throw Error(ErrorKind::config,
                        "ablation.rank must satisfy 1 <= rank < min(encoder.dim, classes)");
        }
        if (ablation_target_class < 0 || ablation_target_class >= ablation_classes) {
            throw Error(ErrorKind::config, "ablation.target_class out of range");
        }
        if (report_context_tokens && *report_context_tokens < 0) {
            throw Error(ErrorKind::config, "report.context_tokens must be >= 0 or auto");
        }
        flops_model();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config) throw;
        throw Error(ErrorKind::config, std::string("invalid config: ") + e.what());
    }
}

GridLayout RunConfig::layout() const {
    return GridLayout(layout_image_width, layout_image_height, layout_grid_side_px,
                      layout_patch_px);
}

EncoderParams RunConfig::encoder_params() const {
    return EncoderParams::create(encoder_dim, encoder_layers, encoder_vocab, encoder_seed);
}

AffinityConfig RunConfig::affinity() const {
    AffinityConfig c;
    c.neighborhood = affinity_neighborhood == 4 ? Neighborhood::four_connected
                                                : Neighborhood::eight_connected;
    c.steps_n = affinity_steps_n;
    c.join_threshold = affinity_join_threshold;
    c.temperature = affinity_temperature;
    return c;
}

SelectionConfig RunConfig::selection() const {
    SelectionConfig c;
    c.ratio_r = selection_ratio_r;
    if (selection_budget > 0) c.budget_override = selection_budget;
    return c;
}

FlopsModel RunConfig::flops_model() const {
    std::vector<std::pair<int64_t, double>> rows;
    std::istringstream stream(flops_calibration);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw Error(ErrorKind::config,
                        "flops.calibration entries must be tokens:tflops, got '" + item + "'");
        }
        rows.emplace_back(parse_i64("flops.calibration", trim(item.substr(0, colon))),
                          parse_f64("flops.calibration", trim(item.substr(colon + 1))));
    }
    return fit_flops_model(rows);
}

int64_t RunConfig::context_tokens() const {
    if (report_context_tokens) return *report_context_tokens;
    const int64_t per_grid = patch_count(layout()).tokens_per_grid_raw;
    return per_grid / 4;  // one whole-image view at the default 2x2 pooling
}

std::string RunConfig::reference_text() {
    const RunConfig d;
    std::ostringstream out;
    out << "# tge run configuration; every key listed with its default\n"
        << "layout.image_width = " << d.layout_image_width << "\n"
        << "layout.image_height = " << d.layout_image_height << "\n"
        << "layout.grid_side_px = " << d.layout_grid_side_px << "\n"
        << "layout.patch_px = " << d.layout_patch_px << "\n"
        << "encoder.dim = " << d.encoder_dim << "\n"
        << "encoder.layers = " << d.encoder_layers << "\n"
        << "encoder.vocab = " << d.encoder_vocab << "\n"
        << "encoder.seed = " << d.encoder_seed << "\n"
        << "affinity.neighborhood = " << d.affinity_neighborhood << "\n"
        << "affinity.steps_n = " << d.affinity_steps_n << "\n"
        << "affinity.join_threshold = " << d.affinity_join_threshold << "\n"
        << "affinity.temperature = " << d.affinity_temperature << "\n"
        << "selection.ratio_r = " << d.selection_ratio_r << "\n"
        << "# selection.budget = 0 disables the absolute per-grid budget\n"
        << "selection.budget = " << d.selection_budget << "\n"
        << "influence.d_out = " << d.influence_d_out << "\n"
        << "influence.keep_fraction = " << d.influence_keep_fraction << "\n"
        << "influence.warmup_steps = " << d.influence_warmup_steps << "\n"
        << "influence.lr = " << d.influence_lr << "\n"
        << "influence.sketch_seed = " << d.influence_sketch_seed << "\n"
        << "influence.rank = " << d.influence_rank << "\n"
        << "influence.classes = " << d.influence_classes << "\n"
        << "influence.model_seed = " << d.influence_model_seed << "\n"
        << "ablation.rank = " << d.ablation_rank << "\n"
        << "ablation.classes = " << d.ablation_classes << "\n"
        << "ablation.model_seed = " << d.ablation_model_seed << "\n"
        << "ablation.target_class = " << d.ablation_target_class << "\n"
        << "flops.calibration = " << d.flops_calibration << "\n"
        << "# report.context_tokens = auto counts one 2x2-pooled grid view\n"
        << "report.context_tokens = auto\n";
    return out.str();
}

}  // namespace tge
