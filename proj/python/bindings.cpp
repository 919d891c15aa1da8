#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tge/adapter.hpp"
#include "tge/affinity.hpp"
#include "tge/analysis.hpp"
#include "tge/encoder.hpp"
#include "tge/grid_io.hpp"
#include "tge/influence.hpp"
#include "tge/report.hpp"
#include "tge/selection.hpp"
#include "tge/token_grid.hpp"

namespace py = pybind11;
using namespace tge;

namespace {

TokenGrid grid_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> array,
                          const std::string& tag) {
    if (array.ndim() != 3) {
        throw Error(ErrorKind::shape, "expected a (rows, cols, dim) array");
    }
    const auto rows = static_cast<uint32_t>(array.shape(0));
    const auto cols = static_cast<uint32_t>(array.shape(1));
    const auto dim = static_cast<uint32_t>(array.shape(2));
    std::vector<float> data(array.data(), array.data() + array.size());
    return TokenGrid(rows, cols, dim, std::move(data), tag);
}

py::array_t<float> grid_to_array(const TokenGrid& grid) {
    return py::array_t<float>({static_cast<py::ssize_t>(grid.rows()),
                               static_cast<py::ssize_t>(grid.cols()),
                               static_cast<py::ssize_t>(grid.dim())},
                              grid.data().data());
}

std::vector<float> pixels_from_array(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& array) {
    if (array.ndim() != 2) {
        throw Error(ErrorKind::shape, "expected a (height, width) pixel array");
    }
    return std::vector<float>(array.data(), array.data() + array.size());
}

py::array_t<double> vector_to_array(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<float> matrix_to_array(const std::vector<float>& v, std::size_t rows,
                                   std::size_t cols) {
    return py::array_t<float>({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)},
                              v.data());
}

py::dict report_to_dict(const CompressionReport& r) {
    py::dict d;
    d["original_token_count"] = r.original_token_count;
    d["retained_token_count"] = r.retained_token_count;
    d["tokens_per_grid"] = r.tokens_per_grid;
    d["compression_ratio"] = r.compression_ratio;
    d["estimated_tflops"] = r.estimated_tflops;
    d["retained_indices"] = r.retained_indices;
    d["cluster_sizes"] = r.cluster_sizes;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "token-grid compression, influence-based data selection and ablation analysis";

    py::register_exception<Error>(m, "Error");

    py::class_<GridLayout>(m, "GridLayout")
        .def(py::init<int64_t, int64_t, int64_t, int64_t>(), py::arg("image_width"),
             py::arg("image_height"), py::arg("grid_side_px") = 336, py::arg("patch_px") = 14)
        .def_readonly("image_width", &GridLayout::image_width)
        .def_readonly("image_height", &GridLayout::image_height)
        .def_readonly("grid_side_px", &GridLayout::grid_side_px)
        .def_readonly("patch_px", &GridLayout::patch_px);

    py::class_<TokenGrid>(m, "TokenGrid")
        .def(py::init(&grid_from_array), py::arg("array"), py::arg("tag") = "")
        .def_property_readonly("rows", &TokenGrid::rows)
        .def_property_readonly("cols", &TokenGrid::cols)
        .def_property_readonly("dim", &TokenGrid::dim)
        .def_property_readonly("tag", &TokenGrid::tag)
        .def("numpy", &grid_to_array);

    m.def("save_grid", &save_grid, py::arg("grid"), py::arg("path"));
    m.def("load_grid", &load_grid, py::arg("path"));

    m.def(
        "patch_count",
        [](const GridLayout& layout) {
            const PatchCount c = patch_count(layout);
            return py::make_tuple(c.grids_total, c.tokens_per_grid_raw, c.tokens_total_raw);
        },
        py::arg("layout"));
    m.def("token_budget", &token_budget, py::arg("layout"), py::arg("tokens_per_grid"));

    py::class_<FlopsModel>(m, "FlopsModel")
        .def_readonly("slope_tflops_per_token", &FlopsModel::slope_tflops_per_token)
        .def_readonly("intercept_tflops", &FlopsModel::intercept_tflops);
    m.def(
        "fit_flops_model",
        [](const std::vector<std::pair<int64_t, double>>& rows) {
            return fit_flops_model(rows);
        },
        py::arg("rows"));
    m.def("estimate_flops", &estimate_flops, py::arg("model"), py::arg("visual_tokens"));
    m.def("default_flops_model", &default_flops_model);
    m.def("format_thousands", &format_thousands, py::arg("count"));

    m.def("pool_baseline", &pool_baseline, py::arg("grid"), py::arg("k"));

    py::class_<EncoderParams>(m, "EncoderParams")
        .def_static("create", &EncoderParams::create, py::arg("dim"), py::arg("layers"),
                    py::arg("vocab"), py::arg("seed"))
        .def_property_readonly("dim", &EncoderParams::dim)
        .def_property_readonly("layers", &EncoderParams::layers)
        .def_property_readonly("vocab", &EncoderParams::vocab)
        .def_property_readonly("seed", &EncoderParams::seed);

    py::class_<AttentionMap>(m, "AttentionMap")
        .def_property_readonly("weights",
                               [](const AttentionMap& a) { return vector_to_array(a.weights); });

    py::class_<EncodedOutput>(m, "EncodedOutput")
        .def_property_readonly(
            "cls_attention",
            [](const EncodedOutput& e) {
                return vector_to_array(e.cls_attention_second_to_last.weights);
            })
        .def_property_readonly("layer_count",
                               [](const EncodedOutput& e) { return e.hidden.size(); })
        .def("hidden", [](const EncodedOutput& e, std::size_t layer) {
            return grid_to_array(e.hidden.at(layer));
        })
        .def("final_tokens", &EncodedOutput::final_tokens, py::arg("rows"), py::arg("cols"));

    m.def(
        "encode",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> pixels,
           const EncoderParams& params, const GridLayout& layout) {
            return encode(pixels_from_array(pixels), params, layout);
        },
        py::arg("pixels"), py::arg("params"), py::arg("layout"));

    m.def(
        "softmax_attention",
        [](const std::vector<float>& query,
           py::array_t<float, py::array::c_style | py::array::forcecast> keys) {
            if (keys.ndim() != 2) {
                throw Error(ErrorKind::shape, "keys must be a (n, d) array");
            }
            const std::vector<float> key_data(keys.data(), keys.data() + keys.size());
            return softmax_attention(query, key_data, static_cast<std::size_t>(keys.shape(0)),
                                     static_cast<int>(keys.shape(1)));
        },
        py::arg("query"), py::arg("keys"));

    m.def(
        "logit_lens",
        [](const std::vector<float>& hidden,
           py::array_t<float, py::array::c_style | py::array::forcecast> unembedding) {
            if (unembedding.ndim() != 2) {
                throw Error(ErrorKind::shape, "unembedding must be a (vocab, d) array");
            }
            const std::vector<float> u(unembedding.data(),
                                       unembedding.data() + unembedding.size());
            auto [token, logits] = logit_lens(hidden, u, static_cast<int>(unembedding.shape(0)));
            return py::make_tuple(token, vector_to_array(logits));
        },
        py::arg("hidden"), py::arg("unembedding"));

    m.def("detect_register_tokens", &detect_register_tokens, py::arg("grid"));

    py::enum_<Neighborhood>(m, "Neighborhood")
        .value("FOUR_CONNECTED", Neighborhood::four_connected)
        .value("EIGHT_CONNECTED", Neighborhood::eight_connected);

    py::class_<AffinityConfig>(m, "AffinityConfig")
        .def(py::init([](Neighborhood n, int steps_n, double join_threshold, double temperature) {
                 AffinityConfig c{n, steps_n, join_threshold, temperature};
                 c.validate();
                 return c;
             }),
             py::arg("neighborhood") = Neighborhood::eight_connected, py::arg("steps_n") = 3,
             py::arg("join_threshold") = 0.85, py::arg("temperature") = 0.1)
        .def_readonly("steps_n", &AffinityConfig::steps_n)
        .def_readonly("join_threshold", &AffinityConfig::join_threshold)
        .def_readonly("temperature", &AffinityConfig::temperature);

    m.def(
        "cluster_grid",
        [](const TokenGrid& grid, const AffinityConfig& config) {
            const ClusterAssignment a = cluster_grid(grid, config);
            return py::make_tuple(a.cluster_of, a.cluster_count);
        },
        py::arg("grid"), py::arg("config") = AffinityConfig{});
    m.def(
        "grow_cluster",
        [](const TokenGrid& grid, int64_t seed_index, const AffinityConfig& config) {
            return grow_cluster(grid, seed_index, config);
        },
        py::arg("grid"), py::arg("seed_index"), py::arg("config") = AffinityConfig{});

    py::class_<SelectionConfig>(m, "SelectionConfig")
        .def(py::init([](double ratio_r, std::optional<int64_t> budget) {
                 SelectionConfig c;
                 c.ratio_r = ratio_r;
                 c.budget_override = budget;
                 c.validate();
                 return c;
             }),
             py::arg("ratio_r") = 1.0, py::arg("budget") = std::nullopt)
        .def_readonly("ratio_r", &SelectionConfig::ratio_r);

    py::class_<RetainedTokens>(m, "RetainedTokens")
        .def_property_readonly("count", &RetainedTokens::count)
        .def_property_readonly("source_indices",
                               [](const RetainedTokens& r) { return r.source_indices; })
        .def_property_readonly("scores", [](const RetainedTokens& r) { return r.scores; })
        .def_property_readonly("vectors", [](const RetainedTokens& r) {
            return matrix_to_array(r.vectors, r.count(), r.dim);
        });

    m.def(
        "select_anchored",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> tokens,
           const AttentionMap& attention, const SelectionConfig& config) {
            if (tokens.ndim() != 2) {
                throw Error(ErrorKind::shape, "tokens must be a (n, d) array");
            }
            const std::vector<float> data(tokens.data(), tokens.data() + tokens.size());
            return select_anchored(data, static_cast<uint32_t>(tokens.shape(1)), attention,
                                   config);
        },
        py::arg("tokens"), py::arg("cls_attention"), py::arg("config"));

    m.def(
        "compress_grid",
        [](const TokenGrid& grid, const EncodedOutput& enc, const AffinityConfig& affinity,
           const SelectionConfig& selection) {
            auto [retained, report] = compress_grid(grid, enc, affinity, selection);
            return py::make_tuple(std::move(retained), report_to_dict(report));
        },
        py::arg("grid"), py::arg("encoder_output"), py::arg("affinity") = AffinityConfig{},
        py::arg("selection") = SelectionConfig{});

    m.def(
        "compress_image",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> pixels,
           const GridLayout& layout, const EncoderParams& encoder,
           const AffinityConfig& affinity, const SelectionConfig& selection, int jobs) {
            const ImageCompression result = compress_image(
                pixels_from_array(pixels), layout, encoder, affinity, selection,
                default_flops_model(), jobs);
            py::list per_grid;
            for (const auto& kept : result.per_grid) per_grid.append(kept);
            return py::make_tuple(per_grid, report_to_dict(result.report));
        },
        py::arg("pixels"), py::arg("layout"), py::arg("encoder"),
        py::arg("affinity") = AffinityConfig{}, py::arg("selection") = SelectionConfig{},
        py::arg("jobs") = 1);

    py::class_<DataSample>(m, "DataSample")
        .def(py::init([](std::string id, std::vector<float> features, int label) {
                 return DataSample{std::move(id), std::move(features), label};
             }),
             py::arg("id"), py::arg("features"), py::arg("label"))
        .def_readonly("id", &DataSample::id)
        .def_readonly("label", &DataSample::label);

    py::class_<AdapterModel>(m, "AdapterModel")
        .def_static("create", &AdapterModel::create, py::arg("in_dim"), py::arg("rank"),
                    py::arg("out_classes"), py::arg("seed"))
        .def_readonly("in_dim", &AdapterModel::in_dim)
        .def_readonly("rank", &AdapterModel::rank)
        .def_readonly("out_classes", &AdapterModel::out_classes)
        .def("class_probabilities", [](const AdapterModel& m_, const std::vector<float>& x) {
            return vector_to_array(m_.class_probabilities(x));
        });

    m.def(
        "adapter_loss_and_gradient",
        [](const AdapterModel& model, const std::vector<float>& features, int label) {
            const LossGrad lg = adapter_loss_and_gradient(model, features, label);
            return py::make_tuple(lg.loss, vector_to_array(lg.grad));
        },
        py::arg("model"), py::arg("features"), py::arg("label"));
    m.def(
        "sgd_step",
        [](const AdapterModel& model, const std::vector<DataSample>& batch, double lr) {
            return sgd_step(model, batch, lr);
        },
        py::arg("model"), py::arg("batch"), py::arg("lr"));

    py::class_<ProjectionSketch>(m, "ProjectionSketch")
        .def_static("build", &ProjectionSketch::build, py::arg("d_in"), py::arg("d_out"),
                    py::arg("seed"))
        .def_readonly("d_in", &ProjectionSketch::d_in)
        .def_readonly("d_out", &ProjectionSketch::d_out);

    py::class_<GradientFeature>(m, "GradientFeature")
        .def_readonly("sample_id", &GradientFeature::sample_id)
        .def_property_readonly("vector",
                               [](const GradientFeature& f) { return vector_to_array(f.vec); });

    m.def(
        "project_gradient",
        [](const ProjectionSketch& sketch, const std::vector<double>& grad, std::string id) {
            return project_gradient(sketch, grad, std::move(id));
        },
        py::arg("sketch"), py::arg("grad"), py::arg("sample_id") = "");
    m.def(
        "influence_score",
        [](const GradientFeature& train, const std::vector<GradientFeature>& val) {
            return influence_score(train, val);
        },
        py::arg("train_feature"), py::arg("val_features"));
    m.def(
        "rank_and_select",
        [](const std::vector<GradientFeature>& train, const std::vector<GradientFeature>& val,
           double keep_fraction) {
            auto [ranking, selected] = rank_and_select(train, val, keep_fraction);
            py::list entries;
            for (const auto& e : ranking.entries) {
                entries.append(py::make_tuple(e.sample_id, e.score));
            }
            return py::make_tuple(entries, selected);
        },
        py::arg("train_features"), py::arg("val_features"), py::arg("keep_fraction") = 0.7);
    m.def(
        "warmup_and_featurize",
        [](const AdapterModel& model, const std::vector<DataSample>& train,
           const std::vector<DataSample>& val, int warmup_steps, double lr, uint64_t sketch_seed,
           int64_t d_out) {
            FeaturizeResult r =
                warmup_and_featurize(model, train, val, warmup_steps, lr, sketch_seed, d_out);
            return py::make_tuple(std::move(r.train), std::move(r.val),
                                  std::move(r.warmed_model));
        },
        py::arg("model"), py::arg("crude_train"), py::arg("validation"),
        py::arg("warmup_steps") = 10, py::arg("lr") = 0.01, py::arg("sketch_seed") = 7,
        py::arg("d_out") = 8192);

    py::class_<BackgroundLexicon>(m, "BackgroundLexicon")
        .def(py::init([](const std::vector<std::pair<std::string, std::vector<float>>>& terms) {
            BackgroundLexicon lex;
            for (const auto& [label, embedding] : terms) {
                lex.terms.push_back({label, embedding});
            }
            lex.validate();
            return lex;
        }))
        .def_property_readonly("size",
                               [](const BackgroundLexicon& lex) { return lex.terms.size(); });

    m.def(
        "background_score",
        [](const std::vector<float>& token, const BackgroundLexicon& lexicon) {
            return background_score(token, lexicon);
        },
        py::arg("token"), py::arg("lexicon"));
    m.def(
        "prune_background",
        [](const TokenGrid& grid, const BackgroundLexicon& lexicon, double fraction) {
            const PruneResult r = prune_background(grid, lexicon, fraction);
            return py::make_tuple(r.retained, r.dropped);
        },
        py::arg("grid"), py::arg("lexicon"), py::arg("fraction") = 0.5);

    py::class_<PixelBox>(m, "PixelBox")
        .def(py::init([](int64_t x0, int64_t y0, int64_t x1, int64_t y1) {
                 return PixelBox{x0, y0, x1, y1};
             }),
             py::arg("x0"), py::arg("y0"), py::arg("x1"), py::arg("y1"));

    m.def("tokens_from_bbox", &tokens_from_bbox, py::arg("bbox"), py::arg("layout"));
    m.def(
        "buffer_ring",
        [](const std::vector<int64_t>& indices, const GridLayout& layout, int k) {
            return buffer_ring(indices, layout, k);
        },
        py::arg("indices"), py::arg("layout"), py::arg("k"));

    py::class_<AblationSpec>(m, "AblationSpec")
        .def_static("object",
                    [](const PixelBox& bbox) {
                        AblationSpec s;
                        s.kind = AblationSpec::Kind::object;
                        s.bbox = bbox;
                        return s;
                    })
        .def_static("object_buffer",
                    [](const PixelBox& bbox, int k) {
                        AblationSpec s;
                        s.kind = AblationSpec::Kind::object_buffer;
                        s.bbox = bbox;
                        s.buffer_k = k;
                        return s;
                    })
        .def_static("register_tokens",
                    [] {
                        AblationSpec s;
                        s.kind = AblationSpec::Kind::register_tokens;
                        return s;
                    })
        .def_static("random", [](int64_t n, uint64_t seed) {
            AblationSpec s;
            s.kind = AblationSpec::Kind::random;
            s.random_n = n;
            s.seed = seed;
            return s;
        });

    m.def(
        "ablate_tokens",
        [](const TokenGrid& grid, const AblationSpec& spec, const std::vector<float>& corpus_mean,
           const GridLayout& layout) {
            auto [ablated, indices] = ablate_tokens(grid, spec, corpus_mean, layout);
            return py::make_tuple(std::move(ablated), std::move(indices));
        },
        py::arg("grid"), py::arg("spec"), py::arg("corpus_mean"), py::arg("layout"));

    m.def(
        "degradation_metric",
        [](const AdapterModel& proxy, const TokenGrid& before, const TokenGrid& after,
           int target_class) {
            const AblationResult r = degradation_metric(proxy, before, after, target_class);
            py::dict d;
            d["metric_before"] = r.metric_before;
            d["metric_after"] = r.metric_after;
            d["decrease_percent"] = r.decrease_percent;
            return d;
        },
        py::arg("proxy"), py::arg("grid_before"), py::arg("grid_after"), py::arg("target_class"));
}
