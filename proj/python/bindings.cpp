#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "megae/baselines.hpp"
#include "megae/dataset.hpp"
#include "megae/errors.hpp"
#include "megae/experiment.hpp"
#include "megae/rng.hpp"
#include "megae/spectral_oracle.hpp"
#include "megae/wavelet_frame.hpp"

namespace py = pybind11;
using namespace megae;

namespace {

using Edges = std::vector<std::pair<int, int>>;

oracle::SpectralDecomposition decompose(int n, const Edges& edges) {
    return oracle::eigendecompose(normalized_laplacian(Graph(n, edges)));
}

Matrix apply_frame(int n, const Edges& edges, const Matrix& z, int channels, int order) {
    const Laplacian l = normalized_laplacian(Graph(n, edges));
    FilterBankOptions options;
    options.order = order;
    const FilterBank bank = build_filter_bank(build_frame(FrameSpec::with_channels(channels)), options);
    Matrix out(z.rows(), z.cols() * channels);
    for (int m = 0; m < channels; ++m) out.middleCols(m * z.cols(), z.cols()) = apply_filter(bank.analysis[static_cast<std::size_t>(m)], l, z);
    return out;
}

py::dict run(const std::string& manifest, int channels, int order, double gamma, int epochs, double lr,
             const std::string& mechanism, double rate, int trials, std::uint64_t seed, bool ablation,
             const std::string& out) {
    ExperimentConfig cfg;
    cfg.train.channels = channels;
    cfg.train.order = order;
    cfg.train.gamma_entropy = gamma;
    cfg.train.epochs = epochs;
    cfg.train.learning_rate = lr;
    cfg.mechanism = parse_mechanism(mechanism);
    cfg.rate = rate;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.ablation_no_entropy = ablation;
    cfg.validate();
    ExperimentResult res;
    {
        py::gil_scoped_release release;
        res = run_experiment(load_dataset(manifest), cfg);
        if (!out.empty()) write_experiment(res, out);
    }
    return py::module_::import("json").attr("loads")(res.report.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral wavelet graph imputation core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("normalized_laplacian", [](int n, const Edges& edges) { return normalized_laplacian(Graph(n, edges)).dense(); },
          py::arg("n"), py::arg("edges"), "Dense I - D^-1/2 A D^-1/2.");
    m.def("spectral_entropy", [](const Vector& x, int n, const Edges& edges) {
              return oracle::spectral_entropy(x, decompose(n, edges));
          },
          py::arg("x"), py::arg("n"), py::arg("edges"));
    m.def("wavelet_entropy", [](const Vector& x, int n, const Edges& edges, int channels) {
              return oracle::wavelet_entropy(x, decompose(n, edges), build_frame(FrameSpec::with_channels(channels)).kernels());
          },
          py::arg("x"), py::arg("n"), py::arg("edges"), py::arg("channels") = 9);
    m.def("entropy_bound", [](int n, const Edges& edges, int channels) {
              return oracle::approximation_bound(build_frame(FrameSpec::with_channels(channels)).kernels(),
                                                 decompose(n, edges).eigenvalues);
          },
          py::arg("n"), py::arg("edges"), py::arg("channels") = 9);
    m.def("frame_tightness", [](int channels, int points) {
              return verify_tightness(build_frame(FrameSpec::with_channels(channels)).kernels(), uniform_grid(2.0, points));
          },
          py::arg("channels") = 9, py::arg("points") = 10000, "max |sum_m g_m(lambda)^2 - 1| on a uniform grid.");
    m.def("wavelet_transform", &apply_frame, py::arg("n"), py::arg("edges"), py::arg("z"), py::arg("channels") = 9,
          py::arg("order") = 24, "Polynomial filter bank applied to Z; channel blocks are concatenated column-wise.");
    m.def("generate_mask", [](int rows, int cols, const std::string& mechanism, double rate, std::uint64_t seed,
                              std::optional<Matrix> values) {
              return generate_mask(rows, cols, parse_mechanism(mechanism), rate, seed, values ? &*values : nullptr);
          },
          py::arg("rows"), py::arg("cols"), py::arg("mechanism") = "mcar", py::arg("rate") = 0.1, py::arg("seed") = 0,
          py::arg("values") = py::none());
    m.def("mean_impute", [](const Matrix& x, const Matrix& r) { return baseline_mean(x, r); }, py::arg("x"), py::arg("r"));
    m.def("knn_impute", [](const Matrix& x, const Matrix& r, int k) { return baseline_knn(x, r, k); }, py::arg("x"),
          py::arg("r"), py::arg("k") = 5);
    m.def("rmse", &rmse, py::arg("imputed"), py::arg("truth"), py::arg("r"), "RMSE over entries with r == 0.");
    m.def("synthesize", [](const std::string& out, int graphs, int min_nodes, int max_nodes, int features, std::uint64_t seed) {
              SyntheticSpec spec;
              spec.graphs = graphs;
              spec.min_nodes = min_nodes;
              spec.max_nodes = max_nodes;
              spec.features = features;
              spec.seed = seed;
              return save_dataset(synthesize(spec), out).string();
          },
          py::arg("out"), py::arg("graphs") = 200, py::arg("min_nodes") = 10, py::arg("max_nodes") = 60,
          py::arg("features") = 8, py::arg("seed") = 0, "Writes a synthetic dataset; returns the manifest path.");
    m.def("certify", [](int graphs, int signals, int channels, std::uint64_t seed) {
              const auto corpus = certification_graphs(graphs, 64, seed);
              std::vector<const Graph*> ptrs;
              for (const auto& g : corpus) ptrs.push_back(&g);
              const WaveletFrame frame = build_frame(FrameSpec::with_channels(channels));
              const auto cert = certify(ptrs, frame, build_filter_bank(frame, FilterBankOptions{}), signals, Rng::derive(seed, 7));
              return py::module_::import("json").attr("loads")(cert.dump());
          },
          py::arg("graphs") = 20, py::arg("signals") = 100, py::arg("channels") = 9, py::arg("seed") = 0);
    m.def("impute", &run, py::arg("manifest"), py::kw_only(), py::arg("channels") = 9, py::arg("order") = 24,
          py::arg("gamma") = 1.0, py::arg("epochs") = 500, py::arg("lr") = 1e-3, py::arg("mechanism") = "mcar",
          py::arg("rate") = 0.1, py::arg("trials") = 5, py::arg("seed") = 0, py::arg("ablation_no_entropy") = false,
          py::arg("out") = "", "Runs the full experiment and returns the report as a dict.");
}
