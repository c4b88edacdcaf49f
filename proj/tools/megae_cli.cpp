#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "megae/dataset.hpp"
#include "megae/errors.hpp"
#include "megae/experiment.hpp"
#include "megae/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
    std::string manifest;
    std::string mechanism = "mcar";
    double rate = 0.1;
    int trials = 5;
    std::uint64_t seed = 0;
    std::vector<int> channels;
    int order = 24;
    std::vector<double> gamma;
    int epochs = 500;
    double lr = 1e-3;
    std::string out;
    bool ablation = false;
    int knn_k = 5;
    int jobs = 1;
    std::string optimizer = "adam";
    std::string inverse = "adjoint";
    int certify_graphs = 20;
    int certify_signals = 100;
    megae::SyntheticSpec synth;
};

void add_model_flags(CLI::App* cmd, Options& o, bool lists) {
    if (lists) {
        cmd->add_option("--channels", o.channels, "Kernel counts M to sweep")->delimiter(',')->check(CLI::Range(3, 64));
        cmd->add_option("--gamma", o.gamma, "Entropy weights to sweep")->delimiter(',')->check(CLI::NonNegativeNumber);
    } else {
        cmd->add_option("--channels", o.channels, "Wavelet kernel count M (default 9)")->expected(1)->check(CLI::Range(3, 64));
        cmd->add_option("--gamma", o.gamma, "Entropy regularization weight (default 1)")->expected(1)->check(CLI::NonNegativeNumber);
    }
    cmd->add_option("--order", o.order, "Polynomial filter order K")->capture_default_str()->check(CLI::Range(1, 64));
    cmd->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--lr", o.lr, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--optimizer", o.optimizer, "adam or gd")->capture_default_str();
    cmd->add_option("--inverse-policy", o.inverse, "Decoder kernels: adjoint or regularized")->capture_default_str();
}

void add_run_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--manifest", o.manifest, "Dataset manifest (edges<TAB>features per line)")->required();
    cmd->add_option("--mechanism", o.mechanism, "Missingness mechanism")->capture_default_str()->check(CLI::IsMember({"mcar", "mar", "mnar"}));
    cmd->add_option("--rate", o.rate, "Missing rate on the test split")->capture_default_str();
    cmd->add_option("--trials", o.trials, "Independent trials")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_flag("--ablation-no-entropy", o.ablation, "Also train a gamma = 0 twin with identical seeds");
    cmd->add_option("--knn-k", o.knn_k, "Neighbours for the KNN baseline")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", o.jobs, "Trials run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--certify-graphs", o.certify_graphs, "Graphs used for oracle certificates")->capture_default_str();
    cmd->add_option("--certify-signals", o.certify_signals, "Random signals per certificate graph")->capture_default_str();
}

megae::ExperimentConfig experiment_config(const Options& o) {
    megae::ExperimentConfig cfg;
    cfg.train.channels = o.channels.empty() ? 9 : o.channels.front();
    cfg.train.gamma_entropy = o.gamma.empty() ? 1.0 : o.gamma.front();
    cfg.train.order = o.order;
    cfg.train.epochs = o.epochs;
    cfg.train.learning_rate = o.lr;
    cfg.train.optimizer = megae::parse_optimizer(o.optimizer);
    cfg.train.inverse_policy = megae::parse_inverse_policy(o.inverse);
    cfg.mechanism = megae::parse_mechanism(o.mechanism);
    cfg.rate = o.rate;
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.knn_k = o.knn_k;
    cfg.jobs = o.jobs;
    cfg.ablation_no_entropy = o.ablation;
    cfg.certify_graphs = o.certify_graphs;
    cfg.certify_signals = o.certify_signals;
    cfg.validate();
    return cfg;
}

int cmd_synthesize(const Options& o) {
    o.synth.validate();
    const megae::Dataset ds = megae::synthesize(o.synth);
    const fs::path manifest = megae::save_dataset(ds, o.out);
    std::ofstream(fs::path(o.out) / "synthetic.json") << json(o.synth).dump(2) << '\n';
    std::cout << "wrote " << ds.graphs.size() << " graphs (" << ds.total_nodes() << " nodes) to " << manifest.string() << '\n';
    return kOk;
}

int cmd_impute(const Options& o) {
    const auto cfg = experiment_config(o);
    const megae::Dataset ds = megae::load_dataset(o.manifest);
    const auto res = megae::run_experiment(ds, cfg);
    megae::write_experiment(res, o.out);
    std::cout << megae::summarize_report(res.report);
    return kOk;
}

int cmd_sweep(const Options& o) {
    Options base = o;
    base.channels.clear();
    base.gamma.clear();
    const auto cfg = experiment_config(base);
    const std::vector<int> ms = o.channels.empty() ? std::vector<int>{3, 6, 9, 14, 20} : o.channels;
    const std::vector<double> gs = o.gamma.empty() ? std::vector<double>{1.0} : o.gamma;
    const megae::Dataset ds = megae::load_dataset(o.manifest);
    const auto points = megae::sweep(ds, cfg, ms, gs, o.out);
    int failed = 0;
    for (const auto& p : points) {
        std::cout << "M=" << p.channels << " gamma=" << megae::format_double(p.gamma) << " -> "
                  << (p.mean_rmse ? megae::format_double(*p.mean_rmse) : "failed: " + p.error) << '\n';
        failed += !p.mean_rmse;
    }
    std::cout << "summary: " << (fs::path(o.out) / "summary.csv").string() << '\n';
    return failed == static_cast<int>(points.size()) ? kNumerical : kOk;
}

int cmd_certify(const Options& o) {
    const int m = o.channels.empty() ? 9 : o.channels.front();
    const megae::FrameSpec spec = megae::FrameSpec::with_channels(m);
    const megae::WaveletFrame frame = megae::build_frame(spec);
    megae::FilterBankOptions fo;
    fo.order = o.order;
    fo.inverse_policy = megae::parse_inverse_policy(o.inverse);
    const megae::FilterBank bank = megae::build_filter_bank(frame, fo);

    std::vector<megae::Graph> owned;
    std::vector<const megae::Graph*> graphs;
    megae::Dataset ds;
    if (!o.manifest.empty()) {
        ds = megae::load_dataset(o.manifest);
        for (const auto& g : ds.graphs) {
            if (static_cast<int>(graphs.size()) >= o.certify_graphs) break;
            if (g.graph.n_nodes() <= 64) graphs.push_back(&g.graph);
        }
        if (graphs.empty()) throw megae::DataError("manifest has no graph with at most 64 nodes to certify");
    } else {
        owned = megae::certification_graphs(o.certify_graphs, 64, o.seed);
        for (const auto& g : owned) graphs.push_back(&g);
    }
    const json cert = megae::certify(graphs, frame, bank, o.certify_signals, megae::Rng::derive(o.seed, 7));
    const std::string text = json{{"frame", spec}, {"filter_options", fo}, {"certificates", cert}}.dump(2) + "\n";
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        std::ofstream(fs::path(o.out) / "certificates.json", std::ios::binary) << text;
    }
    std::cout << text;
    bool ok = true;
    for (const auto& [k, v] : cert.at("passed").items()) ok = ok && v.get<bool>();
    return ok ? kOk : kNumerical;
}

int cmd_report(const Options& o) {
    const fs::path path = fs::is_directory(o.out) ? fs::path(o.out) / "report.json" : fs::path(o.out);
    std::ifstream in(path);
    if (!in) throw megae::DataError("cannot open " + path.string());
    json report;
    try {
        report = json::parse(in);
        std::cout << megae::summarize_report(report);
    } catch (const json::exception& e) {
        throw megae::DataError(path.string() + ": " + e.what());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph feature imputation with multi-scale wavelet autoencoders"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synthesize", "Generate the synthetic multi-graph dataset");
    synth->add_option("--out", o.out, "Output directory")->required();
    synth->add_option("--seed", o.synth.seed, "Generator seed")->capture_default_str();
    synth->add_option("--graphs", o.synth.graphs, "Graph count")->capture_default_str();
    synth->add_option("--min-nodes", o.synth.min_nodes, "Smallest graph")->capture_default_str();
    synth->add_option("--max-nodes", o.synth.max_nodes, "Largest graph")->capture_default_str();
    synth->add_option("--features", o.synth.features, "Feature columns")->capture_default_str();
    synth->add_option("--mean-degree", o.synth.mean_degree, "Expected mean degree")->capture_default_str();
    synth->add_option("--high-share", o.synth.high_frequency_share, "Energy share above lambda = 1")->capture_default_str();

    auto* imp = app.add_subcommand("impute", "Train and evaluate against the baselines");
    add_run_flags(imp, o);
    add_model_flags(imp, o, false);

    auto* sw = app.add_subcommand("sweep", "Grid over kernel count and entropy weight");
    add_run_flags(sw, o);
    add_model_flags(sw, o, true);

    auto* cert = app.add_subcommand("certify", "Oracle energy and entropy-bound certificates only");
    cert->add_option("--manifest", o.manifest, "Certify graphs from this dataset instead of random ones");
    cert->add_option("--channels", o.channels, "Wavelet kernel count M")->expected(1)->check(CLI::Range(3, 64));
    cert->add_option("--order", o.order, "Polynomial filter order K")->capture_default_str()->check(CLI::Range(1, 64));
    cert->add_option("--seed", o.seed, "Seed for graphs and probe signals")->capture_default_str();
    cert->add_option("--out", o.out, "Also write certificates.json here");
    cert->add_option("--inverse-policy", o.inverse, "Decoder kernels: adjoint or regularized")->capture_default_str();
    cert->add_option("--certify-graphs", o.certify_graphs, "Graph count")->capture_default_str()->check(CLI::PositiveNumber);
    cert->add_option("--certify-signals", o.certify_signals, "Signals per graph")->capture_default_str()->check(CLI::PositiveNumber);

    auto* rep = app.add_subcommand("report", "Summarize an existing report.json");
    rep->add_option("--out", o.out, "Run directory or report.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*synth) return cmd_synthesize(o);
        if (*imp) return cmd_impute(o);
        if (*sw) return cmd_sweep(o);
        if (*cert) return cmd_certify(o);
        if (*rep) return cmd_report(o);
    } catch (const megae::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const megae::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const megae::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kConfig;
}
