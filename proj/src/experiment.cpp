#include "megae/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "megae/baselines.hpp"
#include "megae/checkpoint.hpp"
#include "megae/errors.hpp"
#include "megae/rng.hpp"
#include "megae/spectral_oracle.hpp"

namespace megae {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

FilterBankOptions ExperimentConfig::filter_options() const {
    FilterBankOptions o;
    o.order = train.order;
    o.grid = grid;
    o.inverse_policy = train.inverse_policy;
    o.regularization = regularization;
    o.decoder_constant_term = train.decoder_constant_term;
    return o;
}

void ExperimentConfig::validate() const {
    train.validate();
    frame().validate();
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("missing rate must lie in (0, 1)");
    if (trials < 1) throw ConfigError("need at least one trial");
    if (knn_k < 1) throw ConfigError("knn k must be >= 1");
    if (grid < 10 * train.order) throw ConfigError("fitting grid must have at least 10*order points");
    if (certify_graphs < 0 || certify_signals < 0) throw ConfigError("certificate sizes must be nonnegative");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"train", c.train},
             {"frame", c.frame()},
             {"filter_options", c.filter_options()},
             {"mechanism", std::string(to_string(c.mechanism))},
             {"rate", c.rate},
             {"trials", c.trials},
             {"seed", c.seed},
             {"knn_k", c.knn_k},
             {"ablation_no_entropy", c.ablation_no_entropy},
             {"certify_graphs", c.certify_graphs},
             {"certify_signals", c.certify_signals}};
}

namespace {

json score_json(const MethodScore& s) {
    return json{{"rmse", s.rmse}, {"entropy_mean", s.entropy_mean}, {"entropy_abs_dev", s.entropy_abs_dev}};
}

json training_json(const TrainResult& r) {
    json trace = json::array();
    for (const auto& rec : r.trace) trace.push_back(rec);
    return json{{"best_epoch", r.best_epoch}, {"diverged", r.diverged}, {"diagnostics", r.diagnostics}, {"trace", trace}};
}

// Everything one trial needs, in scaled feature space.
struct TrialData {
    std::vector<Matrix> x;       // scaled truth per graph
    std::vector<Matrix> mask;    // evaluation mask per graph (ones outside the test set)
    std::vector<int> test;       // graphs carrying hidden entries
    std::vector<TrainingGraph> train;
    std::vector<EvalGraph> val;
    MinMaxScaler scaler;
    DatasetSplit split;
};

TrialData prepare_multi(const Dataset& ds, const std::vector<Laplacian>& lap, const ExperimentConfig& cfg,
                        std::uint64_t trial_seed) {
    TrialData td;
    const int g = static_cast<int>(ds.graphs.size());
    td.split = split_dataset(g, SplitProportions{}, Rng::derive(trial_seed, 1));
    std::vector<const Matrix*> fit;
    for (int i : td.split.train) fit.push_back(&ds.graphs[static_cast<std::size_t>(i)].features);
    for (int i : td.split.val) fit.push_back(&ds.graphs[static_cast<std::size_t>(i)].features);
    td.scaler = MinMaxScaler::fit(fit);
    const int d = ds.d_features();
    for (int i = 0; i < g; ++i) {
        const auto& gr = ds.graphs[static_cast<std::size_t>(i)];
        td.x.push_back(td.scaler.transform(gr.features));
        td.mask.push_back(Matrix::Ones(gr.features.rows(), d));
    }
    const std::uint64_t test_seed = Rng::derive(trial_seed, 2);
    const std::uint64_t val_seed = Rng::derive(trial_seed, 3);
    for (int i : td.split.test) {
        const auto ui = static_cast<std::size_t>(i);
        td.mask[ui] = generate_mask(static_cast<int>(td.x[ui].rows()), d, cfg.mechanism, cfg.rate,
                                    Rng::derive(test_seed, static_cast<std::uint64_t>(i)), &td.x[ui]);
        td.test.push_back(i);
    }
    for (int i : td.split.train) {
        const auto ui = static_cast<std::size_t>(i);
        td.train.push_back({lap[ui], td.x[ui], Matrix::Ones(td.x[ui].rows(), d)});
    }
    for (int i : td.split.val) {
        const auto ui = static_cast<std::size_t>(i);
        td.val.push_back({lap[ui], td.x[ui],
                          generate_mask(static_cast<int>(td.x[ui].rows()), d, Mechanism::MCAR, cfg.rate,
                                        Rng::derive(val_seed, static_cast<std::uint64_t>(i))),
                          Matrix()});
    }
    return td;
}

// Single graph: hidden entries span all nodes; validation entries are carved out
// of the observed ones and withheld from training.
TrialData prepare_single(const Dataset& ds, const std::vector<Laplacian>& lap, const ExperimentConfig& cfg,
                         std::uint64_t trial_seed) {
    TrialData td;
    const Matrix& raw = ds.graphs.front().features;
    const int n = static_cast<int>(raw.rows());
    const int d = static_cast<int>(raw.cols());
    const Matrix test_mask = generate_mask(n, d, cfg.mechanism, cfg.rate, Rng::derive(trial_seed, 2), &raw);
    td.scaler = MinMaxScaler::fit({&raw}, {&test_mask});
    const Matrix x = td.scaler.transform(raw);
    const Matrix keep = generate_mask(n, d, Mechanism::MCAR, cfg.rate, Rng::derive(trial_seed, 3));
    const Matrix observed = (test_mask.array() * keep.array()).matrix();
    td.x.push_back(x);
    td.mask.push_back(test_mask);
    td.test.push_back(0);
    td.train.push_back({lap.front(), x, observed});
    td.val.push_back({lap.front(), x, observed, (test_mask.array() * (1.0 - keep.array())).matrix()});
    td.split.seed = trial_seed;
    td.split.train = {0};
    td.split.test = {0};
    return td;
}

struct EntropyProbe {
    std::vector<std::optional<oracle::SpectralDecomposition>> sd;  // per test graph
};

// Mean spectral entropy of test columns, and mean deviation from the truth's.
MethodScore score_method(const TrialData& td, const std::vector<Matrix>& imputed_test, const EntropyProbe& probe,
                         const Matrix& pooled_truth, const Matrix& pooled_mask, const Matrix& pooled_imputed) {
    MethodScore s;
    s.rmse = rmse(pooled_imputed, pooled_truth, pooled_mask);
    double sum = 0.0;
    double dev = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < td.test.size(); ++k) {
        if (!probe.sd[k]) continue;
        const Matrix& truth = td.x[static_cast<std::size_t>(td.test[k])];
        for (Eigen::Index c = 0; c < truth.cols(); ++c) {
            const Vector t = truth.col(c);
            const Vector v = imputed_test[k].col(c);
            if (t.squaredNorm() <= oracle::kMinSignalEnergy || v.squaredNorm() <= oracle::kMinSignalEnergy) continue;
            const double xi = oracle::spectral_entropy(v, *probe.sd[k]);
            sum += xi;
            dev += std::abs(xi - oracle::spectral_entropy(t, *probe.sd[k]));
            ++count;
        }
    }
    if (count > 0) {
        s.entropy_mean = sum / count;
        s.entropy_abs_dev = dev / count;
    }
    return s;
}

Matrix stack(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) rows += b.rows();
    Matrix out(rows, blocks.empty() ? 0 : blocks.front().cols());
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        out.middleRows(off, b.rows()) = b;
        off += b.rows();
    }
    return out;
}

TrialOutcome run_trial(const Dataset& ds, const std::vector<Laplacian>& lap, const ExperimentConfig& cfg,
                       const FilterBank& bank, int trial) {
    const auto start = std::chrono::steady_clock::now();
    TrialOutcome out;
    out.trial = trial;
    out.seed = Rng::derive(cfg.seed, 100 + static_cast<std::uint64_t>(trial));
    const TrialData td = ds.single_graph() ? prepare_single(ds, lap, cfg, out.seed) : prepare_multi(ds, lap, cfg, out.seed);
    out.split = td.split;

    const Matrix pooled_truth = stack(td.x);
    const Matrix pooled_mask = stack(td.mask);
    out.hidden_entries = static_cast<long>(std::lround((1.0 - pooled_mask.array()).sum()));
    if (out.hidden_entries == 0) throw DataError("trial " + std::to_string(trial) + " hides no entries; raise --rate");

    EntropyProbe probe;
    double truth_sum = 0.0;
    int truth_count = 0;
    for (int gi : td.test) {
        const auto& l = lap[static_cast<std::size_t>(gi)];
        if (l.dimension() > oracle::kMaxOracleNodes) {
            probe.sd.emplace_back();
            continue;
        }
        probe.sd.emplace_back(oracle::eigendecompose(l));
        const Matrix& truth = td.x[static_cast<std::size_t>(gi)];
        for (Eigen::Index c = 0; c < truth.cols(); ++c) {
            const Vector t = truth.col(c);
            if (t.squaredNorm() <= oracle::kMinSignalEnergy) continue;
            truth_sum += oracle::spectral_entropy(t, *probe.sd.back());
            ++truth_count;
        }
    }
    out.truth_entropy_mean = truth_count ? truth_sum / truth_count : 0.0;

    auto blocks_of = [&](const Matrix& pooled) {
        std::vector<Matrix> blocks;
        Eigen::Index off = 0;
        std::vector<Eigen::Index> offsets;
        for (const auto& x : td.x) {
            offsets.push_back(off);
            off += x.rows();
        }
        for (int gi : td.test) {
            const auto ui = static_cast<std::size_t>(gi);
            blocks.push_back(pooled.middleRows(offsets[ui], td.x[ui].rows()));
        }
        return blocks;
    };

    BaselineStats stats;
    const Matrix mean_imp = baseline_mean(pooled_truth, pooled_mask, &stats);
    out.mean = score_method(td, blocks_of(mean_imp), probe, pooled_truth, pooled_mask, mean_imp);
    const Matrix knn_imp = baseline_knn(pooled_truth, pooled_mask, cfg.knn_k, &stats);
    out.knn = score_method(td, blocks_of(knn_imp), probe, pooled_truth, pooled_mask, knn_imp);
    out.knn_fallbacks = stats.mean_fallbacks;
    out.mean_empty_columns = stats.empty_columns;

    auto run_variant = [&](double gamma) {
        TrainConfig tc = cfg.train;
        tc.gamma_entropy = gamma;
        tc.seed = Rng::derive(out.seed, 4);
        VariantOutcome v;
        v.training = train(td.train, td.val, bank, tc);
        std::vector<Matrix> imputed = td.x;
        std::vector<Matrix> test_blocks;
        for (int gi : td.test) {
            const auto ui = static_cast<std::size_t>(gi);
            imputed[ui] = megae::impute(v.training.params, lap[ui], bank, td.x[ui], td.mask[ui]);
            test_blocks.push_back(imputed[ui]);
        }
        const Matrix pooled = stack(imputed);
        v.score = score_method(td, test_blocks, probe, pooled_truth, pooled_mask, pooled);
        return v;
    };
    out.megae = run_variant(cfg.train.gamma_entropy);
    if (cfg.ablation_no_entropy) out.no_entropy = run_variant(0.0);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

struct Summary {
    double mean = 0.0;
    double stdev = 0.0;
};

Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) s.stdev += (x - s.mean) * (x - s.mean);
        s.stdev = std::sqrt(s.stdev / static_cast<double>(v.size() - 1));
    }
    return s;
}

json method_summary(const std::vector<TrialOutcome>& trials, const std::function<const MethodScore&(const TrialOutcome&)>& get) {
    std::vector<double> rm;
    std::vector<double> dev;
    std::vector<double> gap;
    for (const auto& t : trials) {
        const MethodScore& s = get(t);
        rm.push_back(s.rmse);
        dev.push_back(s.entropy_abs_dev);
        gap.push_back(s.entropy_mean - t.truth_entropy_mean);
    }
    const Summary r = summarize(rm);
    std::vector<double> abs_gap;
    for (double g : gap) abs_gap.push_back(std::abs(g));
    return json{{"rmse_mean", r.mean},
                {"rmse_std", r.stdev},
                {"entropy_abs_dev_mean", summarize(dev).mean},
                {"entropy_gap_mean", summarize(gap).mean},
                {"entropy_abs_gap_mean", summarize(abs_gap).mean}};
}

json build_report(const Dataset& ds, const ExperimentResult& res) {
    const auto& cfg = res.config;
    json trials = json::array();
    for (const auto& t : res.trials) {
        json rm{{"megae", t.megae.score.rmse}, {"mean", t.mean.rmse}, {"knn", t.knn.rmse}};
        json ent{{"truth_mean", t.truth_entropy_mean},
                 {"megae", score_json(t.megae.score)},
                 {"mean", score_json(t.mean)},
                 {"knn", score_json(t.knn)}};
        json tr{{"trial", t.trial},
                {"seed", t.seed},
                {"split", {{"train", t.split.train.size()}, {"val", t.split.val.size()}, {"test", t.split.test.size()}}},
                {"test_graphs", t.split.test},
                {"hidden_entries", t.hidden_entries},
                {"knn_fallbacks", t.knn_fallbacks},
                {"mean_empty_columns", t.mean_empty_columns},
                {"training", training_json(t.megae.training)}};
        if (t.no_entropy) {
            rm["megae_no_entropy"] = t.no_entropy->score.rmse;
            ent["megae_no_entropy"] = score_json(t.no_entropy->score);
            tr["training_no_entropy"] = training_json(t.no_entropy->training);
        }
        tr["rmse"] = rm;
        tr["entropy"] = ent;
        trials.push_back(tr);
    }

    json summary;
    summary["megae"] = method_summary(res.trials, [](const TrialOutcome& t) -> const MethodScore& { return t.megae.score; });
    summary["mean"] = method_summary(res.trials, [](const TrialOutcome& t) -> const MethodScore& { return t.mean; });
    summary["knn"] = method_summary(res.trials, [](const TrialOutcome& t) -> const MethodScore& { return t.knn; });
    if (cfg.ablation_no_entropy) {
        summary["megae_no_entropy"] =
            method_summary(res.trials, [](const TrialOutcome& t) -> const MethodScore& { return t.no_entropy->score; });
    }
    const double ours = summary["megae"]["rmse_mean"].get<double>();
    auto margin = [ours](double other) { return other > 0.0 ? (other - ours) / other : 0.0; };
    summary["margin_vs_mean"] = margin(summary["mean"]["rmse_mean"].get<double>());
    summary["margin_vs_knn"] = margin(summary["knn"]["rmse_mean"].get<double>());
    int diverged = 0;
    for (const auto& t : res.trials) diverged += t.megae.training.diverged || (t.no_entropy && t.no_entropy->training.diverged);
    summary["diverged_trials"] = diverged;

    json bank{{"max_fit_error", res.bank.max_fit_error()}, {"analysis", res.bank.analysis}, {"synthesis", res.bank.synthesis}};
    return json{{"config", cfg},
                {"dataset",
                 {{"graphs", ds.graphs.size()},
                  {"total_nodes", ds.total_nodes()},
                  {"features", ds.d_features()},
                  {"mode", ds.single_graph() ? "single-graph" : "multi-graph"},
                  {"scale", "per-column min-max fitted on training data; RMSE in scaled units"}}},
                {"filter_bank", bank},
                {"trials", trials},
                {"summary", summary},
                {"certificates", res.certificates}};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << s;
    if (!out) throw DataError("failed writing " + p.string());
}

}  // namespace

std::vector<Graph> certification_graphs(int count, int max_nodes, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.graphs = count;
    spec.min_nodes = std::min(8, max_nodes);
    spec.max_nodes = max_nodes;
    spec.features = 1;
    spec.seed = seed;
    std::vector<Graph> out;
    for (auto& g : synthesize(spec).graphs) out.push_back(std::move(g.graph));
    return out;
}

json certify(const std::vector<const Graph*>& graphs, const WaveletFrame& frame, const FilterBank& bank, int signals,
             std::uint64_t seed) {
    const KernelSet& kernels = frame.kernels();
    const double budget = bank.max_fit_error();
    double exact_gap = 0.0;
    double fitted_gap = 0.0;
    long bound_cases = 0;
    long bound_ok = 0;
    double bound_excess = -std::numeric_limits<double>::infinity();
    double filter_ratio = 0.0;
    long filter_checks = 0;
    long filter_violations = 0;
    Rng rng(seed);
    for (const Graph* g : graphs) {
        const Laplacian l = normalized_laplacian(*g);
        const auto sd = oracle::eigendecompose(l);
        const double e = oracle::approximation_bound(kernels, sd.eigenvalues);
        Matrix z(g->n_nodes(), signals);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
        }
        for (int s = 0; s < signals; ++s) {
            const Vector x = z.col(s);
            exact_gap = std::max(exact_gap, oracle::parseval_check(x, sd, kernels).relative_gap());
            const double es = x.squaredNorm();
            fitted_gap = std::max(fitted_gap, std::abs(filtered_energy(bank.analysis, l, x) - es) / es);
            const double diff = std::abs(oracle::spectral_entropy(x, sd) - oracle::wavelet_entropy(x, sd, kernels));
            ++bound_cases;
            if (diff <= e + 1e-9) ++bound_ok;
            bound_excess = std::max(bound_excess, diff - e);
        }
        for (int m = 0; m < bank.channels(); ++m) {
            const auto um = static_cast<std::size_t>(m);
            const Matrix fast = apply_filter(bank.analysis[um], l, z);
            const Matrix exact = oracle::exact_wavelet_transform(z, sd, kernels[um]);
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                const double dev = (fast.col(c) - exact.col(c)).cwiseAbs().maxCoeff();
                const double tol = bank.analysis[um].fit_error * z.col(c).cwiseAbs().maxCoeff() + 1e-8;
                filter_ratio = std::max(filter_ratio, dev / tol);
                ++filter_checks;
                if (dev > tol) ++filter_violations;
            }
        }
    }
    const double tightness = verify_tightness(kernels, uniform_grid(frame.spec().spectrum_bound, 10000));
    json j{{"graphs", graphs.size()},
           {"signals_per_graph", signals},
           {"frame_tightness", tightness},
           {"fit_budget", budget},
           {"parseval_exact_max_gap", exact_gap},
           {"parseval_fitted_max_gap", fitted_gap},
           {"entropy_bound_cases", bound_cases},
           {"entropy_bound_satisfied", bound_ok},
           {"entropy_bound_max_excess", bound_cases ? bound_excess : 0.0},
           {"filter_oracle_checks", filter_checks},
           {"filter_oracle_violations", filter_violations},
           {"filter_oracle_max_ratio", filter_ratio}};
    j["passed"] = json{{"tightness", tightness < 1e-6},
                       {"parseval_exact", exact_gap < 1e-6},
                       {"parseval_fitted", fitted_gap < 2.0 * budget},
                       {"entropy_bound", bound_ok == bound_cases},
                       {"filter_oracle", filter_violations == 0}};
    return j;
}

ExperimentResult run_experiment(const Dataset& dataset, const ExperimentConfig& config) {
    config.validate();
    if (dataset.graphs.empty()) throw DataError("no graphs");
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult res;
    res.config = config;
    const WaveletFrame frame = build_frame(config.frame());
    res.bank = build_filter_bank(frame, config.filter_options());

    std::vector<Laplacian> lap;
    for (const auto& g : dataset.graphs) lap.push_back(normalized_laplacian(g.graph));

    std::vector<const Graph*> small;
    for (const auto& g : dataset.graphs) {
        if (static_cast<int>(small.size()) >= config.certify_graphs) break;
        if (g.graph.n_nodes() <= 64) small.push_back(&g.graph);
    }
    const auto cert_start = std::chrono::steady_clock::now();
    res.certificates = certify(small, frame, res.bank, config.certify_signals, Rng::derive(config.seed, 7));
    const double cert_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - cert_start).count();

    res.trials.resize(static_cast<std::size_t>(config.trials));
    for (int first = 0; first < config.trials; first += config.jobs) {
        const int last = std::min(config.trials, first + config.jobs);
        if (config.jobs == 1) {
            res.trials[static_cast<std::size_t>(first)] = run_trial(dataset, lap, config, res.bank, first);
            continue;
        }
        std::vector<std::future<TrialOutcome>> jobs;
        for (int t = first; t < last; ++t) {
            jobs.push_back(std::async(std::launch::async, [&, t] { return run_trial(dataset, lap, config, res.bank, t); }));
        }
        for (int t = first; t < last; ++t) res.trials[static_cast<std::size_t>(t)] = jobs[static_cast<std::size_t>(t - first)].get();
    }

    res.report = build_report(dataset, res);
    json per_trial = json::array();
    for (const auto& t : res.trials) per_trial.push_back(t.seconds);
    res.timings = json{{"certificates_seconds", cert_seconds},
                       {"trial_seconds", per_trial},
                       {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    return res;
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", result.report.dump(2) + "\n");
    write_text(dir / "timings.json", result.timings.dump(2) + "\n");

    std::ostringstream trials;
    trials << "trial,method,rmse,entropy_mean,entropy_abs_dev\n";
    std::ostringstream trace;
    trace << "trial,variant,epoch,reconstruction,entropy,total,validation_rmse,probe_spectral_entropy\n";
    auto score_row = [&trials](int t, const char* method, const MethodScore& s) {
        trials << t << ',' << method << ',' << format_double(s.rmse) << ',' << format_double(s.entropy_mean) << ','
               << format_double(s.entropy_abs_dev) << '\n';
    };
    auto trace_rows = [&trace](int t, const char* variant, const TrainResult& r) {
        for (const auto& e : r.trace) {
            trace << t << ',' << variant << ',' << e.epoch << ',' << format_double(e.reconstruction) << ','
                  << format_double(e.entropy) << ',' << format_double(e.total) << ',' << format_double(e.validation_rmse)
                  << ',' << format_double(e.probe_spectral_entropy) << '\n';
        }
    };
    for (const auto& t : result.trials) {
        score_row(t.trial, "megae", t.megae.score);
        if (t.no_entropy) score_row(t.trial, "megae_no_entropy", t.no_entropy->score);
        score_row(t.trial, "mean", t.mean);
        score_row(t.trial, "knn", t.knn);
        trace_rows(t.trial, "megae", t.megae.training);
        if (t.no_entropy) trace_rows(t.trial, "megae_no_entropy", t.no_entropy->training);

        Checkpoint ckpt;
        ckpt.params = t.megae.training.params;
        ckpt.config = result.config.train;
        ckpt.config.seed = Rng::derive(t.seed, 4);
        ckpt.frame = result.config.frame();
        ckpt.filter_options = result.config.filter_options();
        ckpt.extra = json{{"trial", t.trial}, {"best_epoch", t.megae.training.best_epoch}};
        save_checkpoint(dir / ("model_trial" + std::to_string(t.trial) + ".ckpt"), ckpt);
    }
    write_text(dir / "trials.csv", trials.str());
    write_text(dir / "trace.csv", trace.str());
}

std::vector<SweepPoint> sweep(const Dataset& dataset, const ExperimentConfig& base, const std::vector<int>& channels,
                              const std::vector<double>& gammas, const std::filesystem::path& dir) {
    if (channels.empty() || gammas.empty()) throw ConfigError("sweep grid is empty");
    std::filesystem::create_directories(dir);
    std::vector<SweepPoint> points;
    std::ostringstream csv;
    csv << "channels,gamma,mean_rmse,status\n";
    for (int m : channels) {
        for (double g : gammas) {
            SweepPoint p{m, g, std::nullopt, {}};
            try {
                ExperimentConfig cfg = base;
                cfg.train.channels = m;
                cfg.train.gamma_entropy = g;
                const ExperimentResult res = run_experiment(dataset, cfg);
                write_experiment(res, dir / ("M" + std::to_string(m) + "_gamma" + format_double(g)));
                p.mean_rmse = res.report["summary"]["megae"]["rmse_mean"].get<double>();
            } catch (const std::exception& e) {
                p.error = e.what();
                std::cerr << "sweep point M=" << m << " gamma=" << format_double(g) << " failed: " << e.what() << '\n';
            }
            csv << m << ',' << format_double(g) << ',' << (p.mean_rmse ? format_double(*p.mean_rmse) : "") << ','
                << (p.mean_rmse ? "ok" : "failed") << '\n';
            points.push_back(std::move(p));
        }
    }
    write_text(dir / "summary.csv", csv.str());
    return points;
}

std::string summarize_report(const json& report) {
    std::ostringstream out;
    const auto& ds = report.at("dataset");
    const auto& cfg = report.at("config");
    out << "dataset: " << ds.at("graphs").get<long>() << " graphs, " << ds.at("features").get<int>() << " features ("
        << ds.at("mode").get<std::string>() << ")\n";
    out << "mechanism " << cfg.at("mechanism").get<std::string>() << " at rate " << format_double(cfg.at("rate").get<double>())
        << ", " << cfg.at("trials").get<int>() << " trials, M = " << cfg.at("train").at("channels").get<int>()
        << ", gamma = " << format_double(cfg.at("train").at("gamma_entropy").get<double>()) << '\n';
    const auto& s = report.at("summary");
    for (const char* method : {"megae", "megae_no_entropy", "mean", "knn"}) {
        if (!s.contains(method)) continue;
        const auto& m = s.at(method);
        char line[160];
        std::snprintf(line, sizeof(line), "  %-17s rmse %.6f +/- %.6f   entropy gap %.6f\n", method,
                      m.at("rmse_mean").get<double>(), m.at("rmse_std").get<double>(),
                      m.at("entropy_abs_gap_mean").get<double>());
        out << line;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "  margin vs mean %.2f%%, vs knn %.2f%%, diverged trials %d\n",
                  100.0 * s.at("margin_vs_mean").get<double>(), 100.0 * s.at("margin_vs_knn").get<double>(),
                  s.at("diverged_trials").get<int>());
    out << line;
    if (report.contains("certificates")) {
        const auto& c = report.at("certificates");
        out << "certificates:";
        for (const auto& [k, v] : c.at("passed").items()) out << ' ' << k << '=' << (v.get<bool>() ? "ok" : "FAIL");
        out << '\n';
    }
    return out.str();
}

}  // namespace megae
