// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../gradient_audit.hpp"
#include "../test_support.hpp"
#include "megae/dataset.hpp"
#include "megae/experiment.hpp"
#include "megae/rng.hpp"
#include "megae/spectral_oracle.hpp"
#include "megae/wavelet_frame.hpp"

namespace fs = std::filesystem;
using namespace megae;

namespace {

struct Settings {
    fs::path workdir = fs::temp_directory_path() / "megae_acceptance";
    int epochs = 150;  // efficacy and ablation runs
    int sweep_epochs = 100;
    int sweep_trials = 1;
    std::uint64_t seed = 0;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[768];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool distinct_spectrum(const Vector& ev) {
    for (Eigen::Index i = 1; i < ev.size(); ++i) {
        if (ev(i) - ev(i - 1) < 1e-8) return false;
    }
    return true;
}

std::vector<const Graph*> pointers(const std::vector<Graph>& graphs) {
    std::vector<const Graph*> out;
    for (const auto& g : graphs) out.push_back(&g);
    return out;
}

struct Shared {
    Settings settings;
    std::vector<Graph> corpus;  // 20 random graphs with N <= 64
    std::optional<nlohmann::json> certificates;
    double certificate_seconds = 0.0;
    Dataset synthetic;
    std::optional<ExperimentResult> efficacy;
    double efficacy_seconds = 0.0;
    std::optional<std::vector<SweepPoint>> sweep_points;
};

const nlohmann::json& certificates(Shared& sh) {
    if (!sh.certificates) {
        Clock clock;
        const WaveletFrame frame = build_frame(FrameSpec{});
        const FilterBank bank = build_filter_bank(frame, FilterBankOptions{});
        sh.certificates = certify(pointers(sh.corpus), frame, bank, 100, Rng::derive(sh.settings.seed, 12));
        sh.certificate_seconds = clock.seconds();
    }
    return *sh.certificates;
}

Outcome c1_tightness(Shared&) {
    Clock clock;
    const WaveletFrame frame = build_frame(FrameSpec{});
    const double dev = verify_tightness(frame.kernels(), uniform_grid(2.0, 10000));
    const double t = clock.seconds();
    return {dev < 1e-6 && t < 1.0, fmt("max |G-1| = %.3e on 10^4 points over [0,2], %.3f s", dev, t)};
}

Outcome c2_parseval(Shared& sh) {
    const auto& c = certificates(sh);
    const double exact = c.at("parseval_exact_max_gap").get<double>();
    const double fitted = c.at("parseval_fitted_max_gap").get<double>();
    const double budget = c.at("fit_budget").get<double>();
    const bool ok = exact < 1e-6 && fitted < 2.0 * budget && sh.certificate_seconds < 30.0;
    return {ok, fmt("20 graphs x 100 signals: exact gap %.3e (< 1e-6), fitted gap %.3e (< 2*%.3e), %.2f s", exact,
                    fitted, budget, sh.certificate_seconds)};
}

Outcome c3_entropy_bound(Shared& sh) {
    const auto& c = certificates(sh);
    const long cases = c.at("entropy_bound_cases").get<long>();
    const long ok_cases = c.at("entropy_bound_satisfied").get<long>();

    // Disjoint indicators need a simple spectrum; take corpus graphs that have one and
    // top up with Erdős–Rényi graphs so at least five are checked.
    std::vector<Graph> simple;
    for (const auto& g : sh.corpus) {
        if (distinct_spectrum(oracle::eigendecompose(normalized_laplacian(g)).eigenvalues)) simple.push_back(g);
    }
    for (unsigned s = 0; simple.size() < 5 && s < 200; ++s) {
        Graph g = testkit::erdos_renyi(24, 0.25, 900 + s);
        if (distinct_spectrum(oracle::eigendecompose(normalized_laplacian(g)).eigenvalues)) simple.push_back(std::move(g));
    }
    double disjoint_worst = 0.0;
    Rng rng(Rng::derive(sh.settings.seed, 13));
    for (const auto& g : simple) {
        const auto sd = oracle::eigendecompose(normalized_laplacian(g));
        const KernelSet frame = oracle::disjoint_indicator_frame(sd.eigenvalues);
        for (int s = 0; s < 100; ++s) {
            Vector x(g.n_nodes());
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
            disjoint_worst = std::max(disjoint_worst,
                                      std::abs(oracle::spectral_entropy(x, sd) - oracle::wavelet_entropy(x, sd, frame)));
        }
    }

    const Graph p2(2, {{0, 1}});
    const auto sd2 = oracle::eigendecompose(normalized_laplacian(p2));
    const Vector delta = (Vector(2) << 1.0, 0.0).finished();
    const KernelSet all_pass = oracle::all_pass_frame();
    const double gap2 = std::abs(oracle::spectral_entropy(delta, sd2) - oracle::wavelet_entropy(delta, sd2, all_pass));
    const double bound2 = oracle::approximation_bound(all_pass, sd2.eigenvalues);
    const bool attains = std::abs(gap2 - std::log(2.0)) < 1e-12 && std::abs(bound2 - std::log(2.0)) < 1e-12;

    const bool ok = cases > 0 && ok_cases == cases && disjoint_worst == 0.0 && attains;
    return {ok, fmt("bound held in %ld/%ld cases; disjoint-indicator max |xi_s-xi_w| = %g on %zu graphs; "
                    "all-pass on P2 gap %.6f vs log 2 = %.6f",
                    ok_cases, cases, disjoint_worst, simple.size(), gap2, std::log(2.0))};
}

Outcome c4_filter_oracle(Shared& sh) {
    const auto& c = certificates(sh);
    const long checks = c.at("filter_oracle_checks").get<long>();
    const long bad = c.at("filter_oracle_violations").get<long>();
    return {checks > 0 && bad == 0, fmt("%ld/%ld probes within fit_error*||z||_inf + 1e-8 (max ratio %.3f)",
                                        checks - bad, checks, c.at("filter_oracle_max_ratio").get<double>())};
}

Outcome c5_gradients(Shared& sh) {
    const Graph g = testkit::erdos_renyi(20, 0.25, 77);
    const Laplacian l = normalized_laplacian(g);
    const FilterBank bank = build_filter_bank(build_frame(FrameSpec{}), FilterBankOptions{});
    const Matrix x = testkit::gaussian(20, 8, 78).cwiseAbs();
    const Matrix r = generate_mask(20, 8, Mechanism::MCAR, 0.2, 79);
    const GraphBatch batch{&l, x, r, (1.0 - r.array()).matrix()};
    const ModelParams p = ModelParams::initialize({9, 8, 16, 16, 16}, Rng::derive(sh.settings.seed, 14));
    int probed = 0, agreed = 0, kinks = 0;
    bool every_tensor = true;
    for (const double gamma : {0.0, 1.0}) {
        const auto res = testkit::gradient_audit(p, bank, batch, gamma, ReconstructionLossKind::Norm, 10,
                                                 static_cast<unsigned>(80 + gamma));
        probed += res.probed;
        agreed += res.agreed;
        kinks += res.kinks;
        for (int n : res.per_tensor_probed) every_tensor = every_tensor && n > 0;
    }
    const double share = probed ? static_cast<double>(agreed) / probed : 0.0;
    return {share >= 0.99 && every_tensor,
            fmt("%d/%d smooth coordinates agree (%.2f%%), %d kink probes skipped, every tensor probed: %s", agreed, probed,
                100.0 * share, kinks, every_tensor ? "yes" : "no")};
}

ExperimentConfig efficacy_config(const Settings& s) {
    ExperimentConfig cfg;
    cfg.train.epochs = s.epochs;
    cfg.trials = 5;
    cfg.rate = 0.1;
    cfg.mechanism = Mechanism::MCAR;
    cfg.knn_k = 5;
    cfg.seed = s.seed;
    cfg.ablation_no_entropy = true;
    return cfg;
}

const ExperimentResult& efficacy(Shared& sh) {
    if (!sh.efficacy) {
        Clock clock;
        sh.efficacy = run_experiment(sh.synthetic, efficacy_config(sh.settings));
        sh.efficacy_seconds = clock.seconds();
        write_experiment(*sh.efficacy, sh.settings.workdir / "efficacy");
    }
    return *sh.efficacy;
}

Outcome c6_efficacy(Shared& sh) {
    const auto& s = efficacy(sh).report.at("summary");
    const double ours = s.at("megae").at("rmse_mean").get<double>();
    const double mean = s.at("mean").at("rmse_mean").get<double>();
    const double knn = s.at("knn").at("rmse_mean").get<double>();
    const double vs_mean = s.at("margin_vs_mean").get<double>();
    const double vs_knn = s.at("margin_vs_knn").get<double>();
    // The run also trains the gamma = 0 twin, so its time over-counts this criterion.
    const bool ok = vs_mean >= 0.05 && vs_knn >= 0.05 && sh.efficacy_seconds < 900.0;
    return {ok, fmt("RMSE megae %.5f, mean %.5f, knn %.5f; margins %.1f%% / %.1f%% (>= 5%%); %d epochs, %.0f s incl. "
                    "ablation twin",
                    ours, mean, knn, 100.0 * vs_mean, 100.0 * vs_knn, sh.settings.epochs, sh.efficacy_seconds)};
}

Outcome c7_ablation(Shared& sh) {
    const auto& s = efficacy(sh).report.at("summary");
    const double r1 = s.at("megae").at("rmse_mean").get<double>();
    const double r0 = s.at("megae_no_entropy").at("rmse_mean").get<double>();
    const double g1 = s.at("megae").at("entropy_abs_gap_mean").get<double>();
    const double g0 = s.at("megae_no_entropy").at("entropy_abs_gap_mean").get<double>();
    const bool ok = r1 <= r0 && g1 < g0;
    return {ok, fmt("RMSE gamma=1 %.5f vs gamma=0 %.5f (need <=); |mean xi(imputed) - mean xi(truth)| %.5f vs %.5f "
                    "(need <)",
                    r1, r0, g1, g0)};
}

ExperimentConfig sweep_config(const Settings& s) {
    ExperimentConfig cfg;
    cfg.train.epochs = s.sweep_epochs;
    cfg.trials = s.sweep_trials;
    cfg.seed = s.seed;
    return cfg;
}

const std::vector<SweepPoint>& sweep_points(Shared& sh) {
    if (!sh.sweep_points) {
        sh.sweep_points = sweep(sh.synthetic, sweep_config(sh.settings), {3, 6, 9, 14, 20}, {1.0}, sh.settings.workdir / "sweep");
    }
    return *sh.sweep_points;
}

Outcome c8_sweep(Shared& sh) {
    const auto& pts = sweep_points(sh);
    std::string curve;
    bool all_ok = pts.size() == 5;
    for (const auto& p : pts) {
        all_ok = all_ok && p.mean_rmse.has_value();
        curve += fmt(" M=%d:%s", p.channels, p.mean_rmse ? fmt("%.5f", *p.mean_rmse).c_str() : "failed");
    }
    const std::string csv = slurp(sh.settings.workdir / "sweep" / "summary.csv");
    const long lines = std::count(csv.begin(), csv.end(), '\n');
    return {all_ok && lines == 6, fmt("summary.csv with %ld rows;%s", lines - 1, curve.c_str())};
}

Outcome c9_determinism(Shared& sh) {
    efficacy(sh);
    sweep_points(sh);
    const fs::path again = sh.settings.workdir / "repeat";
    const ExperimentResult second = run_experiment(sh.synthetic, efficacy_config(sh.settings));
    write_experiment(second, again / "efficacy");
    sweep(sh.synthetic, sweep_config(sh.settings), {3, 6, 9, 14, 20}, {1.0}, again / "sweep");

    std::vector<std::string> files{"efficacy/report.json", "efficacy/trials.csv", "efficacy/trace.csv",
                                   "sweep/summary.csv"};
    for (int m : {3, 6, 9, 14, 20}) files.push_back("sweep/M" + std::to_string(m) + "_gamma1/report.json");
    int identical = 0;
    std::string differing;
    for (const auto& f : files) {
        const std::string a = slurp(sh.settings.workdir / f);
        if (!a.empty() && a == slurp(again / f)) ++identical;
        else differing += " " + f;
    }
    for (int t = 0; t < 5; ++t) {
        const std::string f = "efficacy/model_trial" + std::to_string(t) + ".ckpt";
        files.push_back(f);
        const std::string a = slurp(sh.settings.workdir / f);
        if (!a.empty() && a == slurp(again / f)) ++identical;
        else differing += " " + f;
    }
    const bool ok = identical == static_cast<int>(files.size());
    return {ok, fmt("%d/%zu artifacts byte-identical across two executions%s", identical, files.size(),
                    ok ? "" : (";" + differing).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    Shared sh;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto next = [&]() -> std::string {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << a << '\n';
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--workdir") sh.settings.workdir = next();
        else if (a == "--epochs") sh.settings.epochs = std::stoi(next());
        else if (a == "--sweep-epochs") sh.settings.sweep_epochs = std::stoi(next());
        else if (a == "--sweep-trials") sh.settings.sweep_trials = std::stoi(next());
        else if (a == "--seed") sh.settings.seed = std::stoull(next());
        else if (a == "--only") only.push_back(std::stoi(next()));
        else {
            std::cerr << "usage: acceptance [--workdir DIR] [--epochs N] [--sweep-epochs N] [--sweep-trials N] "
                         "[--seed S] [--only CRITERION]...\n";
            return 2;
        }
    }
    fs::remove_all(sh.settings.workdir);
    fs::create_directories(sh.settings.workdir);
    sh.corpus = certification_graphs(20, 64, Rng::derive(sh.settings.seed, 11));
    SyntheticSpec spec;
    spec.seed = sh.settings.seed;
    sh.synthetic = synthesize(spec);
    save_dataset(sh.synthetic, sh.settings.workdir / "synthetic");

    struct Criterion {
        int id;
        const char* name;
        Outcome (*run)(Shared&);
    };
    const Criterion criteria[] = {
        {1, "tight-frame certificate", c1_tightness},
        {2, "energy preservation", c2_parseval},
        {3, "entropy approximation bound", c3_entropy_bound},
        {4, "filter/oracle equivalence", c4_filter_oracle},
        {5, "gradient audit", c5_gradients},
        {6, "imputation efficacy", c6_efficacy},
        {7, "entropy-regularization ablation", c7_ablation},
        {8, "kernel-count sweep", c8_sweep},
        {9, "determinism", c9_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        Clock clock;
        try {
            o = c.run(sh);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail
                  << fmt(" [%.1f s]", clock.seconds()) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
