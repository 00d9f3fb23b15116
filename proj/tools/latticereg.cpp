#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "latreg/harness.hpp"
#include "latreg/oracle.hpp"

namespace fs = std::filesystem;
using namespace latreg;

namespace {

constexpr int exit_config = 2;
constexpr int exit_failure = 3;

ExperimentConfig load_experiment(const std::string& path, const std::optional<std::uint64_t>& seed) {
    Config c = Config::load(path);
    if (seed) c.set("noise.seed", std::to_string(*seed));
    return parse_experiment(c);
}

int cmd_run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed,
            bool plot, int threads) {
    ExperimentConfig cfg;
    try {
        cfg = load_experiment(path, seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const ConstructionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    try {
        const ExperimentResult r = run_experiment(cfg, threads);
        const std::string dir = out.empty() ? cfg.out_dir : out;
        emit_outputs(cfg, r, dir, plot);
        const RateSummary& s = r.summary;
        std::printf("%s: rows %zu converged %d slope %.4f r2 %.4f min_slack %.3g%s\n", cfg.name.c_str(),
                    r.rows.size(), s.converged, s.fit.slope, s.fit.r2, s.min_slack,
                    cfg.discrepancy ? (s.lemma_ok ? " lemma ok" : " lemma FAILED") : "");
        if (!s.fit_ok) std::cerr << "slope fit: " << s.fit_error << "\n";
        const bool ok = s.fit_ok && s.slope_ok && s.slack_ok && (!cfg.discrepancy || s.lemma_ok);
        return ok ? 0 : exit_failure;
    } catch (const Error& e) {
        std::cerr << "experiment failed: " << e.what() << "\n";
        return exit_failure;
    }
}

int cmd_validate(const std::string& path) {
    try {
        const ExperimentConfig cfg = load_experiment(path, std::nullopt);
        const SourceFixture fx = build_fixture(cfg);
        std::printf("%s: %zu rows, fidelity %s, regulariser %s, |omega|_max %.6g\n", cfg.name.c_str(),
                    cfg.delta.size(), cfg.fidelity.describe().c_str(),
                    cfg.regulariser.describe().c_str(), norm(fx.omega, NormKind::max));
        return 0;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
}

int cmd_oracle(const std::string& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.path().extension() == ".ini") files.push_back(e.path());
    if (ec || files.empty()) {
        std::cerr << "no fixtures in " << dir << "\n";
        return exit_config;
    }
    std::sort(files.begin(), files.end());
    int bad = 0;
    for (const auto& f : files) {
        try {
            const Problem p = load_tiny_problem(Config::load(f.string()));
            const SolveReport r = solve(p);
            const OracleResult o = brute_solve(p);
            const double rel = std::abs(r.primal_value - o.value) / (1.0 + std::abs(o.value));
            const bool ok = r.converged && rel <= 1e-5;
            bad += !ok;
            std::printf("%-24s solver %.10g oracle %.10g rel %.2e %s\n", f.stem().c_str(),
                        r.primal_value, o.value, rel, ok ? "ok" : "MISMATCH");
        } catch (const ConfigError& e) {
            std::cerr << f.string() << ": " << e.what() << "\n";
            return exit_config;
        } catch (const Error& e) {
            std::printf("%-24s error: %s\n", f.stem().c_str(), e.what());
            ++bad;
        }
    }
    return bad ? exit_failure : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice-bracketed variational regularisation experiments"};
    app.require_subcommand(1);
    std::string out;
    std::optional<std::uint64_t> seed;
    bool plot = false;
    int threads = 1;
    auto common = [&](CLI::App* a) {
        a->add_option("--out", out, "output directory (overrides output.dir)");
        a->add_option("--seed", seed, "noise seed (overrides noise.seed)");
        a->add_flag("--plot", plot, "also write plot.svg");
        a->add_option("--threads", threads, "worker threads for independent rows")
            ->check(CLI::PositiveNumber);
    };
    common(&app);

    std::string path;
    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", path, "config file")->required();
    auto* validate = app.add_subcommand("validate", "check a config and build its fixture");
    validate->add_option("config", path, "config file")->required();
    std::string fixtures;
    auto* oracle = app.add_subcommand("oracle", "compare the solver with the brute-force oracle");
    oracle->add_option("fixture-dir", fixtures, "directory of tiny instances")->required();
    for (auto* sub : {run, validate, oracle}) common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }
    if (*run) return cmd_run(path, out, seed, plot, threads);
    if (*validate) return cmd_validate(path);
    return cmd_oracle(fixtures);
}
