#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latreg/analysis.hpp"
#include "latreg/config.hpp"
#include "latreg/parameter.hpp"

namespace latreg {

struct ExperimentConfig {
    std::string name;

    // operator
    std::string kernel = "gaussian";
    double sigma = 0.1;
    Eigen::Index n = 64;
    std::string bounds = "multiplicative";  // multiplicative | additive
    std::vector<double> eps;                // kernel-bound width per row

    Fidelity fidelity;
    Regulariser regulariser;

    // fixture
    std::string omega = "bump";  // bump | dual_spike
    double omega_center = 0.5, omega_width = 0.025;
    Eigen::Index spike = 32;
    bool normalise = true;

    // noise
    std::vector<double> delta;
    std::string direction = "omega";  // omega | random
    std::uint64_t seed = 1;

    // parameter choice
    bool discrepancy = false;
    Schedule schedule;
    DiscrepancyOptions dp;

    SolverOptions solver;

    // summary
    std::string fit = "delta";  // delta | eta | max
    double fit_exponent = 1.0;
    double window_lo = 0.0, window_hi = 0.0;
    bool has_window = false;

    std::string out_dir;
};

ExperimentConfig parse_experiment(const Config& cfg);

struct RateRow {
    int n = 0;
    double delta = 0, eta = 0, alpha = 0;
    double primal = 0, gap = 0, comp = 0;
    double breg_one = 0, breg_symm = 0;
    double h_val = 0, j_val = 0;
    double slack = 0;
    bool converged = false;

    // Right-hand side without the C·η term, and the pieces needed to add it.
    double rhs_base = 0, u_max = 0;
    double slack_one = 0, slack_symm = 0;
    // Discrepancy-mode checks.
    double lemma_j = 0, lemma_pair = 0;
    int solves = 0;
};

struct RateSummary {
    SlopeFit fit;
    bool fit_ok = false;
    std::string fit_error;
    bool slope_ok = false;
    double constant_c = 0;
    double min_slack = 0;
    bool slack_ok = false;
    bool lemma_ok = true;
    int converged = 0;
};

struct ExperimentResult {
    std::vector<RateRow> rows;
    RateSummary summary;
    SourceFixture fixture;
};

SourceFixture build_fixture(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

std::string rows_csv(const std::vector<RateRow>& rows);
std::vector<RateRow> parse_rows_csv(const std::string& text);
std::string summary_csv(const ExperimentConfig& cfg, const RateSummary& s);
std::string plot_svg(const ExperimentConfig& cfg, const ExperimentResult& r);
// Points used for the slope fit: (x, D^{p†}) over converged rows.
std::vector<std::pair<double, double>> fit_points(const ExperimentConfig& cfg,
                                                  const std::vector<RateRow>& rows);
void emit_outputs(const ExperimentConfig& cfg, const ExperimentResult& r, const std::string& dir,
                  bool plot);

}  // namespace latreg
