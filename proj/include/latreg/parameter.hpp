#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "latreg/solver.hpp"

namespace latreg {

struct Schedule {
    enum class Kind { power, constant, table };
    enum class Basis { delta, eta };

    Kind kind = Kind::power;
    Basis basis = Basis::delta;
    double a = 1.0, p = 0.5;  // power: α = a·x^p
    double c = 1.0;           // constant
    std::vector<double> table;

    static Schedule power(double a, double p, Basis basis = Basis::delta);
    static Schedule constant(double c);
    static Schedule from_table(std::vector<double> values);
};

// α for row n (0-based for tables); x is δ or η according to the basis.
double apriori_alpha(const Schedule& s, double delta, std::size_t n = 0, double eta = 0.0);

struct DiscrepancyOptions {
    double tau = 1.5;
    double alpha0 = 0.0;  // 0 selects δ
    double expand_factor = 10.0;
    double band_ratio = 1.05;
    int max_expansions = 40;
    int max_bisections = 200;
    double mono_slack = 1e-6;
};

struct DiscrepancyResult {
    double alpha = 0.0;
    double h = 0.0;
    SolveReport report;
    std::vector<std::pair<double, double>> trajectory;  // (α, h(α)) in solve order
    int solves = 0;
};

// Largest α on the bisection grid with H(v^α|f_n) ≤ τδ, accepted once H ∈ [δ, τδ].
DiscrepancyResult discrepancy_alpha(const Problem& tmpl, const Signal& fn, double delta,
                                    const DiscrepancyOptions& dopts = {},
                                    const SolverOptions& sopts = {});

// Throws MonotonicityError if h is decreasing somewhere along the pairs beyond the slack.
void check_monotone(std::vector<std::pair<double, double>> pairs, double slack, bool increasing);

}  // namespace latreg
