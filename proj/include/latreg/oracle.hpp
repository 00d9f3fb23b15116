#pragma once

#include <cstdint>

#include "latreg/solver.hpp"

namespace latreg {

struct OracleConfig {
    int grid_resolution = 16;  // points per dimension for the start grid
    double bound = 10.0;       // half-width of the initial search box
    int starts = 50;
    int subgradient_iters = 4000;
    int ellipsoid_iters = 40000;
    std::uint64_t seed = 1;
};

struct OracleResult {
    double value = 0.0;
    Signal u, v;
    int feasible_points = 0;
};

// Reference minimiser for problems with at most 6 unknowns (n + m, or n when v = Au).
OracleResult brute_solve(const Problem& p, const OracleConfig& cfg = {});

// Exact 1D transport cost by the monotone coupling sweep; masses are dx-weighted.
double brute_w1(const Signal& rho, const Signal& nu);

// Scalar prox argmin_v ½(v − w)² + τ·H(v|f) by golden-section search (spacing 1).
double brute_prox(const Fidelity& fid, double w, double f, double tau);
double brute_prox(const Regulariser& reg, double w, double tau);

}  // namespace latreg
