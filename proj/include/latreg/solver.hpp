#pragma once

#include <cstdint>
#include <vector>

#include "latreg/fidelity.hpp"
#include "latreg/lattice.hpp"
#include "latreg/regulariser.hpp"

namespace latreg {

struct Problem {
    BracketPair bracket;
    Fidelity fidelity;
    Regulariser regulariser;
    Signal f;
    double alpha = 1.0;
};

struct SolveReport;

struct SolverOptions {
    int max_iters = 200000;
    double tol_gap = 1e-7;
    double tol_feas = 1e-8;
    double tol_comp = 1e-6;
    bool precondition = true;
    std::uint64_t seed = 0;
    bool random_init = false;
    int check_every = 20;
    const SolveReport* warm = nullptr;
};

struct SolveReport {
    Signal u, v;
    Signal mu1, mu2;
    double primal_value = 0.0;
    double dual_value = 0.0;
    double gap = 0.0;
    double complementarity = 0.0;
    double constraint_violation = 0.0;
    int iterations = 0;
    bool converged = false;
    // Dual elements of the split fidelity terms; empty when the fidelity is a single term.
    std::vector<Signal> term_duals;
    // Raw iteration state, reusable as a warm start.
    Vec x_state, y_state;
};

SolveReport solve(const Problem& p, const SolverOptions& opts = {});

// Primal value (1/α)H(v|f) + J(u) of a report.
double primal_value(const SolveReport& r, const Problem& p);
// Dual objective −(1/α)H*(αE*μ|f) − J*(−B*μ), after scaling μ into the dual domain.
double dual_value(const SolveReport& r, const Problem& p);
double duality_gap(const SolveReport& r, const Problem& p);
double complementarity(const SolveReport& r);
double complementarity(const SolveReport& r, const Problem& p);
double constraint_violation(const Signal& u, const Signal& v, const BracketPair& b);

// E*μ = μ₁ − μ₂ and B*μ = A^l*μ₁ − A^u*μ₂.
Signal e_adjoint(const Signal& mu1, const Signal& mu2);
Signal b_adjoint(const BracketPair& b, const Signal& mu1, const Signal& mu2);

struct KktResiduals {
    double subgradient = 0.0;    // violation of −B*μ ∈ ∂J(u)
    double fenchel_young = 0.0;  // H(v|f) + H*(αE*μ|f) − ⟨αE*μ, v⟩
};

KktResiduals kkt_residuals(const SolveReport& r, const Problem& p);

}  // namespace latreg
