#pragma once

#include <string>

#include "latreg/lattice.hpp"

namespace latreg {

enum class RegKind { sq_l2, l1, tv1d };

struct Regulariser {
    RegKind kind = RegKind::sq_l2;
    bool nonneg = false;

    std::string describe() const;
};

double eval(const Regulariser& reg, const Signal& u);
Signal prox(const Regulariser& reg, const Signal& w, double tau);
// Violation of p ∈ ∂J(u) measured along ±e_i/dx with one-sided differences.
double subgradient_residual(const Regulariser& reg, const Signal& u, const Signal& p,
                            double eps = 1e-6);
// Closed-form J*(p) in the weighted pairing.
double conjugate(const Regulariser& reg, const Signal& p);
// A subgradient of J at u (used by the oracle).
Signal subgradient(const Regulariser& reg, const Signal& u);

}  // namespace latreg
