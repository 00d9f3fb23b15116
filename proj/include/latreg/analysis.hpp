#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latreg/lattice.hpp"
#include "latreg/regulariser.hpp"

namespace latreg {

struct SourceFixture {
    Signal u_dag, f_bar, omega;
    Signal mu1, mu2;  // (ω₋, ω₊)
    Signal p_dag;     // A*ω
};

// Quadratic regulariser: u† = A*ω, which must be nonnegative.
SourceFixture make_source_fixture(const BracketPair& bracket, const Regulariser& reg,
                                  const Signal& omega);
// l1 regulariser: u† given; ω is validated if given, otherwise the minimum-norm solution of
// (A*ω)_i = sign(u†_i) on the support.
SourceFixture make_source_fixture_l1(const BracketPair& bracket, const Regulariser& reg,
                                     const Signal& u_dag,
                                     const std::optional<Signal>& omega = std::nullopt);

double bregman_one_sided(const Regulariser& reg, const Signal& u, const Signal& w, const Signal& p);
double bregman_symmetric(const Regulariser& reg, const Signal& u, const Signal& w, const Signal& q,
                         const Signal& p);

struct SlopeFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
    int used = 0, dropped = 0;
};

SlopeFit fit_rate_slope(const std::vector<std::pair<double, double>>& points);

std::string fixture_to_text(const SourceFixture& fx);
SourceFixture fixture_from_text(const std::string& text);

}  // namespace latreg
