#include <doctest.h>

#include <cmath>
#include <random>

#include "latreg/operators.hpp"
#include "latreg/solver.hpp"

using namespace latreg;

namespace {
DenseOperator scalar_op(double a) { return DenseOperator(Mat::Constant(1, 1, a), 1, 1); }

Problem kkt_problem() {
    Problem p;
    p.bracket = BracketPair(scalar_op(0.9), scalar_op(1.1), scalar_op(1.0));
    p.fidelity = Fidelity::sq_norm(2);
    p.regulariser = {RegKind::sq_l2, false};
    p.f = Signal(Vec::Ones(1), 1);
    p.alpha = 1;
    return p;
}

// Enumerates interior, lower-active and upper-active regimes of the scalar problem.
double kkt_oracle(double al, double au, double f) {
    double best = 1e300;
    auto obj = [&](double u, double v) { return 0.5 * (v - f) * (v - f) + 0.5 * u * u; };
    auto feasible = [&](double u, double v) { return al * u <= v + 1e-15 && v <= au * u + 1e-15; };
    if (feasible(0, f)) best = std::min(best, obj(0, f));
    for (double a : {al, au}) {
        const double u = a * f / (1 + a * a);
        if (feasible(u, a * u)) best = std::min(best, obj(u, a * u));
    }
    return best;
}

Problem tikhonov(int m, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Mat a(m, n);
    for (auto& e : a.reshaped()) e = g(rng);
    const DenseOperator op(a, 0.5, 0.25);
    Problem p;
    p.bracket = BracketPair(op, op, op);
    p.fidelity = Fidelity::sq_norm(2);
    p.regulariser = {RegKind::sq_l2, false};
    p.f = Signal(Vec::NullaryExpr(m, [&] { return g(rng); }), 0.25);
    p.alpha = 1;
    return p;
}

Vec tikhonov_closed_form(const Problem& p) {
    const DenseOperator& a = *p.bracket.truth;
    const Mat& as = a.adjoint_matrix();
    const Mat lhs = as * a.matrix() + Mat::Identity(a.cols(), a.cols());
    return lhs.ldlt().solve(as * p.f.values);
}
}  // namespace

TEST_CASE("scalar bracket problem matches KKT enumeration") {
    const Problem p = kkt_problem();
    const SolveReport r = solve(p);
    REQUIRE(r.converged);
    CHECK(r.primal_value == doctest::Approx(kkt_oracle(0.9, 1.1, 1.0)).epsilon(1e-6));
    CHECK(r.complementarity <= 1e-6);
    CHECK((r.mu1.values.array() >= 0).all());
    CHECK((r.mu2.values.array() >= 0).all());
    CHECK(r.constraint_violation <= 1e-8);
}

TEST_CASE("degenerate bracket reproduces Tikhonov") {
    const Problem p = tikhonov(5, 4, 3);
    const SolveReport r = solve(p);
    REQUIRE(r.converged);
    CHECK((r.u.values - tikhonov_closed_form(p)).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK(duality_gap(r, p) <= 1e-6 * (1 + std::abs(r.primal_value)));
    const KktResiduals k = kkt_residuals(r, p);
    CHECK(k.subgradient <= 1e-5);
    CHECK(std::abs(k.fenchel_young) <= 1e-5);
    // For sq_l2 the subgradient is the gradient: −B*μ = u.
    const Signal pj = -1.0 * b_adjoint(p.bracket, r.mu1, r.mu2);
    CHECK((pj.values - r.u.values).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("small alpha fits feasible data") {
    const auto br = bracket_from_kernel_bounds(with_multiplicative_bounds(gaussian_kernel(0.2), 0.1), 6,
                                               1.0 / 6);
    Problem p;
    p.bracket = br;
    p.fidelity = Fidelity::sq_norm(2);
    p.regulariser = {RegKind::sq_l2, true};
    p.f = br.truth->apply(Signal(Vec::Ones(6), 1.0 / 6));
    double last = 1e300;
    for (double a : {1.0, 1e-2, 1e-4}) {
        p.alpha = a;
        const SolveReport r = solve(p);
        const double h = eval_relaxed(p.fidelity, r.v, p.f);
        CHECK(h <= last + 1e-12);
        last = h;
    }
    CHECK(last < 1e-6);
}

TEST_CASE("weak duality on iterates and trivial duals") {
    const Problem p = tikhonov(4, 3, 5);
    for (int iters : {1, 5, 40, 300}) {
        SolverOptions o;
        o.max_iters = iters;
        o.check_every = 1;
        SolveReport r = solve(p, o);
        // Primal value at the feasible pair (u, Au) of the iterate.
        r.v = p.bracket.truth->apply(r.u);
        r.x_state.resize(0);
        CHECK(dual_value(r, p) <= primal_value(r, p) + 1e-10);
        CHECK(duality_gap(r, p) >= -1e-10);
    }
    SolveReport z = solve(p);
    z.mu1.values.setZero();
    z.mu2.values.setZero();
    z.term_duals.clear();
    CHECK(complementarity(z, p) == 0);
    // μ = 0 leaves −J*(0) − H*(0) = 0 as the dual value.
    CHECK(dual_value(z, p) == doctest::Approx(0).scale(1));
    CHECK(duality_gap(z, p) >= 0);
}

TEST_CASE("complementarity detects multipliers on inactive constraints") {
    const Problem p = kkt_problem();
    SolveReport r = solve(p);
    r.u.values << 1.0;
    r.v.values << 1.0;  // strictly inside [0.9, 1.1]
    r.mu1.values << 0.5;
    r.mu2.values << 0.0;
    CHECK(complementarity(r, p) == doctest::Approx(0.05));
}

TEST_CASE("zero problem has zero residuals") {
    Problem p = tikhonov(3, 3, 7);
    p.f.values.setZero();
    const SolveReport r = solve(p);
    CHECK(r.u.values.isZero(1e-12));
    const KktResiduals k = kkt_residuals(r, p);
    CHECK(k.subgradient <= 1e-12);
    CHECK(std::abs(k.fenchel_young) <= 1e-12);
}

TEST_CASE("h and j are monotone in alpha") {
    const auto br = bracket_from_kernel_bounds(with_multiplicative_bounds(gaussian_kernel(0.15), 0.05),
                                               8, 1.0 / 8);
    Problem p;
    p.bracket = br;
    p.fidelity = Fidelity::kl();
    p.regulariser = {RegKind::sq_l2, true};
    Vec f = Vec::LinSpaced(8, 0.5, 1.5);
    p.f = Signal(f / (f.sum() / 8), 1.0 / 8);
    SolverOptions o;
    o.tol_gap = 1e-10;
    double h0 = -1, j0 = 1e300;
    for (int k = 0; k < 20; ++k) {
        p.alpha = std::pow(10.0, -2 + 4.0 * k / 19);
        const SolveReport r = solve(p, o);
        REQUIRE(r.converged);
        const double h = eval_relaxed(p.fidelity, r.v, p.f), j = eval(p.regulariser, r.u);
        CHECK(h >= h0 - 1e-6);
        CHECK(j <= j0 + 1e-6);
        h0 = h;
        j0 = j;
    }
}

TEST_CASE("problem validation and determinism") {
    Problem p = kkt_problem();
    p.bracket = BracketPair(scalar_op(1.1), scalar_op(0.9), std::nullopt);
    CHECK_THROWS_AS(solve(p), ProblemError);
    p = kkt_problem();
    p.alpha = 0;
    CHECK_THROWS_AS(solve(p), ProblemError);

    const Problem q = tikhonov(4, 4, 9);
    SolverOptions o;
    o.random_init = true;
    o.seed = 12;
    const SolveReport a = solve(q, o), b = solve(q, o);
    CHECK(a.u.values == b.u.values);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("warm start reuses the state") {
    const Problem p = tikhonov(6, 5, 11);
    const SolveReport cold = solve(p);
    SolverOptions o;
    o.warm = &cold;
    const SolveReport warm = solve(p, o);
    CHECK(warm.converged);
    CHECK(warm.iterations <= cold.iterations);
}

TEST_CASE("split fidelities converge with small gaps") {
    const auto br = bracket_from_kernel_bounds(with_multiplicative_bounds(gaussian_kernel(0.15), 0.1),
                                               6, 1.0 / 6);
    Vec f = Vec::LinSpaced(6, 0.4, 1.6);
    const Signal fs(f / (f.sum() / 6), 1.0 / 6);
    for (const Fidelity& fid :
         {Fidelity::tv(), Fidelity::w1(), combine_sum(Fidelity::kl(), Fidelity::sq_norm(2)),
          combine_infconv(Fidelity::sq_norm(2), Fidelity::tv())}) {
        CAPTURE(fid.describe());
        Problem p;
        p.bracket = br;
        p.fidelity = fid;
        p.regulariser = {RegKind::sq_l2, true};
        p.f = fs;
        p.alpha = 2;
        const SolveReport r = solve(p);
        CHECK(r.converged);
        CHECK(r.gap <= 1e-6 * (1 + std::abs(r.primal_value)));
        CHECK(kkt_residuals(r, p).subgradient <= 1e-4);
    }
}
