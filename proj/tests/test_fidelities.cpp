#include <doctest.h>

#include <cmath>
#include <random>

#include "latreg/fidelity.hpp"

using namespace latreg;

namespace {
Signal sig(std::initializer_list<double> xs, double dx = 1.0) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return Signal(v, dx);
}

// Random probability vector on n nodes with Δx-mass 1.
Signal simplex(std::mt19937_64& rng, int n, double dx) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Vec v(n);
    for (auto& e : v) e = u(rng);
    v /= dx * v.sum();
    return Signal(v, dx);
}

std::vector<Fidelity> leaf_zoo() {
    return {Fidelity::sq_norm(2),  Fidelity::sq_norm(1.5),       Fidelity::sq_norm(1, NormKind::l1),
            Fidelity::kl(),        Fidelity::chi2(),             Fidelity::hellinger2(),
            Fidelity::tv(),        Fidelity::w1(),               Fidelity::phi_generic(reverse_kl_phi())};
}
}  // namespace

TEST_CASE("identity of indiscernibles") {
    std::mt19937_64 rng(1);
    const Signal f = simplex(rng, 6, 1.0 / 6);
    for (const auto& fid : leaf_zoo()) {
        CAPTURE(fid.describe());
        CHECK(eval(fid, f, f) == doctest::Approx(0).scale(1));
        CHECK(eval(fid, simplex(rng, 6, 1.0 / 6), f) > 0);
    }
    CHECK(eval(Fidelity::ball(0.1), f, f) == 0);
}

TEST_CASE("hand-evaluated values") {
    CHECK(eval(Fidelity::chi2(), sig({0.6, 0.4}), sig({0.5, 0.5})) == doctest::Approx(0.04));
    CHECK(eval(Fidelity::w1(), sig({1, 0}), sig({0, 1})) == doctest::Approx(1));
    CHECK(eval(Fidelity::tv(), sig({0.6, 0.4}), sig({0.5, 0.5})) == doctest::Approx(0.1));
    CHECK(eval(Fidelity::sq_norm(2), sig({1, 2}), sig({0, 0})) == doctest::Approx(2.5));
    const double kl = 0.6 * std::log(1.2) + 0.4 * std::log(0.8);
    CHECK(eval(Fidelity::kl(), sig({0.6, 0.4}), sig({0.5, 0.5})) == doctest::Approx(kl));
}

TEST_CASE("domain violations evaluate to infinity") {
    const Signal f = sig({0.5, 0.5});
    CHECK(std::isinf(eval(Fidelity::kl(), sig({1.2, -0.2}), f)));
    CHECK(std::isinf(eval(Fidelity::kl(), sig({0.7, 0.5}), f)));
    CHECK(std::isinf(eval(Fidelity::kl(), sig({0.5, 0.5}), sig({1, 0}))));
    CHECK(std::isfinite(eval(Fidelity::hellinger2(), sig({0.5, 0.5}), sig({1, 0}))));
    CHECK(std::isinf(eval(Fidelity::ball(0.1), sig({1, 0}), sig({0, 0}))));
    CHECK_THROWS_AS(eval(Fidelity::kl(), sig({std::nan(""), 1}), f), InputError);
}

TEST_CASE("convexity in the first argument") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> t01(0, 1);
    for (const auto& fid : leaf_zoo()) {
        CAPTURE(fid.describe());
        for (int k = 0; k < 50; ++k) {
            const Signal f = simplex(rng, 5, 0.2), a = simplex(rng, 5, 0.2), b = simplex(rng, 5, 0.2);
            const double t = t01(rng);
            const double mix = eval(fid, t * a + (1 - t) * b, f);
            CHECK(mix <= t * eval(fid, a, f) + (1 - t) * eval(fid, b, f) + 1e-12);
        }
    }
}

TEST_CASE("phi conjugates") {
    const auto chi = chi2_phi();
    for (double x : {-1.5, -0.3, 0.0, 0.7, 3.0}) CHECK(chi.conj(x) == doctest::Approx(x + x * x / 4));
    CHECK(chi.conj(-3.0) == doctest::Approx(-1));
    const auto hel = hellinger2_phi();
    CHECK(hel.conj(0.5) == doctest::Approx(1.0));
    CHECK(std::isinf(hel.conj(1.0)));
    const auto tv = tv_phi();
    CHECK(tv.conj(0.4) == doctest::Approx(0.4));
    CHECK(std::isinf(tv.conj(0.6)));
    for (const auto& p : {kl_phi(), chi2_phi(), hellinger2_phi(), tv_phi(), reverse_kl_phi()}) {
        CAPTURE(p.name);
        CHECK(p.conj(0.0) == doctest::Approx(0).scale(1));
        CHECK(p.phi(1.0) == doctest::Approx(0).scale(1));
        for (double x : {-0.4, -0.1, 0.05, 0.3})
            if (std::isfinite(p.conj(x))) CHECK(p.conj(x) >= x - 1e-15);
    }
}

TEST_CASE("phi remainder is quadratic at the origin") {
    for (int k = 4; k <= 30; ++k) {
        const double x = std::ldexp(1.0, -k);
        CHECK(std::abs(kl_phi().remainder(x) / x) <= x);
        CHECK(std::abs(chi2_phi().remainder(x) / x) <= x);
        CHECK(std::abs(kl_phi().remainder(-x) / x) <= x);
        CHECK(std::abs(chi2_phi().remainder(-x) / x) <= x);
        // x/(1−x) has remainder x²/(1−x).
        CHECK(std::abs(hellinger2_phi().remainder(x) / x) <= x / (1 - x) * (1 + 1e-12));
        CHECK(std::abs(hellinger2_phi().remainder(-x) / x) <= x);
    }
}

TEST_CASE("prox examples") {
    CHECK(prox(Fidelity::sq_norm(2), sig({0}), sig({1}), 1.0)[0] == doctest::Approx(0.5));
    CHECK(prox(Fidelity::kl(), sig({0}), sig({1}), 1.0)[0] == doctest::Approx(0.5671433).epsilon(1e-7));
    const Signal p = prox(Fidelity::ball(1, NormKind::l2), sig({2, 0}), sig({0, 0}), 1.0);
    CHECK(p[0] == doctest::Approx(1));
    CHECK(p[1] == doctest::Approx(0).scale(1));
    for (const auto& fid : {Fidelity::tv(), Fidelity::w1(),
                            combine_infconv(Fidelity::sq_norm(2), Fidelity::tv()),
                            combine_sum(Fidelity::kl(), Fidelity::sq_norm(2))})
        CHECK_THROWS_AS(prox(fid, sig({1, 0}), sig({0.5, 0.5}), 1.0), UnsupportedProx);
    CHECK_THROWS_AS(prox(Fidelity::kl(), sig({1}), sig({1}), 0.0), InputError);
}

TEST_CASE("prox optimality through Fenchel-Young") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const std::vector<Fidelity> fids = {Fidelity::sq_norm(2), Fidelity::sq_norm(3),
                                        Fidelity::sq_norm(1, NormKind::max), Fidelity::kl(),
                                        Fidelity::chi2(), Fidelity::hellinger2(),
                                        Fidelity::ball(0.3), Fidelity::phi_generic(reverse_kl_phi())};
    for (const auto& fid : fids) {
        CAPTURE(fid.describe());
        for (int k = 0; k < 30; ++k) {
            const Signal f = simplex(rng, 5, 0.2);
            Vec w(5);
            for (auto& e : w) e = g(rng);
            const double tau = std::exp(g(rng));
            const Signal sw(w, 0.2);
            const Signal v = prox(fid, sw, f, tau);
            const Signal q = (1.0 / tau) * (sw - v);
            const double fy = eval_relaxed(fid, v, f) + conjugate(fid, q, f) - dot(q, v);
            CHECK(std::abs(fy) <= 1e-8 * (1 + std::abs(dot(q, v))));
        }
    }
}

TEST_CASE("Fenchel-Young inequality for KL") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int k = 0; k < 1000; ++k) {
        const Signal f = simplex(rng, 4, 0.25), v = simplex(rng, 4, 0.25);
        Vec q(4);
        for (auto& e : q) e = g(rng);
        const Signal sq(q, 0.25);
        CHECK(dot(sq, v) <= eval_relaxed(Fidelity::kl(), v, f) + conjugate(Fidelity::kl(), sq, f) + 1e-12);
    }
    CHECK(conjugate(Fidelity::kl(), Signal::zeros(3, 1), sig({0.2, 0.3, 0.5})) == 0);
}

TEST_CASE("Pinsker") {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 500; ++k) {
        const Signal f = simplex(rng, 6, 1.0 / 6), v = simplex(rng, 6, 1.0 / 6);
        const double l1 = norm(v - f, NormKind::l1);
        CHECK(l1 * l1 <= 2 * eval(Fidelity::kl(), v, f) + 1e-14);
    }
}

TEST_CASE("sum") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const Fidelity s = combine_sum(Fidelity::sq_norm(2), Fidelity::sq_norm(1, NormKind::l1));
    const Signal f = simplex(rng, 4, 0.25);
    CHECK(eval(s, f, f) == 0);
    for (int k = 0; k < 50; ++k) {
        const Signal v = simplex(rng, 4, 0.25);
        CHECK(eval(s, v, f) == doctest::Approx(eval(s.parts[0], v, f) + eval(s.parts[1], v, f)));
        Vec q(4);
        for (auto& e : q) e = 0.5 * g(rng);
        const Signal sq(q, 0.25);
        const Signal zero = Signal::zeros(4, 0.25);
        const double end0 = conjugate(s.parts[0], sq, f) + conjugate(s.parts[1], zero, f);
        const double c = conjugate(s, sq, f);
        CHECK(c <= end0 + 1e-12);
        // Fenchel-Young for the bound.
        CHECK(dot(sq, v) <= eval(s, v, f) + c + 1e-9);
    }
}

TEST_CASE("infimal convolution") {
    const Fidelity q2 = Fidelity::sq_norm(2);
    const Fidelity l1 = Fidelity::sq_norm(1, NormKind::l1);
    const Signal f = sig({0.3, 0.7});
    CHECK(eval(combine_infconv(q2, q2), f, f) == doctest::Approx(0).scale(1));
    const Fidelity huber = combine_infconv(l1, q2);
    CHECK(eval(huber, sig({2, 0}), sig({0, 0})) == doctest::Approx(1.5).epsilon(1e-8));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        const Signal q(Vec::NullaryExpr(2, [&] { return 0.4 * g(rng); }), 1.0);
        const double direct = conjugate(l1, q, Signal::zeros(2, 1)) + conjugate(q2, q, f);
        if (std::isinf(direct)) CHECK(std::isinf(conjugate(huber, q, f)));
        else CHECK(conjugate(huber, q, f) == doctest::Approx(direct));
    }
    CHECK_THROWS_AS(combine_infconv(Fidelity::kl(), q2), ConstructionError);
}

TEST_CASE("noise calibration") {
    const Signal fb = sig({0.25, 0.25, 0.5});
    const Signal e1 = sig({1, 0, 0});
    for (double d : {1e-2, 1e-4}) {
        const Signal fn = calibrate_noise(Fidelity::sq_norm(2), fb, e1, d);
        CHECK((fn - fb).values[0] == doctest::Approx(std::sqrt(2 * d)).epsilon(1e-9));
    }
    CHECK(norm(calibrate_noise(Fidelity::sq_norm(2), fb, e1, 1e-12) - fb, NormKind::max) < 1e-5);

    const Signal uni = Signal::constant(8, 1.0, 1.0 / 8);
    const Signal fn = calibrate_noise(Fidelity::kl(), uni, 1e-3, 42);
    const double h = eval(Fidelity::kl(), uni, fn);
    CHECK(h >= 0.999e-3);
    CHECK(h <= 1.001e-3);
    CHECK(fn.mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(calibrate_noise(Fidelity::kl(), uni, Signal::zeros(8, 1.0 / 8), 1e-3),
                    CalibrationError);
}

TEST_CASE("subgradient is consistent with Fenchel-Young") {
    std::mt19937_64 rng(9);
    for (const auto& fid : {Fidelity::sq_norm(2), Fidelity::kl(), Fidelity::chi2(), Fidelity::hellinger2()}) {
        CAPTURE(fid.describe());
        const Signal f = simplex(rng, 5, 0.2), v = simplex(rng, 5, 0.2);
        const Signal q = subgradient(fid, v, f);
        CHECK(eval_relaxed(fid, v, f) + conjugate(fid, q, f) - dot(q, v) == doctest::Approx(0).scale(1e-3));
    }
}
