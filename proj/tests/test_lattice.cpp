#include <doctest.h>

#include <random>

#include "latreg/lattice.hpp"

using namespace latreg;

namespace {
Signal sig(std::initializer_list<double> xs, double dx = 1.0) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return Signal(v, dx);
}
}  // namespace

TEST_CASE("leq is the componentwise order") {
    CHECK(leq(sig({0, 0}), sig({1, 2})));
    CHECK_FALSE(leq(sig({1, 0}), sig({0, 1})));
    const Signal x = sig({0.3, -2});
    CHECK(leq(x, x));
    CHECK(leq(sig({1.05, 0}), sig({1, 0}), 0.1));
    CHECK_THROWS_AS(leq(sig({1}), sig({1, 2})), DimensionError);
}

TEST_CASE("leq is a partial order on samples") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(0, 2);
    for (int t = 0; t < 200; ++t) {
        Vec a(3), b(3), c(3);
        for (int i = 0; i < 3; ++i) a[i] = d(rng), b[i] = d(rng), c[i] = d(rng);
        const Signal x(a, 1), y(b, 1), z(c, 1);
        if (leq(x, y) && leq(y, x)) CHECK(a == b);
        if (leq(x, y) && leq(y, z)) CHECK(leq(x, z));
    }
}

TEST_CASE("pos_neg_split") {
    auto [p, n] = pos_neg_split(sig({3, -2}));
    CHECK(p.values == Vec((Vec(2) << 3, 0).finished()));
    CHECK(n.values == Vec((Vec(2) << 0, 2).finished()));
    auto [p0, n0] = pos_neg_split(sig({0, 0}));
    CHECK(p0.values.isZero());
    CHECK(n0.values.isZero());
    auto [p1, n1] = pos_neg_split(sig({-1, -1}));
    CHECK(p1.values.isZero());
    CHECK(n1.values == Vec::Ones(2));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        Vec x(6);
        for (auto& e : x) e = g(rng);
        auto [xp, xn] = pos_neg_split(Signal(x, 0.5));
        CHECK((xp.values - xn.values) == x);
        CHECK((xp.values.array() * xn.values.array()).isZero(0));
        CHECK((xp.values.array() >= 0).all());
        CHECK((xn.values.array() >= 0).all());
    }
}

TEST_CASE("norm is monotone on the positive cone") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
        Vec y(5), x(5);
        for (int i = 0; i < 5; ++i) y[i] = u(rng), x[i] = y[i] + u(rng);
        for (NormKind k : {NormKind::max, NormKind::l1})
            CHECK(norm(Signal(x, 0.2), k) >= norm(Signal(y, 0.2), k));
    }
}

TEST_CASE("am_unit") {
    CHECK(am_unit(3).values == Vec::Ones(3));
    CHECK(am_unit(1).values == Vec::Ones(1));
    const Signal x = sig({0.5, -0.9});
    CHECK(norm(x, NormKind::max) <= 1.0);
    CHECK(leq(Signal(x.values.cwiseAbs(), 1), am_unit(2)));
    CHECK_THROWS_AS(am_unit(0), DimensionError);
}

TEST_CASE("weighted pairing and signal guards") {
    CHECK(dot(sig({1, 2}, 0.5), sig({3, 4}, 0.5)) == doctest::Approx(5.5));
    CHECK(norm(sig({3, -4}, 1), NormKind::l2) == doctest::Approx(5));
    CHECK(norm(sig({3, -4}, 0.5), NormKind::l1) == doctest::Approx(3.5));
    CHECK(norm(sig({3, -4}, 0.5), NormKind::max) == doctest::Approx(4));
    CHECK_THROWS_AS(Signal(Vec::Ones(2), 0.0), InputError);
    CHECK_THROWS_AS(sig({1}) + sig({1, 2}), DimensionError);
}

TEST_CASE("adjoint consistency") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Mat m(4, 6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j) m(i, j) = g(rng);
    const DenseOperator a(m, 0.25, 0.5);
    const DenseOperator aa = a.adjoint().adjoint();
    CHECK(aa.matrix() == a.matrix());
    CHECK(aa.dx_in() == a.dx_in());
    for (int t = 0; t < 100; ++t) {
        Vec u(6), w(4);
        for (auto& e : u) e = g(rng);
        for (auto& e : w) e = g(rng);
        const Signal su(u, 0.25), sw(w, 0.5);
        const double lhs = dot(a.apply(su), sw);
        const double rhs = dot(su, a.apply_adjoint(sw));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(lhs)));
    }
    CHECK_THROWS_AS(a.apply(Signal(Vec::Ones(3), 0.25)), DimensionError);
    Mat bad = m;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(DenseOperator(bad, 1, 1), ConstructionError);
}

TEST_CASE("check_bracketing") {
    Mat m(2, 2);
    m << 1, 0.5, 0.2, 1;
    const DenseOperator a(m, 1, 1), lo(0.9 * m, 1, 1), hi(1.1 * m, 1, 1);
    auto good = check_bracketing(BracketPair(lo, hi, a), 100, 1);
    CHECK(good.ok);
    CHECK(good.samples == 100);
    auto swapped = check_bracketing(BracketPair(hi, lo, a), 100, 1);
    CHECK_FALSE(swapped.ok);
    CHECK(swapped.violation > 0);
    const BracketPair deg(a, a, a);
    auto d = check_bracketing(deg, 100, 1);
    CHECK(d.ok);
    CHECK(d.violation == 0);
    CHECK(deg.degenerate());
    CHECK(deg.width == 0);
    CHECK(robinson_margin(deg) == 0);
    CHECK_THROWS_AS(check_bracketing(BracketPair(lo, hi, std::nullopt), 10, 1), ConfigError);
}

TEST_CASE("bracket width is the norm of the difference") {
    Mat m(2, 2);
    m << 1, 0.5, 0.2, 1;
    const BracketPair b(DenseOperator(0.9 * m, 1, 1), DenseOperator(1.1 * m, 1, 1), std::nullopt,
                        NormKind::max);
    CHECK(b.width == doctest::Approx(0.2 * 1.5));
    CHECK(robinson_margin(b) == doctest::Approx(0.2 * 1.2 / 2));
}
