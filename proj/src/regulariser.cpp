#include "latreg/regulariser.hpp"

#include <cmath>
#include <limits>

namespace latreg {

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();

double tv_value(const Vec& u) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < u.size(); ++i) s += std::abs(u[i + 1] - u[i]);
    return s;
}
}  // namespace

std::string Regulariser::describe() const {
    std::string s = kind == RegKind::sq_l2 ? "sq_l2" : kind == RegKind::l1 ? "l1" : "tv";
    return nonneg ? s + "+nonneg" : s;
}

double eval(const Regulariser& reg, const Signal& u) {
    if (u.values.hasNaN()) throw InputError("NaN in regulariser input");
    if (reg.nonneg && (u.values.array() < 0).any()) return inf;
    switch (reg.kind) {
        case RegKind::sq_l2: return 0.5 * u.dx * u.values.squaredNorm();
        case RegKind::l1: return u.dx * u.values.lpNorm<1>();
        case RegKind::tv1d: return tv_value(u.values);
    }
    return inf;
}

Signal prox(const Regulariser& reg, const Signal& w, double tau) {
    if (!(tau > 0)) throw InputError("prox step must be positive");
    Vec x = reg.nonneg ? Vec(w.values.cwiseMax(0.0)) : w.values;
    switch (reg.kind) {
        case RegKind::sq_l2: x /= 1.0 + tau; break;
        case RegKind::l1:
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = std::copysign(std::max(std::abs(x[i]) - tau, 0.0), x[i]);
            break;
        case RegKind::tv1d:
            throw UnsupportedProx("tv regulariser has no direct prox; the solver uses a dual block");
    }
    return Signal(std::move(x), w.dx);
}

double subgradient_residual(const Regulariser& reg, const Signal& u, const Signal& p, double eps) {
    require_same(u, p);
    const double j0 = eval(reg, u);
    if (std::isinf(j0)) throw DomainError("subgradient residual needs J(u) finite");
    double worst = 0.0;
    Signal probe = u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        for (double sgn : {1.0, -1.0}) {
            const double step = sgn * eps / u.dx;
            probe.values[i] = u[i] + step;
            const double j1 = eval(reg, probe);
            probe.values[i] = u[i];
            if (std::isinf(j1)) continue;
            worst = std::max(worst, sgn * p[i] - (j1 - j0) / eps);
        }
    }
    return worst;
}

double conjugate(const Regulariser& reg, const Signal& p) {
    const Vec& q = p.values;
    const double dx = p.dx;
    switch (reg.kind) {
        case RegKind::sq_l2: {
            const Vec r = reg.nonneg ? Vec(q.cwiseMax(0.0)) : q;
            return 0.5 * dx * r.squaredNorm();
        }
        case RegKind::l1:
            if (reg.nonneg) return q.maxCoeff() <= 1.0 ? 0.0 : inf;
            return q.lpNorm<Eigen::Infinity>() <= 1.0 ? 0.0 : inf;
        case RegKind::tv1d: {
            const Eigen::Index n = q.size();
            if (!reg.nonneg) {
                double s = 0.0, scale = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    s += dx * q[i];
                    scale += dx * std::abs(q[i]);
                    if (i + 1 < n && std::abs(s) > 1.0) return inf;
                }
                return std::abs(s) <= 1e-12 * (1.0 + scale) ? 0.0 : inf;
            }
            // Smallest reachable cumulative path with increments >= dx·p_k inside [-1, 1].
            double s = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                s += dx * q[i];
                if (i + 1 < n) {
                    s = std::max(s, -1.0);
                    if (s > 1.0) return inf;
                }
            }
            return s <= 1e-12 ? 0.0 : inf;
        }
    }
    return inf;
}

Signal subgradient(const Regulariser& reg, const Signal& u) {
    Signal g = Signal::zeros(u.size(), u.dx);
    switch (reg.kind) {
        case RegKind::sq_l2: g.values = u.values; break;
        case RegKind::l1: g.values = u.values.cwiseSign(); break;
        case RegKind::tv1d:
            for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
                const double s = (u[i + 1] > u[i]) - (u[i + 1] < u[i]);
                g.values[i] -= s / u.dx;
                g.values[i + 1] += s / u.dx;
            }
            break;
    }
    return g;
}

}  // namespace latreg
