#include "latreg/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace latreg {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool has_nan(const Signal& s) { return s.values.hasNaN(); }

void check_inputs(const Signal& v, const Signal& f) {
    require_same(v, f);
    if (has_nan(v) || has_nan(f)) throw InputError("NaN in fidelity input");
}

Signal dir_ball_proj(const Signal& d, double radius, NormKind k) {
    Signal out = d;
    switch (k) {
        case NormKind::l2: {
            const double r = norm(d, NormKind::l2);
            if (r > radius) out.values *= radius / r;
            break;
        }
        case NormKind::max:
            out.values = d.values.cwiseMax(-radius).cwiseMin(radius);
            break;
        case NormKind::l1:
            detail::project_l1_ball(out.values, radius / d.dx);
            break;
    }
    return out;
}

// Lower-triangular cumulative sum scaled by dx: the CDF difference.
Vec cdf(const Vec& d, double dx) {
    Vec s(d.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        acc += d[i];
        s[i] = dx * acc;
    }
    return s;
}

// Suffix sums scaled by dx: the adjoint of cdf in the weighted pairing.
Vec cdf_adjoint(const Vec& z, double dx) {
    Vec g(z.size());
    double acc = 0.0;
    for (Eigen::Index i = z.size() - 1; i >= 0; --i) {
        acc += z[i];
        g[i] = dx * acc;
    }
    return g;
}

double phi_term(const PhiFunction& p, double v, double f) {
    if (v < 0) return inf;
    if (f > 0) return f * p.phi(v / f);
    if (v == 0) return 0.0;
    return std::isinf(p.slope_inf) ? inf : v * p.slope_inf;
}

double phi_conj_term(const PhiFunction& p, double q, double f) {
    const double c = p.conj(q);
    if (std::isinf(c)) return c;
    return f * c;
}

double kl_scalar_prox(double w, double f, double tau) {
    if (f <= 0) return 0.0;
    // Newton on s = ln v for e^s + τ s = w + τ ln f, started right of the root.
    const double c = w + tau * std::log(f);
    const double hi = std::max(w, 0.0) + tau + f;
    double s = std::log(hi);
    for (int it = 0; it < 200; ++it) {
        const double es = std::exp(s);
        const double g = es + tau * s - c;
        const double step = g / (es + tau);
        s -= step;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(s))) break;
    }
    return std::exp(s);
}

double hellinger_scalar_prox(double w, double f, double tau) {
    if (f <= 0) return std::max(w - tau, 0.0);
    const double b = tau * std::sqrt(f);
    auto p = [&](double s) { return s * s * s + (tau - w) * s - b; };
    double lo = 0.0, hi = 1.0 + std::sqrt(std::abs(tau - w)) + std::cbrt(b);
    double s = hi;
    for (int it = 0; it < 300; ++it) {
        const double ps = p(s);
        if (ps > 0) hi = s;
        else lo = s;
        const double dp = 3 * s * s + (tau - w);
        double next = dp > 0 ? s - ps / dp : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= 1e-16 * (1.0 + s) || hi - lo <= 1e-17 * (1.0 + hi)) {
            s = next;
            break;
        }
        s = next;
    }
    return s * s;
}

double phi_scalar_prox(const PhiFunction& p, double w, double f, double tau) {
    if (f <= 0) {
        if (std::isinf(p.slope_inf)) return 0.0;
        return std::max(w - tau * p.slope_inf, 0.0);
    }
    // Root of f·x − w + τ φ'(x) in x = v/f, increasing in x.
    auto g = [&](double x) { return f * x - w + tau * p.dphi(x); };
    double lo = 0.0;
    const double g0 = g(std::numeric_limits<double>::min());
    if (g0 >= 0) return 0.0;
    double hi = 1.0;
    while (g(hi) < 0) hi *= 2.0;
    for (int it = 0; it < 2000 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0) lo = mid;
        else hi = mid;
    }
    return f * 0.5 * (lo + hi);
}

double l1_type_norm_conj_violation(const Signal& q, NormKind dual, double bound) {
    return norm(q, dual) - bound;
}

// prox of τ·(1/λ)‖·‖^λ applied to d.
Signal norm_power_prox(const Signal& d, double lambda, NormKind k, double tau) {
    if (lambda == 1.0) return d - dir_ball_proj(d, tau, dual_norm(k));
    if (k != NormKind::l2) throw UnsupportedProx("sq_norm prox needs the l2 norm unless lambda = 1");
    if (lambda == 2.0) return (1.0 / (1.0 + tau)) * d;
    const double r = norm(d, NormKind::l2);
    if (r == 0) return d;
    // ρ + τ ρ^{λ−1} = r on [0, r].
    double lo = 0.0, hi = r;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * r; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid + tau * std::pow(mid, lambda - 1.0) < r) lo = mid;
        else hi = mid;
    }
    return (0.5 * (lo + hi) / r) * d;
}

// prox of τ·Δx‖Δx·cdf(d)‖₁ through its box-constrained dual, solved by FISTA.
Signal w1_prox_dir(const Signal& r, double tau) {
    const double dx = r.dx;
    const Eigen::Index n = r.size();
    Vec z = Vec::Zero(n), zprev = z, y = z;
    const double lip = tau * tau * dx * dx * dx * static_cast<double>(n * n);
    if (lip == 0) return r;
    double t = 1.0;
    for (int it = 0; it < 200000; ++it) {
        const Vec d = r.values - tau * cdf_adjoint(y, dx);
        const Vec grad = -dx * tau * cdf(d, dx);
        zprev = z;
        z = (y - grad / lip).cwiseMax(-1.0).cwiseMin(1.0);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = z + ((t - 1.0) / tn) * (z - zprev);
        t = tn;
        if ((z - zprev).lpNorm<Eigen::Infinity>() < 1e-15) break;
    }
    return Signal(r.values - tau * cdf_adjoint(z, dx), dx);
}

double sum_conjugate(const Fidelity& a, const Fidelity& b, const Signal& q, const Signal& f) {
    auto val = [&](double lam) {
        const double x = conjugate(a, lam * q, f);
        if (std::isinf(x)) return inf;
        return x + conjugate(b, (1.0 - lam) * q, f);
    };
    constexpr int grid = 100;
    double best = inf;
    int arg = -1;
    for (int i = 0; i <= grid; ++i) {
        const double v = val(static_cast<double>(i) / grid);
        if (v < best) {
            best = v;
            arg = i;
        }
    }
    if (arg < 0) return inf;
    double lo = std::max(0, arg - 1) / double(grid), hi = std::min(grid, arg + 1) / double(grid);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = val(x1), f2 = val(x2);
    for (int it = 0; it < 100 && hi - lo > 1e-14; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = val(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = val(x2);
        }
    }
    return std::min({best, f1, f2});
}

double infconv_eval(const Fidelity& fid, const Signal& v, const Signal& f) {
    const Fidelity& a = fid.parts[0];
    const Fidelity& b = fid.parts[1];
    const Signal zero = Signal::zeros(v.size(), v.dx);
    auto value = [&](const Signal& w) {
        const double x = eval_relaxed(a, w, zero);
        if (std::isinf(x)) return inf;
        return x + eval_relaxed(b, v - w, f);
    };
    // Douglas–Rachford on w ↦ H₁(w|0) + H₂(v − w|f).
    const double gamma = 1.0;
    Signal z = zero;
    double best = value(zero);
    for (int it = 0; it < 100000; ++it) {
        const Signal x = v - detail::prox_any(b, v - z, f, gamma);
        const Signal y = detail::prox_any(a, 2.0 * x - z, zero, gamma);
        const double step = norm(y - x, NormKind::max);
        z = z + (y - x);
        best = std::min({best, value(x), value(y)});
        if (step <= 1e-13 && it > 5) break;
    }
    return best;
}

}  // namespace

PhiFunction kl_phi() {
    PhiFunction p;
    p.name = "kl";
    p.phi = [](double x) { return x > 0 ? x * std::log(x) - x + 1.0 : 1.0; };
    p.dphi = [](double x) { return std::log(x); };
    p.conj = [](double q) { return std::expm1(q); };
    p.slope_inf = inf;
    return p;
}

PhiFunction chi2_phi() {
    PhiFunction p;
    p.name = "chi2";
    p.phi = [](double x) { return (x - 1.0) * (x - 1.0); };
    p.dphi = [](double x) { return 2.0 * (x - 1.0); };
    p.conj = [](double q) { return q >= -2.0 ? q + 0.25 * q * q : -1.0; };
    p.slope_inf = inf;
    return p;
}

PhiFunction hellinger2_phi() {
    PhiFunction p;
    p.name = "hellinger2";
    p.phi = [](double x) {
        const double s = std::sqrt(x) - 1.0;
        return s * s;
    };
    p.dphi = [](double x) { return 1.0 - 1.0 / std::sqrt(x); };
    p.conj = [](double q) { return q < 1.0 ? q / (1.0 - q) : inf; };
    p.slope_inf = 1.0;
    return p;
}

PhiFunction tv_phi() {
    PhiFunction p;
    p.name = "tv";
    p.phi = [](double x) { return 0.5 * std::abs(x - 1.0); };
    p.dphi = [](double x) { return x > 1.0 ? 0.5 : (x < 1.0 ? -0.5 : 0.0); };
    p.conj = [](double q) { return std::abs(q) <= 0.5 ? q : inf; };
    p.slope_inf = 0.5;
    return p;
}

PhiFunction reverse_kl_phi() {
    PhiFunction p;
    p.name = "reverse_kl";
    p.phi = [](double x) { return x > 0 ? x - 1.0 - std::log(x) : inf; };
    p.dphi = [](double x) { return 1.0 - 1.0 / x; };
    p.conj = [](double q) { return q < 1.0 ? -std::log1p(-q) : inf; };
    p.slope_inf = 1.0;
    return p;
}

Fidelity Fidelity::sq_norm(double lambda, NormKind norm) {
    if (!(lambda >= 1.0)) throw ConfigError("sq_norm exponent must be >= 1");
    Fidelity f;
    f.kind = FidKind::sq_norm;
    f.lambda = lambda;
    f.norm = norm;
    f.coercive = true;
    return f;
}

namespace {
Fidelity divergence(FidKind k, PhiFunction p, bool abs_cont) {
    Fidelity f;
    f.kind = k;
    f.phi = std::make_shared<const PhiFunction>(std::move(p));
    f.requires_probability = true;
    f.requires_abs_continuity = abs_cont;
    return f;
}
}  // namespace

Fidelity Fidelity::kl() { return divergence(FidKind::kl, kl_phi(), true); }
Fidelity Fidelity::chi2() { return divergence(FidKind::chi2, chi2_phi(), true); }
Fidelity Fidelity::hellinger2() { return divergence(FidKind::hellinger2, hellinger2_phi(), false); }

Fidelity Fidelity::tv() {
    Fidelity f = divergence(FidKind::tv, tv_phi(), false);
    f.coercive = true;
    return f;
}

Fidelity Fidelity::ball(double radius, NormKind norm) {
    if (radius < 0 || std::isnan(radius)) throw ConfigError("ball radius must be nonnegative");
    Fidelity f;
    f.kind = FidKind::ball;
    f.radius = radius;
    f.norm = norm;
    f.coercive = true;
    return f;
}

Fidelity Fidelity::w1() {
    Fidelity f;
    f.kind = FidKind::w1;
    f.requires_probability = true;
    f.coercive = true;
    return f;
}

Fidelity Fidelity::phi_generic(PhiFunction phi) {
    const bool abs_cont = std::isinf(phi.slope_inf);
    return divergence(FidKind::phi, std::move(phi), abs_cont);
}

bool Fidelity::is_divergence() const {
    return kind == FidKind::kl || kind == FidKind::chi2 || kind == FidKind::hellinger2 ||
           kind == FidKind::tv || kind == FidKind::phi;
}

std::string Fidelity::describe() const {
    std::ostringstream os;
    switch (kind) {
        case FidKind::sq_norm: os << "sq_norm(" << lambda << ", " << norm_name(norm) << ")"; break;
        case FidKind::kl: os << "kl"; break;
        case FidKind::chi2: os << "chi2"; break;
        case FidKind::hellinger2: os << "hellinger2"; break;
        case FidKind::tv: os << "tv"; break;
        case FidKind::ball: os << "ball(" << radius << ", " << norm_name(norm) << ")"; break;
        case FidKind::w1: os << "w1"; break;
        case FidKind::phi: os << phi->name; break;
        case FidKind::sum: os << "sum(" << parts[0].describe() << ", " << parts[1].describe() << ")"; break;
        case FidKind::infconv:
            os << "infconv(" << parts[0].describe() << ", " << parts[1].describe() << ")";
            break;
    }
    return os.str();
}

Fidelity combine_sum(Fidelity a, Fidelity b) {
    Fidelity f;
    f.kind = FidKind::sum;
    f.requires_probability = a.requires_probability || b.requires_probability;
    f.requires_abs_continuity = a.requires_abs_continuity || b.requires_abs_continuity;
    f.coercive = a.coercive || b.coercive;
    f.parts = {std::move(a), std::move(b)};
    return f;
}

Fidelity combine_infconv(Fidelity a, Fidelity b) {
    if (!a.coercive)
        throw ConstructionError("infimal convolution needs a coercive first fidelity, got " +
                                a.describe());
    Fidelity f;
    f.kind = FidKind::infconv;
    f.coercive = true;
    f.parts = {std::move(a), std::move(b)};
    return f;
}

Fidelity with_ball_radius(Fidelity fid, double radius) {
    if (fid.kind == FidKind::ball) fid.radius = radius;
    for (auto& p : fid.parts) p = with_ball_radius(std::move(p), radius);
    return fid;
}

bool prox_supported(const Fidelity& fid) {
    switch (fid.kind) {
        case FidKind::tv:
        case FidKind::w1:
        case FidKind::sum:
        case FidKind::infconv: return false;
        case FidKind::sq_norm: return fid.lambda == 1.0 || fid.norm == NormKind::l2;
        default: return true;
    }
}

double eval_relaxed(const Fidelity& fid, const Signal& v, const Signal& f) {
    check_inputs(v, f);
    const double dx = v.dx;
    switch (fid.kind) {
        case FidKind::sq_norm: {
            const double r = norm(v - f, fid.norm);
            return std::pow(r, fid.lambda) / fid.lambda;
        }
        case FidKind::ball: {
            const double r = norm(v - f, fid.norm);
            return r <= fid.radius * (1.0 + 1e-12) + 1e-15 ? 0.0 : inf;
        }
        case FidKind::tv: return 0.5 * dx * (v.values - f.values).lpNorm<1>();
        case FidKind::w1: return dx * cdf(v.values - f.values, dx).lpNorm<1>();
        case FidKind::kl: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const double a = v[i], b = f[i];
                if (a < 0) return inf;
                if (a == 0) {
                    s += b;
                } else {
                    if (b <= 0) return inf;
                    s += a * std::log(a / b) - a + b;
                }
            }
            return dx * s;
        }
        case FidKind::chi2:
        case FidKind::hellinger2:
        case FidKind::phi: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) s += phi_term(*fid.phi, v[i], f[i]);
            return dx * s;
        }
        case FidKind::sum: {
            const double a = eval_relaxed(fid.parts[0], v, f);
            if (std::isinf(a)) return a;
            return a + eval_relaxed(fid.parts[1], v, f);
        }
        case FidKind::infconv: return infconv_eval(fid, v, f);
    }
    return inf;
}

double eval(const Fidelity& fid, const Signal& v, const Signal& f) {
    check_inputs(v, f);
    if (fid.requires_probability) {
        if ((v.values.array() < 0).any()) return inf;
        if (std::abs(v.mass() - 1.0) > tol_mass) return inf;
        if (fid.requires_abs_continuity)
            for (Eigen::Index i = 0; i < v.size(); ++i)
                if (v[i] > 0 && f[i] <= 0) return inf;
    }
    return eval_relaxed(fid, v, f);
}

Signal detail::prox_any(const Fidelity& fid, const Signal& w, const Signal& f, double tau) {
    if (fid.kind == FidKind::tv) {
        Signal out = w;
        const double t = 0.5 * tau;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double d = w[i] - f[i];
            out.values[i] = f[i] + std::copysign(std::max(std::abs(d) - t, 0.0), d);
        }
        return out;
    }
    if (fid.kind == FidKind::w1) return f + w1_prox_dir(w - f, tau);
    return prox(fid, w, f, tau);
}

double detail::project_l1_ball(Vec& y, double radius) {
    if (y.lpNorm<1>() <= radius) return 0.0;
    std::vector<double> a(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) a[i] = std::abs(y[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cum += a[k];
        const double t = (cum - radius) / static_cast<double>(k + 1);
        if (k + 1 == a.size() || a[k + 1] <= t) {
            theta = t;
            break;
        }
    }
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] = std::copysign(std::max(std::abs(y[i]) - theta, 0.0), y[i]);
    return theta;
}

Signal prox(const Fidelity& fid, const Signal& w, const Signal& f, double tau) {
    check_inputs(w, f);
    if (!(tau > 0)) throw InputError("prox step must be positive");
    Signal out = w;
    switch (fid.kind) {
        case FidKind::sq_norm: return f + norm_power_prox(w - f, fid.lambda, fid.norm, tau);
        case FidKind::ball: return f + dir_ball_proj(w - f, fid.radius, fid.norm);
        case FidKind::kl:
            for (Eigen::Index i = 0; i < w.size(); ++i) out.values[i] = kl_scalar_prox(w[i], f[i], tau);
            return out;
        case FidKind::chi2:
            for (Eigen::Index i = 0; i < w.size(); ++i)
                out.values[i] =
                    f[i] > 0 ? std::max(0.0, (w[i] + 2.0 * tau) * f[i] / (f[i] + 2.0 * tau)) : 0.0;
            return out;
        case FidKind::hellinger2:
            for (Eigen::Index i = 0; i < w.size(); ++i)
                out.values[i] = hellinger_scalar_prox(w[i], f[i], tau);
            return out;
        case FidKind::phi:
            for (Eigen::Index i = 0; i < w.size(); ++i)
                out.values[i] = phi_scalar_prox(*fid.phi, w[i], f[i], tau);
            return out;
        case FidKind::tv:
        case FidKind::w1:
            throw UnsupportedProx(fid.describe() +
                                  " has no direct prox; the solver handles it with a dual block");
        case FidKind::sum:
        case FidKind::infconv:
            throw UnsupportedProx(fid.describe() +
                                  " has no direct prox; the solver splits it into its parts");
    }
    return out;
}

double conjugate(const Fidelity& fid, const Signal& q, const Signal& f) {
    check_inputs(q, f);
    const double dx = q.dx;
    switch (fid.kind) {
        case FidKind::sq_norm: {
            const NormKind dn = dual_norm(fid.norm);
            const double r = norm(q, dn);
            if (fid.lambda == 1.0) return l1_type_norm_conj_violation(q, dn, 1.0) > 1e-12 ? inf : dot(q, f);
            const double ls = fid.lambda / (fid.lambda - 1.0);
            return std::pow(r, ls) / ls + dot(q, f);
        }
        case FidKind::ball: return fid.radius * norm(q, dual_norm(fid.norm)) + dot(q, f);
        case FidKind::w1: {
            const Eigen::Index n = q.size();
            if (std::abs(q[n - 1]) > dx) return inf;
            for (Eigen::Index i = 0; i + 1 < n; ++i)
                if (std::abs(q[i] - q[i + 1]) > dx) return inf;
            return dot(q, f);
        }
        case FidKind::kl:
        case FidKind::chi2:
        case FidKind::hellinger2:
        case FidKind::tv:
        case FidKind::phi: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < q.size(); ++i) {
                const double t = phi_conj_term(*fid.phi, q[i], f[i]);
                if (std::isinf(t)) return inf;
                s += t;
            }
            return dx * s;
        }
        case FidKind::sum: return sum_conjugate(fid.parts[0], fid.parts[1], q, f);
        case FidKind::infconv: {
            const double a = conjugate(fid.parts[0], q, Signal::zeros(q.size(), dx));
            if (std::isinf(a)) return a;
            return a + conjugate(fid.parts[1], q, f);
        }
    }
    return inf;
}

Signal subgradient(const Fidelity& fid, const Signal& v, const Signal& f) {
    check_inputs(v, f);
    const double dx = v.dx;
    const Eigen::Index n = v.size();
    Signal g = Signal::zeros(n, dx);
    const Signal d = v - f;
    constexpr double steep = 1e12;
    switch (fid.kind) {
        case FidKind::sq_norm: {
            const double r = norm(d, fid.norm);
            if (r == 0) return g;
            const double scale = std::pow(r, fid.lambda - 1.0);
            switch (fid.norm) {
                case NormKind::l2: g.values = scale / r * d.values; break;
                case NormKind::l1: g.values = scale * d.values.cwiseSign(); break;
                case NormKind::max: {
                    Eigen::Index i = 0;
                    d.values.cwiseAbs().maxCoeff(&i);
                    g.values[i] = scale * (d[i] > 0 ? 1.0 : -1.0) / dx;
                    break;
                }
            }
            return g;
        }
        case FidKind::ball: return g;
        case FidKind::tv: g.values = 0.5 * d.values.cwiseSign(); return g;
        case FidKind::w1: g.values = cdf_adjoint(cdf(d.values, dx).cwiseSign(), dx); return g;
        case FidKind::kl:
        case FidKind::chi2:
        case FidKind::hellinger2:
        case FidKind::phi:
            for (Eigen::Index i = 0; i < n; ++i) {
                if (f[i] <= 0) {
                    g.values[i] = std::isinf(fid.phi->slope_inf) ? steep : fid.phi->slope_inf;
                } else if (v[i] <= 0) {
                    const double s = fid.phi->dphi(std::numeric_limits<double>::min());
                    g.values[i] = std::isfinite(s) ? std::max(s, -steep) : -steep;
                } else {
                    g.values[i] = std::clamp(fid.phi->dphi(v[i] / f[i]), -steep, steep);
                }
            }
            return g;
        case FidKind::sum:
            return subgradient(fid.parts[0], v, f) + subgradient(fid.parts[1], v, f);
        case FidKind::infconv:
            throw UnsupportedProx("infconv subgradient needs the lifted split variable");
    }
    return g;
}

Signal random_direction(Eigen::Index n, double dx, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
    Signal s(z, dx);
    s.values /= norm(s, NormKind::l2);
    return s;
}

double calibration_measure(const Fidelity& fid, const Signal& fbar, const Signal& fn) {
    if (fid.kind == FidKind::ball) return norm(fbar - fn, fid.norm);
    return eval_relaxed(fid, fbar, fn);
}

Signal calibrate_noise(const Fidelity& fid, const Signal& fbar, const Signal& direction,
                       double delta) {
    require_same(fbar, direction);
    if (!(delta > 0)) throw CalibrationError("noise level must be positive");
    if (norm(direction, NormKind::max) == 0)
        throw CalibrationError("noise level unreachable along a zero direction");
    const bool simplex = fid.requires_probability;
    const double floor = 1e-12;
    auto make = [&](double t) {
        Signal g(fbar.values + t * direction.values, fbar.dx);
        if (simplex) {
            g.values = g.values.cwiseMax(floor);
            g.values /= g.mass();
        }
        return g;
    };
    auto measure = [&](double t) { return calibration_measure(fid, fbar, make(t)); };
    double lo = 0.0, hi = 1e-6;
    int expansions = 0;
    while (!(measure(hi) >= delta)) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > 400)
            throw CalibrationError("noise level unreachable along the given direction");
    }
    double best_t = hi, best_err = std::abs(measure(hi) - delta);
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double m = measure(mid);
        const double err = std::abs(m - delta);
        if (err < best_err) {
            best_err = err;
            best_t = mid;
        }
        if (err <= 1e-11 * delta) break;
        if (m < delta) lo = mid;
        else hi = mid;
        if (hi - lo <= 1e-17 * hi) break;
    }
    if (best_err > 1e-10 * delta)
        throw CalibrationError("noise calibration did not reach the requested tolerance");
    return make(best_t);
}

Signal calibrate_noise(const Fidelity& fid, const Signal& fbar, double delta, std::uint64_t seed) {
    return calibrate_noise(fid, fbar, random_direction(fbar.size(), fbar.dx, seed), delta);
}

}  // namespace latreg
