#include "latreg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

namespace latreg {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr int max_unknowns = 6;

struct Cut {
    Vec g;        // gradient in the search variables
    double h;     // constraint value (> 0 means violated) or objective excess
};

// Sub-fidelity evaluated at an affine argument of the search variables.
struct LeafTerm {
    const Fidelity* fid;
    Signal ref;
    bool w_only;  // argument is w rather than v (or v − w when lifted)
};

class Instance {
public:
    Instance(const Problem& p) : p_(p) {
        n_ = p.bracket.lower.cols();
        m_ = p.bracket.lower.rows();
        dxu_ = p.bracket.lower.dx_in();
        dxv_ = p.bracket.lower.dx_out();
        eliminate_v_ = p.bracket.degenerate();
        const bool lifted = p.fidelity.kind == FidKind::infconv;
        const Eigen::Index core = n_ + (eliminate_v_ ? 0 : m_);
        if (core > max_unknowns)
            throw OracleError("oracle handles at most 6 unknowns, got " + std::to_string(core));
        dim_ = core + (lifted ? m_ : 0);
        const Signal zero = Signal::zeros(m_, dxv_);
        if (lifted) {
            leaves_.push_back({&p.fidelity.parts[0], zero, true});
            leaves_.push_back({&p.fidelity.parts[1], p.f, false});
        } else {
            add_leaves(p.fidelity);
        }
    }

    Eigen::Index dim() const { return dim_; }
    bool lifted() const { return p_.fidelity.kind == FidKind::infconv; }

    Signal u_of(const Vec& x) const { return Signal(x.head(n_), dxu_); }
    Signal v_of(const Vec& x) const {
        if (eliminate_v_) return Signal(p_.bracket.lower.matrix() * x.head(n_), dxv_);
        return Signal(x.segment(n_, m_), dxv_);
    }
    Signal w_of(const Vec& x) const { return Signal(x.tail(m_), dxv_); }

    Signal arg_of(const LeafTerm& t, const Vec& x) const {
        if (t.w_only) return w_of(x);
        if (!lifted()) return v_of(x);
        return v_of(x) - w_of(x);
    }

    // Maps a Euclidean gradient in the leaf argument back to the search variables.
    void pull_back(const LeafTerm& t, const Vec& ga, Vec& g) const {
        if (t.w_only) {
            g.tail(m_) += ga;
            return;
        }
        add_v(ga, g);
        if (lifted()) g.tail(m_) -= ga;
    }

    void add_v(const Vec& gv, Vec& g) const {
        if (eliminate_v_)
            g.head(n_) += p_.bracket.lower.matrix().transpose() * gv;
        else
            g.segment(n_, m_) += gv;
    }

    // Most violated explicit constraint, if any.
    std::optional<Cut> constraint_cut(const Vec& x) const {
        std::optional<Cut> best;
        auto offer = [&](double h, Vec g) {
            if (h > 0 && (!best || h > best->h)) best = Cut{std::move(g), h};
        };
        if (p_.regulariser.nonneg) {
            for (Eigen::Index i = 0; i < n_; ++i) {
                if (x[i] < 0) {
                    Vec g = Vec::Zero(dim_);
                    g[i] = -1.0;
                    offer(-x[i], std::move(g));
                }
            }
        }
        if (!eliminate_v_) {
            const Mat& L = p_.bracket.lower.matrix();
            const Mat& U = p_.bracket.upper.matrix();
            const Vec u = x.head(n_), v = x.segment(n_, m_);
            const Vec lo = L * u, hi = U * u;
            for (Eigen::Index i = 0; i < m_; ++i) {
                if (lo[i] > v[i]) {
                    Vec g = Vec::Zero(dim_);
                    g.head(n_) = L.row(i).transpose();
                    g[n_ + i] = -1.0;
                    offer(lo[i] - v[i], std::move(g));
                }
                if (v[i] > hi[i]) {
                    Vec g = Vec::Zero(dim_);
                    g.head(n_) = -U.row(i).transpose();
                    g[n_ + i] = 1.0;
                    offer(v[i] - hi[i], std::move(g));
                }
            }
        }
        for (const LeafTerm& t : leaves_) {
            const Signal a = arg_of(t, x);
            if (auto c = domain_cut(*t.fid, a, t.ref)) {
                Vec g = Vec::Zero(dim_);
                pull_back(t, c->g, g);
                offer(c->h, std::move(g));
            }
        }
        return best;
    }

    double objective(const Vec& x) const {
        const double j = eval(p_.regulariser, u_of(x));
        if (std::isinf(j)) return inf;
        double h = 0.0;
        for (const LeafTerm& t : leaves_) {
            const double val = eval_relaxed(*t.fid, arg_of(t, x), t.ref);
            if (std::isinf(val)) return inf;
            h += val;
        }
        return h / p_.alpha + j;
    }

    Vec gradient(const Vec& x) const {
        Vec g = Vec::Zero(dim_);
        g.head(n_) = dxu_ * subgradient(p_.regulariser, u_of(x)).values;
        for (const LeafTerm& t : leaves_) {
            const Signal s = subgradient(*t.fid, arg_of(t, x), t.ref);
            pull_back(t, dxv_ * s.values / p_.alpha, g);
        }
        return g;
    }

    // Heuristic repair used by the multistart phase.
    Vec repair(Vec x) const {
        for (int sweep = 0; sweep < 4; ++sweep) {
            if (p_.regulariser.nonneg) x.head(n_) = x.head(n_).cwiseMax(0.0);
            if (!eliminate_v_) {
                const Vec u = x.head(n_);
                const Vec lo = p_.bracket.lower.matrix() * u, hi = p_.bracket.upper.matrix() * u;
                for (Eigen::Index i = 0; i < m_; ++i) {
                    const double a = std::min(lo[i], hi[i]), b = std::max(lo[i], hi[i]);
                    x[n_ + i] = std::clamp(x[n_ + i], a, b);
                }
            }
            if (!constraint_cut(x)) break;
            if (!eliminate_v_ && sweep == 1) x.head(n_) = x.head(n_).cwiseAbs();
        }
        return x;
    }

private:
    void add_leaves(const Fidelity& fid) {
        if (fid.kind == FidKind::sum) {
            add_leaves(fid.parts[0]);
            add_leaves(fid.parts[1]);
        } else if (fid.kind == FidKind::infconv) {
            throw OracleError("nested infimal convolution is not supported");
        } else {
            leaves_.push_back({&fid, p_.f, false});
        }
    }

    // Cut in the leaf argument for points outside the fidelity's domain.
    std::optional<Cut> domain_cut(const Fidelity& fid, const Signal& a, const Signal& ref) const {
        const Eigen::Index m = a.size();
        if (fid.kind == FidKind::ball) {
            const Signal d = a - ref;
            const double r = norm(d, fid.norm);
            if (r <= fid.radius) return std::nullopt;
            return Cut{norm_gradient(d, fid.norm, r), r - fid.radius};
        }
        if (fid.kind == FidKind::kl || fid.kind == FidKind::chi2 ||
            fid.kind == FidKind::hellinger2 || fid.kind == FidKind::phi) {
            std::optional<Cut> best;
            for (Eigen::Index i = 0; i < m; ++i) {
                Vec g = Vec::Zero(m);
                double h = 0.0;
                if (a[i] < 0) {
                    g[i] = -1.0;
                    h = -a[i];
                } else if (a[i] > 0 && ref[i] <= 0 && std::isinf(fid.phi->slope_inf)) {
                    g[i] = 1.0;
                    h = a[i];
                } else if (a[i] == 0 && std::isinf(fid.phi->phi(0.0))) {
                    g[i] = -1.0;
                    h = 0.0;
                } else {
                    continue;
                }
                if (!best || h > best->h) best = Cut{g, h};
            }
            if (best && best->h == 0.0) best->h = std::numeric_limits<double>::min();
            return best;
        }
        return std::nullopt;
    }

    static Vec norm_gradient(const Signal& d, NormKind k, double r) {
        const double dx = d.dx;
        switch (k) {
            case NormKind::l2: return dx * d.values / r;
            case NormKind::l1: return dx * d.values.cwiseSign();
            case NormKind::max: {
                Vec g = Vec::Zero(d.size());
                Eigen::Index i = 0;
                d.values.cwiseAbs().maxCoeff(&i);
                g[i] = d[i] > 0 ? 1.0 : -1.0;
                return g;
            }
        }
        return Vec::Zero(d.size());
    }

    const Problem& p_;
    Eigen::Index n_ = 0, m_ = 0, dim_ = 0;
    double dxu_ = 1.0, dxv_ = 1.0;
    bool eliminate_v_ = false;
    std::vector<LeafTerm> leaves_;
};

struct Best {
    double value = inf;
    Vec x;
    int feasible = 0;
    void offer(const Instance& inst, const Vec& y) {
        if (inst.constraint_cut(y)) return;
        const double f = inst.objective(y);
        if (!std::isfinite(f)) return;
        ++feasible;
        if (f < value) {
            value = f;
            x = y;
        }
    }
};

void multistart(const Instance& inst, const OracleConfig& cfg, Best& best) {
    std::mt19937_64 rng(cfg.seed);
    const Eigen::Index d = inst.dim();
    // Grid-quantised random starts inside the search box.
    std::uniform_int_distribution<int> cell(0, cfg.grid_resolution - 1);
    for (int s = 0; s < cfg.starts; ++s) {
        Vec x(d);
        for (Eigen::Index i = 0; i < d; ++i)
            x[i] = cfg.bound * (2.0 * (cell(rng) + 0.5) / cfg.grid_resolution - 1.0);
        x = inst.repair(x);
        best.offer(inst, x);
        for (int k = 1; k <= cfg.subgradient_iters; ++k) {
            Vec g;
            if (auto c = inst.constraint_cut(x))
                g = c->g;
            else
                g = inst.gradient(x);
            const double gn = g.norm();
            if (!(gn > 0) || !std::isfinite(gn)) break;
            x -= (cfg.bound / std::sqrt(static_cast<double>(k))) * 0.1 * g / gn;
            x = inst.repair(x);
            best.offer(inst, x);
        }
    }
}

void ellipsoid(const Instance& inst, const OracleConfig& cfg, Best& best) {
    const Eigen::Index d = inst.dim();
    Vec c = best.x.size() ? best.x : Vec::Zero(d);
    const double radius = std::max(cfg.bound, 4.0 * c.cwiseAbs().maxCoeff() + 1.0) *
                          std::sqrt(static_cast<double>(d));
    Mat P = radius * radius * Mat::Identity(d, d);
    const double dd = static_cast<double>(d);
    for (int k = 0; k < cfg.ellipsoid_iters; ++k) {
        Vec g;
        double h;
        if (auto cut = inst.constraint_cut(c)) {
            g = cut->g;
            h = cut->h;
        } else {
            const double f = inst.objective(c);
            best.offer(inst, c);
            g = inst.gradient(c);
            h = std::isfinite(f) ? std::max(0.0, f - best.value) : 0.0;
        }
        const Vec Pg = P * g;
        const double gpg = g.dot(Pg);
        if (!(gpg > 1e-300) || !std::isfinite(gpg)) break;
        const double s = std::sqrt(gpg);
        const double a = std::min(h / s, 0.999);
        const Vec step = Pg / s;
        if (d == 1) {
            // Interval [c − √P, c + √P] cut by the halfspace g·(y − c) ≤ −h.
            const double half = std::sqrt(P(0, 0));
            const double lo = g[0] > 0 ? c[0] - half : c[0] + a * half;
            const double hi = g[0] > 0 ? c[0] - a * half : c[0] + half;
            c[0] = 0.5 * (lo + hi);
            P(0, 0) = std::pow(0.5 * (hi - lo), 2);
        } else {
            c -= (1.0 + dd * a) / (dd + 1.0) * step;
            P = (dd * dd * (1.0 - a * a) / (dd * dd - 1.0)) *
                (P - (2.0 * (1.0 + dd * a) / ((dd + 1.0) * (1.0 + a))) * step * step.transpose());
            P = 0.5 * (P + P.transpose());
        }
        if (P.diagonal().maxCoeff() < 1e-28) break;
    }
    best.offer(inst, c);
}

}  // namespace

OracleResult brute_solve(const Problem& p, const OracleConfig& cfg) {
    if (cfg.grid_resolution < 16) throw OracleError("grid_resolution must be at least 16");
    if (!(p.alpha > 0)) throw OracleError("alpha must be positive");
    Instance inst(p);
    Best best;
    multistart(inst, cfg, best);
    ellipsoid(inst, cfg, best);
    if (!std::isfinite(best.value)) throw OracleError("no feasible point found");
    OracleResult r;
    r.value = best.value;
    r.u = inst.u_of(best.x);
    r.v = inst.v_of(best.x);
    r.feasible_points = best.feasible;
    return r;
}

double brute_w1(const Signal& rho, const Signal& nu) {
    require_same(rho, nu);
    const double dx = rho.dx;
    if ((rho.values.array() < 0).any() || (nu.values.array() < 0).any())
        throw DomainError("transport needs nonnegative densities");
    if (std::abs(rho.mass() - nu.mass()) > 1e-9) throw DomainError("transport needs equal masses");
    const Eigen::Index n = rho.size();
    Vec a = dx * rho.values, b = dx * nu.values;
    double cost = 0.0;
    Eigen::Index i = 0, j = 0;
    while (i < n && j < n) {
        if (a[i] <= 0) {
            ++i;
            continue;
        }
        if (b[j] <= 0) {
            ++j;
            continue;
        }
        const double moved = std::min(a[i], b[j]);
        cost += moved * dx * std::abs(static_cast<double>(i - j));
        a[i] -= moved;
        b[j] -= moved;
    }
    return cost;
}

namespace {

double golden(const std::function<double(double)>& fn, double lo, double hi) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = fn(x1), f2 = fn(x2);
    for (int it = 0; it < 400 && hi - lo > 1e-13 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = fn(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = fn(x2);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double brute_prox(const Fidelity& fid, double w, double f, double tau) {
    const Signal fs(Vec::Constant(1, f), 1.0);
    const double span = 10.0 * (1.0 + std::abs(w) + std::abs(f) + tau);
    double lo = w - span, hi = w + span;
    if (fid.kind == FidKind::ball) {
        lo = std::max(lo, f - fid.radius);
        hi = std::min(hi, f + fid.radius);
        if (lo > hi) return std::clamp(w, f - fid.radius, f + fid.radius);
    } else if (fid.is_divergence() && fid.kind != FidKind::tv) {
        lo = 0.0;
        hi = std::max(hi, 1.0);
    }
    auto obj = [&](double v) {
        const double h = eval_relaxed(fid, Signal(Vec::Constant(1, v), 1.0), fs);
        return 0.5 * (v - w) * (v - w) + tau * h;
    };
    return golden(obj, lo, hi);
}

double brute_prox(const Regulariser& reg, double w, double tau) {
    const double span = 10.0 * (1.0 + std::abs(w) + tau);
    const double lo = reg.nonneg ? 0.0 : w - span;
    const double hi = std::max(w + span, 1.0);
    auto obj = [&](double u) {
        return 0.5 * (u - w) * (u - w) + tau * eval(reg, Signal(Vec::Constant(1, u), 1.0));
    };
    return golden(obj, lo, hi);
}

}  // namespace latreg
