#include "latreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace latreg {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

enum class Role { G, ProxBlock, L1Block };

struct Term {
    Fidelity leaf;
    int piece = 0;
    Role role = Role::G;
    int block = -1;
};

struct Piece {
    Signal fref;
    std::vector<int> terms;  // terms[0] takes the remainder of the dual split
    bool has_g = false;
};

struct Block {
    int term = -1;  // -1: tv regulariser block
    Eigen::Index off = 0, size = 0;
    Vec g;           // offset inside the l1 term
    double c = 0.0;  // bound of the l1 conjugate box
    bool l1 = false;
};

// The saddle problem min_x G(x) + F(Kx) with x = (u, z_1..z_P), v = Σ z_p.
struct Model {
    Eigen::Index n = 0, m = 0;
    double dxu = 1.0, dxv = 1.0;
    std::vector<Piece> pieces;
    std::vector<Term> terms;
    std::vector<Block> blocks;
    Eigen::Index rows = 0, cols = 0;
    bool tv_reg = false;
    Mat K;

    Eigen::Index zoff(int p) const { return n + p * m; }
};

int g_priority(const Fidelity& f) {
    if (!prox_supported(f)) return -1;
    if (f.kind == FidKind::ball) return 3;
    if (f.is_divergence()) return 2;
    return 1;
}

void add_terms(const Fidelity& f, int piece, Model& md) {
    if (f.kind == FidKind::sum) {
        add_terms(f.parts[0], piece, md);
        add_terms(f.parts[1], piece, md);
        return;
    }
    if (f.kind == FidKind::infconv)
        throw ProblemError("infimal convolution is only supported at the top level");
    if (f.kind == FidKind::sq_norm && !prox_supported(f))
        throw ProblemError(f.describe() + " is not supported by the solver");
    Term t;
    t.leaf = f;
    t.piece = piece;
    md.pieces[piece].terms.push_back(static_cast<int>(md.terms.size()));
    md.terms.push_back(std::move(t));
}

Vec cdf(const Vec& d, double dx) {
    Vec s(d.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        acc += d[i];
        s[i] = dx * acc;
    }
    return s;
}

Model compile(const Problem& p) {
    Model md;
    const auto& lo = p.bracket.lower;
    const auto& hi = p.bracket.upper;
    md.n = lo.cols();
    md.m = lo.rows();
    md.dxu = lo.dx_in();
    md.dxv = lo.dx_out();
    if (p.f.size() != md.m) throw DimensionError("data length does not match the operator");
    if (!(p.alpha > 0)) throw ProblemError("alpha must be positive");
    if (((lo.matrix() - hi.matrix()).array() > 0).any())
        throw ProblemError("infeasible bracket: lower operator exceeds upper operator");

    const Signal zero = Signal::zeros(md.m, md.dxv);
    if (p.fidelity.kind == FidKind::infconv) {
        md.pieces.resize(2);
        md.pieces[0].fref = zero;
        md.pieces[1].fref = p.f;
        add_terms(p.fidelity.parts[0], 0, md);
        add_terms(p.fidelity.parts[1], 1, md);
    } else {
        md.pieces.resize(1);
        md.pieces[0].fref = p.f;
        add_terms(p.fidelity, 0, md);
    }

    for (auto& pc : md.pieces) {
        int best = -1, prio = 0;
        for (std::size_t k = 0; k < pc.terms.size(); ++k) {
            const int pr = g_priority(md.terms[pc.terms[k]].leaf);
            if (pr > prio) {
                prio = pr;
                best = static_cast<int>(k);
            }
        }
        if (best >= 0) {
            std::rotate(pc.terms.begin(), pc.terms.begin() + best, pc.terms.begin() + best + 1);
            pc.has_g = true;
        }
        for (std::size_t k = 0; k < pc.terms.size(); ++k) {
            Term& t = md.terms[pc.terms[k]];
            if (k == 0 && pc.has_g) t.role = Role::G;
            else if (prox_supported(t.leaf)) t.role = Role::ProxBlock;
            else t.role = Role::L1Block;
        }
    }

    const auto P = static_cast<Eigen::Index>(md.pieces.size());
    md.cols = md.n + P * md.m;
    Eigen::Index rows = 2 * md.m;
    md.tv_reg = p.regulariser.kind == RegKind::tv1d;
    if (md.tv_reg) {
        Block b;
        b.off = rows;
        b.size = md.n - 1;
        md.blocks.push_back(b);
        rows += b.size;
    }
    for (std::size_t ti = 0; ti < md.terms.size(); ++ti) {
        Term& t = md.terms[ti];
        if (t.role == Role::G) continue;
        Block b;
        b.term = static_cast<int>(ti);
        b.off = rows;
        b.size = md.m;
        const Signal& fr = md.pieces[t.piece].fref;
        if (t.role == Role::L1Block) {
            b.l1 = true;
            if (t.leaf.kind == FidKind::tv) {
                b.g = fr.values;
                b.c = md.dxv / (2.0 * p.alpha);
            } else {
                b.g = cdf(fr.values, md.dxv);
                b.c = md.dxv / p.alpha;
            }
        }
        t.block = static_cast<int>(md.blocks.size());
        md.blocks.push_back(b);
        rows += b.size;
    }
    md.rows = rows;

    md.K = Mat::Zero(md.rows, md.cols);
    md.K.block(0, 0, md.m, md.n) = lo.matrix();
    md.K.block(md.m, 0, md.m, md.n) = -hi.matrix();
    for (Eigen::Index pi = 0; pi < P; ++pi) {
        const auto c0 = md.zoff(static_cast<int>(pi));
        for (Eigen::Index i = 0; i < md.m; ++i) {
            md.K(i, c0 + i) = -1.0;
            md.K(md.m + i, c0 + i) = 1.0;
        }
    }
    for (const auto& b : md.blocks) {
        if (b.term < 0) {
            for (Eigen::Index i = 0; i + 1 < md.n; ++i) {
                md.K(b.off + i, i) = -1.0;
                md.K(b.off + i, i + 1) = 1.0;
            }
            continue;
        }
        const Term& t = md.terms[b.term];
        const auto c0 = md.zoff(t.piece);
        if (t.leaf.kind == FidKind::w1) {
            for (Eigen::Index i = 0; i < md.m; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) md.K(b.off + i, c0 + j) = md.dxv;
        } else {
            for (Eigen::Index i = 0; i < md.m; ++i) md.K(b.off + i, c0 + i) = 1.0;
        }
    }
    return md;
}

struct DualPoint {
    Signal mu1, mu2;
    std::vector<Signal> hints;  // per term, weighted; empty for G terms
};

DualPoint extract_dual(const Model& md, const Problem& p, const Vec& y) {
    DualPoint d;
    d.mu1 = Signal(y.head(md.m) / md.dxv, md.dxv);
    d.mu2 = Signal(y.segment(md.m, md.m) / md.dxv, md.dxv);
    d.hints.assign(md.terms.size(), Signal());
    for (const auto& b : md.blocks) {
        if (b.term < 0) continue;
        const Term& t = md.terms[b.term];
        const Vec yb = y.segment(b.off, b.size);
        Vec kt;
        if (t.leaf.kind == FidKind::w1) {
            kt.resize(md.m);
            double acc = 0.0;
            for (Eigen::Index i = md.m - 1; i >= 0; --i) {
                acc += yb[i];
                kt[i] = md.dxv * acc;
            }
        } else {
            kt = yb;
        }
        d.hints[b.term] = Signal(p.alpha * kt / md.dxv, md.dxv);
    }
    return d;
}

double piece_conjugate(const Model& md, const Piece& pc, const Signal& q,
                       const std::vector<Signal>& hints, double s) {
    Signal rest = q;
    double total = 0.0;
    for (std::size_t k = 1; k < pc.terms.size(); ++k) {
        const Signal h = s * hints[pc.terms[k]];
        rest = rest - h;
        const double c = conjugate(md.terms[pc.terms[k]].leaf, h, pc.fref);
        if (std::isinf(c)) return inf;
        total += c;
    }
    const double c0 = conjugate(md.terms[pc.terms[0]].leaf, rest, pc.fref);
    return std::isinf(c0) ? inf : total + c0;
}

// Shift μ by a constant so that −B*μ has zero mean, as the tv conjugate requires.
void tv_mean_shift(const Problem& p, Signal& mu1, Signal& mu2) {
    const Signal pv = -1.0 * b_adjoint(p.bracket, mu1, mu2);
    const double s = pv.values.sum();
    const Signal one = Signal::constant(mu1.size(), 1.0, mu1.dx);
    const double al = p.bracket.lower.apply_adjoint(one).values.sum();
    const double au = p.bracket.upper.apply_adjoint(one).values.sum();
    if (s > 0 && al > 0) mu1.values.array() += s / al;
    else if (s < 0 && au > 0) mu2.values.array() += -s / au;
}

// Dual value at d; d is moved into the dual domain (mean shift, then scaling by s ≤ 1).
double repaired_dual(const Model& md, const Problem& p, DualPoint& d) {
    if (md.tv_reg && !p.regulariser.nonneg) tv_mean_shift(p, d.mu1, d.mu2);
    const Signal q = p.alpha * e_adjoint(d.mu1, d.mu2);
    const Signal pj = -1.0 * b_adjoint(p.bracket, d.mu1, d.mu2);
    auto val = [&](double s) {
        double h = 0.0;
        for (const auto& pc : md.pieces) {
            const double c = piece_conjugate(md, pc, s * q, d.hints, s);
            if (std::isinf(c)) return -inf;
            h += c;
        }
        const double j = conjugate(p.regulariser, s * pj);
        if (std::isinf(j)) return -inf;
        return -h / p.alpha - j;
    };
    const double full = val(1.0);
    if (std::isfinite(full)) return full;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::isfinite(val(mid))) lo = mid;
        else hi = mid;
    }
    d.mu1 = lo * d.mu1;
    d.mu2 = lo * d.mu2;
    for (auto& h : d.hints)
        if (h.size()) h = lo * h;
    return val(lo);
}

// Without a G term the fidelity's dual is carried by the block duals; the second candidate
// moves μ so that αE*μ equals their sum. The better of the two candidates is kept.
double dual_objective(const Model& md, const Problem& p, DualPoint& d) {
    if (md.pieces.size() != 1 || md.pieces[0].has_g) return repaired_dual(md, p, d);
    DualPoint alt = d;
    Vec target = Vec::Zero(md.m);
    for (int ti : md.pieces[0].terms)
        if (d.hints[ti].size()) target += d.hints[ti].values;
    const Vec c = target / p.alpha - (d.mu1.values - d.mu2.values);
    alt.mu1.values += c.cwiseMax(0.0);
    alt.mu2.values += (-c).cwiseMax(0.0);
    const double v1 = repaired_dual(md, p, d);
    const double v2 = repaired_dual(md, p, alt);
    if (v2 > v1) {
        d = std::move(alt);
        return v2;
    }
    return v1;
}

double term_value(const Model& md, const Term& t, const Signal& z) {
    const Signal& fr = md.pieces[t.piece].fref;
    return eval_relaxed(t.leaf, z, fr);
}

double primal_from_state(const Model& md, const Problem& p, const Vec& x) {
    const Signal u(x.head(md.n), md.dxu);
    double h = 0.0;
    for (std::size_t pi = 0; pi < md.pieces.size(); ++pi) {
        const Signal z(x.segment(md.zoff(static_cast<int>(pi)), md.m), md.dxv);
        for (int ti : md.pieces[pi].terms) {
            const double v = term_value(md, md.terms[ti], z);
            if (std::isinf(v)) return inf;
            h += v;
        }
    }
    return h / p.alpha + eval(p.regulariser, u);
}

Signal v_from_state(const Model& md, const Vec& x) {
    Vec v = Vec::Zero(md.m);
    for (std::size_t pi = 0; pi < md.pieces.size(); ++pi)
        v += x.segment(md.zoff(static_cast<int>(pi)), md.m);
    return Signal(v, md.dxv);
}

}  // namespace

Signal e_adjoint(const Signal& mu1, const Signal& mu2) { return mu1 - mu2; }

Signal b_adjoint(const BracketPair& b, const Signal& mu1, const Signal& mu2) {
    return b.lower.apply_adjoint(mu1) - b.upper.apply_adjoint(mu2);
}

double constraint_violation(const Signal& u, const Signal& v, const BracketPair& b) {
    const Vec lo = b.lower.matrix() * u.values - v.values;
    const Vec hi = v.values - b.upper.matrix() * u.values;
    return std::max({0.0, lo.maxCoeff(), hi.maxCoeff()});
}

double complementarity(const SolveReport& r) { return r.complementarity; }

double complementarity(const SolveReport& r, const Problem& p) {
    const Vec lo = p.bracket.lower.matrix() * r.u.values - r.v.values;
    const Vec hi = r.v.values - p.bracket.upper.matrix() * r.u.values;
    return std::abs(r.v.dx * (r.mu1.values.dot(lo) + r.mu2.values.dot(hi)));
}

double primal_value(const SolveReport& r, const Problem& p) {
    const Model md = compile(p);
    if (r.x_state.size() == md.cols) return primal_from_state(md, p, r.x_state);
    return eval_relaxed(p.fidelity, r.v, p.f) / p.alpha + eval(p.regulariser, r.u);
}

double dual_value(const SolveReport& r, const Problem& p) {
    const Model md = compile(p);
    DualPoint d;
    d.mu1 = r.mu1;
    d.mu2 = r.mu2;
    d.hints = r.term_duals;
    d.hints.resize(md.terms.size());
    for (std::size_t k = 0; k < d.hints.size(); ++k)
        if (d.hints[k].size() == 0) d.hints[k] = Signal::zeros(md.m, md.dxv);
    return dual_objective(md, p, d);
}

double duality_gap(const SolveReport& r, const Problem& p) {
    return primal_value(r, p) - dual_value(r, p);
}

KktResiduals kkt_residuals(const SolveReport& r, const Problem& p) {
    KktResiduals k;
    const Signal pj = -1.0 * b_adjoint(p.bracket, r.mu1, r.mu2);
    k.subgradient = subgradient_residual(p.regulariser, r.u, pj);
    const Model md = compile(p);
    const Signal q = p.alpha * e_adjoint(r.mu1, r.mu2);
    std::vector<Signal> hints = r.term_duals;
    hints.resize(md.terms.size());
    for (auto& h : hints)
        if (h.size() == 0) h = Signal::zeros(md.m, md.dxv);
    double hval = 0.0, hconj = 0.0;
    if (r.x_state.size() == md.cols) {
        for (std::size_t pi = 0; pi < md.pieces.size(); ++pi) {
            const Signal z(r.x_state.segment(md.zoff(static_cast<int>(pi)), md.m), md.dxv);
            for (int ti : md.pieces[pi].terms) hval += term_value(md, md.terms[ti], z);
        }
    } else {
        hval = eval_relaxed(p.fidelity, r.v, p.f);
    }
    for (const auto& pc : md.pieces) hconj += piece_conjugate(md, pc, q, hints, 1.0);
    k.fenchel_young = hval + hconj - dot(q, r.v);
    return k;
}

SolveReport solve(const Problem& p, const SolverOptions& opts) {
    const Model md = compile(p);
    const Eigen::Index n = md.n, m = md.m, N = md.cols, R = md.rows;
    const double alpha = p.alpha;

    // Step sizes: diagonal preconditioning with uniform steps on each z block.
    Vec tau(N), sigma(R);
    if (opts.precondition) {
        const Mat A = md.K.cwiseAbs();
        const Vec cs = A.colwise().sum().transpose();
        const Vec rs = A.rowwise().sum();
        for (Eigen::Index j = 0; j < N; ++j) tau[j] = cs[j] > 0 ? 1.0 / cs[j] : 1.0;
        for (Eigen::Index i = 0; i < R; ++i) sigma[i] = rs[i] > 0 ? 1.0 / rs[i] : 1.0;
        for (std::size_t pi = 0; pi < md.pieces.size(); ++pi) {
            auto seg = tau.segment(md.zoff(static_cast<int>(pi)), m);
            seg.setConstant(seg.minCoeff());
        }
        for (const auto& b : md.blocks) {
            if (b.term < 0 || b.l1) continue;  // clip-type conjugates are separable
            auto seg = sigma.segment(b.off, b.size);
            seg.setConstant(seg.minCoeff());
        }
    } else {
        Eigen::JacobiSVD<Mat> svd(md.K);
        const double L = svd.singularValues()(0);
        tau.setConstant(0.99 / L);
        sigma.setConstant(0.99 / L);
    }

    Vec x = Vec::Zero(N), y = Vec::Zero(R);
    if (opts.warm && opts.warm->x_state.size() == N && opts.warm->y_state.size() == R) {
        x = opts.warm->x_state;
        y = opts.warm->y_state;
    } else if (opts.random_init) {
        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> un(0.0, 1.0);
        for (Eigen::Index j = 0; j < n; ++j) x[j] = un(rng);
        const Vec mid = 0.5 * (p.bracket.lower.matrix() + p.bracket.upper.matrix()) * x.head(n);
        x.segment(md.zoff(0), m) = mid;
    }

    const Regulariser& reg = p.regulariser;
    auto prox_g = [&](Vec& w) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double a = reg.nonneg ? std::max(w[j], 0.0) : w[j];
            const double t = tau[j] * md.dxu;
            if (reg.kind == RegKind::sq_l2) a /= 1.0 + t;
            else if (reg.kind == RegKind::l1) a = std::copysign(std::max(std::abs(a) - t, 0.0), a);
            w[j] = a;
        }
        for (std::size_t pi = 0; pi < md.pieces.size(); ++pi) {
            const Piece& pc = md.pieces[pi];
            if (!pc.has_g) continue;
            const auto off = md.zoff(static_cast<int>(pi));
            const Term& t = md.terms[pc.terms[0]];
            const double step = tau[off] * md.dxv / alpha;
            w.segment(off, m) = prox(t.leaf, Signal(w.segment(off, m), md.dxv), pc.fref, step).values;
        }
    };
    auto prox_fstar = [&](Vec& w) {
        w.head(2 * m) = w.head(2 * m).cwiseMax(0.0);
        for (const auto& b : md.blocks) {
            auto seg = w.segment(b.off, b.size);
            if (b.term < 0) {
                seg = seg.cwiseMax(-1.0).cwiseMin(1.0);
            } else if (b.l1) {
                const Vec sg = sigma.segment(b.off, b.size);
                seg = (seg - sg.cwiseProduct(b.g)).cwiseMax(-b.c).cwiseMin(b.c);
            } else {
                const Term& t = md.terms[b.term];
                const double s = sigma[b.off];
                const Signal scaled(seg / s, md.dxv);
                const Signal px = prox(t.leaf, scaled, md.pieces[t.piece].fref, md.dxv / (alpha * s));
                seg = seg - s * px.values;
            }
        }
    };

    auto evaluate = [&](const Vec& xs, const Vec& ys, int it) {
        SolveReport rep;
        rep.iterations = it;
        rep.u = Signal(xs.head(n), md.dxu);
        rep.v = v_from_state(md, xs);
        DualPoint d = extract_dual(md, p, ys);
        rep.x_state = xs;
        rep.y_state = ys;
        rep.primal_value = primal_from_state(md, p, xs);
        rep.dual_value = dual_objective(md, p, d);
        rep.mu1 = d.mu1;
        rep.mu2 = d.mu2;
        rep.term_duals = d.hints;
        rep.gap = rep.primal_value - rep.dual_value;
        rep.constraint_violation = constraint_violation(rep.u, rep.v, p.bracket);
        rep.complementarity = complementarity(rep, p);
        rep.converged = std::isfinite(rep.gap) &&
                        rep.gap <= opts.tol_gap * (1.0 + std::abs(rep.primal_value)) &&
                        rep.constraint_violation <= opts.tol_feas &&
                        rep.complementarity <= opts.tol_comp;
        return rep;
    };
    auto merit = [](const SolveReport& r) {
        const double g = std::abs(r.gap) / (1.0 + std::abs(r.primal_value));
        const double e = g + r.constraint_violation + r.complementarity;
        return std::isfinite(e) ? e : inf;
    };

    // Restarts to the better of the current and averaged iterates, with primal-weight
    // rebalancing of the step sizes at each restart.
    const Vec tau0 = tau, sigma0 = sigma;
    double weight = 1.0;
    Vec x_anchor = x, y_anchor = y, x_sum = Vec::Zero(N), y_sum = Vec::Zero(R);
    int since = 0;
    double merit_anchor = inf, merit_prev = inf;

    Vec xold(N), xbar(N), ky(N), kx(R);
    int it = 0;
    SolveReport best;
    double best_merit = inf;
    for (; it < opts.max_iters; ++it) {
        if (it % opts.check_every == 0) {
            SolveReport cur = evaluate(x, y, it);
            if (cur.converged) return cur;
            double mc = merit(cur);
            bool use_avg = false;
            if (since > 0) {
                SolveReport avg = evaluate(x_sum / since, y_sum / since, it);
                if (avg.converged) return avg;
                const double ma = merit(avg);
                if (ma < mc) {
                    use_avg = true;
                    mc = ma;
                    cur = std::move(avg);
                }
            }
            if (mc < best_merit) {
                best_merit = mc;
                best = cur;
            }
            const bool restart =
                since > 0 && (mc <= 0.2 * merit_anchor || (mc <= 0.8 * merit_anchor && mc > merit_prev) ||
                              since >= 0.36 * it);
            merit_prev = mc;
            if (restart || !std::isfinite(merit_anchor)) {
                const Vec xc = use_avg ? Vec(x_sum / since) : x;
                const Vec yc = use_avg ? Vec(y_sum / since) : y;
                const double dxn = ((xc - x_anchor).array().square() / tau0.array()).sum();
                const double dyn = ((yc - y_anchor).array().square() / sigma0.array()).sum();
                if (restart && dxn > 1e-30 && dyn > 1e-30) {
                    weight = std::exp(0.5 * 0.5 * std::log(dyn / dxn) + 0.5 * std::log(weight));
                    weight = std::clamp(weight, 1e-4, 1e4);
                    tau = tau0 / weight;
                    sigma = sigma0 * weight;
                }
                x = xc;
                y = yc;
                x_anchor = x;
                y_anchor = y;
                x_sum.setZero();
                y_sum.setZero();
                since = 0;
                merit_anchor = mc;
                merit_prev = inf;
            }
        }
        xold = x;
        ky.noalias() = md.K.transpose() * y;
        x -= tau.cwiseProduct(ky);
        prox_g(x);
        xbar = 2.0 * x - xold;
        kx.noalias() = md.K * xbar;
        y += sigma.cwiseProduct(kx);
        prox_fstar(y);
        x_sum += x;
        y_sum += y;
        ++since;
    }
    SolveReport last = evaluate(x, y, it);
    if (last.converged || merit(last) <= best_merit || best.u.size() == 0) return last;
    best.iterations = it;
    return best;
}

}  // namespace latreg
