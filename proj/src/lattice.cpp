#include "latreg/lattice.hpp"

#include <cmath>
#include <random>
#include <string>

namespace latreg {

NormKind parse_norm(const std::string& s) {
    if (s == "max" || s == "inf" || s == "linf") return NormKind::max;
    if (s == "l1" || s == "1") return NormKind::l1;
    if (s == "l2" || s == "2") return NormKind::l2;
    throw ConfigError("unknown norm '" + s + "'");
}

const char* norm_name(NormKind k) {
    switch (k) {
        case NormKind::max: return "max";
        case NormKind::l1: return "l1";
        case NormKind::l2: return "l2";
    }
    return "?";
}

NormKind dual_norm(NormKind k) {
    switch (k) {
        case NormKind::max: return NormKind::l1;
        case NormKind::l1: return NormKind::max;
        case NormKind::l2: return NormKind::l2;
    }
    return NormKind::l2;
}

Signal::Signal(Vec v, double spacing) : values(std::move(v)), dx(spacing) {
    if (!(dx > 0)) throw InputError("grid spacing must be positive");
    if (values.size() < 1) throw DimensionError("signal must have at least one entry");
}

Signal Signal::zeros(Eigen::Index n, double spacing) { return Signal(Vec::Zero(n), spacing); }

Signal Signal::constant(Eigen::Index n, double value, double spacing) {
    return Signal(Vec::Constant(n, value), spacing);
}

void require_same(const Signal& a, const Signal& b) {
    if (a.size() != b.size())
        throw DimensionError("length mismatch: " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
}

double dot(const Signal& a, const Signal& b) {
    require_same(a, b);
    return a.dx * a.values.dot(b.values);
}

double norm(const Signal& a, NormKind k) {
    switch (k) {
        case NormKind::max: return a.values.lpNorm<Eigen::Infinity>();
        case NormKind::l1: return a.dx * a.values.lpNorm<1>();
        case NormKind::l2: return std::sqrt(a.dx) * a.values.norm();
    }
    return 0.0;
}

Signal operator+(const Signal& a, const Signal& b) {
    require_same(a, b);
    return Signal(a.values + b.values, a.dx);
}

Signal operator-(const Signal& a, const Signal& b) {
    require_same(a, b);
    return Signal(a.values - b.values, a.dx);
}

Signal operator*(double s, const Signal& a) { return Signal(s * a.values, a.dx); }

bool leq(const Signal& x, const Signal& y, double tol_order) {
    require_same(x, y);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!(x[i] <= y[i] + tol_order)) return false;
    return true;
}

std::pair<Signal, Signal> pos_neg_split(const Signal& x) {
    return {Signal(x.values.cwiseMax(0.0), x.dx), Signal((-x.values).cwiseMax(0.0), x.dx)};
}

Signal am_unit(Eigen::Index n, double dx) {
    if (n < 1) throw DimensionError("am_unit needs n >= 1");
    return Signal::constant(n, 1.0, dx);
}

DenseOperator::DenseOperator(Mat matrix, double dx_in, double dx_out)
    : m_(std::move(matrix)), dx_in_(dx_in), dx_out_(dx_out) {
    if (!(dx_in > 0) || !(dx_out > 0)) throw InputError("grid spacing must be positive");
    if (!m_.allFinite()) throw ConstructionError("operator matrix has non-finite entries");
    mstar_ = m_.transpose();
    if (dx_in_ != dx_out_) mstar_ *= dx_out_ / dx_in_;
}

Signal DenseOperator::apply(const Signal& u) const {
    if (u.size() != m_.cols()) throw DimensionError("operator/signal size mismatch");
    return Signal(m_ * u.values, dx_out_);
}

Signal DenseOperator::apply_adjoint(const Signal& w) const {
    if (w.size() != m_.rows()) throw DimensionError("adjoint/signal size mismatch");
    return Signal(mstar_ * w.values, dx_in_);
}

DenseOperator DenseOperator::adjoint() const {
    DenseOperator a;
    a.m_ = mstar_;
    a.mstar_ = m_;
    a.dx_in_ = dx_out_;
    a.dx_out_ = dx_in_;
    return a;
}

double DenseOperator::norm(NormKind k) const {
    switch (k) {
        case NormKind::max: return m_.cwiseAbs().rowwise().sum().maxCoeff();
        case NormKind::l1: return dx_out_ / dx_in_ * m_.cwiseAbs().colwise().sum().maxCoeff();
        case NormKind::l2: {
            Eigen::JacobiSVD<Mat> svd(m_);
            return std::sqrt(dx_out_ / dx_in_) * svd.singularValues()(0);
        }
    }
    return 0.0;
}

DenseOperator operator-(const DenseOperator& a, const DenseOperator& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("operator shape mismatch");
    return DenseOperator(a.matrix() - b.matrix(), a.dx_in(), a.dx_out());
}

BracketPair::BracketPair(DenseOperator l, DenseOperator u, std::optional<DenseOperator> t,
                         NormKind k)
    : lower(std::move(l)), upper(std::move(u)), truth(std::move(t)), width_norm(k) {
    if (lower.rows() != upper.rows() || lower.cols() != upper.cols())
        throw DimensionError("bracket operators differ in shape");
    if (truth && (truth->rows() != lower.rows() || truth->cols() != lower.cols()))
        throw DimensionError("truth operator differs in shape");
    width = (upper - lower).norm(k);
}

bool BracketPair::degenerate() const { return lower.matrix() == upper.matrix(); }

BracketReport check_bracketing(const BracketPair& pair, int samples, std::uint64_t seed) {
    if (!pair.truth) throw ConfigError("check_bracketing needs the true operator");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BracketReport rep;
    rep.samples = samples;
    const auto n = pair.lower.cols();
    for (int s = 0; s < samples; ++s) {
        Vec u(n);
        for (Eigen::Index i = 0; i < n; ++i) u[i] = unif(rng);
        const Vec a = pair.truth->matrix() * u;
        const Vec lo = pair.lower.matrix() * u - a;
        const Vec hi = a - pair.upper.matrix() * u;
        rep.violation = std::max({rep.violation, lo.maxCoeff(), hi.maxCoeff()});
    }
    rep.ok = rep.violation <= 1e-12;
    return rep;
}

double robinson_margin(const BracketPair& pair) {
    if (pair.degenerate()) return 0.0;
    const Vec gap = (pair.upper.matrix() - pair.lower.matrix()).rowwise().sum();
    return 0.5 * gap.minCoeff();
}

}  // namespace latreg
