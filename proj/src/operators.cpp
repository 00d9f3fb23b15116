#include "latreg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace latreg {

Vec grid_nodes(Eigen::Index n, double dx) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = (static_cast<double>(i) + 0.5) * dx;
    return x;
}

KernelSpec gaussian_kernel(double sigma) {
    if (!(sigma > 0)) throw ConfigError("gaussian width must be positive");
    const double z = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
    KernelSpec s;
    s.kernel = [=](double x, double xi) {
        const double d = x - xi;
        return z * std::exp(-d * d / (2.0 * sigma * sigma));
    };
    s.name = "gaussian";
    return s;
}

KernelSpec constant_kernel(double c) {
    KernelSpec s;
    s.kernel = [=](double, double) { return c; };
    s.name = "constant";
    return s;
}

KernelSpec linear_kernel() {
    KernelSpec s;
    s.kernel = [](double, double xi) { return xi; };
    s.name = "linear";
    return s;
}

KernelSpec table_kernel(Mat values, double dx) {
    KernelSpec s;
    const auto rows = values.rows(), cols = values.cols();
    s.kernel = [values = std::move(values), dx, rows, cols](double x, double xi) {
        const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(x / dx), 0, rows - 1);
        const auto j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(xi / dx), 0, cols - 1);
        return values(i, j);
    };
    s.name = "table";
    return s;
}

KernelSpec with_multiplicative_bounds(KernelSpec spec, double eps) {
    if (eps < 0) throw ConfigError("bound width must be nonnegative");
    auto k = spec.kernel;
    spec.lower = [=](double x, double xi) {
        const double v = k(x, xi);
        return v >= 0 ? v * (1.0 - eps) : v * (1.0 + eps);
    };
    spec.upper = [=](double x, double xi) {
        const double v = k(x, xi);
        return v >= 0 ? v * (1.0 + eps) : v * (1.0 - eps);
    };
    return spec;
}

KernelSpec with_additive_bounds(KernelSpec spec, double eps) {
    if (eps < 0) throw ConfigError("bound width must be nonnegative");
    auto k = spec.kernel;
    spec.lower = [=](double x, double xi) { return k(x, xi) - eps; };
    spec.upper = [=](double x, double xi) { return k(x, xi) + eps; };
    return spec;
}

namespace {

Mat sample(const Kernel& k, Eigen::Index n, double dx) {
    const Vec x = grid_nodes(n, dx);
    Mat m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = k(x[i], x[j]);
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "kernel not finite at node pair (" << i << ", " << j << ")";
                throw ConstructionError(os.str());
            }
            m(i, j) = v;
        }
    return m;
}

}  // namespace

DenseOperator integral_operator(const KernelSpec& spec, Eigen::Index n, double dx) {
    if (!spec.kernel) throw ConstructionError("kernel missing");
    return DenseOperator(sample(spec.kernel, n, dx) * dx, dx, dx);
}

BracketPair bracket_from_kernel_bounds(const KernelSpec& spec, Eigen::Index n, double dx,
                                       NormKind width_norm) {
    if (!spec.lower || !spec.upper) throw ConstructionError("kernel bounds missing");
    const Mat k = sample(spec.kernel, n, dx);
    const Mat kl = sample(spec.lower, n, dx);
    const Mat ku = sample(spec.upper, n, dx);
    const Mat slack = (k - kl).cwiseMin(ku - k);
    Eigen::Index wi = 0, wj = 0;
    const double worst = slack.minCoeff(&wi, &wj);
    if (worst < 0) {
        std::ostringstream os;
        os << "kernel bounds out of order at node pair (" << wi << ", " << wj << "), violation "
           << -worst;
        throw ConstructionError(os.str());
    }
    return BracketPair(DenseOperator(kl * dx, dx, dx), DenseOperator(ku * dx, dx, dx),
                       DenseOperator(k * dx, dx, dx), width_norm);
}

BracketPair bracket_from_riemann(const KernelSpec& spec, Eigen::Index n, Eigen::Index coarse_factor,
                                 double dx, NormKind width_norm) {
    if (coarse_factor < 1 || n % coarse_factor != 0)
        throw ConfigError("grid size must be divisible by the coarse factor");
    const Mat k = sample(spec.kernel, n, dx);
    Mat lo(n, n), hi(n, n);
    for (Eigen::Index c = 0; c < n; c += coarse_factor) {
        const auto block = k.middleCols(c, coarse_factor);
        const Vec bmin = block.rowwise().minCoeff();
        const Vec bmax = block.rowwise().maxCoeff();
        for (Eigen::Index j = c; j < c + coarse_factor; ++j) {
            lo.col(j) = bmin;
            hi.col(j) = bmax;
        }
    }
    return BracketPair(DenseOperator(lo * dx, dx, dx), DenseOperator(hi * dx, dx, dx),
                       DenseOperator(k * dx, dx, dx), width_norm);
}

BracketPair source_identification_bracket(const Profile& a_lower, const Profile& a_upper,
                                          Eigen::Index n, double dx, NormKind width_norm) {
    const Vec x = grid_nodes(n, dx);
    Vec al(n), au(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        al[i] = a_lower(x[i]);
        au[i] = a_upper(x[i]);
        if (!(al[i] > 0)) throw ConstructionError("diffusivity lower bound must be positive");
        if (!(au[i] >= al[i])) throw ConstructionError("diffusivity bounds out of order");
    }
    const Mat tri = Mat::Ones(n, n).triangularView<Eigen::Lower>();
    auto op = [&](const Vec& a) {
        Mat m = -dx * dx * (tri * a.cwiseInverse().asDiagonal() * tri);
        return DenseOperator(std::move(m), dx, dx);
    };
    const Vec amid = 0.5 * (al + au);
    return BracketPair(op(al), op(au), op(amid), width_norm);
}

}  // namespace latreg
