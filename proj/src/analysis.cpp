#include "latreg/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "latreg/solver.hpp"

namespace latreg {

namespace {

constexpr double fixture_tol = 1e-8;

const DenseOperator& truth_of(const BracketPair& b) {
    if (!b.truth) throw FixtureError("source fixtures need the true operator");
    return *b.truth;
}

SourceFixture finish(const DenseOperator& A, const Regulariser& reg, Signal u_dag, Signal omega) {
    SourceFixture fx;
    fx.u_dag = std::move(u_dag);
    fx.omega = std::move(omega);
    fx.f_bar = A.apply(fx.u_dag);
    auto [pos, neg] = pos_neg_split(fx.omega);
    fx.mu1 = neg;
    fx.mu2 = pos;
    fx.p_dag = A.apply_adjoint(fx.omega);
    const double res = subgradient_residual(reg, fx.u_dag, fx.p_dag);
    if (res > fixture_tol) {
        std::ostringstream os;
        os << "source condition fails: subgradient residual " << res;
        throw FixtureError(os.str());
    }
    return fx;
}

std::string list_indices(const std::vector<Eigen::Index>& idx) {
    std::ostringstream os;
    for (std::size_t k = 0; k < idx.size() && k < 12; ++k) os << (k ? ", " : "") << idx[k];
    if (idx.size() > 12) os << ", ...";
    return os.str();
}

}  // namespace

SourceFixture make_source_fixture(const BracketPair& bracket, const Regulariser& reg,
                                  const Signal& omega) {
    const DenseOperator& A = truth_of(bracket);
    if (reg.kind != RegKind::sq_l2)
        throw FixtureError("omega-only fixtures need the quadratic regulariser");
    Signal u = A.apply_adjoint(omega);
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (u[i] < 0) bad.push_back(i);
    if (!bad.empty())
        throw FixtureError("A*omega has negative entries at " + list_indices(bad));
    return finish(A, reg, std::move(u), omega);
}

SourceFixture make_source_fixture_l1(const BracketPair& bracket, const Regulariser& reg,
                                     const Signal& u_dag, const std::optional<Signal>& omega) {
    const DenseOperator& A = truth_of(bracket);
    if (reg.kind != RegKind::l1) throw FixtureError("support fixtures need the l1 regulariser");
    std::vector<Eigen::Index> bad;
    if (reg.nonneg) {
        for (Eigen::Index i = 0; i < u_dag.size(); ++i)
            if (u_dag[i] < 0) bad.push_back(i);
        if (!bad.empty())
            throw FixtureError("u_dag violates the nonnegativity constraint at " + list_indices(bad));
    }
    if (omega) return finish(A, reg, u_dag, *omega);

    std::vector<Eigen::Index> supp;
    for (Eigen::Index i = 0; i < u_dag.size(); ++i)
        if (u_dag[i] != 0) supp.push_back(i);
    if (supp.empty()) return finish(A, reg, u_dag, Signal::zeros(A.rows(), A.dx_out()));
    const Mat& S = A.adjoint_matrix();
    Mat rows(supp.size(), S.cols());
    Vec rhs(supp.size());
    for (std::size_t k = 0; k < supp.size(); ++k) {
        rows.row(k) = S.row(supp[k]);
        rhs[k] = u_dag[supp[k]] > 0 ? 1.0 : -1.0;
    }
    const Vec w = rows.completeOrthogonalDecomposition().solve(rhs);
    const Signal om(w, A.dx_out());
    const Signal p = A.apply_adjoint(om);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (u_dag[i] != 0) {
            if (std::abs(p[i] - rhs[std::distance(
                                   supp.begin(), std::find(supp.begin(), supp.end(), i))]) > 1e-9)
                bad.push_back(i);
        } else if (reg.nonneg ? p[i] > 1.0 + 1e-12 : std::abs(p[i]) > 1.0 + 1e-12) {
            bad.push_back(i);
        }
    }
    if (!bad.empty())
        throw FixtureError("no source element: sign constraints violated at " + list_indices(bad));
    return finish(A, reg, u_dag, om);
}

double bregman_one_sided(const Regulariser& reg, const Signal& u, const Signal& w, const Signal& p) {
    const double ju = eval(reg, u), jw = eval(reg, w);
    if (std::isinf(ju) || std::isinf(jw)) throw DomainError("Bregman distance needs finite J");
    if (subgradient_residual(reg, w, p) > 1e-4)
        throw DomainError("p is not a subgradient of J at w");
    return ju - jw - dot(p, u - w);
}

double bregman_symmetric(const Regulariser& reg, const Signal& u, const Signal& w, const Signal& q,
                         const Signal& p) {
    if (std::isinf(eval(reg, u)) || std::isinf(eval(reg, w)))
        throw DomainError("Bregman distance needs finite J");
    if (subgradient_residual(reg, u, q) > 1e-4 || subgradient_residual(reg, w, p) > 1e-4)
        throw DomainError("subgradient check failed for the symmetric Bregman distance");
    return dot(q - p, u - w);
}

SlopeFit fit_rate_slope(const std::vector<std::pair<double, double>>& points) {
    for (std::size_t k = 1; k < points.size(); ++k)
        if (!(points[k].first < points[k - 1].first))
            throw FitError("x values must be strictly decreasing");
    SlopeFit fit;
    std::vector<double> lx, ly;
    for (const auto& [x, y] : points) {
        if (!(x > 0)) throw FitError("x values must be positive");
        if (!(y > 0) || !std::isfinite(y)) {
            ++fit.dropped;
            continue;
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    fit.used = static_cast<int>(lx.size());
    if (fit.used < 4) throw FitError("need at least 4 usable points for a slope fit");
    const double k = fit.used;
    double mx = 0, my = 0;
    for (int i = 0; i < fit.used; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < fit.used; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

namespace {

void put(std::ostream& os, const char* key, const Signal& s) {
    os << key << " =";
    for (Eigen::Index i = 0; i < s.size(); ++i) os << (i ? ", " : " ") << s[i];
    os << "\n";
}

Vec parse_list(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + tok + "' in fixture record");
        }
    }
    return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

std::string fixture_to_text(const SourceFixture& fx) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "record = source_fixture\nversion = 1\n";
    os << "dx_u = " << fx.u_dag.dx << "\ndx_v = " << fx.f_bar.dx << "\n";
    put(os, "u_dag", fx.u_dag);
    put(os, "f_bar", fx.f_bar);
    put(os, "omega", fx.omega);
    put(os, "p_dag", fx.p_dag);
    return os.str();
}

SourceFixture fixture_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    if (kv["record"] != "source_fixture" || kv["version"] != "1")
        throw ConfigError("not a version-1 source fixture record");
    for (const char* k : {"dx_u", "dx_v", "u_dag", "f_bar", "omega", "p_dag"})
        if (!kv.count(k)) throw ConfigError(std::string("fixture record lacks ") + k);
    const double dxu = std::stod(kv["dx_u"]), dxv = std::stod(kv["dx_v"]);
    SourceFixture fx;
    fx.u_dag = Signal(parse_list(kv["u_dag"]), dxu);
    fx.f_bar = Signal(parse_list(kv["f_bar"]), dxv);
    fx.omega = Signal(parse_list(kv["omega"]), dxv);
    fx.p_dag = Signal(parse_list(kv["p_dag"]), dxu);
    auto [pos, neg] = pos_neg_split(fx.omega);
    fx.mu1 = neg;
    fx.mu2 = pos;
    return fx;
}

}  // namespace latreg
