#include "latreg/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "latreg/operators.hpp"

namespace latreg {

namespace {

const std::set<std::string> known_keys = {
    "experiment.name",   "operator.kernel",     "operator.sigma",     "operator.n",
    "operator.bounds",   "operator.eps",        "fidelity.name",      "regulariser.name",
    "regulariser.nonneg", "fixture.omega",      "fixture.center",     "fixture.width",
    "fixture.spike",     "fixture.normalise",   "noise.delta",        "noise.direction",
    "noise.seed",        "alpha.rule",          "alpha.schedule",     "alpha.a",
    "alpha.p",           "alpha.c",             "alpha.values",       "alpha.basis",
    "alpha.tau",         "alpha.alpha0",        "alpha.expand_factor", "alpha.band_ratio",
    "alpha.max_expansions", "solver.max_iters", "solver.tol_gap",     "solver.tol_feas",
    "solver.tol_comp",   "solver.precondition", "solver.seed",        "solver.check_every",
    "summary.fit",       "summary.exponent",    "summary.window",     "output.dir"};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

[[noreturn]] void rethrow_with_row(std::exception_ptr ep, int row) {
    const std::string pre = "row " + std::to_string(row) + ": ";
    try {
        std::rethrow_exception(ep);
    } catch (const WellPosednessError& e) {
        throw WellPosednessError(pre + e.what());
    } catch (const MonotonicityError& e) {
        throw MonotonicityError(pre + e.what());
    } catch (const CalibrationError& e) {
        throw CalibrationError(pre + e.what());
    } catch (const FixtureError& e) {
        throw FixtureError(pre + e.what());
    } catch (const ScheduleError& e) {
        throw ScheduleError(pre + e.what());
    } catch (const ConstructionError& e) {
        throw ConstructionError(pre + e.what());
    } catch (const Error& e) {
        throw Error(pre + e.what());
    }
}

KernelSpec base_kernel(const ExperimentConfig& cfg) {
    if (cfg.kernel == "gaussian") return gaussian_kernel(cfg.sigma);
    throw ConfigError("unknown kernel " + cfg.kernel);
}

BracketPair row_bracket(const ExperimentConfig& cfg, double eps) {
    const double dx = 1.0 / static_cast<double>(cfg.n);
    const KernelSpec spec = base_kernel(cfg);
    if (eps == 0.0) {
        const DenseOperator A = integral_operator(spec, cfg.n, dx);
        return BracketPair(A, A, A);
    }
    const KernelSpec b = cfg.bounds == "additive" ? with_additive_bounds(spec, eps)
                                                  : with_multiplicative_bounds(spec, eps);
    return bracket_from_kernel_bounds(b, cfg.n, dx);
}

}  // namespace

ExperimentConfig parse_experiment(const Config& c) {
    for (const auto& [k, v] : c.entries())
        if (!known_keys.count(k)) throw ConfigError("unknown config key " + k);
    ExperimentConfig e;
    e.name = c.get("experiment.name", "experiment");
    e.kernel = c.get("operator.kernel", "gaussian");
    e.sigma = c.number("operator.sigma", 0.1);
    e.n = c.integer("operator.n", 64);
    if (e.n < 2) throw ConfigError("operator.n must be at least 2");
    e.bounds = c.get("operator.bounds", "multiplicative");
    if (e.bounds != "multiplicative" && e.bounds != "additive")
        throw ConfigError("operator.bounds must be multiplicative or additive");

    e.fidelity = parse_fidelity(c.get("fidelity.name"));
    e.regulariser = parse_regulariser(c.get("regulariser.name", "sq_l2"),
                                      c.flag("regulariser.nonneg", true));

    e.omega = c.get("fixture.omega", "bump");
    if (e.omega != "bump" && e.omega != "dual_spike")
        throw ConfigError("fixture.omega must be bump or dual_spike");
    e.omega_center = c.number("fixture.center", 0.5);
    e.omega_width = c.number("fixture.width", 0.025);
    e.spike = c.integer("fixture.spike", e.n / 2);
    if (e.spike < 0 || e.spike >= e.n) throw ConfigError("fixture.spike out of range");
    e.normalise = c.flag("fixture.normalise", true);

    e.delta = c.list("noise.delta");
    e.direction = c.get("noise.direction", "omega");
    if (e.direction != "omega" && e.direction != "random")
        throw ConfigError("noise.direction must be omega or random");
    e.seed = static_cast<std::uint64_t>(c.integer("noise.seed", 1));
    e.eps = c.has("operator.eps") ? c.list("operator.eps") : std::vector<double>(e.delta.size(), 0.0);
    if (e.eps.size() == 1 && e.delta.size() > 1) e.eps.assign(e.delta.size(), e.eps[0]);
    if (e.delta.size() == 1 && e.eps.size() > 1) e.delta.assign(e.eps.size(), e.delta[0]);
    if (e.eps.size() != e.delta.size()) throw ConfigError("noise.delta and operator.eps differ in length");
    if (e.delta.size() < 4) throw ConfigError("at least 4 schedule points are needed");

    e.fit = c.get("summary.fit", "delta");
    if (e.fit != "delta" && e.fit != "eta" && e.fit != "max")
        throw ConfigError("summary.fit must be delta, eta or max");
    e.fit_exponent = c.number("summary.exponent", 1.0);
    for (std::size_t k = 0; k < e.delta.size(); ++k) {
        if (!(e.delta[k] > 0)) throw ConfigError("noise levels must be positive");
        if (e.eps[k] < 0) throw ConfigError("bound widths must be nonnegative");
        if (k == 0) continue;
        if (e.eps[k] > e.eps[k - 1]) throw ConfigError("operator.eps must be nonincreasing");
        if (e.fit == "eta" ? e.delta[k] > e.delta[k - 1] : !(e.delta[k] < e.delta[k - 1]))
            throw ConfigError("noise.delta must be strictly decreasing");
    }
    if (c.has("summary.window")) {
        const auto w = parse_numbers(c.get("summary.window"));
        if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("summary.window must be lo, hi");
        e.window_lo = w[0];
        e.window_hi = w[1];
        e.has_window = true;
    }

    const std::string rule = c.get("alpha.rule", "apriori");
    if (rule != "apriori" && rule != "discrepancy")
        throw ConfigError("alpha.rule must be apriori or discrepancy");
    e.discrepancy = rule == "discrepancy";
    const std::string kind = c.get("alpha.schedule", "power");
    const auto basis = c.get("alpha.basis", "delta");
    if (basis != "delta" && basis != "eta") throw ConfigError("alpha.basis must be delta or eta");
    if (kind == "power")
        e.schedule = Schedule::power(c.number("alpha.a", 1.0), c.number("alpha.p", 0.5),
                                     basis == "eta" ? Schedule::Basis::eta : Schedule::Basis::delta);
    else if (kind == "constant")
        e.schedule = Schedule::constant(c.number("alpha.c"));
    else if (kind == "table")
        e.schedule = Schedule::from_table(c.list("alpha.values"));
    else
        throw ConfigError("alpha.schedule must be power, constant or table");
    e.dp.tau = c.number("alpha.tau", 1.5);
    if (!(e.dp.tau > 1)) throw ConfigError("alpha.tau must exceed 1");
    e.dp.alpha0 = c.number("alpha.alpha0", 0.0);
    e.dp.expand_factor = c.number("alpha.expand_factor", 10.0);
    e.dp.band_ratio = c.number("alpha.band_ratio", 1.05);
    e.dp.max_expansions = static_cast<int>(c.integer("alpha.max_expansions", 40));
    if (!(e.dp.expand_factor > 1) || !(e.dp.band_ratio > 1))
        throw ConfigError("alpha.expand_factor and alpha.band_ratio must exceed 1");

    e.solver.max_iters = static_cast<int>(c.integer("solver.max_iters", 200000));
    e.solver.tol_gap = c.number("solver.tol_gap", 1e-7);
    e.solver.tol_feas = c.number("solver.tol_feas", 1e-8);
    e.solver.tol_comp = c.number("solver.tol_comp", 1e-6);
    e.solver.precondition = c.flag("solver.precondition", true);
    e.solver.seed = static_cast<std::uint64_t>(c.integer("solver.seed", 0));
    e.solver.check_every = static_cast<int>(c.integer("solver.check_every", 20));
    e.out_dir = c.get("output.dir", "out/" + e.name);
    return e;
}

SourceFixture build_fixture(const ExperimentConfig& cfg) {
    const double dx = 1.0 / static_cast<double>(cfg.n);
    const BracketPair exact = row_bracket(cfg, 0.0);
    const DenseOperator& A = *exact.truth;
    Signal omega = Signal::zeros(cfg.n, dx);
    if (cfg.omega == "bump") {
        const Vec x = grid_nodes(cfg.n, dx);
        omega.values = (-(x.array() - cfg.omega_center).square() /
                        (2.0 * cfg.omega_width * cfg.omega_width))
                           .exp();
    } else {
        Signal e = Signal::zeros(cfg.n, dx);
        e.values[cfg.spike] = 1.0;
        omega.values[cfg.spike] = 1.0 / A.apply_adjoint(e)[cfg.spike];
    }
    switch (cfg.regulariser.kind) {
        case RegKind::sq_l2: {
            SourceFixture fx = make_source_fixture(exact, cfg.regulariser, omega);
            if (!cfg.normalise || fx.f_bar.mass() <= 0) return fx;
            return make_source_fixture(exact, cfg.regulariser, (1.0 / fx.f_bar.mass()) * omega);
        }
        case RegKind::l1: {
            Signal u = Signal::zeros(cfg.n, dx);
            u.values[cfg.spike] = 1.0;
            if (cfg.normalise) u = (1.0 / A.apply(u).mass()) * u;
            if (cfg.omega == "bump") return make_source_fixture_l1(exact, cfg.regulariser, u);
            return make_source_fixture_l1(exact, cfg.regulariser, u, omega);
        }
        case RegKind::tv1d: break;
    }
    throw FixtureError("no fixture construction for regulariser " + cfg.regulariser.describe());
}

namespace {

RateRow run_row(const ExperimentConfig& cfg, const SourceFixture& fx, std::size_t k) {
    const double dx = 1.0 / static_cast<double>(cfg.n);
    RateRow row;
    row.n = static_cast<int>(k) + 1;
    row.delta = cfg.delta[k];
    const BracketPair bracket = row_bracket(cfg, cfg.eps[k]);
    row.eta = bracket.width;

    const bool ball = cfg.fidelity.kind == FidKind::ball;
    const Fidelity fid = ball ? with_ball_radius(cfg.fidelity, row.delta) : cfg.fidelity;
    Signal dir = cfg.direction == "omega" ? (-1.0 / norm(fx.omega, NormKind::l2)) * fx.omega
                                          : random_direction(cfg.n, dx, cfg.seed);
    const Signal fn = calibrate_noise(fid, fx.f_bar, dir, row.delta);

    Problem p{bracket, fid, cfg.regulariser, fn, 1.0};
    SolveReport rep;
    if (cfg.discrepancy) {
        DiscrepancyResult d = discrepancy_alpha(p, fn, row.delta, cfg.dp, cfg.solver);
        row.alpha = d.alpha;
        row.solves = d.solves;
        rep = std::move(d.report);
    } else {
        row.alpha = apriori_alpha(cfg.schedule, row.delta, k, row.eta);
        p.alpha = row.alpha;
        rep = solve(p, cfg.solver);
        row.solves = 1;
    }
    p.alpha = row.alpha;

    row.primal = rep.primal_value;
    row.gap = rep.gap;
    row.comp = rep.complementarity;
    row.converged = rep.converged;
    row.h_val = eval_relaxed(fid, rep.v, fn);
    row.j_val = eval(cfg.regulariser, rep.u);
    row.u_max = norm(rep.u, NormKind::max);

    row.breg_one = bregman_one_sided(cfg.regulariser, rep.u, fx.u_dag, fx.p_dag);
    const Signal pn = -1.0 * b_adjoint(bracket, rep.mu1, rep.mu2);
    try {
        row.breg_symm = bregman_symmetric(cfg.regulariser, rep.u, fx.u_dag, pn, fx.p_dag);
    } catch (const DomainError&) {
        row.breg_symm = std::nan("");
    }

    const double a = row.alpha;
    const Signal q = -a * fx.omega;  // α·E*μ† with E*μ† = μ†₁ − μ†₂ = −ω
    const double hstar = conjugate(fid, q, fn);
    row.rhs_base = eval_relaxed(fid, fx.f_bar, fn) / a + (hstar - dot(q, fx.f_bar)) / a;

    if (cfg.discrepancy) {
        row.lemma_j = row.j_val - eval(cfg.regulariser, fx.u_dag);
        row.lemma_pair = dot(e_adjoint(rep.mu1, rep.mu2), fx.f_bar - rep.v);
    }
    return row;
}

}  // namespace

std::vector<std::pair<double, double>> fit_points(const ExperimentConfig& cfg,
                                                  const std::vector<RateRow>& rows) {
    std::vector<std::pair<double, double>> pts;
    for (const RateRow& r : rows) {
        if (!r.converged) continue;
        double x = r.delta;
        if (cfg.fit == "eta") x = r.eta;
        if (cfg.fit == "max") x = std::max(std::pow(r.delta, cfg.fit_exponent), r.eta);
        pts.emplace_back(x, r.breg_one);
    }
    return pts;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
    ExperimentResult res;
    res.fixture = build_fixture(cfg);
    const std::size_t count = cfg.delta.size();
    res.rows.resize(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            try {
                res.rows[k] = run_row(cfg, res.fixture, k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t k = 0; k < count; ++k)
        if (errors[k]) rethrow_with_row(errors[k], static_cast<int>(k) + 1);

    RateSummary& s = res.summary;
    double umax = 0;
    for (const RateRow& r : res.rows) umax = std::max(umax, r.u_max);
    s.constant_c = (norm(res.fixture.mu1, NormKind::l1) + norm(res.fixture.mu2, NormKind::l1)) * umax;
    s.min_slack = INFINITY;
    for (RateRow& r : res.rows) {
        const double rhs = r.rhs_base + s.constant_c * r.eta;
        r.slack_one = rhs - r.breg_one;
        r.slack_symm = rhs - r.breg_symm;
        r.slack = std::min(r.slack_one, r.slack_symm);
        if (std::isnan(r.breg_symm)) r.slack = std::nan("");
        if (!r.converged) continue;
        ++s.converged;
        s.min_slack = std::isnan(r.slack) ? r.slack : std::min(s.min_slack, r.slack);
        if (cfg.discrepancy) {
            const bool band = r.h_val >= r.delta - 1e-9 && r.h_val <= cfg.dp.tau * r.delta + 1e-9;
            if (!band || r.lemma_j > 1e-6 || r.lemma_pair > 1e-6) s.lemma_ok = false;
        }
    }
    s.slack_ok = s.converged > 0 && s.min_slack >= -1e-6;
    try {
        s.fit = fit_rate_slope(fit_points(cfg, res.rows));
        s.fit_ok = true;
        s.slope_ok = !cfg.has_window || (s.fit.slope >= cfg.window_lo && s.fit.slope <= cfg.window_hi);
    } catch (const FitError& e) {
        s.fit_error = e.what();
    }
    return res;
}

std::string rows_csv(const std::vector<RateRow>& rows) {
    std::string out = "n,delta,eta,alpha,primal,gap,comp,breg_one,breg_symm,h_val,j_val,slack,converged\n";
    for (const RateRow& r : rows) {
        out += std::to_string(r.n);
        for (double x : {r.delta, r.eta, r.alpha, r.primal, r.gap, r.comp, r.breg_one, r.breg_symm,
                         r.h_val, r.j_val, r.slack})
            out += "," + fmt(x);
        out += r.converged ? ",1\n" : ",0\n";
    }
    return out;
}

std::vector<RateRow> parse_rows_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    if (line != "n,delta,eta,alpha,primal,gap,comp,breg_one,breg_symm,h_val,j_val,slack,converged")
        throw ConfigError("unexpected rows.csv header");
    std::vector<RateRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 13) throw ConfigError("rows.csv line has " + std::to_string(f.size()) + " fields");
        RateRow r;
        r.n = std::stoi(f[0]);
        double* dst[] = {&r.delta, &r.eta, &r.alpha, &r.primal, &r.gap, &r.comp,
                         &r.breg_one, &r.breg_symm, &r.h_val, &r.j_val, &r.slack};
        for (int i = 0; i < 11; ++i) *dst[i] = std::strtod(f[i + 1].c_str(), nullptr);
        r.converged = f[12] == "1";
        rows.push_back(r);
    }
    return rows;
}

std::string summary_csv(const ExperimentConfig& cfg, const RateSummary& s) {
    std::string out = "key,value\n";
    auto put = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
    put("name", cfg.name);
    put("fit_against", cfg.fit);
    put("fit_ok", s.fit_ok ? "1" : "0");
    put("slope", fmt(s.fit.slope));
    put("intercept", fmt(s.fit.intercept));
    put("r2", fmt(s.fit.r2));
    put("points_used", std::to_string(s.fit.used));
    put("points_dropped", std::to_string(s.fit.dropped));
    put("window_lo", cfg.has_window ? fmt(cfg.window_lo) : "");
    put("window_hi", cfg.has_window ? fmt(cfg.window_hi) : "");
    put("slope_ok", s.slope_ok ? "1" : "0");
    put("constant_c", fmt(s.constant_c));
    put("min_slack", fmt(s.min_slack));
    put("slack_ok", s.slack_ok ? "1" : "0");
    put("lemma_ok", cfg.discrepancy ? (s.lemma_ok ? "1" : "0") : "");
    put("converged_rows", std::to_string(s.converged));
    return out;
}

std::string plot_svg(const ExperimentConfig& cfg, const ExperimentResult& r) {
    const auto pts = fit_points(cfg, r.rows);
    std::vector<std::pair<double, double>> lp;
    for (const auto& [x, y] : pts)
        if (x > 0 && y > 0) lp.emplace_back(std::log10(x), std::log10(y));
    const double W = 640, H = 480, M = 60;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!lp.empty()) {
        x0 = x1 = lp[0].first;
        y0 = y1 = lp[0].second;
        for (const auto& [x, y] : lp) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        if (x1 - x0 < 1e-9) x1 = x0 + 1;
        if (y1 - y0 < 1e-9) y1 = y0 + 1;
    }
    auto sx = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
    auto sy = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">log10 " << cfg.fit
       << "</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
       << ")\" text-anchor=\"middle\">log10 D</text>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"30\" text-anchor=\"middle\">" << cfg.name << "  slope "
       << r.summary.fit.slope << "</text>\n";
    for (const auto& [x, y] : lp)
        os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"4\" fill=\"steelblue\"/>\n";
    if (r.summary.fit_ok) {
        const auto& f = r.summary.fit;
        const double ln10 = std::log(10.0);
        auto fy = [&](double x) { return (f.intercept + f.slope * x * ln10) / ln10; };
        os << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(fy(x0)) << "\" x2=\"" << sx(x1) << "\" y2=\""
           << sy(fy(x1)) << "\" stroke=\"firebrick\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_outputs(const ExperimentConfig& cfg, const ExperimentResult& r, const std::string& dir,
                  bool plot) {
    if (r.rows.empty()) throw IoError("no rows to write");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    auto write = [&](const std::string& name, const std::string& body) {
        const std::string path = (std::filesystem::path(dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        out << body;
        if (!out) throw IoError("write failed for " + path);
    };
    write("rows.csv", rows_csv(r.rows));
    write("summary.csv", summary_csv(cfg, r.summary));
    if (plot) write("plot.svg", plot_svg(cfg, r));
}

}  // namespace latreg
