#include "latreg/parameter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace latreg {

Schedule Schedule::power(double a, double p, Basis basis) {
    Schedule s;
    s.kind = Kind::power;
    s.a = a;
    s.p = p;
    s.basis = basis;
    return s;
}

Schedule Schedule::constant(double c) {
    Schedule s;
    s.kind = Kind::constant;
    s.c = c;
    return s;
}

Schedule Schedule::from_table(std::vector<double> values) {
    Schedule s;
    s.kind = Kind::table;
    s.table = std::move(values);
    return s;
}

double apriori_alpha(const Schedule& s, double delta, std::size_t n, double eta) {
    double alpha = 0.0;
    switch (s.kind) {
        case Schedule::Kind::power: {
            const double x = s.basis == Schedule::Basis::delta ? delta : eta;
            if (!(x > 0)) throw ScheduleError("power schedules need a positive base value");
            alpha = s.a * std::pow(x, s.p);
            break;
        }
        case Schedule::Kind::constant:
            if (delta < 0) throw ScheduleError("negative noise level");
            alpha = s.c;
            break;
        case Schedule::Kind::table:
            if (n >= s.table.size()) throw ScheduleError("alpha table too short");
            alpha = s.table[n];
            break;
    }
    if (!(alpha > 0) || !std::isfinite(alpha)) throw ScheduleError("schedule produced a nonpositive alpha");
    return alpha;
}

void check_monotone(std::vector<std::pair<double, double>> pairs, double slack, bool increasing) {
    std::sort(pairs.begin(), pairs.end());
    double best = increasing ? -INFINITY : INFINITY;
    double best_alpha = 0.0;
    for (const auto& [a, h] : pairs) {
        const bool bad = increasing ? h < best - slack : h > best + slack;
        if (bad) {
            std::ostringstream os;
            os.precision(10);
            os << (increasing ? "h" : "j") << " not monotone: value " << best << " at alpha "
               << best_alpha << " vs " << h << " at alpha " << a;
            throw MonotonicityError(os.str());
        }
        if (increasing ? h > best : h < best) {
            best = h;
            best_alpha = a;
        }
    }
}

DiscrepancyResult discrepancy_alpha(const Problem& tmpl, const Signal& fn, double delta,
                                    const DiscrepancyOptions& dopts, const SolverOptions& sopts) {
    if (!(dopts.tau > 1)) throw ConfigError("tau must exceed 1");
    if (!(delta > 0)) throw ConfigError("discrepancy principle needs delta > 0");
    const double target = dopts.tau * delta;

    DiscrepancyResult out;
    Problem p = tmpl;
    p.f = fn;
    SolveReport last;
    bool have_last = false;
    struct Probe {
        double alpha, h;
        SolveReport rep;
    };
    auto probe = [&](double alpha) {
        p.alpha = alpha;
        SolverOptions o = sopts;
        if (have_last) o.warm = &last;
        SolveReport r = solve(p, o);
        const double h = eval_relaxed(p.fidelity, r.v, fn);
        last = r;
        have_last = true;
        ++out.solves;
        out.trajectory.emplace_back(alpha, h);
        check_monotone(out.trajectory, dopts.mono_slack, true);
        return Probe{alpha, h, std::move(r)};
    };

    Probe lo = probe(dopts.alpha0 > 0 ? dopts.alpha0 : delta);
    Probe hi = lo;
    if (lo.h > target) {
        int k = 0;
        while (lo.h > target) {
            if (++k > dopts.max_expansions)
                throw WellPosednessError("h(alpha) stays above tau*delta for every probed alpha");
            hi = std::move(lo);
            lo = probe(hi.alpha / dopts.expand_factor);
        }
    } else {
        int k = 0;
        do {
            if (++k > dopts.max_expansions) {
                std::ostringstream os;
                os << "h(alpha) never exceeds tau*delta = " << target << " (largest h " << hi.h
                   << " at alpha " << hi.alpha << ")";
                throw WellPosednessError(os.str());
            }
            if (hi.alpha != lo.alpha) lo = std::move(hi);
            hi = probe(lo.alpha * dopts.expand_factor);
        } while (hi.h <= target);
    }

    for (int it = 0; it < dopts.max_bisections; ++it) {
        if (hi.alpha / lo.alpha <= dopts.band_ratio && lo.h >= delta) break;
        if (hi.alpha / lo.alpha <= 1.0 + 1e-12) break;
        Probe mid = probe(std::sqrt(lo.alpha * hi.alpha));
        if (mid.h <= target)
            lo = std::move(mid);
        else
            hi = std::move(mid);
    }
    out.alpha = lo.alpha;
    out.h = lo.h;
    out.report = std::move(lo.rep);
    return out;
}

}  // namespace latreg
