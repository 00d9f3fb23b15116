#include <doctest.h>

#include <filesystem>

#include "latreg/harness.hpp"

using namespace latreg;

namespace {
const char* kl_text = R"(
# small KL run
[experiment]
name = kl_small

[operator]
kernel = gaussian
sigma = 0.1
n = 32
eps = 0

[fidelity]
name = kl

[regulariser]
name = sq_l2
nonneg = true

[fixture]
omega = bump
center = 0.5
width = 0.05

[noise]
delta = geom(0.25, 0.25, 6)
direction = omega
seed = 3

[alpha]
rule = apriori
schedule = power
a = 1
p = 0.5

[summary]
fit = delta
window = 0.3, 0.7
)";

ExperimentConfig kl_config() { return parse_experiment(Config::parse(kl_text)); }

Config edited(const std::string& key, const std::string& value) {
    Config c = Config::parse(kl_text);
    c.set(key, value);
    return c;
}
}  // namespace

TEST_CASE("config text") {
    const Config c = Config::parse("top = 1\n[a]\nx = 2 # trailing\n; note\ny = geom(1, 0.5, 3)\nz = repeat(4, 2)\nb = yes\n");
    CHECK(c.number("top") == 1);
    CHECK(c.get("a.x") == "2 # trailing");
    CHECK(c.list("a.y") == std::vector<double>{1, 0.5, 0.25});
    CHECK(c.list("a.z") == std::vector<double>{4, 4});
    CHECK(c.flag("a.b", false));
    CHECK(c.number("a.missing", 7) == 7);
    CHECK_THROWS_AS(c.get("a.missing"), ConfigError);
    CHECK_THROWS_AS(c.number("a.b"), ConfigError);
    CHECK_THROWS_AS(Config::parse("[open\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("novalue\n"), ConfigError);
    CHECK(parse_matrix("1, 2; 3, 4") == (Mat(2, 2) << 1, 2, 3, 4).finished());
    CHECK_THROWS_AS(parse_matrix("1, 2; 3"), ConfigError);
}

TEST_CASE("fidelity names") {
    CHECK(parse_fidelity("kl").kind == FidKind::kl);
    CHECK(parse_fidelity("ball(0.1, max)").radius == 0.1);
    CHECK(parse_fidelity("ball(0.1, max)").norm == NormKind::max);
    const Fidelity s = parse_fidelity("sum(kl, sq_norm(2, l2))");
    CHECK(s.kind == FidKind::sum);
    CHECK(s.parts[1].lambda == 2);
    const Fidelity i = parse_fidelity("infconv(sq_norm(2, l2), tv)");
    CHECK(i.kind == FidKind::infconv);
    CHECK(parse_fidelity("phi(reverse_kl)").phi->name == "reverse_kl");
    CHECK_THROWS_AS(parse_fidelity("wasserstein"), ConfigError);
    CHECK_THROWS_AS(parse_fidelity("sum(kl"), ConfigError);
    CHECK_THROWS_AS(parse_fidelity("kl extra"), ConfigError);
    CHECK_THROWS_AS(parse_fidelity("infconv(kl, tv)"), ConstructionError);
    CHECK(parse_regulariser("tv", true).kind == RegKind::tv1d);
    CHECK_THROWS_AS(parse_regulariser("l0", false), ConfigError);
}

TEST_CASE("experiment validation") {
    const ExperimentConfig e = kl_config();
    CHECK(e.delta.size() == 6);
    CHECK(e.eps == std::vector<double>(6, 0.0));
    CHECK(e.has_window);
    CHECK_THROWS_AS(parse_experiment(edited("noise.delta", "0.1, 0.2, 0.05, 0.01")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("noise.delta", "0.1, 0.01, 0.001")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("operator.eps", "0.1, 0.2, 0.1, 0.1, 0.1, 0.1")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("noise.colour", "pink")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("alpha.rule", "lcurve")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("alpha.tau", "0.9")), ConfigError);
    CHECK_THROWS_AS(parse_experiment(edited("summary.window", "0.7, 0.3")), ConfigError);
}

TEST_CASE("KL run, CSV round trip and determinism") {
    const ExperimentConfig e = kl_config();
    const ExperimentResult r = run_experiment(e, 1);
    REQUIRE(r.rows.size() == 6);
    for (const auto& row : r.rows) {
        CHECK(row.converged);
        CHECK(row.slack >= -1e-6);
        CHECK(row.h_val >= 0);
    }
    CHECK(r.summary.fit_ok);
    CHECK(r.summary.slope_ok);

    const std::string csv = rows_csv(r.rows);
    CHECK(csv.rfind("n,delta,eta,alpha,primal,gap,comp,breg_one,breg_symm,h_val,j_val,slack,converged\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    const auto back = parse_rows_csv(csv);
    REQUIRE(back.size() == r.rows.size());
    const SlopeFit refit = fit_rate_slope(fit_points(e, back));
    CHECK(std::abs(refit.slope - r.summary.fit.slope) <= 1e-12);
    CHECK(std::abs(refit.intercept - r.summary.fit.intercept) <= 1e-12);

    const ExperimentResult again = run_experiment(e, 3);
    CHECK(rows_csv(again.rows) == csv);
    CHECK(summary_csv(e, again.summary) == summary_csv(e, r.summary));
}

TEST_CASE("outputs") {
    const ExperimentConfig e = kl_config();
    const ExperimentResult r = run_experiment(e, 2);
    const auto dir = std::filesystem::temp_directory_path() / "latreg_harness_test";
    std::filesystem::remove_all(dir);
    emit_outputs(e, r, dir.string(), true);
    CHECK(std::filesystem::exists(dir / "rows.csv"));
    CHECK(std::filesystem::exists(dir / "summary.csv"));
    CHECK(std::filesystem::exists(dir / "plot.svg"));
    CHECK(plot_svg(e, r).find("<svg") != std::string::npos);
    ExperimentResult empty = r;
    empty.rows.clear();
    CHECK_THROWS_AS(emit_outputs(e, empty, dir.string(), false), IoError);
    CHECK_THROWS_AS(emit_outputs(e, r, "/proc/latreg/none", false), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("row errors carry the row index") {
    Config c = Config::parse(kl_text);
    c.set("alpha.rule", "discrepancy");
    c.set("noise.delta", "0.9, 0.8, 0.75, 0.7, 0.65, 0.6");
    try {
        run_experiment(parse_experiment(c), 2);
        FAIL("expected a well-posedness error");
    } catch (const WellPosednessError& err) {
        CHECK(std::string(err.what()).rfind("row 1: ", 0) == 0);
    }
}
