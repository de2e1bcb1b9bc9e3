#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asyncfv/harness.hpp"

using namespace asyncfv;

namespace {

ExperimentSpec two_cell_spec() {
    ExperimentSpec s;
    s.name = "two-cell";
    s.dims = {2, 1, 1};
    s.extent = {2, 1, 1};
    s.fields.initial = ExplicitConcentration{{1.0, 0.0}};
    s.final_time = 1.0;
    s.ladder = {1e-3, 1e-4, 1e-5, 1e-6};
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("fracture experiment") {
    const auto s = experiment_fracture();
    CHECK(s.final_time == 2.4);
    CHECK(s.dims.cells() == 10000);
    CHECK(s.fracture);
    CHECK(s.fracture_d == 100.0);
    CHECK(s.matrix_d == 0.1);
    CHECK(s.fields.velocity.x == 1.0);
    CHECK(s.ladder.front() == 1e-5);
    CHECK(s.ladder.back() == doctest::Approx(1e-9).epsilon(1e-12));
    const auto desk = experiment_fracture(Scale::Desk);
    CHECK(desk.dims.cells() == 2500);
    CHECK(desk.ladder.size() >= 3);

    const auto prep = prepare_experiment(desk);
    std::vector<double> d(prep.grid.diffusivities().begin(), prep.grid.diffusivities().end());
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    CHECK(d == std::vector<double>{0.1, 100.0});
    CHECK(std::accumulate(prep.m0.begin(), prep.m0.end(), 0.0) == doctest::Approx(0.2 * 0.2 * 10));
}

TEST_CASE("uniform 3d experiment") {
    const auto s = experiment_uniform3d();
    CHECK(s.dims.cells() == 51200);
    CHECK(s.fields.velocity.x == 0.1);
    CHECK(s.fields.velocity.y == 1.1);
    CHECK(s.fields.velocity.z == 0.0);
    CHECK(s.final_time == 2.4);
    const bool has_ref_point = std::any_of(s.ladder.begin(), s.ladder.end(),
                                           [](double x) { return std::abs(x - 1.953e-9) <= 1e-12 * 1.953e-9; });
    CHECK(has_ref_point);
    CHECK(experiment_uniform3d(Scale::Desk).dims.cells() == 800);
}

TEST_CASE("reaction experiment") {
    const auto s = experiment_reaction();
    CHECK(s.final_time == 1.0);
    REQUIRE(s.reaction.has_value());
    CHECK(s.reaction->rate(1.0) == -0.5);
    CHECK(s.fields.velocity.x == 0.0);
    CHECK(s.fields.velocity.y == 0.0);
    CHECK(s.fields.velocity.z == 0.0);
    CHECK(s.dims.cells() == 10000);
    CHECK_THROWS(experiment_by_name("nope", Scale::Desk));
}

TEST_CASE("spec validation") {
    auto s = two_cell_spec();
    s.ladder = {1e-3, 1e-3};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.ladder = {};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("event map values") {
    const std::vector<std::uint64_t> counts{0, 999, 9};
    const auto m = event_map(counts);
    CHECK(m[0] == 0.0);
    CHECK(m[1] == doctest::Approx(3.0));
    CHECK(m[2] == doctest::Approx(1.0));
}

TEST_CASE("slope fits") {
    const std::vector<double> x{1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<double> y;
    for (double v : x) y.push_back(3 * v);
    auto fit = fit_loglog(x, y);
    CHECK(fit.ok);
    CHECK(fit.slope == doctest::Approx(1.0));
    CHECK(fit.residual <= 1e-12);

    // a plateau at large x is excluded from the regime
    const std::vector<double> x2{1, 1e-1, 1e-2, 1e-3, 1e-4};
    const std::vector<double> y2{5, 5, 1e-2, 1e-3, 1e-4};
    fit = fit_regime_slope(x2, y2, 0.3);
    CHECK(fit.first == 2);
    CHECK(fit.count == 3);
    fit = fit_regime_slope(std::vector<double>{1, 0.1, 0.01, 0.001}, std::vector<double>{1, 1, 0.1, 0.01}, 0.3);
    CHECK(fit.first == 1);
    CHECK(fit.slope == doctest::Approx(1.0));
    CHECK_FALSE(fit_loglog(std::vector<double>{1.0}, std::vector<double>{1.0}).ok);
}

TEST_CASE("two-cell sweep is first order") {
    const auto result = run_sweep(two_cell_spec());
    REQUIRE(result.rows.size() == 4);
    REQUIRE(result.fits.size() == 1);
    for (const auto& r : result.rows) {
        CHECK_FALSE(r.failed);
        CHECK(r.mass_drift <= 1e-12);
        CHECK(r.faces_at_final_time);
    }
    const auto& f = result.fits[0].error;
    CHECK(f.ok);
    CHECK(f.slope >= 0.8);
    CHECK(f.slope <= 1.2);
}

TEST_CASE("equilibrium sweep has no error") {
    auto s = two_cell_spec();
    s.dims = {3, 3, 1};
    s.extent = {3, 3, 1};
    s.fields.initial = UniformConcentration{0.4};
    s.schemes = {Variant::Bas, Variant::Bast, Variant::BasCasc};
    const auto result = run_sweep(s);
    for (const auto& r : result.rows) {
        CHECK(r.error <= 1e-12);
    }
}

TEST_CASE("a failing run is recorded and the sweep continues") {
    auto s = two_cell_spec();
    s.max_events = 5000;
    SweepOptions opts;
    std::size_t reported = 0;
    opts.on_row = [&](const SweepRow&) { ++reported; };
    const auto result = run_sweep(s, opts);
    CHECK(reported == 4);
    CHECK_FALSE(result.rows[0].failed);
    CHECK(result.rows[3].failed);
    CHECK(result.rows[3].failure.find("event budget") != std::string::npos);
    CHECK(sweep_summary(result).find("FAILED") != std::string::npos);
}

TEST_CASE("parallel sweep matches the serial one") {
    auto s = two_cell_spec();
    s.schemes = {Variant::Bas, Variant::Bast};
    SweepOptions par;
    par.jobs = 3;
    const auto a = run_sweep(s);
    const auto b = run_sweep(s, par);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].scheme == b.rows[i].scheme);
        CHECK(a.rows[i].error == b.rows[i].error);
        CHECK(a.rows[i].n_events == b.rows[i].n_events);
    }
}

TEST_CASE("sweep csv and cached reference") {
    const auto dir = std::filesystem::temp_directory_path() / "asyncfv_harness_test";
    std::filesystem::remove_all(dir);
    auto s = two_cell_spec();
    s.ladder = {1e-3, 1e-4};
    SweepOptions opts;
    opts.cache_dir = (dir / "cache").string();
    const auto first = run_sweep(s, opts);
    const auto second = run_sweep(s, opts);
    CHECK(first.reference.mass == second.reference.mass);
    CHECK(std::distance(std::filesystem::directory_iterator(dir / "cache"), {}) == 1);

    write_sweep_csv(first, (dir / "sweep.csv").string(), "# header\n");
    const auto text = slurp(dir / "sweep.csv");
    CHECK(text.rfind("# header\nscheme,delta_m,error,n_events,dt_avg,wall_s\nBAS,0.001,", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("grid values csv has one row per y index") {
    const Grid g = build_cartesian({3, 2, 1}, {3, 2, 1}, {});
    const auto path = std::filesystem::temp_directory_path() / "asyncfv_values.csv";
    write_grid_values_csv(g, std::vector<double>{0, 1, 2, 3, 4, 5.5}, path.string(), "");
    CHECK(slurp(path) == "0,1,2\n3,4,5.5\n");
    std::filesystem::remove(path);
}

TEST_CASE("verification suite passes") {
    const auto lines = verification_suite(Scale::Desk);
    CHECK(lines.size() > 20);
    for (const auto& l : lines) {
        INFO(l.identity, " ", l.grid, " ", l.value);
        CHECK(l.pass);
    }
}
