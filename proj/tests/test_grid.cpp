#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "asyncfv/grid.hpp"

using namespace asyncfv;

namespace {

std::size_t expected_faces(const Dims& d) {
    const auto nx = static_cast<std::size_t>(d.nx), ny = static_cast<std::size_t>(d.ny),
               nz = static_cast<std::size_t>(d.nz);
    return (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1);
}

}  // namespace

TEST_CASE("two cells share a single unit face") {
    const Grid g = build_cartesian({2, 1, 1}, {2, 1, 1}, {});
    CHECK(g.cell_count() == 2);
    REQUIRE(g.face_count() == 1);
    CHECK(g.volume(0) == 1.0);
    CHECK(g.volume(1) == 1.0);
    const Face& f = g.face(0);
    CHECK(f.area == 1.0);
    CHECK(f.dx == 1.0);
    CHECK(f.cell_lo == 0);
    CHECK(f.cell_hi == 1);
}

TEST_CASE("face counts match the interior-face formula") {
    const Grid g = build_cartesian({100, 100, 1}, {10, 10, 10}, {});
    CHECK(g.cell_count() == 10000);
    CHECK(g.face_count() == 19800);
    for (Dims d : {Dims{3, 4, 5}, Dims{1, 7, 1}, Dims{6, 1, 2}}) {
        CHECK(build_cartesian(d, {1, 2, 3}, {}).face_count() == expected_faces(d));
    }
}

TEST_CASE("uniform 3d grid has 51200 cells") {
    const Grid g = build_cartesian({40, 40, 32}, {10, 10, 10}, {});
    CHECK(g.cell_count() == 51200);
    CHECK(g.face_count() == expected_faces({40, 40, 32}));
    CHECK(g.volume(0) == doctest::Approx(1000.0 / 51200.0).epsilon(1e-14));
}

TEST_CASE("bad dimensions are rejected") {
    CHECK_THROWS_AS(build_cartesian({0, 1, 1}, {1, 1, 1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(build_cartesian({2, -1, 1}, {1, 1, 1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(build_cartesian({2, 2, 1}, {1, 0, 1}, {}), std::invalid_argument);
}

TEST_CASE("associated faces are the union of both cells' faces") {
    const Grid g = build_cartesian({4, 3, 2}, {4, 3, 2}, {});
    for (std::size_t k = 0; k < g.face_count(); ++k) {
        const auto& f = g.face(k);
        std::set<std::uint32_t> expect;
        for (auto x : g.cell_faces(f.cell_lo)) expect.insert(x);
        for (auto x : g.cell_faces(f.cell_hi)) expect.insert(x);
        const auto assoc = g.associated_faces(k);
        CHECK(std::set<std::uint32_t>(assoc.begin(), assoc.end()) == expect);
        CHECK(std::is_sorted(assoc.begin(), assoc.end()));
        CHECK(std::find(assoc.begin(), assoc.end(), k) != assoc.end());
        CHECK(f.cell_lo != f.cell_hi);
        CHECK(f.area > 0.0);
        CHECK(f.dx > 0.0);
    }
}

TEST_CASE("face fields follow the cell fields") {
    FieldSpec fields;
    fields.diffusivity = ExplicitDiffusivity{{1.0, 3.0, 0.0, 2.0}};
    fields.velocity = {0.5, -2.0, 7.0};
    const Grid g = build_cartesian({2, 2, 1}, {2, 2, 1}, fields);
    for (const auto& f : g.faces()) {
        const double d1 = g.diffusivity(f.cell_lo), d2 = g.diffusivity(f.cell_hi);
        const double hm = (d1 > 0 && d2 > 0) ? 2 * d1 * d2 / (d1 + d2) : 0.0;
        CHECK(f.d_face == doctest::Approx(hm));
        CHECK(f.v_normal == (f.axis == 0 ? 0.5 : -2.0));
    }
    CHECK(harmonic_mean(0.0, 5.0) == 0.0);
    CHECK(harmonic_mean(2.0, 2.0) == 2.0);
}

TEST_CASE("deterministic walk straight up") {
    const Grid g = build_cartesian({3, 3, 1}, {3, 3, 1}, {});
    WalkOptions opt;
    opt.start_i = 1;
    opt.bias = {0.0, 0.0, 1.0, 0.0};
    const auto cells = fracture_random_walk(g, 5, opt).cells();
    CHECK(cells == std::vector<std::size_t>{g.cell_index(1, 0, 0), g.cell_index(1, 1, 0), g.cell_index(1, 2, 0)});
}

TEST_CASE("fracture walk is reproducible and spans the domain") {
    const Grid g = build_cartesian({100, 100, 1}, {10, 10, 10}, {});
    const auto a = fracture_random_walk(g, 42);
    const auto b = fracture_random_walk(g, 42);
    CHECK(a.steps == b.steps);
    bool bottom = false, top = false;
    for (auto c : a.cells()) {
        const auto ijk = g.cell_coords(c);
        bottom = bottom || ijk[1] == 0;
        top = top || ijk[1] == 99;
    }
    CHECK(bottom);
    CHECK(top);
    // each step moves to a face neighbour
    for (std::size_t s = 1; s < a.steps.size(); ++s) {
        const auto p = g.cell_coords(a.steps[s - 1]), q = g.cell_coords(a.steps[s]);
        CHECK(std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]) == 1);
    }
    CHECK(fracture_random_walk(g, 43).steps != a.steps);
}

TEST_CASE("walk rejects bad weights and 3d grids") {
    const Grid g3 = build_cartesian({3, 3, 2}, {3, 3, 2}, {});
    CHECK_THROWS(fracture_random_walk(g3, 1));
    const Grid g = build_cartesian({3, 3, 1}, {3, 3, 1}, {});
    WalkOptions opt;
    opt.bias = {0.5, 0.5, 0.5, 0.0};
    CHECK_THROWS(fracture_random_walk(g, 1, opt));
}

TEST_CASE("point source mass equals concentration times volume") {
    const Grid g = build_cartesian({100, 100, 1}, {10, 10, 1}, {});
    const auto m = apply_initial_condition(g, PointSource{{4.95, 9.95, 0.5}, 1.0});
    const std::size_t src = nearest_cell(g, {4.95, 9.95, 0.5});
    for (std::size_t j = 0; j < m.size(); ++j) {
        CHECK(m[j] == doctest::Approx(j == src ? 0.01 : 0.0).epsilon(1e-14));
    }
    CHECK_THROWS(nearest_cell(g, {11.0, 1.0, 0.5}));
}

TEST_CASE("zero initial condition") {
    const Grid g = build_cartesian({4, 4, 1}, {1, 1, 1}, {});
    const auto m = apply_initial_condition(g, UniformConcentration{0.0});
    CHECK(std::all_of(m.begin(), m.end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("sine line initial condition") {
    const Grid g = build_cartesian({40, 3, 2}, {10, 3, 2}, {});
    const auto c = concentrations(g, apply_initial_condition(g, SineLine{}));
    for (std::size_t j = 0; j < c.size(); ++j) {
        const auto ijk = g.cell_coords(j);
        CHECK(c[j] >= 0.0);
        CHECK(c[j] <= 1.0);
        if (ijk[1] != 0 || ijk[2] != 0) {
            CHECK(c[j] == 0.0);
        } else {
            const double x = g.centroid(j).x;
            CHECK(c[j] == doctest::Approx(0.5 * (1 + std::sin(2 * M_PI * x / 10.0))));
        }
    }
    // the chosen formula is 0.5 at x = 0
    CHECK(0.5 * (1 + std::sin(0.0)) == 0.5);
}

TEST_CASE("cell set round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "asyncfv_cellset_test.txt").string();
    const std::vector<std::size_t> cells{1, 5, 9, 200};
    write_cell_set(cells, path);
    CHECK(read_cell_set(path) == cells);
    std::filesystem::remove(path);
}
