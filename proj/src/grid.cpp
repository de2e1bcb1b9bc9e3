#include "asyncfv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <type_traits>

#include "asyncfv/io.hpp"

namespace asyncfv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

}  // namespace

double harmonic_mean(double a, double b) {
    if (a <= 0.0 || b <= 0.0) {
        return 0.0;
    }
    return 2.0 * a * b / (a + b);
}

std::array<int, 3> Grid::cell_coords(std::size_t cell) const {
    const auto nx = static_cast<std::size_t>(dims_.nx);
    const auto ny = static_cast<std::size_t>(dims_.ny);
    return {static_cast<int>(cell % nx), static_cast<int>((cell / nx) % ny), static_cast<int>(cell / (nx * ny))};
}

std::uint64_t Grid::hash() const {
    Hasher h;
    h.value(static_cast<std::uint64_t>(dims_.nx)).value(static_cast<std::uint64_t>(dims_.ny));
    h.value(static_cast<std::uint64_t>(dims_.nz));
    h.value(extent_.x).value(extent_.y).value(extent_.z);
    h.value(velocity_.x).value(velocity_.y).value(velocity_.z);
    h.doubles(diffusivity_);
    return h.digest();
}

Grid build_cartesian(const Dims& dims, const Vec3& extent, const FieldSpec& fields) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
        throw std::invalid_argument("build_cartesian: cell counts must be >= 1");
    }
    if (!(extent.x > 0.0) || !(extent.y > 0.0) || !(extent.z > 0.0)) {
        throw std::invalid_argument("build_cartesian: extents must be > 0");
    }
    Grid g;
    g.dims_ = dims;
    g.extent_ = extent;
    g.velocity_ = fields.velocity;

    const std::size_t ncell = dims.cells();
    const double h[3] = {extent.x / dims.nx, extent.y / dims.ny, extent.z / dims.nz};
    const double vol = h[0] * h[1] * h[2];
    const double area[3] = {h[1] * h[2], h[0] * h[2], h[0] * h[1]};

    g.volumes_.assign(ncell, vol);
    g.centroids_.resize(ncell);
    for (std::size_t c = 0; c < ncell; ++c) {
        auto ijk = g.cell_coords(c);
        g.centroids_[c] = {(ijk[0] + 0.5) * h[0], (ijk[1] + 0.5) * h[1], (ijk[2] + 0.5) * h[2]};
    }

    g.diffusivity_ = std::visit(
        overloaded{
            [&](const UniformDiffusivity& u) { return std::vector<double>(ncell, u.value); },
            [&](const FractureDiffusivity& f) {
                std::vector<double> d(ncell, f.outside);
                for (auto c : f.cells) {
                    if (c >= ncell) {
                        throw std::invalid_argument("build_cartesian: fracture cell index out of range");
                    }
                    d[c] = f.inside;
                }
                return d;
            },
            [&](const ExplicitDiffusivity& e) {
                if (e.values.size() != ncell) {
                    throw std::invalid_argument("build_cartesian: explicit diffusivity has wrong length");
                }
                return e.values;
            }},
        fields.diffusivity);
    for (double d : g.diffusivity_) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw std::invalid_argument("build_cartesian: diffusivity must be finite and nonnegative");
        }
    }

    const int n[3] = {dims.nx, dims.ny, dims.nz};
    std::vector<std::vector<std::uint32_t>> per_cell(ncell);
    for (std::size_t c = 0; c < ncell; ++c) {
        auto ijk = g.cell_coords(c);
        for (int axis = 0; axis < 3; ++axis) {
            if (ijk[axis] + 1 >= n[axis]) {
                continue;
            }
            auto nb = ijk;
            nb[axis] += 1;
            Face f;
            f.id = g.faces_.size();
            f.cell_lo = c;
            f.cell_hi = g.cell_index(nb[0], nb[1], nb[2]);
            f.axis = axis;
            f.area = area[axis];
            f.dx = h[axis];
            f.d_face = harmonic_mean(g.diffusivity_[f.cell_lo], g.diffusivity_[f.cell_hi]);
            f.v_normal = fields.velocity[axis];
            per_cell[f.cell_lo].push_back(static_cast<std::uint32_t>(f.id));
            per_cell[f.cell_hi].push_back(static_cast<std::uint32_t>(f.id));
            g.faces_.push_back(f);
        }
    }

    g.cell_face_off_.assign(ncell + 1, 0);
    for (std::size_t c = 0; c < ncell; ++c) {
        std::sort(per_cell[c].begin(), per_cell[c].end());
        g.cell_face_off_[c + 1] = g.cell_face_off_[c] + per_cell[c].size();
        g.cell_face_idx_.insert(g.cell_face_idx_.end(), per_cell[c].begin(), per_cell[c].end());
    }

    g.assoc_off_.assign(g.faces_.size() + 1, 0);
    std::vector<std::uint32_t> merged;
    for (const auto& f : g.faces_) {
        auto a = g.cell_faces(f.cell_lo);
        auto b = g.cell_faces(f.cell_hi);
        merged.clear();
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
        g.assoc_off_[f.id + 1] = g.assoc_off_[f.id] + merged.size();
        g.assoc_idx_.insert(g.assoc_idx_.end(), merged.begin(), merged.end());
    }
    return g;
}

std::vector<std::size_t> FracturePath::cells() const {
    std::vector<std::size_t> out(steps);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

FracturePath fracture_random_walk(const Grid& grid, std::uint64_t seed, const WalkOptions& options) {
    const auto& d = grid.dims();
    if (d.nz != 1) {
        throw std::invalid_argument("fracture_random_walk: grid must be two-dimensional (nz = 1)");
    }
    const auto& b = options.bias;
    const double weights[4] = {b.plus_x, b.minus_x, b.plus_y, b.minus_y};
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw std::invalid_argument("fracture_random_walk: bias weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("fracture_random_walk: bias weights must sum to 1");
    }
    int i = options.start_i < 0 ? d.nx / 2 : options.start_i;
    int j = options.start_j;
    if (i >= d.nx || j < 0 || j >= d.ny) {
        throw std::invalid_argument("fracture_random_walk: start cell outside the grid");
    }

    static constexpr int di[4] = {1, -1, 0, 0};
    static constexpr int dj[4] = {0, 0, 1, -1};

    std::mt19937_64 rng(seed);
    FracturePath path;
    path.seed = seed;
    path.steps.push_back(grid.cell_index(i, j, 0));
    std::size_t count = 0;
    while (j < d.ny - 1) {
        if (++count > options.max_steps) {
            throw std::runtime_error("fracture_random_walk: exceeded " + std::to_string(options.max_steps) +
                                     " steps without reaching the +y boundary");
        }
        double w[4];
        double sum = 0.0;
        for (int m = 0; m < 4; ++m) {
            const int ni = i + di[m];
            const int nj = j + dj[m];
            const bool inside = ni >= 0 && ni < d.nx && nj >= 0 && nj < d.ny;
            w[m] = inside ? weights[m] : 0.0;
            sum += w[m];
        }
        if (sum <= 0.0) {
            throw std::runtime_error("fracture_random_walk: no admissible step from current cell");
        }
        const double u = unit_draw(rng) * sum;
        int pick = 3;
        double acc = 0.0;
        for (int m = 0; m < 4; ++m) {
            acc += w[m];
            if (u < acc && w[m] > 0.0) {
                pick = m;
                break;
            }
        }
        while (w[pick] <= 0.0) {
            --pick;
        }
        i += di[pick];
        j += dj[pick];
        path.steps.push_back(grid.cell_index(i, j, 0));
    }
    return path;
}

std::size_t nearest_cell(const Grid& grid, const Vec3& p) {
    const auto& e = grid.extent();
    if (p.x < 0.0 || p.y < 0.0 || p.z < 0.0 || p.x > e.x || p.y > e.y || p.z > e.z) {
        throw std::invalid_argument("location outside the domain");
    }
    const auto& d = grid.dims();
    int idx[3];
    for (int axis = 0; axis < 3; ++axis) {
        const double h = e[axis] / d[axis];
        // centroid of cell i is (i + 0.5) h; nearest is round(p/h - 0.5), ties to the lower cell
        const double s = p[axis] / h - 0.5;
        int i = static_cast<int>(std::ceil(s - 0.5));
        idx[axis] = std::clamp(i, 0, d[axis] - 1);
    }
    return grid.cell_index(idx[0], idx[1], idx[2]);
}

std::vector<double> apply_initial_condition(const Grid& grid, const InitialCondition& ic) {
    const std::size_t n = grid.cell_count();
    std::vector<double> c(n, 0.0);
    std::visit(overloaded{[&](const UniformConcentration& u) { std::fill(c.begin(), c.end(), u.value); },
                          [&](const PointSource& p) { c[nearest_cell(grid, p.location)] = p.value; },
                          [&](const SineLine&) {
                              const double lx = grid.extent().x;
                              for (int i = 0; i < grid.dims().nx; ++i) {
                                  const auto cell = grid.cell_index(i, 0, 0);
                                  const double x = grid.centroid(cell).x;
                                  c[cell] = 0.5 * (1.0 + std::sin(2.0 * M_PI * x / lx));
                              }
                          },
                          [&](const ExplicitConcentration& e) {
                              if (e.values.size() != n) {
                                  throw std::invalid_argument("explicit initial condition has wrong length");
                              }
                              c = e.values;
                          }},
               ic);
    for (std::size_t j = 0; j < n; ++j) {
        c[j] *= grid.volume(j);
    }
    return c;
}

std::vector<double> concentrations(const Grid& grid, std::span<const double> mass) {
    std::vector<double> c(mass.size());
    for (std::size_t j = 0; j < mass.size(); ++j) {
        c[j] = mass[j] / grid.volume(j);
    }
    return c;
}

void write_cells_csv(const Grid& grid, const std::string& path, const std::string& header_comment) {
    auto out = open_output(path);
    out << header_comment << "cell_id,x,y,z,volume,D\n";
    for (std::size_t j = 0; j < grid.cell_count(); ++j) {
        const auto& p = grid.centroid(j);
        out << j << ',' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ','
            << format_double(grid.volume(j)) << ',' << format_double(grid.diffusivity(j)) << '\n';
    }
}

void write_faces_csv(const Grid& grid, const std::string& path, const std::string& header_comment) {
    auto out = open_output(path);
    out << header_comment << "face_id,cell_lo,cell_hi,area,dx,d_face,v_normal\n";
    for (const auto& f : grid.faces()) {
        out << f.id << ',' << f.cell_lo << ',' << f.cell_hi << ',' << format_double(f.area) << ','
            << format_double(f.dx) << ',' << format_double(f.d_face) << ',' << format_double(f.v_normal) << '\n';
    }
}

void write_cell_set(std::span<const std::size_t> cells, const std::string& path) {
    auto out = open_output(path);
    for (auto c : cells) {
        out << c << '\n';
    }
}

std::vector<std::size_t> read_cell_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open cell set: " + path);
    }
    std::vector<std::size_t> cells;
    std::size_t c;
    while (in >> c) {
        cells.push_back(c);
    }
    return cells;
}

}  // namespace asyncfv
