#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace asyncfv {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

/// Cell counts per axis.
struct Dims {
    int nx = 1;
    int ny = 1;
    int nz = 1;

    std::size_t cells() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
};

/// Interior face between two cells. cell_hi is the +axis neighbour of cell_lo,
/// so the unit vector from lo to hi is +e_axis.
struct Face {
    std::size_t id = 0;
    std::size_t cell_lo = 0;
    std::size_t cell_hi = 0;
    int axis = 0;
    double area = 0.0;
    double dx = 0.0;
    double d_face = 0.0;
    double v_normal = 0.0;
};

struct UniformDiffusivity {
    double value = 1.0;
};

/// Diffusivity `inside` on the listed cells and `outside` everywhere else.
struct FractureDiffusivity {
    std::vector<std::size_t> cells;
    double inside = 100.0;
    double outside = 0.1;
};

/// Per-cell diffusivity in cell-index order.
struct ExplicitDiffusivity {
    std::vector<double> values;
};

using DiffusivitySpec = std::variant<UniformDiffusivity, FractureDiffusivity, ExplicitDiffusivity>;

/// Concentration `value` in the cell whose centroid is nearest `location`.
struct PointSource {
    Vec3 location;
    double value = 1.0;
};

/// c = 0.5 (1 + sin(2 pi x / Lx)) on the cells with y- and z-index 0.
struct SineLine {};

struct UniformConcentration {
    double value = 0.0;
};

struct ExplicitConcentration {
    std::vector<double> values;
};

using InitialCondition = std::variant<UniformConcentration, PointSource, SineLine, ExplicitConcentration>;

struct FieldSpec {
    DiffusivitySpec diffusivity = UniformDiffusivity{};
    Vec3 velocity;
    InitialCondition initial = UniformConcentration{};
};

/// Static Cartesian finite-volume geometry. Immutable after construction.
class Grid {
public:
    Grid() = default;

    const Dims& dims() const { return dims_; }
    const Vec3& extent() const { return extent_; }
    std::size_t cell_count() const { return volumes_.size(); }
    std::size_t face_count() const { return faces_.size(); }

    double volume(std::size_t cell) const { return volumes_[cell]; }
    const Vec3& centroid(std::size_t cell) const { return centroids_[cell]; }
    double diffusivity(std::size_t cell) const { return diffusivity_[cell]; }
    std::span<const double> volumes() const { return volumes_; }
    std::span<const double> diffusivities() const { return diffusivity_; }

    const Face& face(std::size_t k) const { return faces_[k]; }
    std::span<const Face> faces() const { return faces_; }

    /// Faces of `cell`, ascending.
    std::span<const std::uint32_t> cell_faces(std::size_t cell) const {
        return {cell_face_idx_.data() + cell_face_off_[cell], cell_face_off_[cell + 1] - cell_face_off_[cell]};
    }

    /// All faces of the two cells adjacent to face k, ascending, k included.
    std::span<const std::uint32_t> associated_faces(std::size_t k) const {
        return {assoc_idx_.data() + assoc_off_[k], assoc_off_[k + 1] - assoc_off_[k]};
    }

    std::size_t cell_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims_.nx) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(k));
    }
    std::array<int, 3> cell_coords(std::size_t cell) const;

    double domain_volume() const { return extent_.x * extent_.y * extent_.z; }

    /// Stable digest of geometry and fields, used for reference-cache keys.
    std::uint64_t hash() const;

private:
    friend Grid build_cartesian(const Dims&, const Vec3&, const FieldSpec&);

    Dims dims_;
    Vec3 extent_;
    Vec3 velocity_;
    std::vector<double> volumes_;
    std::vector<Vec3> centroids_;
    std::vector<double> diffusivity_;
    std::vector<Face> faces_;
    std::vector<std::size_t> cell_face_off_;
    std::vector<std::uint32_t> cell_face_idx_;
    std::vector<std::size_t> assoc_off_;
    std::vector<std::uint32_t> assoc_idx_;
};

double harmonic_mean(double a, double b);

/// Builds a Cartesian grid with no-flow outer boundaries. Cells are indexed
/// with x fastest, then y, then z. Faces are enumerated per cell in index
/// order, +x then +y then +z.
Grid build_cartesian(const Dims& dims, const Vec3& extent, const FieldSpec& fields);

/// Step probabilities of the fracture walk.
struct WalkBias {
    double plus_x = 0.25;
    double minus_x = 0.25;
    double plus_y = 0.5;
    double minus_y = 0.0;
};

struct WalkOptions {
    /// Start (x-index, y-index); negative x-index means nx/2.
    int start_i = -1;
    int start_j = 0;
    WalkBias bias;
    std::size_t max_steps = 1'000'000;
};

struct FracturePath {
    std::vector<std::size_t> steps;  ///< visited cells in walk order, revisits included
    std::uint64_t seed = 0;

    std::vector<std::size_t> cells() const;  ///< unique, ascending
};

/// Weighted random walk from the start cell until the top (y = ny-1) row is reached.
FracturePath fracture_random_walk(const Grid& grid, std::uint64_t seed, const WalkOptions& options = {});

/// Cell masses m_j = c_j V_j for the given initial condition.
std::vector<double> apply_initial_condition(const Grid& grid, const InitialCondition& ic);

/// Index of the cell whose centroid is nearest `p`; throws if p lies outside the domain.
std::size_t nearest_cell(const Grid& grid, const Vec3& p);

std::vector<double> concentrations(const Grid& grid, std::span<const double> mass);

void write_cells_csv(const Grid& grid, const std::string& path, const std::string& header_comment = {});
void write_faces_csv(const Grid& grid, const std::string& path, const std::string& header_comment = {});
void write_cell_set(std::span<const std::size_t> cells, const std::string& path);
std::vector<std::size_t> read_cell_set(const std::string& path);

}  // namespace asyncfv
