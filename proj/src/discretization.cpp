#include "asyncfv/discretization.hpp"

#include <cmath>
#include <vector>

#include "asyncfv/io.hpp"

namespace asyncfv {

double face_flux(const Grid& grid, std::span<const double> mass, std::size_t k) {
    const Face& f = grid.face(k);
    const double c_lo = mass[f.cell_lo] / grid.volume(f.cell_lo);
    const double c_hi = mass[f.cell_hi] / grid.volume(f.cell_hi);
    const double c_up = f.v_normal >= 0.0 ? c_lo : c_hi;
    return f.d_face * (c_hi - c_lo) / f.dx - c_up * f.v_normal;
}

ConnectionCoeffs connection_coeffs(const Grid& grid, std::size_t k) {
    const Face& f = grid.face(k);
    const double v_lo = grid.volume(f.cell_lo);
    const double v_hi = grid.volume(f.cell_hi);
    const double diff = f.area * f.d_face / f.dx;
    const double adv = f.area * std::abs(f.v_normal);
    ConnectionCoeffs c;
    if (f.v_normal >= 0.0) {
        c.a = (diff + adv) / v_lo;
        c.b = diff / v_hi;
    } else {
        c.a = diff / v_lo;
        c.b = (diff + adv) / v_hi;
    }
    return c;
}

SparseOperator assemble_operator(const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.cell_count());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * grid.face_count());
    for (const auto& f : grid.faces()) {
        const auto c = connection_coeffs(grid, f.id);
        const auto lo = static_cast<Eigen::Index>(f.cell_lo);
        const auto hi = static_cast<Eigen::Index>(f.cell_hi);
        trip.emplace_back(lo, lo, -c.a);
        trip.emplace_back(lo, hi, c.b);
        trip.emplace_back(hi, lo, c.a);
        trip.emplace_back(hi, hi, -c.b);
    }
    SparseOperator op(n, n);
    op.setFromTriplets(trip.begin(), trip.end());
    op.makeCompressed();
    return op;
}

SparseOperator concentration_operator(const Grid& grid, const SparseOperator& mass_form) {
    Eigen::VectorXd vol(static_cast<Eigen::Index>(grid.cell_count()));
    for (std::size_t j = 0; j < grid.cell_count(); ++j) {
        vol[static_cast<Eigen::Index>(j)] = grid.volume(j);
    }
    SparseOperator out = vol.cwiseInverse().asDiagonal() * mass_form * vol.asDiagonal();
    out.makeCompressed();
    return out;
}

void write_operator_triplets(const SparseOperator& op, const std::string& path, const std::string& header_comment) {
    auto out = open_output(path);
    out << header_comment << "row,col,value\n";
    for (Eigen::Index col = 0; col < op.outerSize(); ++col) {
        for (SparseOperator::InnerIterator it(op, col); it; ++it) {
            out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
        }
    }
}

}  // namespace asyncfv
