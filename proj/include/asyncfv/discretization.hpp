#pragma once

#include <Eigen/SparseCore>
#include <span>
#include <string>

#include "asyncfv/grid.hpp"

namespace asyncfv {

/// Mass-form coupling of one face: dm_lo/dt = b m_hi - a m_lo = A_k f_k.
/// The face area is absorbed into a and b.
struct ConnectionCoeffs {
    double a = 0.0;  ///< [1/s], scales m_lo
    double b = 0.0;  ///< [1/s], scales m_hi

    double eigenvalue() const { return -(a + b); }
    /// A_k f_k for the given masses.
    double flow(double m_lo, double m_hi) const { return b * m_hi - a * m_lo; }
};

/// Column-major J x J operator acting on cell masses.
using SparseOperator = Eigen::SparseMatrix<double>;

/// Upwinded face flux f_k [mass / (m^2 s)]; positive means mass moves from
/// cell_hi into cell_lo.
double face_flux(const Grid& grid, std::span<const double> mass, std::size_t k);

ConnectionCoeffs connection_coeffs(const Grid& grid, std::size_t k);

/// L = sum_k L_k in mass form.
SparseOperator assemble_operator(const Grid& grid);

/// Concentration-form operator V^{-1} L V.
SparseOperator concentration_operator(const Grid& grid, const SparseOperator& mass_form);

void write_operator_triplets(const SparseOperator& op, const std::string& path,
                             const std::string& header_comment = {});

}  // namespace asyncfv
