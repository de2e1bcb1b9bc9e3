#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfv/discretization.hpp"
#include "asyncfv/grid.hpp"
#include "asyncfv/schemes.hpp"

namespace asyncfv {

/// Dense connection-matrix algebra of a small grid.
///   zhat: J x K, column k has +1 at cell_lo and -1 at cell_hi
///   c_matrix: K x K, L_i zhat_j = C(i, j) zhat_i
///   f0: L_k m0 = f0(k) zhat_k
struct ConnectionSystem {
    Eigen::MatrixXd zhat;
    Eigen::MatrixXd c_matrix;
    Eigen::VectorXd f0;
    std::vector<ConnectionCoeffs> coeffs;
};

inline constexpr std::size_t kDiagnosticFaceCap = 2000;

ConnectionSystem build_connection_system(const Grid& grid, std::span<const double> m0);

/// || e^{tL} m0 - m0 - t Zhat phi1(tC) f0 ||_2
double verify_exponential_identity(const ConnectionSystem& sys, const SparseOperator& op,
                                   std::span<const double> m0, double t);

struct StateRepresentationReport {
    /// Empty when any face reversed its transfer direction.
    std::optional<double> residual;
    std::vector<std::size_t> reversed_faces;
    /// Signed event counts, partial transfers folded in as dm / delta_m.
    Eigen::VectorXd signed_counts;
};

/// || m_n - m0 - delta_m Zhat s || for a finished run.
StateRepresentationReport verify_state_representation(const SimState& state, const ConnectionSystem& sys,
                                                      std::span<const double> m0, double delta_m);

struct FluxConsistencyReport {
    /// Per face: b m_hi - a m_lo from the final masses.
    Eigen::VectorXd direct;
    /// Per face: (delta_m C s + f0)_k.
    Eigen::VectorXd via_connection;
    double max_face_difference = 0.0;
    /// max |L m_n - (delta_m Zhat C s + Zhat f0)| over cells.
    double max_cell_difference = 0.0;
};

FluxConsistencyReport flux_consistency_check(const SimState& state, const ConnectionSystem& sys,
                                             const SparseOperator& op, double delta_m);

/// Largest real part of eig(C); reported, never enforced.
double max_eigenvalue_real_part(const ConnectionSystem& sys);

struct VerificationLine {
    std::string identity;
    std::string grid;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// "identity,grid,residual,tolerance,PASS|FAIL" lines with a header.
std::string format_verification_report(std::span<const VerificationLine> lines);

}  // namespace asyncfv
