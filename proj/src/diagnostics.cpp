#include "asyncfv/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>
#include <stdexcept>

#include "asyncfv/io.hpp"
#include "asyncfv/reference.hpp"

namespace asyncfv {

namespace {

Eigen::VectorXd as_vector(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ConnectionSystem build_connection_system(const Grid& grid, std::span<const double> m0) {
    const std::size_t nf = grid.face_count();
    const std::size_t nc = grid.cell_count();
    if (nf > kDiagnosticFaceCap) {
        throw std::length_error("build_connection_system: " + std::to_string(nf) + " faces exceeds cap " +
                                std::to_string(kDiagnosticFaceCap));
    }
    if (m0.size() != nc) {
        throw std::invalid_argument("build_connection_system: mass vector length does not match the grid");
    }
    const auto K = static_cast<Eigen::Index>(nf);
    ConnectionSystem sys;
    sys.zhat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nc), K);
    sys.c_matrix = Eigen::MatrixXd::Zero(K, K);
    sys.f0 = Eigen::VectorXd::Zero(K);
    sys.coeffs.reserve(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        const auto& f = grid.face(k);
        sys.coeffs.push_back(connection_coeffs(grid, k));
        const auto col = static_cast<Eigen::Index>(k);
        sys.zhat(static_cast<Eigen::Index>(f.cell_lo), col) = 1.0;
        sys.zhat(static_cast<Eigen::Index>(f.cell_hi), col) = -1.0;
        sys.f0[col] = sys.coeffs[k].flow(m0[f.cell_lo], m0[f.cell_hi]);
    }
    // L_i zhat_j = (b_i zhat_j[hi_i] - a_i zhat_j[lo_i]) zhat_i; only faces sharing a cell contribute
    for (std::size_t i = 0; i < nf; ++i) {
        const auto& fi = grid.face(i);
        for (auto j : grid.associated_faces(i)) {
            const auto& fj = grid.face(j);
            auto z = [&](std::size_t cell) {
                return cell == fj.cell_lo ? 1.0 : (cell == fj.cell_hi ? -1.0 : 0.0);
            };
            sys.c_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                sys.coeffs[i].b * z(fi.cell_hi) - sys.coeffs[i].a * z(fi.cell_lo);
        }
    }
    return sys;
}

double verify_exponential_identity(const ConnectionSystem& sys, const SparseOperator& op,
                                   std::span<const double> m0, double t) {
    const Eigen::VectorXd m = as_vector(m0);
    if (t == 0.0) {
        return 0.0;
    }
    const auto exact = expm_apply(op, m0, t, ExpmMethod::Dense);
    const Eigen::VectorXd lhs = Eigen::Map<const Eigen::VectorXd>(exact.data(), static_cast<Eigen::Index>(exact.size()));
    Eigen::VectorXd rhs = m;
    if (sys.c_matrix.rows() > 0) {
        rhs += t * sys.zhat * phi1_apply(sys.c_matrix, sys.f0, t);
    }
    return (lhs - rhs).norm();
}

StateRepresentationReport verify_state_representation(const SimState& state, const ConnectionSystem& sys,
                                                      std::span<const double> m0, double delta_m) {
    StateRepresentationReport rep;
    const auto K = sys.zhat.cols();
    if (static_cast<Eigen::Index>(state.signed_transfer.size()) != K) {
        throw std::invalid_argument("verify_state_representation: run does not match the connection system");
    }
    for (std::size_t k = 0; k < state.reversed.size(); ++k) {
        if (state.reversed[k]) {
            rep.reversed_faces.push_back(k);
        }
    }
    rep.signed_counts = Eigen::VectorXd(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        rep.signed_counts[k] = state.signed_transfer[static_cast<std::size_t>(k)] / delta_m;
    }
    if (!rep.reversed_faces.empty()) {
        return rep;
    }
    const Eigen::VectorXd mn = as_vector(state.mass);
    const Eigen::VectorXd m = as_vector(m0);
    rep.residual = (mn - m - delta_m * (sys.zhat * rep.signed_counts)).norm();
    return rep;
}

FluxConsistencyReport flux_consistency_check(const SimState& state, const ConnectionSystem& sys,
                                             const SparseOperator& op, double delta_m) {
    FluxConsistencyReport rep;
    const auto K = sys.zhat.cols();
    Eigen::VectorXd s(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        s[k] = state.signed_transfer[static_cast<std::size_t>(k)] / delta_m;
    }
    const Eigen::VectorXd mn = as_vector(state.mass);
    rep.direct = Eigen::VectorXd(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto col = sys.zhat.col(k);
        Eigen::Index lo = 0, hi = 0;
        for (Eigen::Index j = 0; j < col.size(); ++j) {
            if (col[j] > 0.0) lo = j;
            if (col[j] < 0.0) hi = j;
        }
        rep.direct[k] = sys.coeffs[static_cast<std::size_t>(k)].flow(mn[lo], mn[hi]);
    }
    rep.via_connection = delta_m * (sys.c_matrix * s) + sys.f0;
    rep.max_face_difference = K ? (rep.direct - rep.via_connection).cwiseAbs().maxCoeff() : 0.0;
    const Eigen::VectorXd lm = op * mn;
    const Eigen::VectorXd rhs = sys.zhat * rep.via_connection;
    rep.max_cell_difference = lm.size() ? (lm - rhs).cwiseAbs().maxCoeff() : 0.0;
    return rep;
}

double max_eigenvalue_real_part(const ConnectionSystem& sys) {
    if (sys.c_matrix.rows() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(sys.c_matrix, false);
    return es.eigenvalues().real().maxCoeff();
}

std::string format_verification_report(std::span<const VerificationLine> lines) {
    std::ostringstream out;
    out << "identity,grid,residual,tolerance,result\n";
    for (const auto& l : lines) {
        out << l.identity << ',' << l.grid << ',' << format_double(l.value) << ',' << format_double(l.tolerance)
            << ',' << (l.pass ? "PASS" : "FAIL") << '\n';
    }
    return out.str();
}

}  // namespace asyncfv
