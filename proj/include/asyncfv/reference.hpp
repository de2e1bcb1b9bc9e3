#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncfv/discretization.hpp"
#include "asyncfv/grid.hpp"
#include "asyncfv/schemes.hpp"

namespace asyncfv {

enum class ExpmMethod { Auto, Dense, Krylov };

/// Cells at or below this count use the dense exponential under ExpmMethod::Auto.
inline constexpr std::size_t kDenseExpmLimit = 4096;

class KrylovError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KrylovOptions {
    int basis_size = 30;
    /// Target error relative to ||v||.
    double rel_tol = 1e-13;
    int max_rejections = 10;
};

/// exp(t A) v by restarted Arnoldi with adaptive substeps.
Eigen::VectorXd krylov_expv(const SparseOperator& op, const Eigen::VectorXd& v, double t,
                            const KrylovOptions& opts = {});

/// e^{tL} m0.
std::vector<double> expm_apply(const SparseOperator& op, std::span<const double> m0, double t,
                               ExpmMethod method = ExpmMethod::Auto);

/// phi_1(tC) v with phi_1(z) = (e^z - 1)/z = sum_{i>=0} z^i/(i+1)!, so that
/// t * phi1_apply(C, v, t) = sum_{i>=1} t^i C^{i-1} v / i!.
Eigen::VectorXd phi1_apply(const Eigen::MatrixXd& mat, const Eigen::VectorXd& vec, double t);

inline constexpr Eigen::Index kPhi1DimensionCap = 2000;

struct ReferenceSolution {
    std::vector<double> mass;
    std::vector<double> concentration;
    std::string method;
    /// Discrete-L2 estimate of the concentration error (0 when not estimated).
    double accuracy = 0.0;
};

struct ReactionReferenceOptions {
    std::size_t initial_steps = 16;
    std::size_t max_steps = std::size_t{1} << 20;
    /// Extrapolate successive Strang levels (error expansion is in even powers of h).
    bool richardson = true;
    int rk4_substeps = 2;
};

struct ReactionReference {
    std::vector<double> mass;
    std::size_t steps = 0;
    int levels = 0;
    /// Discrete-L2 concentration difference between the last two accepted levels.
    double last_difference = 0.0;
    /// Observed Strang order from the last three plain levels (NaN if fewer).
    double observed_order = 0.0;
    std::vector<double> level_differences;
};

/// One Strang step sequence: n steps of h/2 reaction, e^{hL}, h/2 reaction.
std::vector<double> strang_integrate(const Grid& grid, const SparseOperator& op, std::span<const double> m0,
                                     const ReactionTerm& reaction, double final_time, std::size_t steps,
                                     int rk4_substeps = 2);

/// Step halving until successive levels differ by less than tol.
ReactionReference reference_reaction(const Grid& grid, std::span<const double> m0, const ReactionTerm& reaction,
                                     double final_time, double tol, const ReactionReferenceOptions& opts = {});

/// Linear or reaction reference with a method descriptor and concentration.
ReferenceSolution compute_reference(const Grid& grid, std::span<const double> m0, double final_time,
                                    const std::optional<ReactionTerm>& reaction, double tol,
                                    ExpmMethod method = ExpmMethod::Auto);

/// On-disk cache of reference vectors, one CSV per key.
class ReferenceCache {
public:
    explicit ReferenceCache(std::string directory) : dir_(std::move(directory)) {}

    static std::uint64_t key(const Grid& grid, std::span<const double> m0, double final_time,
                             const std::string& method, double tol, const std::string& reaction);

    std::string path_for(std::uint64_t key) const;
    std::optional<ReferenceSolution> load(std::uint64_t key) const;
    void store(std::uint64_t key, const ReferenceSolution& ref) const;

private:
    std::string dir_;
};

}  // namespace asyncfv
