#include "asyncfv/reference.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "asyncfv/io.hpp"
#include "asyncfv/norms.hpp"

namespace asyncfv {

namespace {

double inf_norm(const SparseOperator& op) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(op.rows());
    for (Eigen::Index col = 0; col < op.outerSize(); ++col) {
        for (SparseOperator::InnerIterator it(op, col); it; ++it) {
            rows[it.row()] += std::abs(it.value());
        }
    }
    return rows.size() ? rows.maxCoeff() : 0.0;
}

double round_step(double t) {
    if (!std::isfinite(t) || t <= 0.0) {
        return t;
    }
    const double s = std::pow(10.0, std::floor(std::log10(t)) - 1.0);
    return std::ceil(t / s) * s;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Eigen::VectorXd krylov_expv(const SparseOperator& op, const Eigen::VectorXd& v, double t,
                            const KrylovOptions& opts) {
    const Eigen::Index n = v.size();
    const double normv = v.norm();
    if (t == 0.0 || normv == 0.0 || n == 0) {
        return v;
    }
    const double anorm = inf_norm(op);
    if (anorm == 0.0) {
        return v;
    }
    if (n == 1) {
        return v * std::exp(t * op.coeff(0, 0));
    }
    const int m = static_cast<int>(std::min<Eigen::Index>(std::max(2, opts.basis_size), n));
    const double t_out = std::abs(t);
    const double sgn = t > 0.0 ? 1.0 : -1.0;
    const double tol = opts.rel_tol * normv / t_out;
    const double btol = 1e-13 * anorm;
    const double gamma = 0.9;
    const double delta = 1.2;
    const double rndoff = anorm * std::numeric_limits<double>::epsilon();

    double xm = 1.0 / m;
    double beta = normv;
    const double fact = std::pow((m + 1) / std::exp(1.0), m + 1) * std::sqrt(2.0 * M_PI * (m + 1));
    double t_new = round_step((1.0 / anorm) * std::pow((fact * tol) / (4.0 * beta * anorm), xm));
    double t_now = 0.0;
    double s_error = 0.0;

    Eigen::VectorXd w = v;
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H(m + 2, m + 2);
    Eigen::VectorXd p(n);
    while (t_now < t_out) {
        double t_step = std::min(t_out - t_now, t_new);
        V.col(0) = w / beta;
        H.setZero();
        int k1 = 2;
        int mb = m;
        for (int j = 0; j < m; ++j) {
            p.noalias() = op * V.col(j);
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(p);
                p -= H(i, j) * V.col(i);
            }
            const double s = p.norm();
            if (s < btol) {
                k1 = 0;
                mb = j + 1;
                t_step = t_out - t_now;
                break;
            }
            H(j + 1, j) = s;
            V.col(j + 1) = p / s;
        }
        double avnorm = 0.0;
        if (k1 != 0) {
            H(m + 1, m) = 1.0;
            avnorm = (op * V.col(m)).norm();
        }
        Eigen::MatrixXd F;
        double err_loc = 0.0;
        for (int ireject = 0;; ++ireject) {
            const int mx = mb + k1;
            F = (sgn * t_step * H.topLeftCorner(mx, mx)).exp();
            if (k1 == 0) {
                err_loc = btol;
                break;
            }
            const double phi1 = std::abs(beta * F(m, 0));
            const double phi2 = std::abs(beta * F(m + 1, 0) * avnorm);
            if (phi1 > 10.0 * phi2) {
                err_loc = phi2;
                xm = 1.0 / m;
            } else if (phi1 > phi2) {
                err_loc = (phi1 * phi2) / (phi1 - phi2);
                xm = 1.0 / m;
            } else {
                err_loc = phi1;
                xm = 1.0 / (m - 1);
            }
            if (err_loc <= delta * t_step * tol) {
                break;
            }
            if (ireject >= opts.max_rejections) {
                std::ostringstream msg;
                msg << "krylov_expv: no convergence at t=" << t_now << " of " << t_out << " (step " << t_step
                    << ", local error " << err_loc << " > " << delta * t_step * tol << ")";
                throw KrylovError(msg.str());
            }
            t_step = round_step(gamma * t_step * std::pow(t_step * tol / err_loc, xm));
        }
        const int mx = mb + std::max(0, k1 - 1);
        w = V.leftCols(mx) * (beta * F.col(0).head(mx));
        beta = w.norm();
        t_now += t_step;
        t_new = err_loc > 0.0 ? round_step(gamma * t_step * std::pow(t_step * tol / err_loc, xm)) : t_out;
        s_error += std::max(err_loc, rndoff);
        if (beta == 0.0) {
            break;
        }
    }
    return w;
}

std::vector<double> expm_apply(const SparseOperator& op, std::span<const double> m0, double t, ExpmMethod method) {
    if (t < 0.0) {
        throw std::invalid_argument("expm_apply: t must be >= 0");
    }
    if (static_cast<Eigen::Index>(m0.size()) != op.cols()) {
        throw std::invalid_argument("expm_apply: vector length does not match operator");
    }
    if (t == 0.0) {
        return {m0.begin(), m0.end()};
    }
    if (method == ExpmMethod::Auto) {
        method = m0.size() <= kDenseExpmLimit ? ExpmMethod::Dense : ExpmMethod::Krylov;
    }
    const Eigen::VectorXd v = as_vector(m0);
    if (method == ExpmMethod::Dense) {
        const Eigen::MatrixXd a = Eigen::MatrixXd(op) * t;
        const Eigen::MatrixXd e = a.exp();
        return to_std(e * v);
    }
    return to_std(krylov_expv(op, v, t));
}

Eigen::VectorXd phi1_apply(const Eigen::MatrixXd& mat, const Eigen::VectorXd& vec, double t) {
    if (mat.rows() != mat.cols() || mat.rows() != vec.size()) {
        throw std::invalid_argument("phi1_apply: dimension mismatch");
    }
    const Eigen::Index n = mat.rows();
    if (n > kPhi1DimensionCap) {
        throw std::length_error("phi1_apply: dimension " + std::to_string(n) + " exceeds cap " +
                                std::to_string(kPhi1DimensionCap));
    }
    // exp([[tC, v], [0, 0]]) = [[e^{tC}, phi1(tC) v], [0, 1]]
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = t * mat;
    aug.topRightCorner(n, 1) = vec;
    const Eigen::MatrixXd e = aug.exp();
    return e.topRightCorner(n, 1);
}

namespace {

void react(const Grid& grid, std::vector<double>& mass, const ReactionTerm& r, double dt, int substeps) {
    const double h = dt / substeps;
    for (std::size_t j = 0; j < mass.size(); ++j) {
        const double vol = grid.volume(j);
        double c = mass[j] / vol;
        for (int s = 0; s < substeps; ++s) {
            const double k1 = r.rate(c);
            const double k2 = r.rate(c + 0.5 * h * k1);
            const double k3 = r.rate(c + 0.5 * h * k2);
            const double k4 = r.rate(c + h * k3);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!std::isfinite(c)) {
            throw std::runtime_error("reaction reference: non-finite concentration in cell " + std::to_string(j));
        }
        mass[j] = c * vol;
    }
}

double concentration_difference(const Grid& grid, std::span<const double> a, std::span<const double> b) {
    return discrete_l2_error(concentrations(grid, a), concentrations(grid, b));
}

}  // namespace

std::vector<double> strang_integrate(const Grid& grid, const SparseOperator& op, std::span<const double> m0,
                                     const ReactionTerm& reaction, double final_time, std::size_t steps,
                                     int rk4_substeps) {
    if (steps == 0) {
        throw std::invalid_argument("strang_integrate: steps must be >= 1");
    }
    const double h = final_time / static_cast<double>(steps);
    KrylovOptions kopts;
    kopts.basis_size = 20;
    kopts.rel_tol = 1e-15;
    std::vector<double> m(m0.begin(), m0.end());
    Eigen::VectorXd v(static_cast<Eigen::Index>(m.size()));
    for (std::size_t n = 0; n < steps; ++n) {
        react(grid, m, reaction, 0.5 * h, rk4_substeps);
        v = as_vector(m);
        v = krylov_expv(op, v, h, kopts);
        std::copy(v.data(), v.data() + v.size(), m.begin());
        react(grid, m, reaction, 0.5 * h, rk4_substeps);
    }
    return m;
}

ReactionReference reference_reaction(const Grid& grid, std::span<const double> m0, const ReactionTerm& reaction,
                                     double final_time, double tol, const ReactionReferenceOptions& opts) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("reference_reaction: tol must be > 0");
    }
    const SparseOperator op = assemble_operator(grid);
    ReactionReference out;
    std::vector<double> prev_plain;
    std::vector<double> prev_extrap;
    std::vector<double> plain_diffs;
    for (std::size_t n = std::max<std::size_t>(1, opts.initial_steps);; n *= 2) {
        if (n > opts.max_steps) {
            throw std::runtime_error("reference_reaction: step count exceeded " + std::to_string(opts.max_steps) +
                                     " before reaching tol");
        }
        auto plain = strang_integrate(grid, op, m0, reaction, final_time, n, opts.rk4_substeps);
        ++out.levels;
        out.steps = n;
        if (!prev_plain.empty()) {
            plain_diffs.push_back(concentration_difference(grid, plain, prev_plain));
            if (plain_diffs.size() >= 2) {
                const auto k = plain_diffs.size();
                out.observed_order = std::log2(plain_diffs[k - 2] / plain_diffs[k - 1]);
            }
            if (opts.richardson) {
                std::vector<double> extrap(plain.size());
                for (std::size_t j = 0; j < plain.size(); ++j) {
                    extrap[j] = plain[j] + (plain[j] - prev_plain[j]) / 3.0;
                }
                if (!prev_extrap.empty()) {
                    const double d = concentration_difference(grid, extrap, prev_extrap);
                    out.level_differences.push_back(d);
                    if (d < tol) {
                        out.mass = std::move(extrap);
                        out.last_difference = d;
                        return out;
                    }
                }
                prev_extrap = std::move(extrap);
            } else {
                const double d = plain_diffs.back();
                out.level_differences.push_back(d);
                if (d < tol) {
                    out.mass = std::move(plain);
                    out.last_difference = d;
                    return out;
                }
            }
        }
        prev_plain = std::move(plain);
    }
}

ReferenceSolution compute_reference(const Grid& grid, std::span<const double> m0, double final_time,
                                    const std::optional<ReactionTerm>& reaction, double tol, ExpmMethod method) {
    ReferenceSolution ref;
    if (reaction) {
        auto r = reference_reaction(grid, m0, *reaction, final_time, tol);
        ref.mass = std::move(r.mass);
        ref.method = "strang-richardson steps=" + std::to_string(r.steps);
        ref.accuracy = r.last_difference;
    } else {
        if (method == ExpmMethod::Auto) {
            method = m0.size() <= kDenseExpmLimit ? ExpmMethod::Dense : ExpmMethod::Krylov;
        }
        ref.mass = expm_apply(assemble_operator(grid), m0, final_time, method);
        ref.method = method == ExpmMethod::Dense ? "expm-dense" : "expm-krylov";
    }
    ref.concentration = concentrations(grid, ref.mass);
    return ref;
}

std::uint64_t ReferenceCache::key(const Grid& grid, std::span<const double> m0, double final_time,
                                  const std::string& method, double tol, const std::string& reaction) {
    Hasher h;
    h.value(grid.hash()).doubles(m0).value(final_time).text(method).value(tol).text(reaction);
    return h.digest();
}

std::string ReferenceCache::path_for(std::uint64_t key) const {
    return (std::filesystem::path(dir_) / ("ref_" + hex64(key) + ".csv")).string();
}

std::optional<ReferenceSolution> ReferenceCache::load(std::uint64_t key) const {
    std::ifstream in(path_for(key));
    if (!in) {
        return std::nullopt;
    }
    ReferenceSolution ref;
    std::string line;
    bool keyed = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            if (line.rfind("# key=", 0) == 0) {
                keyed = line.substr(6) == hex64(key);
            } else if (line.rfind("# method=", 0) == 0) {
                ref.method = line.substr(9);
            } else if (line.rfind("# accuracy=", 0) == 0) {
                ref.accuracy = std::stod(line.substr(11));
            }
            continue;
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
        if (ec != std::errc{}) {
            return std::nullopt;
        }
        ref.mass.push_back(value);
    }
    if (!keyed) {
        return std::nullopt;
    }
    return ref;
}

void ReferenceCache::store(std::uint64_t key, const ReferenceSolution& ref) const {
    const auto final_path = path_for(key);
    const auto tmp = final_path + ".tmp";
    {
        auto out = open_output(tmp);
        out << "# asyncfv " << kToolVersion << " reference\n";
        out << "# key=" << hex64(key) << '\n';
        out << "# method=" << ref.method << '\n';
        out << "# accuracy=" << format_double(ref.accuracy) << '\n';
        for (double m : ref.mass) {
            out << format_double(m) << '\n';
        }
    }
    std::filesystem::rename(tmp, final_path);
}

}  // namespace asyncfv
