#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "waveplm/threshold.hpp"

namespace waveplm {

/// Huber loss: quadratic inside [-lambda, lambda], linear outside.
inline double huber_rho(double u, double lambda) {
    const double au = std::abs(u);
    return au <= lambda ? 0.5 * u * u : lambda * au - 0.5 * lambda * lambda;
}

/// Huber influence (derivative of huber_rho): clamps u to [-lambda, lambda].
inline double huber_psi(double u, double lambda) {
    if (u > lambda) return lambda;
    if (u < -lambda) return -lambda;
    return u;
}

/// Huber reweighting factor psi(r)/r = min(1, lambda/|r|), with weight(0) = 1.
inline double huber_weight(double r, double lambda) {
    const double ar = std::abs(r);
    return ar <= lambda ? 1.0 : lambda / ar;
}

enum class RhoKind { huber, truncated_quadratic, hampel_scad };

inline std::string to_string(RhoKind k) {
    switch (k) {
        case RhoKind::huber: return "huber";
        case RhoKind::truncated_quadratic: return "truncated_quadratic";
        case RhoKind::hampel_scad: return "hampel_scad";
    }
    return "?";
}

/// A robust loss rho with its influence function psi = rho' and reweighting
/// factor psi(r)/r. Each loss is the M-estimation counterpart of a shrinkage
/// rule gamma through rho'(u) = u - gamma(u):
///   soft -> huber, hard -> truncated quadratic, scad -> hampel (three-part).
struct RhoFamily {
    RhoKind kind = RhoKind::huber;
    double lambda = 0.0;
    double scad_a = 3.7;

    static RhoFamily huber(double lambda) { return {RhoKind::huber, lambda, 3.7}; }
    static RhoFamily truncated_quadratic(double lambda) {
        return {RhoKind::truncated_quadratic, lambda, 3.7};
    }
    static RhoFamily hampel(double lambda, double a = 3.7) {
        if (a <= 2.0)
            throw std::invalid_argument("hampel parameter a must exceed 2");
        return {RhoKind::hampel_scad, lambda, a};
    }

    /// The loss paired with a given shrinkage rule (same lambda and, for scad,
    /// the same a).
    static RhoFamily paired_with(const ThresholdRule& rule) {
        switch (rule.kind) {
            case ThresholdKind::soft: return huber(rule.lambda);
            case ThresholdKind::hard: return truncated_quadratic(rule.lambda);
            case ThresholdKind::scad: return hampel(rule.lambda, rule.scad_a);
        }
        return huber(rule.lambda);
    }

    /// The shrinkage rule paired with this loss.
    ThresholdRule paired_rule() const {
        switch (kind) {
            case RhoKind::huber: return {ThresholdKind::soft, lambda, scad_a};
            case RhoKind::truncated_quadratic:
                return {ThresholdKind::hard, lambda, scad_a};
            case RhoKind::hampel_scad: return {ThresholdKind::scad, lambda, scad_a};
        }
        return {ThresholdKind::soft, lambda, scad_a};
    }

    double rho(double u) const {
        const double au = std::abs(u);
        switch (kind) {
            case RhoKind::huber:
                return huber_rho(u, lambda);
            case RhoKind::truncated_quadratic:
                return au <= lambda ? 0.5 * u * u : 0.5 * lambda * lambda;
            case RhoKind::hampel_scad: {
                const double a = scad_a;
                if (au <= lambda) return 0.5 * u * u;
                if (au <= 2.0 * lambda) return lambda * au - 0.5 * lambda * lambda;
                if (au <= a * lambda)
                    return 1.5 * lambda * lambda +
                           (a * lambda * au - 0.5 * au * au -
                            (2.0 * a - 2.0) * lambda * lambda) /
                               (a - 2.0);
                return 0.5 * (a + 1.0) * lambda * lambda;
            }
        }
        return 0.0;
    }

    double psi(double u) const {
        const double au = std::abs(u);
        const double sgn = u >= 0 ? 1.0 : -1.0;
        switch (kind) {
            case RhoKind::huber:
                return huber_psi(u, lambda);
            case RhoKind::truncated_quadratic:
                return au <= lambda ? u : 0.0;
            case RhoKind::hampel_scad: {
                const double a = scad_a;
                if (au <= lambda) return u;
                if (au <= 2.0 * lambda) return sgn * lambda;
                if (au <= a * lambda) return sgn * (a * lambda - au) / (a - 2.0);
                return 0.0;
            }
        }
        return 0.0;
    }

    /// psi(r) / r extended by continuity at r = 0 (always 1 there). Lies in
    /// [0, 1] for every member of the family.
    double weight(double r) const {
        if (r == 0.0) return 1.0;
        switch (kind) {
            case RhoKind::huber:
                return huber_weight(r, lambda);
            default:
                return psi(r) / r;
        }
    }

    double criterion(const VectorXd& residuals) const {
        double s = 0.0;
        for (Index i = 0; i < residuals.size(); ++i) s += rho(residuals[i]);
        return s;
    }
};

enum class HqAlgorithm { artur, legend };

inline std::string to_string(HqAlgorithm a) {
    return a == HqAlgorithm::artur ? "artur" : "legend";
}

inline HqAlgorithm hq_algorithm_from_string(const std::string& s) {
    if (s == "artur") return HqAlgorithm::artur;
    if (s == "legend") return HqAlgorithm::legend;
    throw std::invalid_argument("unknown solver '" + s +
                                "' (available: artur, legend)");
}

struct SolverOptions {
    HqAlgorithm algorithm = HqAlgorithm::artur;
    /// Relative-change stopping tolerance on beta. When the previous iterate's
    /// norm falls below 1e-12 the absolute change is compared instead.
    double delta = 1e-5;
    int max_iter = 2000;

    /// Conventional tolerances: a loose one for the multiplicative-weight
    /// scheme (whose steps are large) and a tight one for the additive scheme.
    static SolverOptions defaults_for(HqAlgorithm alg) {
        SolverOptions o;
        o.algorithm = alg;
        o.delta = (alg == HqAlgorithm::artur) ? 1e-5 : 1e-10;
        return o;
    }
};

struct SolverResult {
    VectorXd beta_hat;
    int iterations = 0;
    bool converged = false;
    /// Seconds spent inside the solve (initial factorization included).
    double wall_time = 0.0;
    /// Final value of sum_i rho(z_i - a_i . beta).
    double criterion_value = 0.0;
    /// ||A^T psi(r)|| at the returned beta (stationarity residual).
    double grad_norm = 0.0;
    /// criterion at the initial least-squares beta followed by its value after
    /// each update; non-increasing by construction of both schemes.
    std::vector<double> criterion_history;
};

namespace detail {

struct HqProblem {
    const MatrixXd& a;
    const VectorXd& z;
    Eigen::ColPivHouseholderQR<MatrixXd> qr;

    HqProblem(const MatrixXd& a_, const VectorXd& z_) : a(a_), z(z_) {
        const Index m = a.rows();
        const Index p = a.cols();
        if (z.size() != m)
            throw std::invalid_argument("solver: design has " + std::to_string(m) +
                                        " rows but z has " +
                                        std::to_string(z.size()));
        if (p < 1)
            throw std::invalid_argument("solver: design needs at least one column");
        if (m < p)
            throw std::invalid_argument("solver: fewer rows than columns (" +
                                        std::to_string(m) + " x " +
                                        std::to_string(p) + ")");
        qr.compute(a);
        const double tol = 1e-10 * a.norm();
        const Index r =
            (qr.matrixR().diagonal().head(p).cwiseAbs().array() > tol).count();
        if (r < p)
            throw std::runtime_error("solver: design is rank deficient (rank " +
                                     std::to_string(r) + " < " + std::to_string(p) +
                                     ")");
    }

    VectorXd least_squares(const VectorXd& rhs) const { return qr.solve(rhs); }
};

inline bool beta_step_converged(const VectorXd& beta_old, const VectorXd& beta_new,
                                double delta) {
    const double base = beta_old.norm();
    const double change = (beta_new - beta_old).norm();
    return (base < 1e-12 ? change : change / base) < delta;
}

} // namespace detail

/// Iteratively reweighted least squares for min_beta sum_i rho(z_i - a_i.beta):
/// each pass recomputes the weights c_i = psi(r_i)/r_i and solves the weighted
/// normal equations (A^T C A) beta = A^T C z afresh. Starts from the ordinary
/// least-squares fit. Throws std::runtime_error if the design (or a weighted
/// normal matrix, possible with redescending weights) is singular.
inline SolverResult artur_fit(const MatrixXd& a, const VectorXd& z,
                              const RhoFamily& rho, const SolverOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::HqProblem prob(a, z);
    const Index m = a.rows();
    const Index p = a.cols();

    SolverResult res;
    VectorXd beta = prob.least_squares(z);
    VectorXd r = z - a * beta;
    res.criterion_history.push_back(rho.criterion(r));

    VectorXd c(m);
    MatrixXd normal(p, p);
    VectorXd rhs(p);
    for (int it = 0; it < opts.max_iter; ++it) {
        for (Index i = 0; i < m; ++i) c[i] = rho.weight(r[i]);
        normal.noalias() = a.transpose() * c.asDiagonal() * a;
        rhs.noalias() = a.transpose() * (c.asDiagonal() * z);
        Eigen::LDLT<MatrixXd> ldlt(normal);
        const VectorXd d = ldlt.vectorD();
        if (ldlt.info() != Eigen::Success ||
            d.minCoeff() <= 1e-14 * std::max(1e-300, d.cwiseAbs().maxCoeff()))
            throw std::runtime_error(
                "artur: weighted normal matrix is not positive definite "
                "(all weights on some column direction vanished)");
        VectorXd beta_new = ldlt.solve(rhs);
        r = z - a * beta_new;
        res.criterion_history.push_back(rho.criterion(r));
        res.iterations = it + 1;
        const bool done = detail::beta_step_converged(beta, beta_new, opts.delta);
        beta = std::move(beta_new);
        if (done) {
            res.converged = true;
            break;
        }
    }

    res.beta_hat = beta;
    res.criterion_value = res.criterion_history.back();
    VectorXd psi_r(m);
    for (Index i = 0; i < m; ++i) psi_r[i] = rho.psi(r[i]);
    res.grad_norm = (a.transpose() * psi_r).norm();
    res.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Additive half-quadratic scheme for the same problem: one factorization of A
/// is reused for every pass, which solves the plain least-squares problem with
/// the modified response z - c, where c_i = r_i - psi(r_i) (exactly the paired
/// shrinkage rule applied to the residual). Starts from ordinary least squares.
inline SolverResult legend_fit(const MatrixXd& a, const VectorXd& z,
                               const RhoFamily& rho, const SolverOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::HqProblem prob(a, z);
    const Index m = a.rows();

    SolverResult res;
    VectorXd beta = prob.least_squares(z);
    VectorXd r = z - a * beta;
    res.criterion_history.push_back(rho.criterion(r));

    VectorXd zc(m);
    for (int it = 0; it < opts.max_iter; ++it) {
        for (Index i = 0; i < m; ++i) zc[i] = z[i] - (r[i] - rho.psi(r[i]));
        VectorXd beta_new = prob.least_squares(zc);
        r = z - a * beta_new;
        res.criterion_history.push_back(rho.criterion(r));
        res.iterations = it + 1;
        const bool done = detail::beta_step_converged(beta, beta_new, opts.delta);
        beta = std::move(beta_new);
        if (done) {
            res.converged = true;
            break;
        }
    }

    res.beta_hat = beta;
    res.criterion_value = res.criterion_history.back();
    VectorXd psi_r(m);
    for (Index i = 0; i < m; ++i) psi_r[i] = rho.psi(r[i]);
    res.grad_norm = (a.transpose() * psi_r).norm();
    res.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Dispatches on opts.algorithm.
inline SolverResult hq_fit(const MatrixXd& a, const VectorXd& z, const RhoFamily& rho,
                           const SolverOptions& opts) {
    return opts.algorithm == HqAlgorithm::artur ? artur_fit(a, z, rho, opts)
                                                : legend_fit(a, z, rho, opts);
}

} // namespace waveplm
