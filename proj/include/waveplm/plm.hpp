#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "waveplm/backfit.hpp"
#include "waveplm/dwt.hpp"
#include "waveplm/robust.hpp"
#include "waveplm/threshold.hpp"

namespace waveplm {

enum class LambdaMode { universal, fixed };
enum class SigmaMode { qr_mad, naive_mad, fixed };

inline std::string to_string(LambdaMode m) {
    return m == LambdaMode::universal ? "universal" : "fixed";
}
inline std::string to_string(SigmaMode m) {
    switch (m) {
        case SigmaMode::qr_mad: return "qr_mad";
        case SigmaMode::naive_mad: return "naive_mad";
        case SigmaMode::fixed: return "fixed";
    }
    return "?";
}

/// Configuration of a partially linear fit. Defaults reproduce the standard
/// setup: sym8 filter, coarse level 3, soft shrinkage with the universal
/// threshold, noise scale from the QR-corrected MAD of the finest details.
struct PlmConfig {
    std::string filter = "sym8";
    int j0 = 3;
    ThresholdKind rule = ThresholdKind::soft;
    double scad_a = 3.7;
    LambdaMode lambda_mode = LambdaMode::universal;
    double lambda_fixed = 0.0;
    SigmaMode sigma_mode = SigmaMode::qr_mad;
    double sigma_fixed = 0.0;
    SolverOptions solver = SolverOptions::defaults_for(HqAlgorithm::artur);

    ThresholdRule rule_at(double lambda) const { return {rule, lambda, scad_a}; }
};

/// Result of a partially linear fit. theta_hat lives in the flattened
/// coefficient ordering (scaling block first, detail blocks coarse-to-fine);
/// f_hat is its inverse transform, i.e. the nonparametric component evaluated
/// at the sample points.
struct PlmFit {
    VectorXd beta_hat;
    VectorXd theta_hat;
    VectorXd f_hat;
    SigmaEstimate sigma;
    double lambda = 0.0;

    std::string method;   // "artur", "legend", or "backfit"
    int iterations = 0;
    bool converged = true;
    double wall_time = 0.0;
    /// Robust criterion sum rho(z_i - a_i.beta) over penalized rows for the
    /// half-quadratic path; penalized least-squares criterion for backfit.
    double criterion_value = 0.0;
    /// Stationarity residual of the solver (0 for the backfit path).
    double grad_norm = 0.0;

    Index n = 0;
    Index p = 0;
    std::string filter;
    int j0 = 0;
    ThresholdKind rule = ThresholdKind::soft;
};

namespace detail {

struct DomainInfo {
    Index n = 0;
    Index p = 0;
    Index n_scaling = 0; // count of leading unpenalized coefficients
};

inline DomainInfo check_domain(const VectorXd& z, const MatrixXd& a, int j0) {
    DomainInfo d;
    d.n = z.size();
    d.p = a.cols();
    const int J = log2_exact(d.n);
    if (j0 < 0 || j0 >= J)
        throw std::invalid_argument("coarse level j0 = " + std::to_string(j0) +
                                    " must satisfy 0 <= j0 < J = " + std::to_string(J));
    if (d.p > 0 && a.rows() != d.n)
        throw std::invalid_argument("design has " + std::to_string(a.rows()) +
                                    " rows but the response has " +
                                    std::to_string(d.n));
    if (2 * d.p >= d.n)
        throw std::invalid_argument(
            "need p < n/2 covariates so the finest-detail block can identify "
            "the noise scale (got p = " +
            std::to_string(d.p) + ", n = " + std::to_string(d.n) + ")");
    d.n_scaling = Index(1) << j0;
    return d;
}

inline SigmaEstimate resolve_sigma(const VectorXd& z, const MatrixXd& a,
                                   const DomainInfo& d, const PlmConfig& cfg) {
    const Index half = d.n / 2;
    switch (cfg.sigma_mode) {
        case SigmaMode::fixed:
            if (cfg.sigma_fixed < 0.0)
                throw std::invalid_argument("fixed sigma must be >= 0");
            return {cfg.sigma_fixed, SigmaMethod::fixed_value, 0};
        case SigmaMode::naive_mad:
            return {mad_sigma(z.tail(half)), SigmaMethod::mad_finest, half};
        case SigmaMode::qr_mad:
            if (d.p == 0)
                return {mad_sigma(z.tail(half)), SigmaMethod::mad_finest, half};
            return estimate_sigma_qr(a.bottomRows(half), z.tail(half));
    }
    throw std::logic_error("unreachable sigma mode");
}

inline double resolve_lambda(const SigmaEstimate& sigma, Index n,
                             const PlmConfig& cfg) {
    if (cfg.lambda_mode == LambdaMode::fixed) {
        if (cfg.lambda_fixed < 0.0)
            throw std::invalid_argument("fixed lambda must be >= 0");
        return cfg.lambda_fixed;
    }
    return universal_threshold(sigma.sigma_hat, n);
}

} // namespace detail

/// Core fit on data already in the coefficient domain: z is the flattened
/// transform of the response and the columns of a those of the covariates.
/// Steps: resolve the noise scale and threshold, estimate beta by robust
/// M-estimation on the penalized rows (the loss paired with cfg.rule), then
/// set theta to the raw residual on the scaling block and the shrunk residual
/// elsewhere. f_hat is reconstructed with cfg.filter.
inline PlmFit fit_plm_wavelet(const VectorXd& z, const MatrixXd& a,
                              const PlmConfig& cfg) {
    const WaveletFilter filter = wavelet_filter(cfg.filter);
    const auto d = detail::check_domain(z, a, cfg.j0);

    PlmFit fit;
    fit.n = d.n;
    fit.p = d.p;
    fit.filter = cfg.filter;
    fit.j0 = cfg.j0;
    fit.rule = cfg.rule;
    fit.sigma = detail::resolve_sigma(z, a, d, cfg);
    fit.lambda = detail::resolve_lambda(fit.sigma, d.n, cfg);

    const ThresholdRule rule = cfg.rule_at(fit.lambda);
    const Index npen = d.n - d.n_scaling;

    if (d.p > 0) {
        const RhoFamily rho = RhoFamily::paired_with(rule);
        const SolverResult sol = hq_fit(a.bottomRows(npen), z.tail(npen), rho,
                                        cfg.solver);
        fit.beta_hat = sol.beta_hat;
        fit.method = to_string(cfg.solver.algorithm);
        fit.iterations = sol.iterations;
        fit.converged = sol.converged;
        fit.wall_time = sol.wall_time;
        fit.criterion_value = sol.criterion_value;
        fit.grad_norm = sol.grad_norm;
    } else {
        fit.beta_hat = VectorXd(0);
        fit.method = "denoise";
        fit.converged = true;
    }

    const VectorXd e = d.p > 0 ? VectorXd(z - a * fit.beta_hat) : z;
    fit.theta_hat.resize(d.n);
    fit.theta_hat.head(d.n_scaling) = e.head(d.n_scaling);
    for (Index i = d.n_scaling; i < d.n; ++i) fit.theta_hat[i] = rule.apply(e[i]);
    fit.f_hat = dwt_inverse_flat(fit.theta_hat, filter, cfg.j0);
    return fit;
}

/// Fits the partially linear model y_i = x_i . beta + f(t_i) + noise on an
/// equispaced dyadic grid: transforms y and the columns of x, then delegates
/// to fit_plm_wavelet. x may have zero columns (pure denoising).
inline PlmFit fit_plm(const VectorXd& y, const MatrixXd& x, const PlmConfig& cfg) {
    const WaveletFilter filter = wavelet_filter(cfg.filter);
    log2_exact(y.size());
    if (x.cols() > 0 && x.rows() != y.size())
        throw std::invalid_argument("x has " + std::to_string(x.rows()) +
                                    " rows but y has " + std::to_string(y.size()));
    const VectorXd z = dwt_flat(y, filter, cfg.j0);
    const MatrixXd a = x.cols() > 0 ? dwt_matrix_columns(x, filter, cfg.j0)
                                    : MatrixXd(y.size(), 0);
    return fit_plm_wavelet(z, a, cfg);
}

/// Same pipeline with the coefficient estimate obtained by alternating
/// penalized least squares instead of M-estimation; lambda and sigma are
/// resolved exactly as in fit_plm. The backfit theta-step is the soft rule,
/// so cfg.rule should be soft for a like-for-like comparison.
inline PlmFit fit_plm_backfit(const VectorXd& y, const MatrixXd& x,
                              const PlmConfig& cfg, const BackfitOptions& opts) {
    const WaveletFilter filter = wavelet_filter(cfg.filter);
    log2_exact(y.size());
    if (x.cols() == 0)
        throw std::invalid_argument("backfit path requires at least one covariate");
    if (x.rows() != y.size())
        throw std::invalid_argument("x has " + std::to_string(x.rows()) +
                                    " rows but y has " + std::to_string(y.size()));
    const VectorXd z = dwt_flat(y, filter, cfg.j0);
    const MatrixXd a = dwt_matrix_columns(x, filter, cfg.j0);
    const auto d = detail::check_domain(z, a, cfg.j0);

    PlmFit fit;
    fit.n = d.n;
    fit.p = d.p;
    fit.filter = cfg.filter;
    fit.j0 = cfg.j0;
    fit.rule = ThresholdKind::soft;
    fit.sigma = detail::resolve_sigma(z, a, d, cfg);
    fit.lambda = detail::resolve_lambda(fit.sigma, d.n, cfg);

    BackfitOptions bf = opts;
    bf.lambda = fit.lambda;
    const BackfitResult res = backfit_plm(z, a, d.n_scaling + 1, bf);
    fit.beta_hat = res.beta_hat;
    fit.theta_hat = res.theta_hat;
    fit.f_hat = dwt_inverse_flat(fit.theta_hat, filter, cfg.j0);
    fit.method = "backfit";
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    fit.wall_time = res.wall_time;
    fit.criterion_value = res.criterion_value;
    fit.grad_norm = 0.0;
    return fit;
}

/// Discrepancy between the two-step robust fit and the alternating joint
/// minimizer of the same penalized criterion on identical data. For the
/// soft/huber pairing both solve the same convex problem, so the gaps should
/// be at solver-tolerance level.
struct EquivalenceReport {
    double delta_beta = 0.0;       // ||beta_two_step - beta_backfit||_2
    double delta_theta_inf = 0.0;  // ||theta_two_step - theta_backfit||_inf
    double criterion_two_step = 0.0;
    double criterion_backfit = 0.0;
    double lambda = 0.0;
};

inline EquivalenceReport equivalence_check(const VectorXd& y, const MatrixXd& x,
                                           PlmConfig cfg,
                                           double backfit_delta = 1e-12,
                                           int backfit_max_iter = 200000) {
    cfg.rule = ThresholdKind::soft;
    const WaveletFilter filter = wavelet_filter(cfg.filter);
    const VectorXd z = dwt_flat(y, filter, cfg.j0);
    const MatrixXd a = dwt_matrix_columns(x, filter, cfg.j0);
    const auto d = detail::check_domain(z, a, cfg.j0);

    const PlmFit two_step = fit_plm_wavelet(z, a, cfg);

    BackfitOptions bf;
    bf.lambda = two_step.lambda;
    bf.delta = backfit_delta;
    bf.max_iter = backfit_max_iter;
    const BackfitResult joint = backfit_plm(z, a, d.n_scaling + 1, bf);

    const auto criterion = [&](const VectorXd& beta, const VectorXd& theta) {
        return 0.5 * (z - a * beta - theta).squaredNorm() +
               two_step.lambda * theta.tail(d.n - d.n_scaling).lpNorm<1>();
    };

    EquivalenceReport rep;
    rep.lambda = two_step.lambda;
    rep.delta_beta = (two_step.beta_hat - joint.beta_hat).norm();
    rep.delta_theta_inf =
        (two_step.theta_hat - joint.theta_hat).lpNorm<Eigen::Infinity>();
    rep.criterion_two_step = criterion(two_step.beta_hat, two_step.theta_hat);
    rep.criterion_backfit = criterion(joint.beta_hat, joint.theta_hat);
    return rep;
}

} // namespace waveplm
