#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "waveplm/threshold.hpp"

namespace waveplm {

struct BackfitOptions {
    /// Penalty level applied to coefficients at positions >= i0.
    double lambda = 0.0;
    /// Relative-change stopping tolerance on beta across sweeps. The
    /// conventional default is far below double resolution, so the scheme
    /// normally runs until the iterate is an exact fixed point or max_iter.
    double delta = 1e-20;
    int max_iter = 2000;
};

struct BackfitResult {
    VectorXd beta_hat;
    VectorXd theta_hat;
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0;
    /// Final value of 0.5*||z - A beta - theta||^2 + lambda * sum_{i>=i0} |theta_i|.
    double criterion_value = 0.0;
    /// Criterion after every half-step (theta update, then beta update),
    /// starting from the initial (beta_ols, theta = 0) pair; non-increasing.
    std::vector<double> criterion_history;
};

/// Alternating exact minimization of the penalized least-squares criterion
/// over theta and beta:
///   theta-step: with beta fixed, theta_i = e_i below i0 and
///               theta_i = soft(e_i, lambda) from i0 on, where e = z - A beta;
///   beta-step:  with theta fixed, beta = least-squares fit of z - theta on A
///               (one factorization of A, computed once, serves every sweep).
/// Each half-step is an exact partial minimizer, so the criterion descends
/// monotonically; the criterion is convex and separable in the nonsmooth
/// variable, hence the scheme converges to a global minimizer.
///
/// i0 is the 1-based position of the first penalized coefficient in the
/// flattened ordering (i0 - 1 leading entries are unpenalized); it must lie in
/// [1, n + 1], where the extreme values mean "penalize everything"/"nothing".
inline BackfitResult backfit_plm(const VectorXd& z, const MatrixXd& a, Index i0,
                                 const BackfitOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const Index n = z.size();
    const Index p = a.cols();
    if (a.rows() != n)
        throw std::invalid_argument("backfit: design has " + std::to_string(a.rows()) +
                                    " rows but z has " + std::to_string(n));
    if (p < 1 || n < p)
        throw std::invalid_argument("backfit: design must be n x p with 1 <= p <= n");
    if (i0 < 1 || i0 > n + 1)
        throw std::invalid_argument("backfit: i0 = " + std::to_string(i0) +
                                    " outside [1, " + std::to_string(n + 1) + "]");
    if (opts.lambda < 0.0)
        throw std::invalid_argument("backfit: lambda must be >= 0");

    Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    {
        const double tol = 1e-10 * a.norm();
        const Index r =
            (qr.matrixR().diagonal().head(p).cwiseAbs().array() > tol).count();
        if (r < p)
            throw std::runtime_error("backfit: design is rank deficient (rank " +
                                     std::to_string(r) + " < " + std::to_string(p) +
                                     ")");
    }

    const Index n_unpen = i0 - 1;
    const double lambda = opts.lambda;
    const auto criterion = [&](const VectorXd& beta, const VectorXd& theta) {
        const double fit = 0.5 * (z - a * beta - theta).squaredNorm();
        return fit + lambda * theta.tail(n - n_unpen).lpNorm<1>();
    };

    BackfitResult res;
    VectorXd beta = qr.solve(z);
    VectorXd theta = VectorXd::Zero(n);
    res.criterion_history.push_back(criterion(beta, theta));

    for (int it = 0; it < opts.max_iter; ++it) {
        const VectorXd e = z - a * beta;
        theta.head(n_unpen) = e.head(n_unpen);
        for (Index i = n_unpen; i < n; ++i) theta[i] = soft_threshold(e[i], lambda);
        res.criterion_history.push_back(criterion(beta, theta));

        VectorXd beta_new = qr.solve(z - theta);
        res.criterion_history.push_back(criterion(beta_new, theta));
        res.iterations = it + 1;

        const double base = beta.norm();
        const double change = (beta_new - beta).norm();
        const bool done = (base < 1e-12 ? change : change / base) < opts.delta;
        beta = std::move(beta_new);
        if (done) {
            res.converged = true;
            break;
        }
    }

    // Refresh theta once more so the returned pair is exactly the partial
    // minimizer in theta at the returned beta (one extra descent half-step).
    {
        const VectorXd e = z - a * beta;
        theta.head(n_unpen) = e.head(n_unpen);
        for (Index i = n_unpen; i < n; ++i) theta[i] = soft_threshold(e[i], lambda);
        res.criterion_history.push_back(criterion(beta, theta));
    }

    res.beta_hat = beta;
    res.theta_hat = theta;
    res.criterion_value = res.criterion_history.back();
    res.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace waveplm
