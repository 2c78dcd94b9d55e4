#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveplm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Soft shrinkage: sign(u) * max(|u| - lambda, 0).
inline double soft_threshold(double u, double lambda) {
    if (u > lambda) return u - lambda;
    if (u < -lambda) return u + lambda;
    return 0.0;
}

/// Hard (keep-or-kill) rule: u if |u| > lambda, else 0.
inline double hard_threshold(double u, double lambda) {
    return std::abs(u) > lambda ? u : 0.0;
}

/// SCAD rule: soft shrinkage near zero, a linear blend on (lambda, a*lambda]
/// that removes the soft rule's constant bias, and identity beyond a*lambda.
/// Continuous in u for every a > 2.
inline double scad_threshold(double u, double lambda, double a = 3.7) {
    if (a <= 2.0)
        throw std::invalid_argument("scad parameter a must exceed 2, got " +
                                    std::to_string(a));
    const double au = std::abs(u);
    if (au <= 2.0 * lambda) return soft_threshold(u, lambda);
    if (au <= a * lambda)
        return ((a - 1.0) * u - (u > 0 ? 1.0 : -1.0) * a * lambda) / (a - 2.0);
    return u;
}

enum class ThresholdKind { soft, hard, scad };

inline std::string to_string(ThresholdKind k) {
    switch (k) {
        case ThresholdKind::soft: return "soft";
        case ThresholdKind::hard: return "hard";
        case ThresholdKind::scad: return "scad";
    }
    return "?";
}

inline ThresholdKind threshold_kind_from_string(const std::string& s) {
    if (s == "soft") return ThresholdKind::soft;
    if (s == "hard") return ThresholdKind::hard;
    if (s == "scad") return ThresholdKind::scad;
    throw std::invalid_argument("unknown threshold rule '" + s +
                                "' (available: soft, hard, scad)");
}

/// A shrinkage rule with its level fixed, applicable elementwise.
struct ThresholdRule {
    ThresholdKind kind = ThresholdKind::soft;
    double lambda = 0.0;
    double scad_a = 3.7;

    double apply(double u) const {
        switch (kind) {
            case ThresholdKind::soft: return soft_threshold(u, lambda);
            case ThresholdKind::hard: return hard_threshold(u, lambda);
            case ThresholdKind::scad: return scad_threshold(u, lambda, scad_a);
        }
        return u;
    }
};

/// Universal threshold sigma * sqrt(2 log n) for n coefficients.
inline double universal_threshold(double sigma, Index n) {
    if (sigma < 0.0)
        throw std::invalid_argument("universal threshold requires sigma >= 0");
    if (n < 1)
        throw std::invalid_argument("universal threshold requires n >= 1");
    return sigma * std::sqrt(2.0 * std::log(static_cast<double>(n)));
}

namespace detail {

inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    // Even count: midpoint of the two middle order statistics.
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Median absolute deviation estimate of a Gaussian scale:
/// median(|v - median(v)|) / 0.6745. Throws on an empty input.
inline double mad_sigma(const VectorXd& v) {
    if (v.size() == 0)
        throw std::invalid_argument("mad_sigma requires a non-empty vector");
    std::vector<double> w(v.data(), v.data() + v.size());
    const double med = detail::median_inplace(w);
    for (double& x : w) x = std::abs(x - med);
    return detail::median_inplace(w) / 0.6745;
}

enum class SigmaMethod { mad_finest, mad_qr, fixed_value };

inline std::string to_string(SigmaMethod m) {
    switch (m) {
        case SigmaMethod::mad_finest: return "mad_finest";
        case SigmaMethod::mad_qr: return "mad_qr";
        case SigmaMethod::fixed_value: return "fixed";
    }
    return "?";
}

struct SigmaEstimate {
    double sigma_hat = 0.0;
    SigmaMethod method = SigmaMethod::mad_finest;
    /// Number of residual-like values the MAD was taken over.
    Index n_used = 0;
};

/// Noise-scale estimate that is immune to a linear mean component: project the
/// finest-level coefficient rows onto the orthogonal complement of the design's
/// finest-level rows via a full QR, then take the MAD of the trailing
/// (rows - p) entries of Q^T z, which contain pure noise.
///
/// a_fine must have full column rank (tolerance 1e-10 * ||a_fine||) and
/// strictly more rows than columns; p = 0 degenerates to a plain MAD.
inline SigmaEstimate estimate_sigma_qr(const MatrixXd& a_fine, const VectorXd& z_fine) {
    const Index m = a_fine.rows();
    const Index p = a_fine.cols();
    if (z_fine.size() != m)
        throw std::invalid_argument("estimate_sigma_qr: design has " +
                                    std::to_string(m) + " rows but z has " +
                                    std::to_string(z_fine.size()));
    if (m <= p)
        throw std::invalid_argument(
            "estimate_sigma_qr requires more rows than columns (got " +
            std::to_string(m) + " x " + std::to_string(p) + ")");

    VectorXd tail;
    if (p == 0) {
        tail = z_fine;
    } else {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(a_fine);
        const double tol = 1e-10 * a_fine.norm();
        const Index r = (qr.matrixR().diagonal().head(std::min(m, p)).cwiseAbs().array() >
                         tol)
                            .count();
        if (r < p)
            throw std::runtime_error(
                "estimate_sigma_qr: design is rank deficient (rank " +
                std::to_string(r) + " < " + std::to_string(p) + ")");
        // Column pivoting permutes columns only, so the last m - p rows of Q^T
        // still annihilate the column space of a_fine.
        VectorXd qtz = qr.householderQ().transpose() * z_fine;
        tail = qtz.tail(m - p);
    }
    return {mad_sigma(tail), SigmaMethod::mad_qr, tail.size()};
}

} // namespace waveplm
