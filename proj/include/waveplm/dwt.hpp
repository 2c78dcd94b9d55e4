#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "waveplm/filters.hpp"

namespace waveplm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// Exact base-2 logarithm of a power of two; throws if n is not one.
inline int log2_exact(Index n) {
    if (!is_power_of_two(n))
        throw std::invalid_argument("length must be a positive power of two, got " +
                                    std::to_string(n));
    int j = 0;
    while ((Index(1) << j) < n) ++j;
    return j;
}

/// Multiresolution coefficient set of a length-2^J signal, decomposed down to
/// coarse level j0: one block of 2^j0 scaling coefficients plus detail blocks
/// at levels j0, j0+1, ..., J-1 (details[k] holds level j0+k, of size 2^(j0+k)).
///
/// Flattened ordering used throughout the library: scaling block first, then
/// detail blocks coarse-to-fine. With 1-based positions the scaling block
/// occupies 1..2^j0 and the first penalized (detail) position is
/// i0 = 2^j0 + 1; the finest-level details are the trailing 2^(J-1) entries.
struct WaveletCoeffs {
    int j0 = 0;
    int J = 0;
    VectorXd scaling;
    std::vector<VectorXd> details;

    Index size() const { return Index(1) << J; }
    Index scaling_count() const { return Index(1) << j0; }
    /// 1-based flattened position of the first penalized coefficient.
    Index i0() const { return scaling_count() + 1; }
    int levels() const { return J - j0; }

    /// Detail block of dyadic level j (j0 <= j < J).
    const VectorXd& detail(int j) const {
        if (j < j0 || j >= J)
            throw std::invalid_argument("detail level " + std::to_string(j) +
                                        " outside [j0, J) = [" + std::to_string(j0) +
                                        ", " + std::to_string(J) + ")");
        return details[static_cast<std::size_t>(j - j0)];
    }

    void validate() const {
        if (j0 < 0 || J <= j0)
            throw std::invalid_argument("wavelet coefficients require 0 <= j0 < J");
        if (scaling.size() != (Index(1) << j0))
            throw std::invalid_argument("scaling block size mismatch: expected " +
                                        std::to_string(Index(1) << j0) + ", got " +
                                        std::to_string(scaling.size()));
        if (details.size() != static_cast<std::size_t>(J - j0))
            throw std::invalid_argument("expected " + std::to_string(J - j0) +
                                        " detail blocks, got " +
                                        std::to_string(details.size()));
        for (int j = j0; j < J; ++j) {
            const auto& d = details[static_cast<std::size_t>(j - j0)];
            if (d.size() != (Index(1) << j))
                throw std::invalid_argument(
                    "detail block at level " + std::to_string(j) +
                    " has size " + std::to_string(d.size()) + ", expected " +
                    std::to_string(Index(1) << j));
        }
    }

    VectorXd flatten() const {
        validate();
        VectorXd flat(size());
        flat.head(scaling.size()) = scaling;
        Index pos = scaling.size();
        for (const auto& d : details) {
            flat.segment(pos, d.size()) = d;
            pos += d.size();
        }
        return flat;
    }

    static WaveletCoeffs from_flat(const VectorXd& flat, int j0) {
        const int J = log2_exact(flat.size());
        if (j0 < 0 || j0 >= J)
            throw std::invalid_argument("coarse level j0 = " + std::to_string(j0) +
                                        " must satisfy 0 <= j0 < J = " +
                                        std::to_string(J));
        WaveletCoeffs c;
        c.j0 = j0;
        c.J = J;
        c.scaling = flat.head(Index(1) << j0);
        Index pos = c.scaling.size();
        for (int j = j0; j < J; ++j) {
            c.details.push_back(flat.segment(pos, Index(1) << j));
            pos += Index(1) << j;
        }
        return c;
    }
};

namespace detail {

/// One periodized analysis step: even-shift circular correlations of s
/// (even length m) with the low- and high-pass taps, producing m/2
/// approximation and m/2 detail coefficients.
inline void analysis_step(const VectorXd& s, const std::vector<double>& lo,
                          const std::vector<double>& hi, VectorXd& approx,
                          VectorXd& det) {
    const Index m = s.size();
    const Index half = m / 2;
    const std::size_t L = lo.size();
    approx.resize(half);
    det.resize(half);
    for (Index k = 0; k < half; ++k) {
        double a = 0.0, d = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double x = s[(2 * k + static_cast<Index>(l)) % m];
            a += lo[l] * x;
            d += hi[l] * x;
        }
        approx[k] = a;
        det[k] = d;
    }
}

/// Adjoint of analysis_step: scatters each coefficient back through the taps,
/// reconstructing the length-m signal exactly (the periodized transform is
/// orthogonal, so synthesis is the transpose of analysis).
inline VectorXd synthesis_step(const VectorXd& approx, const VectorXd& det,
                               const std::vector<double>& lo,
                               const std::vector<double>& hi) {
    const Index half = approx.size();
    const Index m = 2 * half;
    const std::size_t L = lo.size();
    VectorXd s = VectorXd::Zero(m);
    for (Index k = 0; k < half; ++k) {
        const double a = approx[k];
        const double d = det[k];
        for (std::size_t l = 0; l < L; ++l)
            s[(2 * k + static_cast<Index>(l)) % m] += lo[l] * a + hi[l] * d;
    }
    return s;
}

} // namespace detail

/// Periodized orthonormal discrete wavelet transform of a length-2^J signal,
/// cascading analysis steps from the finest level down to coarse level j0.
/// Requires 0 <= j0 < J; throws std::invalid_argument otherwise (including
/// non-power-of-two lengths).
inline WaveletCoeffs dwt_forward(const VectorXd& signal, const WaveletFilter& filter,
                                 int j0) {
    const int J = log2_exact(signal.size());
    if (j0 < 0 || j0 >= J)
        throw std::invalid_argument("coarse level j0 = " + std::to_string(j0) +
                                    " must satisfy 0 <= j0 < J = " + std::to_string(J));
    const auto lo = filter.lowpass;
    const auto hi = filter.highpass();

    WaveletCoeffs c;
    c.j0 = j0;
    c.J = J;
    c.details.resize(static_cast<std::size_t>(J - j0));
    VectorXd work = signal, approx, det;
    for (int j = J - 1; j >= j0; --j) {
        detail::analysis_step(work, lo, hi, approx, det);
        c.details[static_cast<std::size_t>(j - j0)] = det;
        work.swap(approx);
    }
    c.scaling = work;
    return c;
}

/// Inverse transform; exact (to rounding) for any of the built-in filters.
inline VectorXd dwt_inverse(const WaveletCoeffs& coeffs, const WaveletFilter& filter) {
    coeffs.validate();
    const auto lo = filter.lowpass;
    const auto hi = filter.highpass();
    VectorXd work = coeffs.scaling;
    for (int j = coeffs.j0; j < coeffs.J; ++j)
        work = detail::synthesis_step(work, coeffs.detail(j), lo, hi);
    return work;
}

/// Convenience: forward transform returned in flattened ordering.
inline VectorXd dwt_flat(const VectorXd& signal, const WaveletFilter& filter, int j0) {
    return dwt_forward(signal, filter, j0).flatten();
}

/// Inverse transform from flattened ordering.
inline VectorXd dwt_inverse_flat(const VectorXd& flat, const WaveletFilter& filter,
                                 int j0) {
    return dwt_inverse(WaveletCoeffs::from_flat(flat, j0), filter);
}

/// Applies the transform to each column of x, returning the matrix whose
/// columns are the flattened coefficient vectors (i.e. W * x for the
/// orthogonal transform matrix W).
inline MatrixXd dwt_matrix_columns(const MatrixXd& x, const WaveletFilter& filter,
                                   int j0) {
    MatrixXd a(x.rows(), x.cols());
    for (Index c = 0; c < x.cols(); ++c)
        a.col(c) = dwt_flat(x.col(c), filter, j0);
    return a;
}

} // namespace waveplm
