#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "waveplm/threshold.hpp"

using namespace waveplm;

TEST_CASE("soft thresholding shrinks toward zero by exactly lambda") {
    REQUIRE(soft_threshold(3.0, 1.0) == Catch::Approx(2.0));
    REQUIRE(soft_threshold(-3.0, 1.0) == Catch::Approx(-2.0));
    REQUIRE(soft_threshold(0.5, 1.0) == 0.0);
    REQUIRE(soft_threshold(-0.5, 1.0) == 0.0);
    REQUIRE(soft_threshold(1.0, 1.0) == 0.0); // boundary is killed
    REQUIRE(soft_threshold(2.0, 0.0) == 2.0); // lambda = 0 is the identity
}

TEST_CASE("hard thresholding keeps or kills") {
    REQUIRE(hard_threshold(3.0, 1.0) == 3.0);
    REQUIRE(hard_threshold(-3.0, 1.0) == -3.0);
    REQUIRE(hard_threshold(0.5, 1.0) == 0.0);
    REQUIRE(hard_threshold(1.0, 1.0) == 0.0); // |u| must strictly exceed lambda
    REQUIRE(hard_threshold(1.0 + 1e-12, 1.0) == 1.0 + 1e-12);
}

TEST_CASE("scad thresholding blends soft shrinkage into the identity") {
    const double lam = 1.0;
    const double a = 3.7;

    // Soft branch below 2*lambda.
    REQUIRE(scad_threshold(1.5, lam, a) == Catch::Approx(soft_threshold(1.5, lam)));
    REQUIRE(scad_threshold(-1.5, lam, a) ==
            Catch::Approx(soft_threshold(-1.5, lam)));

    // Identity beyond a*lambda.
    REQUIRE(scad_threshold(5.0, lam, a) == 5.0);
    REQUIRE(scad_threshold(-5.0, lam, a) == -5.0);

    // Continuity at both branch points, each approached from both sides.
    for (double u0 : {2.0 * lam, a * lam}) {
        const double lo = scad_threshold(u0 - 1e-9, lam, a);
        const double hi = scad_threshold(u0 + 1e-9, lam, a);
        REQUIRE(std::abs(hi - lo) < 1e-7);
    }
    // The middle branch meets the neighbors exactly at the breakpoints.
    const double at2 = ((a - 1.0) * 2.0 * lam - a * lam) / (a - 2.0);
    REQUIRE(scad_threshold(2.0 * lam, lam, a) == Catch::Approx(at2).margin(1e-12));
    REQUIRE(soft_threshold(2.0 * lam, lam) == Catch::Approx(at2).margin(1e-12));
    const double at_a = ((a - 1.0) * a * lam - a * lam) / (a - 2.0);
    REQUIRE(at_a == Catch::Approx(a * lam).margin(1e-12));

    REQUIRE_THROWS_AS(scad_threshold(1.0, 1.0, 2.0), std::invalid_argument);
    REQUIRE_THROWS_AS(scad_threshold(1.0, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("all rules are odd and monotone") {
    std::vector<ThresholdRule> rules = {{ThresholdKind::soft, 0.8, 3.7},
                                        {ThresholdKind::hard, 0.8, 3.7},
                                        {ThresholdKind::scad, 0.8, 3.7}};
    for (const auto& rule : rules) {
        double prev = -1e18;
        for (double u = -4.0; u <= 4.0; u += 0.01) {
            const double v = rule.apply(u);
            INFO(to_string(rule.kind) << " at u = " << u);
            REQUIRE(rule.apply(-u) == Catch::Approx(-v).margin(1e-14));
            REQUIRE(v >= prev - 1e-12); // nondecreasing
            REQUIRE(std::abs(v) <= std::abs(u) + 1e-14); // never expands
            prev = v;
        }
    }
}

TEST_CASE("rule objects dispatch to the free functions") {
    ThresholdRule soft{ThresholdKind::soft, 1.5, 3.7};
    ThresholdRule hard{ThresholdKind::hard, 1.5, 3.7};
    ThresholdRule scad{ThresholdKind::scad, 1.5, 3.0};
    for (double u : {-4.2, -1.0, 0.0, 0.7, 2.9, 5.5}) {
        REQUIRE(soft.apply(u) == soft_threshold(u, 1.5));
        REQUIRE(hard.apply(u) == hard_threshold(u, 1.5));
        REQUIRE(scad.apply(u) == scad_threshold(u, 1.5, 3.0));
    }
}

TEST_CASE("threshold kind names round trip") {
    for (auto k : {ThresholdKind::soft, ThresholdKind::hard, ThresholdKind::scad})
        REQUIRE(threshold_kind_from_string(to_string(k)) == k);
    REQUIRE_THROWS_AS(threshold_kind_from_string("medium"), std::invalid_argument);
}

TEST_CASE("universal threshold") {
    REQUIRE(universal_threshold(1.0, 256) ==
            Catch::Approx(std::sqrt(2.0 * std::log(256.0))).epsilon(1e-15));
    REQUIRE(universal_threshold(0.5, 256) ==
            Catch::Approx(0.5 * std::sqrt(2.0 * std::log(256.0))).epsilon(1e-15));
    REQUIRE(universal_threshold(0.0, 1024) == 0.0);
    REQUIRE(universal_threshold(2.0, 1) == 0.0); // log 1 = 0
    REQUIRE_THROWS_AS(universal_threshold(-0.1, 16), std::invalid_argument);
    REQUIRE_THROWS_AS(universal_threshold(1.0, 0), std::invalid_argument);
}

TEST_CASE("mad_sigma on hand-checkable inputs") {
    VectorXd v(5);
    v << 1, 2, 3, 4, 5; // median 3, |dev| = {2,1,0,1,2}, MAD = 1
    REQUIRE(mad_sigma(v) == Catch::Approx(1.0 / 0.6745).epsilon(1e-12));

    VectorXd w(4);
    w << 1, 2, 3, 4; // median 2.5, |dev| = {1.5,.5,.5,1.5}, MAD = 1
    REQUIRE(mad_sigma(w) == Catch::Approx(1.0 / 0.6745).epsilon(1e-12));

    VectorXd c = VectorXd::Constant(9, 42.0);
    REQUIRE(mad_sigma(c) == 0.0);

    VectorXd one(1);
    one << -3.0;
    REQUIRE(mad_sigma(one) == 0.0);

    REQUIRE_THROWS_AS(mad_sigma(VectorXd()), std::invalid_argument);
}

TEST_CASE("mad_sigma is location invariant and scale equivariant") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss;
    VectorXd v(101);
    for (Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);

    const double base = mad_sigma(v);
    REQUIRE(mad_sigma((v.array() + 1000.0).matrix()) ==
            Catch::Approx(base).epsilon(1e-12));
    REQUIRE(mad_sigma(3.0 * v) == Catch::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("mad_sigma is a consistent Gaussian scale estimate") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 2.0);
    VectorXd v(100000);
    for (Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
    REQUIRE(mad_sigma(v) == Catch::Approx(2.0).margin(0.05));

    // Robustness: corrupting 10% of entries with huge outliers inflates the
    // estimate only to the contaminated-quantile value. The shifted median of
    // |v - med| sits at the 5/9 quantile of the clean half-normal, so the
    // expected reading is 2 * qnorm((1 + 5/9) / 2) / 0.6745, independent of the
    // outlier magnitude. The sample standard deviation, by contrast, explodes.
    VectorXd corrupted = v;
    for (Index i = 0; i < v.size(); i += 10) corrupted[i] = 1e6;
    const double shifted = 2.0 * 0.7647096737863872 / 0.6745;
    REQUIRE(mad_sigma(corrupted) == Catch::Approx(shifted).margin(0.05));
    const double sd = std::sqrt((corrupted.array() - corrupted.mean())
                                    .square()
                                    .sum() /
                                double(corrupted.size() - 1));
    REQUIRE(sd > 1000.0);
}

TEST_CASE("sigma method names") {
    REQUIRE(to_string(SigmaMethod::mad_finest) == "mad_finest");
    REQUIRE(to_string(SigmaMethod::mad_qr) == "mad_qr");
    REQUIRE(to_string(SigmaMethod::fixed_value) == "fixed");
}

namespace {

struct QrInstance {
    MatrixXd a;
    VectorXd noise;
};

QrInstance qr_instance(Index m, Index p, std::uint64_t seed, double sigma) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    QrInstance q;
    q.a.resize(m, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < m; ++i) q.a(i, j) = gauss(rng);
    q.noise.resize(m);
    for (Index i = 0; i < m; ++i) q.noise[i] = sigma * gauss(rng);
    return q;
}

} // namespace

TEST_CASE("QR-projected MAD removes the linear component exactly") {
    const auto q = qr_instance(128, 2, 31, 0.5);
    VectorXd b(2);
    b << 100.0, -250.0; // a gross mean component that would swamp a plain MAD

    const SigmaEstimate clean = estimate_sigma_qr(q.a, q.noise);
    const SigmaEstimate shifted = estimate_sigma_qr(q.a, q.noise + q.a * b);

    // Invariance: the estimate does not depend on the linear component at all.
    REQUIRE(shifted.sigma_hat == Catch::Approx(clean.sigma_hat).epsilon(1e-9));
    REQUIRE(clean.sigma_hat == Catch::Approx(0.5).margin(0.1));
    REQUIRE(clean.method == SigmaMethod::mad_qr);
    REQUIRE(clean.n_used == 126);

    // The plain MAD on the same contaminated data is badly biased upward.
    REQUIRE(mad_sigma(q.noise + q.a * b) > 10.0);
}

TEST_CASE("QR-projected MAD input contracts") {
    const auto q = qr_instance(16, 2, 7, 1.0);

    SECTION("size mismatch") {
        REQUIRE_THROWS_AS(estimate_sigma_qr(q.a, VectorXd::Zero(15)),
                          std::invalid_argument);
    }
    SECTION("needs strictly more rows than columns") {
        MatrixXd square = q.a.topRows(2);
        REQUIRE_THROWS_AS(estimate_sigma_qr(square, VectorXd::Zero(2)),
                          std::invalid_argument);
    }
    SECTION("rank deficiency is detected") {
        MatrixXd sing(16, 2);
        sing.col(0) = q.a.col(0);
        sing.col(1) = 2.0 * q.a.col(0);
        REQUIRE_THROWS_AS(estimate_sigma_qr(sing, q.noise), std::runtime_error);
    }
    SECTION("zero columns degrade to the plain MAD") {
        MatrixXd empty(16, 0);
        const SigmaEstimate e = estimate_sigma_qr(empty, q.noise);
        REQUIRE(e.sigma_hat == Catch::Approx(mad_sigma(q.noise)).epsilon(1e-15));
        REQUIRE(e.n_used == 16);
    }
}
