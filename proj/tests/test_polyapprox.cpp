#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"
#include "ldreg/polyapprox.hpp"
#include "ldreg/rng.hpp"

using namespace ldreg;

namespace {

// trapezoid against the normal density on a wide grid; independent of the Gauss-Hermite code
double normal_expectation_trapezoid(const Poly& f, double sigma, double half_width = 14.0, int n = 200001) {
    double h = 2.0 * half_width / (n - 1), s = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = -half_width + i * h;
        double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        s += w * f(sigma * z) * std::exp(-0.5 * z * z);
    }
    return s * h / std::sqrt(2.0 * std::numbers::pi);
}

double binom_central_over_4i(int i) {  // C(2i,i)/4^i
    double r = 1.0;
    for (int k = 1; k <= i; ++k) r *= (2.0 * k - 1.0) / (2.0 * k);
    return r;
}

// min E p^2 over degree-d polynomials with p(0)=1 through the monomial Gram matrix
double gram_minimum(int d) {
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> G(d + 1, d + 1);
    for (int j = 0; j <= d; ++j)
        for (int k = 0; k <= d; ++k) {
            int m = j + k;
            long double v = 0.0L;
            if (m % 2 == 0) {
                v = 1.0L;
                for (int t = m - 1; t > 1; t -= 2) v *= t;
            }
            G(j, k) = v;
        }
    Eigen::Matrix<long double, Eigen::Dynamic, 1> e0 = Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(d + 1);
    e0(0) = 1.0L;
    Eigen::Matrix<long double, Eigen::Dynamic, 1> sol = G.fullPivLu().solve(e0);
    return static_cast<double>(1.0L / sol(0));
}

}  // namespace

TEST_CASE("smoothed sign family is odd with unit endpoints") {
    for (int m : {0, 3, 10}) {
        Poly B = smoothed_sign(m);
        CHECK(B.degree() == 2 * m + 1);
        CHECK(B(1.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(B(-1.0) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(B.is_even() == false);
        for (int i = 0; i <= B.degree(); i += 2) CHECK(B[i] == 0.0);
    }
}

TEST_CASE("smoothstep_sign meets the box properties") {
    const double a = 0.2, eta = 0.09;
    Poly p = smoothstep_sign(a, eta);
    CHECK(p(0.5) >= 1.0);
    CHECK(p(0.5) <= 1.0 + eta + 1e-12);
    CHECK(p(-0.5) >= -1.0);
    CHECK(p(-0.5) <= -1.0 + eta + 1e-12);
    // odd plus constant about the transition centre t = -a
    Poly centred = p.compose_affine(1.0, -a);
    Poly odd = centred - Poly::constant(centred[0]);
    for (int i = 0; i <= odd.degree(); i += 2) CHECK(std::abs(odd[i]) <= 1e-12 * std::max(1.0, odd.max_abs_coeff()));
    for (double t = -0.5; t <= 0.5; t += 0.01) CHECK(p(t) >= (t >= 0 ? 1.0 : -1.0) - 1e-9);

    CHECK_THROWS_AS(smoothstep_sign(0.3, 0.05), ValidationError);
    CHECK_THROWS_AS(smoothstep_sign(0.1, 0.2), ValidationError);
}

TEST_CASE("smoothstep_sign reports its limit instead of returning garbage") {
    // tiny a needs a degree far beyond double-precision monomial evaluation
    CHECK_THROWS_AS(smoothstep_sign(0.01, 0.01), ConstructionError);
}

TEST_CASE("core indicator basics") {
    for (auto hint : {DistHint::subexponential, DistHint::gaussian}) {
        Poly q = core_indicator(0.1, 2.0, hint);
        CHECK(q(0.0) == 1.0);
        CHECK(q.is_even());
        CHECK(q.degree() <= kCoreDegreeCap);
        Rng rng(11);
        for (int i = 0; i < 100; ++i) {
            double x = rng.uniform(-3.0, 3.0);
            CHECK(q(x) == doctest::Approx(q(-x)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(core_indicator(0.5, 0.4), ValidationError);
}

TEST_CASE("core indicator passes its report under N(0,1)") {
    for (auto hint : {DistHint::subexponential, DistHint::gaussian}) {
        auto choice = choose_core_indicator(0.1, 2.0, hint);
        CHECK(choice.report.passed);
        CHECK(choice.L >= 2.0);
        CHECK(choice.L <= 64.0);
        // independent expectation oracle
        double oracle = normal_expectation_trapezoid(choice.q * choice.q, 1.0);
        CHECK(choice.report.expectation == doctest::Approx(oracle).epsilon(1e-8));
        CHECK(choice.report.max_dev_core <= 0.1);
    }
}

TEST_CASE("verify_core_indicator closed forms") {
    auto r = verify_core_indicator(Poly::constant(1.0), 0.1, 2.0, 0.5, GaussDist{1.0});
    CHECK(r.expectation == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(r.passed);
    auto r2 = verify_core_indicator(Poly(std::vector<double>{1.0, 0.0, -1.0}), 0.1, 2.0, 2.0, GaussDist{1.0});
    CHECK(r2.max_dev_core == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(r2.q0 == 1.0);
    // E (1-x^2)^2 = 1 - 2 + 3 = 2
    CHECK(r2.expectation == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(verify_core_indicator(Poly::x(), 0.1, 2.0, 2.0, GaussDist{1.0}), ValidationError);
    CHECK_THROWS_AS(verify_core_indicator(Poly::constant(1.0), 0.1, 2.0, 2.0, GaussDist{1.5}), ValidationError);
}

TEST_CASE("empirical mode of the core report") {
    Rng rng(3);
    EmpiricalDist e;
    for (int i = 0; i < 20000; ++i) e.sample.push_back(rng.normal());
    Poly q = core_indicator(0.1, 2.0, DistHint::gaussian);
    auto r = verify_core_indicator(q, 0.1, 2.0, 2.0, e);
    auto g = verify_core_indicator(q, 0.1, 2.0, 2.0, GaussDist{1.0});
    CHECK(r.expectation == doctest::Approx(g.expectation).epsilon(0.05));
}

TEST_CASE("Hermite values at zero") {
    double h2 = hermite_normalized_at_zero(2);
    CHECK(h2 * h2 == doctest::Approx(0.5).epsilon(1e-15));
    double h4 = hermite_normalized_at_zero(4);
    CHECK(h4 * h4 == doctest::Approx(0.375).epsilon(1e-15));
    for (int i = 0; i <= 20; ++i) {
        CHECK(hermite_normalized(i)(0.0) == doctest::Approx(hermite_normalized_at_zero(i)).epsilon(1e-12));
        double hi = hermite_normalized_at_zero(i);
        if (i % 2 == 0) CHECK(hi * hi == doctest::Approx(binom_central_over_4i(i / 2)).epsilon(1e-13));
    }
    // orthonormality under the Gaussian
    for (int i = 0; i <= 8; ++i)
        for (int j = 0; j <= 8; ++j) {
            double e = gauss_hermite_expectation(hermite_normalized(i) * hermite_normalized(j), 1.0);
            CHECK(e == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
        }
}

TEST_CASE("hermite_optimal attains the closed form and the Gram minimum") {
    for (int d : {2, 4, 6, 8, 10, 16, 32}) {
        Poly p = hermite_optimal(d);
        CHECK(p(0.0) == 1.0);
        CHECK(p.degree() == d);
        double e = gauss_hermite_expectation(p * p, 1.0);
        // monomial coefficients carry about 1e-4 relative error by degree 32
        CHECK(e == doctest::Approx(hermite_optimal_value(d)).epsilon(d <= 16 ? 1e-10 : 1e-3));
        double s = 0.0;
        for (int i = 0; i <= d / 2; ++i) s += binom_central_over_4i(i);
        CHECK(hermite_optimal_value(d) == doctest::Approx(1.0 / s).epsilon(1e-13));
        if (d <= 10) CHECK(e == doctest::Approx(gram_minimum(d)).epsilon(1e-8));
    }
    CHECK_THROWS_AS(hermite_optimal(3), ValidationError);
}

TEST_CASE("Hermite tightness band") {
    // frozen from the quadrature oracle: 1.0667 (d=4) .. 1.2249 (d=32)
    const double c1 = 1.06, c2 = 1.23;
    for (int d : {4, 8, 16, 32}) {
        Poly p = hermite_optimal(d);
        double e = gauss_hermite_square(p, 1.0);
        CHECK(e == doctest::Approx(hermite_optimal_value(d)).epsilon(1e-10));
        double v = e * std::sqrt(static_cast<double>(d));
        CHECK(v >= c1);
        CHECK(v <= c2);
    }
    CHECK((c2 - c1) / (0.5 * (c1 + c2)) <= 0.2);
}

TEST_CASE("Gauss-Hermite expectations") {
    CHECK(gauss_hermite_expectation(Poly::monomial(2), 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gauss_hermite_expectation(Poly::monomial(4), 1.0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(gauss_hermite_expectation(Poly::monomial(6), 2.0) == doctest::Approx(960.0).epsilon(1e-13));
    // Monte Carlo cross-check of the scaled sixth moment
    Rng rng(5);
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = 2.0 * rng.normal();
        double v = std::pow(z, 6);
        s += v;
        s2 += v * v;
    }
    double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 960.0) <= 5.0 * se);
    // high-degree exactness, all weights positive
    auto rule = gauss_hermite_rule(80);
    for (double w : rule.weights) CHECK(w > 0.0);
    CHECK(gauss_hermite_expectation(Poly::monomial(40), 1.0) ==
          doctest::Approx(std::exp(std::lgamma(41.0) - 20.0 * std::log(2.0) - std::lgamma(21.0))).epsilon(1e-11));
    CHECK_THROWS_AS(gauss_hermite_expectation(Poly::monomial(2), 0.0), ValidationError);
    Poly p(std::vector<double>{1.0, -0.5, 0.25, 2.0});
    CHECK(gauss_hermite_square(p, 1.5) == doctest::Approx(gauss_hermite_expectation(p * p, 1.5)).epsilon(1e-13));
    CHECK_THROWS_AS(gauss_hermite_square(p, -1.0), ValidationError);
}

TEST_CASE("Markov-Lukacs examples") {
    auto c1 = markov_lukacs_decompose(Poly::x(), 0.0, 1.0);
    CHECK(c1.form == Certificate::Form::odd);
    CHECK(c1.sigma0_poly()(0.3) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c1.sigma0_poly().degree() == 0);
    CHECK(c1.sigma1_poly().is_zero());

    auto c2 = markov_lukacs_decompose(Poly(std::vector<double>{1.0, 0.0, -1.0}), -1.0, 1.0);
    CHECK(c2.form == Certificate::Form::even);
    CHECK(c2.sigma0_poly().is_zero());
    CHECK(c2.sigma1_poly().degree() == 0);
    CHECK(c2.sigma1_poly()[0] == doctest::Approx(1.0).epsilon(1e-12));

    auto c3 = markov_lukacs_decompose(Poly(std::vector<double>{0.3, -1.0, 1.0}), 0.0, 1.0);
    CHECK(c3.residual() <= 1e-8);

    auto c4 = markov_lukacs_decompose(Poly::constant(0.2), 0.0, 1.0);
    REQUIRE(c4.sigma0.size() == 1);
    CHECK(c4.sigma0[0][0] == doctest::Approx(std::sqrt(0.2)));
}

TEST_CASE("Markov-Lukacs rejects negative polynomials with a witness") {
    try {
        markov_lukacs_decompose(Poly(std::vector<double>{-0.1, 0.0, 1.0}), -1.0, 1.0);
        FAIL("expected NotNonnegative");
    } catch (const NotNonnegative& e) {
        CHECK(std::abs(e.witness) < 0.01);
        CHECK(e.value < 0.0);
    }
}

TEST_CASE("Markov-Lukacs on structured nonnegative polynomials") {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        double a = rng.uniform(-2.0, 0.0), b = a + rng.uniform(0.5, 3.0);
        int deg = 1 + static_cast<int>(rng.below(8));
        // product of factors each nonnegative on [a,b]: squares, complex pairs, outside roots, endpoints
        Poly g = Poly::constant(rng.uniform(0.5, 2.0));
        int cur = 0;
        while (cur < deg) {
            int kind = static_cast<int>(rng.below(5));
            if (deg - cur >= 2 && kind == 0) {
                double r = rng.uniform(a, b);
                g = g * Poly(std::vector<double>{-r, 1.0}) * Poly(std::vector<double>{-r, 1.0});
                cur += 2;
            } else if (deg - cur >= 2 && kind == 1) {
                double re = rng.uniform(a - 1, b + 1), im = rng.uniform(0.05, 1.0);
                g = g * Poly(std::vector<double>{re * re + im * im, -2 * re, 1.0});
                cur += 2;
            } else if (kind == 2) {
                g = g * Poly(std::vector<double>{-(a - rng.uniform(0.1, 2.0)), 1.0});
                ++cur;
            } else if (kind == 3) {
                g = g * Poly(std::vector<double>{b + rng.uniform(0.1, 2.0), -1.0});
                ++cur;
            } else {
                g = g * (rng.below(2) ? Poly(std::vector<double>{-a, 1.0}) : Poly(std::vector<double>{b, -1.0}));
                ++cur;
            }
        }
        auto cert = markov_lukacs_decompose(g, a, b);
        CHECK(cert.residual() <= 1e-8);
        CHECK(cert.form == (g.degree() % 2 ? Certificate::Form::odd : Certificate::Form::even));
    }
}

TEST_CASE("certificate JSON round trip re-verifies by evaluation") {
    auto c = markov_lukacs_decompose(Poly(std::vector<double>{0.3, -1.0, 1.0}), 0.0, 1.0);
    auto back = certificate_from_json(to_json(c));
    CHECK(back.residual() <= 1e-8);
    CHECK(back.sigma0.size() == c.sigma0.size());
}

TEST_CASE("gaussian_univariate_reduction closed forms") {
    CHECK(gaussian_univariate_reduction(Poly::constant(1.0)) == Poly::constant(1.0));
    auto F2 = gaussian_univariate_reduction(Poly::monomial(2));
    CHECK(F2 == Poly(std::vector<double>{0.0, 0.0, 3.0}));
    auto F3 = gaussian_univariate_reduction(Poly(std::vector<double>{1.0, 0.0, -1.0}));
    CHECK(F3 == Poly(std::vector<double>{1.0, -2.0, 3.0}));
    CHECK_THROWS_AS(gaussian_univariate_reduction(Poly::x()), ValidationError);
}

TEST_CASE("gaussian_univariate_reduction matches Monte Carlo") {
    Rng rng(99);
    for (int d : {2, 3, 5}) {
        for (int rep = 0; rep < 3; ++rep) {
            int deg = 2 * (1 + static_cast<int>(rng.below(4)));
            std::vector<double> c(deg + 1, 0.0);
            for (int i = 0; i <= deg; i += 2) c[i] = rng.uniform(-1.0, 1.0);
            Poly p(c);
            Eigen::VectorXd v(d);
            for (int k = 0; k < d; ++k) v(k) = rng.uniform(-0.6, 0.6);
            Poly F = gaussian_univariate_reduction(p);
            const int n = 200000;
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int k = 0; k < d; ++k) dot += v(k) * rng.normal();
                double val = p(dot) * p(dot);
                s += val;
                s2 += val * val;
            }
            double mean = s / n, se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / n);
            CHECK(std::abs(mean - F(v.squaredNorm())) <= 5.0 * se + 1e-12);
        }
    }
}

TEST_CASE("boolean_univariate_reduction against exhaustive enumeration") {
    const int d = 4;
    // centred {0,1}: +-1/2 with equal mass
    std::vector<double> mom(5);
    for (int j = 0; j <= 4; ++j) mom[j] = (j % 2) ? 0.0 : std::pow(0.5, j);
    Poly p = Poly::monomial(2);
    Poly F = boolean_univariate_reduction(p, mom, d);
    const double vals[3] = {0.0, 0.5, -0.5};
    for (int code = 0; code < 81; ++code) {
        double v[4];
        int c = code;
        for (int k = 0; k < 4; ++k) {
            v[k] = vals[c % 3];
            c /= 3;
        }
        double s2 = 0.0, s4 = 0.0;
        for (double x : v) {
            s2 += x * x;
            s4 += x * x * x * x;
        }
        CHECK(s4 == doctest::Approx(s2 / d).epsilon(1e-15));  // power-sum collapse
        double e = 0.0;
        for (int y = 0; y < 16; ++y) {
            double dot = 0.0;
            for (int k = 0; k < 4; ++k) dot += v[k] * (((y >> k) & 1) ? 0.5 : -0.5);
            e += std::pow(dot, 4) / 16.0;
        }
        CHECK(F(s2) == doctest::Approx(e).epsilon(1e-13).scale(1.0));
    }
    CHECK(boolean_univariate_reduction(Poly::constant(1.0), {1.0}, 4) == Poly::constant(1.0));
    try {
        boolean_univariate_reduction(p, {1.0, 0.0, 0.25}, d);
        FAIL("expected error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("order 4") != std::string::npos);
    }
}

TEST_CASE("certify_anticoncentration") {
    auto c0 = certify_anticoncentration(Poly(), 2.0, 0.1);
    REQUIRE(c0.sigma0.size() == 1);
    CHECK(c0.sigma0[0][0] == doctest::Approx(std::sqrt(0.2)));
    CHECK(c0.sigma1.empty());

    try {
        certify_anticoncentration(Poly::constant(1.0), 2.0, 0.1);
        FAIL("expected CertificationFailed");
    } catch (const CertificationFailed& e) {
        CHECK(e.worst_s == doctest::Approx(1.0));
        CHECK(e.margin == doctest::Approx(-0.8));
    }

    // Gaussian parameters (C, delta') = (2, 2 delta) at delta = 0.1
    Poly q = core_indicator(0.1, 2.0, DistHint::gaussian);
    Poly F = gaussian_univariate_reduction(q);
    CHECK(F(1.0) == doctest::Approx(gauss_hermite_expectation(q * q, 1.0)).epsilon(1e-6));
    auto cert = certify_anticoncentration(F, 2.0, 0.2);
    CHECK(cert.residual() <= 1e-8);
}

TEST_CASE("rescale_witness") {
    Poly p(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(rescale_witness(p, 1.0) == p);
    CHECK(rescale_witness(Poly::monomial(2), 2.0) == Poly::monomial(2, 0.25));
    CHECK_THROWS_AS(rescale_witness(p, 0.0), ValidationError);

    Poly q = core_indicator(0.1, 2.0, DistHint::gaussian);
    const double c = 0.5;
    auto r0 = verify_core_indicator(q, 0.1, 2.0, 2.0, GaussDist{1.0});
    auto r1 = verify_core_indicator(rescale_witness(q, c), c * 0.1, c * 2.0, 2.0, GaussDist{c});
    CHECK(r1.q0 == r0.q0);
    CHECK(r1.max_dev_core == doctest::Approx(r0.max_dev_core).epsilon(1e-9));
    CHECK(r1.band_max == doctest::Approx(r0.band_max).epsilon(1e-9));
    CHECK(r1.expectation / (c * c) == doctest::Approx(r0.expectation).epsilon(1e-10));
}

TEST_CASE("empirical_check") {
    Rng rng(8);
    Eigen::MatrixXd S(10000, 4);
    for (int i = 0; i < S.rows(); ++i)
        for (int k = 0; k < 4; ++k) S(i, k) = rng.normal();
    auto r0 = empirical_check(S, Poly(), 2.0, 0.1, 20, 1);
    CHECK(r0.max_ratio == 0.0);
    CHECK(r0.passed);

    Poly q = core_indicator(0.1, 2.0, DistHint::gaussian);
    auto r1 = empirical_check(S, q, 2.0, 0.1, 50, 2);
    CHECK(r1.passed);
    MESSAGE("empirical max ratio " << r1.max_ratio << " threshold " << r1.threshold);

    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(50, 3);
    auto r2 = empirical_check(Z, Poly(std::vector<double>{1.0, 0.0, -3.0}), 2.0, 0.1, 5, 3);
    CHECK(r2.max_ratio == 1.0);
    CHECK_FALSE(r2.passed);
}

TEST_CASE("tail integral bound") {
    for (int d : {1, 2, 3})
        for (double L : {2.0, 3.0, 4.0}) {
            double I = tail_integral(d, L);
            // closed form: Gamma(d + 1/2, L^2) / 2
            double ref = 0.5 * boost::math::tgamma(d + 0.5, L * L);
            CHECK(I == doctest::Approx(ref).epsilon(1e-9));
            CHECK(I <= tail_integral_bound(d, L));
        }
}
