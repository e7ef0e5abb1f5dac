#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ldreg/poly.hpp"

namespace ldreg {

enum class DistHint { subexponential, gaussian };

// B_m(t) = c_m * int_0^t (1 - s^2)^m ds with B_m(1) = 1
Poly smoothed_sign(int m);

// Sign approximator p(t) = (1 + eta/2) B_m((t + a) / (1/2 + a)) + eta/2 with the minimal m
// whose grid check passes properties 2-4 of the box polynomial.
Poly smoothstep_sign(double a, double eta);

inline constexpr int kCoreDegreeCap = 60;
inline constexpr int kGaussianCoreDegreeCap = 20;

Poly core_indicator(double delta, double L, DistHint hint = DistHint::subexponential);

struct GaussDist {
    double sigma = 1.0;
};
struct EmpiricalDist {
    std::vector<double> sample;
};
using AntiConcDist = std::variant<GaussDist, EmpiricalDist>;

struct AntiConcReport {
    double q0 = 0.0;
    double max_dev_core = 0.0;
    double band_max = 0.0;
    double expectation = 0.0;  // sigma^2 * E q^2
    double delta = 0.0;
    double L = 0.0;
    double C = 0.0;
    bool passed = false;
};

AntiConcReport verify_core_indicator(const Poly& q, double delta, double L, double C,
                                     const AntiConcDist& dist);

struct CoreIndicatorChoice {
    Poly q;
    double L = 0.0;
    AntiConcReport report;
};

// smallest L in [2, 64] whose report passes (subexponential); gaussian hint ignores L
CoreIndicatorChoice choose_core_indicator(double delta, double C,
                                          DistHint hint = DistHint::subexponential,
                                          const AntiConcDist& dist = GaussDist{});

// normalized probabilists' Hermite polynomial, E h_i^2 = 1 under N(0,1)
Poly hermite_normalized(int i);
double hermite_normalized_at_zero(int i);
Poly hermite_optimal(int d);
// closed form E p*^2 = 1 / sum_{i even <= d} h_i(0)^2
double hermite_optimal_value(int d);

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to 1, standard normal weight
};
GaussRule gauss_hermite_rule(int n);
double gauss_hermite_expectation(const Poly& f, double sigma);
// E p(sigma z)^2; evaluates p at the nodes instead of expanding p^2, which cancels badly at high degree
double gauss_hermite_square(const Poly& p, double sigma);

struct Certificate {
    enum class Form { even, odd };
    double a = 0.0;
    double b = 1.0;
    Poly target;
    std::vector<Poly> sigma0;  // square roots
    std::vector<Poly> sigma1;
    Form form = Form::even;

    Poly sigma0_poly() const;
    Poly sigma1_poly() const;
    Poly reconstruct() const;
    // max |reconstruct - target| over the grid, relative to max |target|
    double residual(int grid = 1000) const;
};

nlohmann::json to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);

Certificate markov_lukacs_decompose(const Poly& g, double a, double b);

Poly gaussian_univariate_reduction(const Poly& p);
// coord_moments[j] = E Y_1^j; the coordinate law must be symmetric
Poly boolean_univariate_reduction(const Poly& p, const std::vector<double>& coord_moments, int d);

Certificate certify_anticoncentration(const Poly& F, double C, double delta);

Poly rescale_witness(const Poly& p, double c);

struct EmpiricalCheck {
    double max_ratio = 0.0;
    bool passed = false;
    double threshold = 0.0;
};
EmpiricalCheck empirical_check(const Eigen::MatrixXd& sample, const Poly& p, double C,
                               double delta, int trials, std::uint64_t seed);

// int_L^inf exp(-x^2) x^(2d) dx, and the bound exp(-L^2) (L^(2d) + (8d)^d)
double tail_integral(int d, double L);
double tail_integral_bound(int d, double L);

}  // namespace ldreg
