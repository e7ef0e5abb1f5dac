#pragma once

#include <complex>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ldreg {

// Dense univariate polynomial, ascending coefficients.
class Poly {
public:
    Poly() : c_{0.0} {}
    explicit Poly(std::vector<double> coeffs);
    static Poly constant(double v) { return Poly(std::vector<double>{v}); }
    static Poly monomial(int k, double coef = 1.0);
    static Poly x() { return monomial(1); }

    int degree() const { return static_cast<int>(c_.size()) - 1; }
    const std::vector<double>& coeffs() const { return c_; }
    double operator[](int i) const { return i >= 0 && i < static_cast<int>(c_.size()) ? c_[i] : 0.0; }
    bool is_zero() const { return c_.size() == 1 && c_[0] == 0.0; }

    double operator()(double x) const;
    std::complex<double> operator()(std::complex<double> x) const;

    // true if every odd coefficient is within tol of zero
    bool is_even(double tol = 0.0) const;
    Poly even_part() const;

    Poly derivative() const;
    Poly integral() const;  // zero constant term
    // p(scale * x + shift)
    Poly compose_affine(double scale, double shift) const;
    Poly compose(const Poly& inner) const;

    // roots via companion-matrix eigenvalues; empty for constants
    std::vector<std::complex<double>> roots() const;

    double max_abs_coeff() const;

    Poly& operator+=(const Poly& o);
    Poly& operator-=(const Poly& o);
    Poly& operator*=(double s);

    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator*(Poly a, double s) { return a *= s; }
    friend Poly operator*(double s, Poly a) { return a *= s; }
    friend Poly operator*(const Poly& a, const Poly& b);
    friend bool operator==(const Poly&, const Poly&) = default;

private:
    void trim();
    std::vector<double> c_;
};

nlohmann::json to_json(const Poly& p);
Poly poly_from_json(const nlohmann::json& j);

}  // namespace ldreg
