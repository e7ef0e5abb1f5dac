#include "ldreg/poly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"

namespace ldreg {

Poly::Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) c_.push_back(0.0);
    trim();
}

Poly Poly::monomial(int k, double coef) {
    std::vector<double> c(static_cast<size_t>(k) + 1, 0.0);
    c[k] = coef;
    return Poly(std::move(c));
}

void Poly::trim() {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
}

double Poly::operator()(double x) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
    return r;
}

std::complex<double> Poly::operator()(std::complex<double> x) const {
    std::complex<double> r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
    return r;
}

bool Poly::is_even(double tol) const {
    for (size_t i = 1; i < c_.size(); i += 2)
        if (std::abs(c_[i]) > tol) return false;
    return true;
}

Poly Poly::even_part() const {
    auto c = c_;
    for (size_t i = 1; i < c.size(); i += 2) c[i] = 0.0;
    return Poly(std::move(c));
}

Poly Poly::derivative() const {
    if (c_.size() == 1) return Poly();
    std::vector<double> d(c_.size() - 1);
    for (size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
    return Poly(std::move(d));
}

Poly Poly::integral() const {
    std::vector<double> r(c_.size() + 1, 0.0);
    for (size_t i = 0; i < c_.size(); ++i) r[i + 1] = c_[i] / static_cast<double>(i + 1);
    return Poly(std::move(r));
}

Poly Poly::compose_affine(double scale, double shift) const {
    Poly lin(std::vector<double>{shift, scale});
    Poly r = constant(c_.back());
    for (int i = degree() - 1; i >= 0; --i) {
        r = r * lin;
        r += constant(c_[i]);
    }
    return r;
}

Poly Poly::compose(const Poly& inner) const {
    Poly r = constant(c_.back());
    for (int i = degree() - 1; i >= 0; --i) {
        r = r * inner;
        r += constant(c_[i]);
    }
    return r;
}

std::vector<std::complex<double>> Poly::roots() const {
    int n = degree();
    if (n < 1) return {};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -c_[i] / c_[n];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<std::complex<double>> r(es.eigenvalues().data(), es.eigenvalues().data() + n);
    // Newton polish for isolated roots only; clustered eigenvalues keep their symmetric split
    Poly dp = derivative();
    auto orig = r;
    for (size_t i = 0; i < r.size(); ++i) {
        double sep = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < orig.size(); ++j)
            if (j != i) sep = std::min(sep, std::abs(orig[i] - orig[j]));
        if (sep < 1e-3 * std::max(1.0, std::abs(orig[i]))) continue;
        auto& z = r[i];
        for (int it = 0; it < 3; ++it) {
            auto f = (*this)(z);
            auto df = dp(z);
            if (std::abs(df) == 0.0) break;
            auto cand = z - f / df;
            if (std::abs((*this)(cand)) < std::abs(f)) z = cand; else break;
        }
    }
    return r;
}

double Poly::max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
}

Poly& Poly::operator+=(const Poly& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    trim();
    return *this;
}

Poly& Poly::operator-=(const Poly& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
    trim();
    return *this;
}

Poly& Poly::operator*=(double s) {
    for (double& v : c_) v *= s;
    trim();
    return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
    std::vector<double> r(a.c_.size() + b.c_.size() - 1, 0.0);
    for (size_t i = 0; i < a.c_.size(); ++i) {
        if (a.c_[i] == 0.0) continue;
        for (size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
    }
    return Poly(std::move(r));
}

nlohmann::json to_json(const Poly& p) {
    return {{"degree", p.degree()}, {"coeffs", p.coeffs()}};
}

Poly poly_from_json(const nlohmann::json& j) {
    if (!j.contains("coeffs")) throw ParseError("polynomial: missing coeffs", "coeffs");
    Poly p(j.at("coeffs").get<std::vector<double>>());
    if (j.contains("degree") && j.at("degree").get<int>() != p.degree())
        throw ParseError("polynomial: degree does not match coeffs", "degree");
    return p;
}

}  // namespace ldreg
