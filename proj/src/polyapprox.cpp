#include "ldreg/polyapprox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"
#include "ldreg/rng.hpp"

namespace ldreg {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

double double_factorial_odd(int j) {  // (2j-1)!!
    double r = 1.0;
    for (int k = 2 * j - 1; k > 1; k -= 2) r *= k;
    return r;
}

// B_m(u) evaluated through the regularized incomplete beta function, stable for any m
double smoothed_sign_value(int m, double u) {
    if (u == 0.0) return 0.0;
    double t = std::min(1.0, u * u);
    double v = boost::math::ibeta(0.5, m + 1.0, t);
    return u > 0 ? v : -v;
}

}  // namespace

Poly smoothed_sign(int m) {
    if (m < 0) throw ValidationError("smoothed_sign: m must be >= 0");
    // int_0^1 (1-s^2)^m ds = prod_{k=1}^m 2k/(2k+1)
    double norm = 1.0;
    for (int k = 1; k <= m; ++k) norm *= 2.0 * k / (2.0 * k + 1.0);
    std::vector<double> c(2 * m + 2, 0.0);
    double binom = 1.0;
    for (int j = 0; j <= m; ++j) {
        c[2 * j + 1] = ((j % 2) ? -binom : binom) / (2.0 * j + 1.0) / norm;
        binom = binom * (m - j) / (j + 1.0);
    }
    return Poly(std::move(c));
}

Poly smoothstep_sign(double a, double eta) {
    if (!(a > 0.0 && a < 0.25)) throw ValidationError("smoothstep_sign: a must lie in (0, 1/4)");
    if (!(eta > 0.0 && eta < 0.1)) throw ValidationError("smoothstep_sign: eta must lie in (0, 0.1)");
    const double R = 0.5 + a;
    const double kappa = 1.0 + eta / 2.0;
    const double need = (1.0 - eta / 2.0) / kappa;
    int m = 0;
    while (smoothed_sign_value(m, a / R) < need) {
        ++m;
        if (m > 100000) throw ConstructionError("smoothstep_sign: degree search did not terminate");
    }
    Poly p = smoothed_sign(m).compose_affine(1.0 / R, a / R) * kappa + Poly::constant(eta / 2.0);
    const int K = p.degree();
    for (double v : p.coeffs())
        if (!std::isfinite(v))
            throw ConstructionError(fmt::format(
                "smoothstep_sign(a={}, eta={}): required degree {} overflows double precision", a, eta, K));

    // grid verification of properties 2-4
    auto fail = [&](const std::string& what, double t, double v) {
        throw ConstructionError(fmt::format("smoothstep_sign(a={}, eta={}): degree {} violates {} at t={} (p={})",
                                            a, eta, K, what, t, v),
                                t);
    };
    const double slack = 1e-9;
    for (double t : linspace(-0.5, 0.5, 10000)) {
        double v = p(t);
        if (!std::isfinite(v)) fail("finite evaluation", t, v);
        if (t >= 0.0) {
            if (v < 1.0 - slack || v > 1.0 + eta + slack) fail("p in [sign, sign+eta] on [0,1/2]", t, v);
        } else if (t <= -2.0 * a) {
            if (v < -1.0 - slack || v > -1.0 + eta + slack) fail("p in [sign, sign+eta] on [-1/2,-2a]", t, v);
        } else {
            if (v < -1.0 - slack || v > 1.0 + eta + slack) fail("p in [-1, 1+eta] on (-2a,0)", t, v);
        }
    }
    for (double t : linspace(0.5 + 1e-6, 4.0, 10000)) {
        double v = p(t);
        if (!(std::abs(v) <= 2.0 * std::pow(4.0 * t, K))) fail("|p(t)| <= 2 (4t)^K for t > 1/2", t, v);
    }
    return p;
}

Poly core_indicator(double delta, double L, DistHint hint) {
    if (!(delta > 0.0 && delta < L)) throw ValidationError("core_indicator: need 0 < delta < L");
    if (hint == DistHint::gaussian) {
        for (int d = kGaussianCoreDegreeCap; d >= 2; d -= 2) {
            Poly q = hermite_optimal(d);
            double dev = 0.0;
            for (double x : linspace(0.0, delta, 2001)) dev = std::max(dev, std::abs(q(x) - 1.0));
            if (dev <= delta) return q;
        }
        throw ConstructionError("core_indicator: no Hermite kernel is flat enough on the core");
    }
    const int m = (kCoreDegreeCap - 1) / 2;  // degree 2m+1 sign, 2m indicator
    const double a = delta / (4.0 * L);
    Poly B = smoothed_sign(m);
    double denom = 2.0 * B(a);
    if (!(denom >= 1e-6))
        throw ConstructionError("core_indicator: normalizing denominator below 1e-6, choose a larger degree");
    const double s = 1.0 / (4.0 * L);
    Poly num = (B.compose_affine(s, a) + B.compose_affine(-s, a)).even_part();
    double n0 = num[0];
    if (!(std::abs(n0) >= 1e-6))
        throw ConstructionError("core_indicator: normalizing denominator below 1e-6, choose a larger degree");
    auto c = num.coeffs();
    for (double& v : c) v /= n0;
    c[0] = 1.0;
    return Poly(std::move(c));
}

AntiConcReport verify_core_indicator(const Poly& q, double delta, double L, double C,
                                     const AntiConcDist& dist) {
    if (!q.is_even(1e-12 * std::max(1.0, q.max_abs_coeff())))
        throw ValidationError("verify_core_indicator: q must be even");
    if (!(delta > 0.0 && delta < L)) throw ValidationError("verify_core_indicator: need 0 < delta < L");
    AntiConcReport r;
    r.delta = delta;
    r.L = L;
    r.C = C;
    r.q0 = q(0.0);
    for (double x : linspace(0.0, delta, 2001)) r.max_dev_core = std::max(r.max_dev_core, std::abs(q(x) - 1.0));
    for (double x : linspace(delta, L, 10001)) r.band_max = std::max(r.band_max, std::abs(q(x)));
    if (auto* g = std::get_if<GaussDist>(&dist)) {
        if (!(g->sigma > 0.0 && g->sigma <= 1.0)) throw ValidationError("verify_core_indicator: need 0 < sigma <= 1");
        r.expectation = g->sigma * g->sigma * gauss_hermite_square(q, g->sigma);
    } else {
        const auto& s = std::get<EmpiricalDist>(dist).sample;
        if (s.empty()) throw ValidationError("verify_core_indicator: empty sample");
        double m2 = 0.0, eq = 0.0;
        for (double x : s) {
            m2 += x * x;
            double v = q(x);
            eq += v * v;
        }
        r.expectation = (m2 / s.size()) * (eq / s.size());
    }
    r.passed = std::abs(r.q0 - 1.0) <= 1e-10 && r.max_dev_core <= delta && r.expectation <= 10.0 * C * delta;
    return r;
}

CoreIndicatorChoice choose_core_indicator(double delta, double C, DistHint hint, const AntiConcDist& dist) {
    const double lo_L = 2.0, hi_L = 64.0;
    if (hint == DistHint::gaussian) {
        CoreIndicatorChoice out;
        out.L = std::max(lo_L, 2.0 * delta);
        out.q = core_indicator(delta, out.L, hint);
        out.report = verify_core_indicator(out.q, delta, out.L, C, dist);
        return out;
    }
    auto attempt = [&](double L) {
        CoreIndicatorChoice c;
        c.L = L;
        c.q = core_indicator(delta, L, hint);
        c.report = verify_core_indicator(c.q, delta, L, C, dist);
        return c;
    };
    auto first = attempt(lo_L);
    if (first.report.passed) return first;
    auto last = attempt(hi_L);
    if (!last.report.passed) return last;
    double lo = lo_L, hi = hi_L;
    while (hi - lo > 1e-3) {
        double mid = 0.5 * (lo + hi);
        auto c = attempt(mid);
        if (c.report.passed) {
            hi = mid;
            last = std::move(c);
        } else {
            lo = mid;
        }
    }
    return last;
}

Poly hermite_normalized(int i) {
    if (i < 0) throw ValidationError("hermite_normalized: negative index");
    Poly prev = Poly::constant(1.0);
    if (i == 0) return prev;
    Poly cur = Poly::x();
    for (int k = 1; k < i; ++k) {
        Poly next = (Poly::x() * cur - prev * std::sqrt(static_cast<double>(k))) * (1.0 / std::sqrt(k + 1.0));
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

double hermite_normalized_at_zero(int i) {
    if (i % 2) return 0.0;
    double h = 1.0;
    for (int k = 1; k < i; k += 2) h = -std::sqrt(static_cast<double>(k)) * h / std::sqrt(k + 1.0);
    return h;
}

Poly hermite_optimal(int d) {
    if (d < 2 || d % 2) throw ValidationError("hermite_optimal: degree must be even and >= 2");
    Poly acc;
    double norm = 0.0;
    Poly prev = Poly::constant(1.0), cur = Poly::x();
    for (int i = 0; i <= d; ++i) {
        const Poly& hi = (i == 0) ? prev : cur;
        double h0 = hermite_normalized_at_zero(i);
        if (h0 != 0.0) {
            acc += hi * h0;
            norm += h0 * h0;
        }
        if (i >= 1) {
            Poly next = (Poly::x() * cur - prev * std::sqrt(static_cast<double>(i))) * (1.0 / std::sqrt(i + 1.0));
            prev = std::move(cur);
            cur = std::move(next);
        }
    }
    auto c = (acc * (1.0 / norm)).even_part().coeffs();
    c[0] = 1.0;  // sum h_i(0)^2 / norm, exact in real arithmetic
    return Poly(std::move(c));
}

double hermite_optimal_value(int d) {
    double s = 0.0;
    for (int i = 0; i <= d; i += 2) {
        double h = hermite_normalized_at_zero(i);
        s += h * h;
    }
    return 1.0 / s;
}

GaussRule gauss_hermite_rule(int n) {
    if (n < 1) throw ValidationError("gauss_hermite_rule: need n >= 1");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    GaussRule r;
    r.nodes.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    auto eval = [n](double x, double& hn, double& dhn, double& sumsq) {
        // normalized recurrence; h_n'(x) = sqrt(n) h_{n-1}(x)
        double hm1 = 0.0, h = 1.0;
        sumsq = 0.0;
        for (int k = 0; k < n; ++k) {
            sumsq += h * h;
            double next = (x * h - std::sqrt(static_cast<double>(k)) * hm1) / std::sqrt(k + 1.0);
            hm1 = h;
            h = next;
        }
        hn = h;
        dhn = std::sqrt(static_cast<double>(n)) * hm1;
    };
    r.weights.resize(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.nodes[i], hn, dhn, sumsq;
        for (int it = 0; it < 3; ++it) {
            eval(x, hn, dhn, sumsq);
            if (dhn == 0.0) break;
            x -= hn / dhn;
        }
        eval(x, hn, dhn, sumsq);
        r.nodes[i] = x;
        r.weights[i] = 1.0 / sumsq;
        total += r.weights[i];
    }
    for (double& w : r.weights) w /= total;
    return r;
}

double gauss_hermite_expectation(const Poly& f, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("gauss_hermite_expectation: sigma must be positive");
    int n = (f.degree() + 1) / 2 + 1;
    if (2 * n - 1 < f.degree()) throw Error("gauss_hermite_expectation: node count too small");
    auto rule = gauss_hermite_rule(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += rule.weights[i] * f(sigma * rule.nodes[i]);
    return s;
}

double gauss_hermite_square(const Poly& p, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("gauss_hermite_square: sigma must be positive");
    int n = p.degree() + 1;
    auto rule = gauss_hermite_rule(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = p(sigma * rule.nodes[i]);
        s += rule.weights[i] * v * v;
    }
    return s;
}

// ---------------------------------------------------------------- certificates

Poly Certificate::sigma0_poly() const {
    Poly s;
    for (const auto& h : sigma0) s += h * h;
    return s;
}

Poly Certificate::sigma1_poly() const {
    Poly s;
    for (const auto& h : sigma1) s += h * h;
    return s;
}

Poly Certificate::reconstruct() const {
    Poly P(std::vector<double>{-a, 1.0});
    Poly Q(std::vector<double>{b, -1.0});
    if (form == Form::even) return sigma0_poly() + P * Q * sigma1_poly();
    return P * sigma0_poly() + Q * sigma1_poly();
}

double Certificate::residual(int grid) const {
    Poly rec = reconstruct();
    double err = 0.0, scale = 0.0;
    for (double x : linspace(a, b, grid)) {
        err = std::max(err, std::abs(rec(x) - target(x)));
        scale = std::max(scale, std::abs(target(x)));
    }
    if (scale == 0.0) return err;
    return err / scale;
}

nlohmann::json to_json(const Certificate& c) {
    nlohmann::json s0 = nlohmann::json::array(), s1 = nlohmann::json::array();
    for (const auto& h : c.sigma0) s0.push_back(to_json(h));
    for (const auto& h : c.sigma1) s1.push_back(to_json(h));
    return {{"interval", {c.a, c.b}},
            {"form", c.form == Certificate::Form::even ? "even" : "odd"},
            {"target", to_json(c.target)},
            {"sigma0_roots", s0},
            {"sigma1_roots", s1}};
}

Certificate certificate_from_json(const nlohmann::json& j) {
    Certificate c;
    for (const char* key : {"interval", "form", "target", "sigma0_roots", "sigma1_roots"})
        if (!j.contains(key)) throw ParseError(fmt::format("certificate: missing field {}", key), key);
    c.a = j.at("interval").at(0).get<double>();
    c.b = j.at("interval").at(1).get<double>();
    auto f = j.at("form").get<std::string>();
    if (f != "even" && f != "odd") throw ParseError("certificate: form must be even or odd", "form");
    c.form = f == "even" ? Certificate::Form::even : Certificate::Form::odd;
    c.target = poly_from_json(j.at("target"));
    for (const auto& h : j.at("sigma0_roots")) c.sigma0.push_back(poly_from_json(h));
    for (const auto& h : j.at("sigma1_roots")) c.sigma1.push_back(poly_from_json(h));
    return c;
}

namespace {

struct RootCluster {
    std::complex<double> centre;
    int mult;
};

std::vector<RootCluster> cluster_roots(const std::vector<std::complex<double>>& roots, double radius) {
    const size_t n = roots.size();
    std::vector<int> label(n, -1);
    int next = 0;
    for (size_t i = 0; i < n; ++i) {
        if (label[i] >= 0) continue;
        label[i] = next;
        std::vector<size_t> stack{i};
        while (!stack.empty()) {
            size_t k = stack.back();
            stack.pop_back();
            for (size_t j = 0; j < n; ++j)
                if (label[j] < 0 && std::abs(roots[j] - roots[k]) <= radius * std::max(1.0, std::abs(roots[k]))) {
                    label[j] = next;
                    stack.push_back(j);
                }
        }
        ++next;
    }
    std::vector<RootCluster> out(next, RootCluster{0.0, 0});
    for (size_t i = 0; i < n; ++i) {
        out[label[i]].centre += roots[i];
        ++out[label[i]].mult;
    }
    for (auto& c : out) c.centre /= static_cast<double>(c.mult);
    return out;
}

Certificate decompose_with_radius(const Poly& g, double a, double b,
                                  const std::vector<std::complex<double>>& roots, double radius) {
    Certificate cert;
    cert.a = a;
    cert.b = b;
    cert.target = g;
    cert.form = (g.degree() % 2 == 0) ? Certificate::Form::even : Certificate::Form::odd;

    const double width = b - a;
    double c = g.coeffs().back();
    // A + iB accumulates the square-root factor of the SOS part
    Poly A = Poly::constant(1.0), B;
    auto mul_complex = [&](double re, double im) {  // times (x - re - i im)
        Poly lin(std::vector<double>{-re, 1.0});
        Poly nA = A * lin + B * im;
        Poly nB = B * lin - A * im;
        A = std::move(nA);
        B = std::move(nB);
    };
    std::vector<std::pair<double, double>> linear;  // alpha P + beta Q
    auto add_P = [&] { linear.emplace_back(1.0, 0.0); };
    auto add_Q = [&] {
        linear.emplace_back(0.0, 1.0);
        c = -c;
    };
    std::vector<double> leftovers;
    for (const auto& cl : cluster_roots(roots, radius)) {
        double re = cl.centre.real(), im = cl.centre.imag();
        double scale = radius * std::max(1.0, std::abs(cl.centre));
        if (im > scale) {
            for (int k = 0; k < cl.mult; ++k) mul_complex(re, im);
            continue;
        }
        if (im < -scale) continue;  // mirror of a kept cluster
        for (int k = 0; k < cl.mult; ++k) {
            if (std::abs(re - a) <= radius * std::max(1.0, width)) {
                add_P();
            } else if (std::abs(re - b) <= radius * std::max(1.0, width)) {
                add_Q();
            } else if (re < a) {
                double t = (a - re) / width;
                linear.emplace_back(1.0 + t, t);
            } else if (re > b) {
                double t = (re - b) / width;
                linear.emplace_back(t, 1.0 + t);
                c = -c;
            } else if (k + 1 < cl.mult) {
                mul_complex(re, 0.0);
                ++k;
            } else {
                leftovers.push_back(re);
            }
        }
    }
    std::sort(leftovers.begin(), leftovers.end());
    size_t k = 0;
    for (; k + 1 < leftovers.size(); k += 2) mul_complex(0.5 * (leftovers[k] + leftovers[k + 1]), 0.0);
    if (k < leftovers.size()) {
        // odd interior root: a sign change at the edge of numerical resolution
        if (leftovers[k] - a < b - leftovers[k]) add_P(); else add_Q();
    }
    if (!(c > 0.0)) throw NotNonnegative("markov_lukacs_decompose: leading sign inconsistent with nonnegativity", a, c);

    const int K = static_cast<int>(linear.size());
    std::vector<double> e(K + 1, 0.0);  // e[i]: coefficient of P^i Q^(K-i)
    e[0] = 1.0;
    for (const auto& [al, be] : linear)
        for (int i = K; i >= 0; --i) e[i] = be * e[i] + (i > 0 ? al * e[i - 1] : 0.0);
    Poly P(std::vector<double>{-a, 1.0});
    Poly Q(std::vector<double>{b, -1.0});
    auto power = [](const Poly& base, int n) {
        Poly r = Poly::constant(1.0);
        for (int i = 0; i < n; ++i) r = r * base;
        return r;
    };
    for (int i = 0; i <= K; ++i) {
        double w = c * e[i];
        if (!(w > 0.0)) continue;
        int j = K - i;
        int mn = std::min(i, j), rest = std::abs(i - j);
        bool restP = i > j;
        bool pq = mn % 2 == 1;
        bool single = rest % 2 == 1;
        Poly h = power(P * Q, mn / 2) * power(restP ? P : Q, rest / 2);
        int type;  // 0: square, 1: PQ, 2: P, 3: Q
        if (!pq && !single) type = 0;
        else if (pq && !single) type = 1;
        else if (!pq) type = restP ? 2 : 3;
        else {  // PQ * P = P^2 Q and PQ * Q = P Q^2
            h = h * (restP ? P : Q);
            type = restP ? 3 : 2;
        }
        double sw = std::sqrt(w);
        auto& dst = (type == 0 || type == 2) ? cert.sigma0 : cert.sigma1;
        Poly ha = A * h * sw;
        Poly hb = B * h * sw;
        if (!ha.is_zero()) dst.push_back(std::move(ha));
        if (!hb.is_zero()) dst.push_back(std::move(hb));
    }
    return cert;
}

}  // namespace

Certificate markov_lukacs_decompose(const Poly& g, double a, double b) {
    if (!(a < b)) throw ValidationError("markov_lukacs_decompose: need a < b");
    {
        double worst = std::numeric_limits<double>::infinity(), wx = a;
        for (double x : linspace(a, b, 1000)) {
            double v = g(x);
            if (v < worst) { worst = v; wx = x; }
        }
        if (worst < -1e-10)
            throw NotNonnegative(fmt::format("polynomial is negative on [{}, {}]: g({}) = {}", a, b, wx, worst), wx,
                                 worst);
    }
    if (g.degree() == 0) {
        Certificate cert;
        cert.a = a;
        cert.b = b;
        cert.target = g;
        if (!g.is_zero()) cert.sigma0.push_back(Poly::constant(std::sqrt(std::max(0.0, g[0]))));
        return cert;
    }
    // clustering radius starts at 1e-7 and widens only if the reconstruction misses
    auto roots = g.roots();
    std::optional<Certificate> best;
    double best_res = std::numeric_limits<double>::infinity();
    for (double radius : {1e-7, 1e-6, 1e-5, 1e-4}) {
        try {
            auto cert = decompose_with_radius(g, a, b, roots, radius);
            double res = cert.residual();
            if (res < best_res) {
                best_res = res;
                best = std::move(cert);
            }
            if (best_res <= 1e-8) break;
        } catch (const NotNonnegative&) {
            if (radius == 1e-4 && !best) throw;
        }
    }
    if (!best || !(best_res <= 1e-8))
        throw ConstructionError(
            fmt::format("markov_lukacs_decompose: reconstruction residual {} exceeds 1e-8", best_res));
    return *best;
}

Poly gaussian_univariate_reduction(const Poly& p) {
    if (!p.is_even(1e-12 * std::max(1.0, p.max_abs_coeff())))
        throw ValidationError("gaussian_univariate_reduction: p must be even");
    Poly sq = p.even_part() * p.even_part();
    std::vector<double> F(sq.degree() / 2 + 1, 0.0);
    for (int j = 0; j < static_cast<int>(F.size()); ++j) F[j] = sq[2 * j] * double_factorial_odd(j);
    return Poly(std::move(F));
}

namespace {

// partitions of k into even parts, non-increasing
void even_partitions(int k, int maxpart, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (k == 0) {
        out.push_back(cur);
        return;
    }
    for (int part = std::min(k, maxpart); part >= 2; part -= 2) {
        cur.push_back(part);
        even_partitions(k - part, part, cur, out);
        cur.pop_back();
    }
}

}  // namespace

Poly boolean_univariate_reduction(const Poly& p, const std::vector<double>& coord_moments, int d) {
    if (d < 1) throw ValidationError("boolean_univariate_reduction: d must be >= 1");
    if (!p.is_even(1e-12 * std::max(1.0, p.max_abs_coeff())))
        throw ValidationError("boolean_univariate_reduction: p must be even");
    Poly sq = p.even_part() * p.even_part();
    const int K = sq.degree();
    if (static_cast<int>(coord_moments.size()) <= K)
        throw ValidationError(fmt::format(
            "boolean_univariate_reduction: coordinate moments required up to order {} (got {})", K,
            static_cast<int>(coord_moments.size()) - 1));
    for (int j = 1; j <= K; j += 2)
        if (std::abs(coord_moments[j]) > 1e-12)
            throw ValidationError(fmt::format(
                "boolean_univariate_reduction: coordinate law must be symmetric (moment {} is {})", j,
                coord_moments[j]));
    std::vector<double> lgf(K + 1, 0.0);  // log factorials
    for (int i = 1; i <= K; ++i) lgf[i] = lgf[i - 1] + std::log(static_cast<double>(i));

    Poly F;
    for (int k = 0; k <= K; k += 2) {
        double ck = sq[k];
        if (ck == 0.0) continue;
        // M_k(r) = E (Z_1 + ... + Z_r)^k as a polynomial in r
        Poly Mk;
        if (k == 0) {
            Mk = Poly::constant(1.0);
        } else {
            std::vector<std::vector<int>> parts;
            std::vector<int> cur;
            even_partitions(k, k, cur, parts);
            for (const auto& lam : parts) {
                double logc = lgf[k];
                double prodmu = 1.0;
                std::map<int, int> mult;
                for (int part : lam) {
                    logc -= lgf[part];
                    prodmu *= coord_moments[part];
                    ++mult[part];
                }
                for (auto [v, cnt] : mult) logc -= lgf[cnt];
                Poly fall = Poly::constant(1.0);
                for (int t = 0; t < static_cast<int>(lam.size()); ++t)
                    fall = fall * Poly(std::vector<double>{-static_cast<double>(t), 1.0});
                Mk += fall * (std::exp(logc) * prodmu);
            }
        }
        // r = s d, and <Y,v> = d^{-1/2} (Z_1 + ... + Z_r)
        F += Mk.compose_affine(static_cast<double>(d), 0.0) * (ck * std::pow(static_cast<double>(d), -k / 2.0));
    }
    return F;
}

Certificate certify_anticoncentration(const Poly& F, double C, double delta) {
    Poly g = Poly::constant(C * delta) - Poly::x() * F;
    double worst = std::numeric_limits<double>::infinity(), ws = 0.0;
    for (double s : linspace(0.0, 1.0, 1000)) {
        double v = g(s);
        if (v < worst) { worst = v; ws = s; }
    }
    if (worst < -1e-10)
        throw CertificationFailed(
            fmt::format("anti-concentration bound fails: C*delta - s F(s) = {} at s = {}", worst, ws), ws, worst);
    return markov_lukacs_decompose(g, 0.0, 1.0);
}

Poly rescale_witness(const Poly& p, double c) {
    if (c == 0.0 || !std::isfinite(c)) throw ValidationError("rescale_witness: c must be a nonzero finite real");
    auto coeffs = p.coeffs();
    double f = 1.0;
    for (double& v : coeffs) {
        v *= f;
        f /= c;
    }
    return Poly(std::move(coeffs));
}

EmpiricalCheck empirical_check(const Eigen::MatrixXd& sample, const Poly& p, double C, double delta, int trials,
                               std::uint64_t seed) {
    if (sample.rows() == 0) throw ValidationError("empirical_check: empty sample");
    EmpiricalCheck out;
    out.threshold = 2.0 * C * delta;
    Rng rng = Rng(seed).split("empirical_check/directions");
    const auto d = sample.cols();
    Eigen::VectorXd v(d);
    for (int t = 0; t < trials; ++t) {
        double nrm = 0.0;
        do {
            for (Eigen::Index k = 0; k < d; ++k) v(k) = rng.normal();
            nrm = v.norm();
        } while (nrm == 0.0);
        v /= nrm;
        Eigen::VectorXd proj = sample * v;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < proj.size(); ++i) {
            double q = p(proj(i));
            acc += q * q;
        }
        out.max_ratio = std::max(out.max_ratio, acc / static_cast<double>(proj.size()));
    }
    out.passed = out.max_ratio <= out.threshold;
    return out;
}

double tail_integral(int d, double L) {
    auto f = [d](double x) { return std::exp(-x * x) * std::pow(x, 2 * d); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, L, std::numeric_limits<double>::infinity(), 15, 1e-12);
}

double tail_integral_bound(int d, double L) {
    return std::exp(-L * L) * (std::pow(L, 2 * d) + std::pow(8.0 * d, d));
}

}  // namespace ldreg
