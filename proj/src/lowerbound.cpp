#include "ldreg/lowerbound.hpp"

#include <fstream>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "ldreg/error.hpp"
#include "ldreg/rng.hpp"

namespace ldreg {

std::string to_string(EnsembleVariant v) {
    return v == EnsembleVariant::modq ? "modq" : "boolean01";
}

void EnsembleSpec::validate() const {
    if (q < 2) throw ValidationError("ensemble: q must be >= 2");
    if (d < 1) throw ValidationError("ensemble: d must be >= 1");
    if (i < 1 || i > d) throw ValidationError(fmt::format("ensemble: coordinate {} outside 1..{}", i, d));
}

namespace {

int label(const EnsembleSpec& s, int xi, int a) {
    return s.variant == EnsembleVariant::modq ? (xi + a) % s.q : (1 - a) * xi;
}

int a_range(const EnsembleSpec& s) {
    return s.variant == EnsembleVariant::modq ? s.q : 2;
}

long long ipow(long long b, int e, long long guard) {
    long long r = 1;
    for (int k = 0; k < e; ++k) {
        if (r > guard / b) return guard + 1;
        r *= b;
    }
    return r;
}

}  // namespace

LabeledSample gen_Ri(const EnsembleSpec& spec, int n, std::uint64_t seed) {
    spec.validate();
    if (n < 0) throw ValidationError("gen_Ri: n must be >= 0");
    Rng root(seed);
    Rng xs = root.split("lowerbound/x"), as = root.split("lowerbound/a");
    LabeledSample s;
    s.X.resize(n, spec.d);
    s.y.resize(n);
    s.a.resize(n);
    s.inlier.resize(n);
    for (int r = 0; r < n; ++r) {
        for (int k = 0; k < spec.d; ++k) s.X(r, k) = static_cast<int>(xs.below(spec.q));
        int a = static_cast<int>(as.below(a_range(spec)));
        s.a[r] = a;
        s.y(r) = label(spec, s.X(r, spec.i - 1), a);
        s.inlier[r] = a == 0;
    }
    return s;
}

Dataset to_dataset(const LabeledSample& s, const EnsembleSpec& spec, std::uint64_t seed) {
    Dataset ds;
    ds.X = s.X.cast<double>();
    ds.y = s.y.cast<double>();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(spec.d);
    e(spec.i - 1) = 1.0;
    ds.ell_star = e;
    ds.inlier_mask = s.inlier;
    long cnt = std::count(s.inlier.begin(), s.inlier.end(), true);
    ds.alpha = s.inlier.empty() ? 1.0 : static_cast<double>(cnt) / static_cast<double>(s.inlier.size());
    ds.seed = seed;
    ds.dist = spec.variant == EnsembleVariant::modq ? DistTag::qary(spec.q) : DistTag::qary(spec.q);
    ds.generator = "R_" + std::to_string(spec.i) + "/" + to_string(spec.variant);
    return ds;
}

ProbTable joint_law(const EnsembleSpec& spec) {
    spec.validate();
    const long long cells = ipow(spec.q, spec.d + 1, kTableGuard);
    if (cells > kTableGuard)
        throw GuardExceeded(fmt::format("joint law table q^(d+1) exceeds {}", kTableGuard));
    ProbTable t;
    t.q = spec.q;
    t.d = spec.d;
    t.count.assign(static_cast<size_t>(cells), 0);
    const long long nx = cells / spec.q;
    const int na = a_range(spec);
    std::vector<int> x(spec.d, 0);
    for (long long code = 0; code < nx; ++code) {
        long long c = code;
        for (int k = 0; k < spec.d; ++k) {
            x[k] = static_cast<int>(c % spec.q);
            c /= spec.q;
        }
        for (int a = 0; a < na; ++a) {
            int y = label(spec, x[spec.i - 1], a);
            t.count[static_cast<size_t>(code + nx * y)] += 1;
        }
    }
    t.denominator = nx * na;
    long long g = t.denominator;
    for (long long c : t.count) g = std::gcd(g, c);
    if (g > 1) {
        for (auto& c : t.count) c /= g;
        t.denominator /= g;
    }
    return t;
}

long long tv_numerator(const ProbTable& a, const ProbTable& b) {
    if (a.q != b.q || a.d != b.d) throw ValidationError("tables over different outcome spaces");
    // |p - r| summed with a common denominator a.den * b.den
    long long s = 0;
    for (size_t k = 0; k < a.count.size(); ++k) s += std::llabs(a.count[k] * b.denominator - b.count[k] * a.denominator);
    return s;
}

void export_table_csv(const ProbTable& t, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    for (int k = 0; k < t.d; ++k) f << "x" << k + 1 << ",";
    f << "y,numerator,denominator\n";
    for (size_t code = 0; code < t.count.size(); ++code) {
        long long c = static_cast<long long>(code);
        for (int k = 0; k <= t.d; ++k) {
            f << c % t.q << ",";
            c /= t.q;
        }
        long long g = std::gcd(t.count[code], t.denominator);
        if (g == 0) g = 1;
        f << t.count[code] / g << "," << t.denominator / g << "\n";
    }
}

ExactProbability hypercube_anticonc(const std::vector<long long>& v, int q) {
    if (q < 2) throw ValidationError("hypercube_anticonc: q must be >= 2");
    if (v.empty() || std::all_of(v.begin(), v.end(), [](long long c) { return c == 0; }))
        throw ValidationError("hypercube_anticonc: v must be nonzero");
    const int d = static_cast<int>(v.size());
    const long long total = ipow(q, d, kTableGuard);
    if (total > kTableGuard) throw GuardExceeded(fmt::format("q^d exceeds {}", kTableGuard));
    // count of x with partial sum s, one coordinate at a time
    std::unordered_map<long long, long long> ways{{0, 1}};
    for (int k = 0; k < d; ++k) {
        std::unordered_map<long long, long long> next;
        for (const auto& [s, c] : ways)
            for (int x = 0; x < q; ++x) next[s + v[k] * x] += c;
        ways = std::move(next);
    }
    auto it = ways.find(0);
    return {it == ways.end() ? 0 : it->second, total};
}

ExactProbability hypercube_anticonc(const std::vector<std::pair<long long, long long>>& v, int q) {
    long long l = 1;
    for (const auto& [num, den] : v) {
        if (den == 0) throw ValidationError("hypercube_anticonc: zero denominator");
        l = std::lcm(l, std::llabs(den));
    }
    std::vector<long long> iv;
    for (const auto& [num, den] : v) iv.push_back(num * (l / den));
    return hypercube_anticonc(iv, q);
}

}  // namespace ldreg
