#include "ldreg/oracle.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"
#include "ldreg/rng.hpp"

namespace ldreg {

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long double r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
        if (r > static_cast<long double>(LLONG_MAX)) return LLONG_MAX;
    }
    return static_cast<long long>(std::llround(r));
}

namespace {

SolubleSet fit_subset(const Dataset& ds, const std::vector<int>& idx) {
    const int k = static_cast<int>(idx.size());
    Eigen::MatrixXd A(k, ds.d());
    Eigen::VectorXd b(k);
    for (int r = 0; r < k; ++r) {
        A.row(r) = ds.X.row(idx[r]);
        b(r) = ds.y(idx[r]);
    }
    SolubleSet s;
    s.indices = idx;
    s.ell = A.completeOrthogonalDecomposition().solve(b);
    s.residual = (A * s.ell - b).cwiseAbs().maxCoeff();
    return s;
}

}  // namespace

EnumerationReport enumerate_soluble(const Dataset& ds, int size, double tol, long long guard) {
    const int n = ds.n();
    if (size < 1 || size > n) throw ValidationError(fmt::format("subset size {} outside [1, {}]", size, n));
    long long total = binomial(n, size);
    if (total > guard)
        throw GuardExceeded(fmt::format("C({}, {}) = {} subsets exceeds the guard {}; use a smaller n", n, size,
                                        total == LLONG_MAX ? std::string("overflow") : std::to_string(total), guard));
    EnumerationReport rep;
    if (size < ds.d())
        rep.warnings.push_back(fmt::format("size {} < d = {}: systems are under-determined, min-norm solutions kept", size, ds.d()));
    std::vector<int> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        ++rep.examined;
        auto s = fit_subset(ds, idx);
        if (s.residual <= tol) rep.sets.push_back(std::move(s));
        int k = size - 1;
        while (k >= 0 && idx[k] == n - size + k) --k;
        if (k < 0) break;
        ++idx[k];
        for (int j = k + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
    return rep;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        css += u[k];
        double t = (css - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

namespace {

Eigen::MatrixXd incidence(const std::vector<SolubleSet>& sets, int n) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(sets.size()));
    for (size_t s = 0; s < sets.size(); ++s)
        for (int i : sets[s].indices) {
            if (i < 0 || i >= n) throw ValidationError("soluble set index out of range");
            B(i, static_cast<Eigen::Index>(s)) = 1.0;
        }
    return B;
}

}  // namespace

double uniformity_objective(const std::vector<SolubleSet>& sets, int n, const Eigen::VectorXd& prob) {
    return (incidence(sets, n) * prob).squaredNorm();
}

SubsetDistribution max_uniform_distribution(const std::vector<SolubleSet>& sets_in, int n, double tol, int max_iter) {
    if (sets_in.empty()) throw ValidationError("max_uniform_distribution: empty set list");
    // collapse sets with identical index sets
    std::vector<SolubleSet> sets;
    {
        std::vector<std::vector<int>> seen;
        for (const auto& s : sets_in) {
            auto key = s.indices;
            std::sort(key.begin(), key.end());
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
            seen.push_back(key);
            sets.push_back(s);
        }
    }
    const Eigen::MatrixXd B = incidence(sets, n);
    const Eigen::MatrixXd H = B.transpose() * B;
    const Eigen::Index K = H.rows();
    // L = 2 ||B||^2; the spectral norm of H is bounded by its max row sum
    const double Lc = 2.0 * std::max(1.0, H.cwiseAbs().rowwise().sum().maxCoeff());
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
    SubsetDistribution out;
    int it = 0;
    double gap = 0.0;
    for (it = 0; it < max_iter; ++it) {
        Eigen::VectorXd g = 2.0 * H * mu;
        gap = g.dot(mu) - g.minCoeff();
        // a tight stop: the inlier mass bound is often attained with equality
        if (gap <= tol * 1e-3) break;
        mu = project_simplex(mu - g / Lc);
    }
    out.support = sets;
    out.prob = mu;
    out.W = B * mu;
    out.objective = out.W.squaredNorm();
    out.fw_gap = gap;
    out.iterations = it;
    if (gap > tol) throw SolverError(fmt::format("uniformity QP did not reach stationarity {} (gap {:.3g})", tol, gap));
    return out;
}

int identifiability_draws(double alpha, double delta) {
    if (!(alpha > delta)) throw ValidationError("identifiability_draws: need alpha > delta");
    return static_cast<int>(std::ceil(20.0 / (alpha - delta) - 1e-9));
}

CandidateList identifiability_list(const Dataset& ds, const SubsetDistribution& mu, int draws, std::uint64_t seed) {
    if (mu.support.empty() || mu.prob.size() != static_cast<Eigen::Index>(mu.support.size()))
        throw ValidationError("identifiability_list: invalid distribution");
    CandidateList out;
    out.seed = seed;
    std::vector<double> cum(mu.support.size());
    double acc = 0.0;
    for (size_t s = 0; s < cum.size(); ++s) cum[s] = (acc += std::max(0.0, mu.prob(static_cast<Eigen::Index>(s))));
    Rng rng = Rng(seed).split("oracle/draws");
    (void)ds;
    for (int k = 0; k < draws; ++k) {
        double u = rng.uniform() * acc;
        size_t s = std::min<size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), cum.size() - 1);
        out.entries.push_back({mu.support[s].ell, static_cast<int>(s), mu.prob(static_cast<Eigen::Index>(s))});
    }
    return out;
}

PartitionResult partition_check(const Dataset& ds, const std::vector<PartitionBlock>& partition, double tol) {
    if (!ds.ell_star || !ds.inlier_mask) throw ValidationError("partition_check needs ell_star and inlier_mask");
    if (partition.empty()) throw ValidationError("partition_check: empty partition");
    const int n = ds.n();
    std::vector<int> owner(n, -1);
    const double min_size = ds.alpha * n - 1e-9;
    const double res_tol = ds.zeta > 0 ? 4.0 * ds.zeta : tol;
    for (size_t j = 0; j < partition.size(); ++j) {
        const auto& [idx, ell] = partition[j];
        if (ell.size() != ds.d()) throw ValidationError(fmt::format("block {}: dimension mismatch", j));
        if (static_cast<double>(idx.size()) < min_size)
            throw ValidationError(fmt::format("block {} has {} rows, fewer than alpha n", j, idx.size()));
        for (int i : idx) {
            if (i < 0 || i >= n) throw ValidationError(fmt::format("block {}: row {} out of range", j, i));
            if (owner[i] >= 0) throw ValidationError(fmt::format("row {} appears in blocks {} and {}", i, owner[i], j));
            owner[i] = static_cast<int>(j);
            double r = std::abs(ds.y(i) - ds.X.row(i).dot(ell));
            if (r > res_tol)
                throw ValidationError(fmt::format("block {} is not consistent: row {} has residual {:.3g}", j, i, r));
        }
    }
    const auto& ls = *ds.ell_star;
    const auto inl = ds.inlier_indices();
    PartitionResult pr;
    pr.anti_concentrated = true;
    std::optional<int> match;
    for (size_t j = 0; j < partition.size(); ++j) {
        Eigen::VectorXd diff = partition[j].second - ls;
        if (diff.norm() <= 1e-9) {
            if (!match) match = static_cast<int>(j);
            continue;
        }
        // inlier mass on the hyperplane <x, l_j - l*> = 0
        int on = 0;
        for (int i : inl)
            if (std::abs(ds.X.row(i).dot(diff)) <= 1e-9 * std::max(1.0, ds.X.row(i).norm())) ++on;
        double frac = inl.empty() ? 0.0 : static_cast<double>(on) / static_cast<double>(inl.size());
        pr.worst_fraction = std::max(pr.worst_fraction, frac);
        if (frac >= ds.alpha) pr.anti_concentrated = false;
    }
    if (pr.anti_concentrated) pr.index = match;
    return pr;
}

nlohmann::json to_json(const SubsetDistribution& mu) {
    nlohmann::json j;
    nlohmann::json sup = nlohmann::json::array();
    for (size_t s = 0; s < mu.support.size(); ++s) {
        const auto& set = mu.support[s];
        sup.push_back({{"indices", set.indices},
                       {"ell", std::vector<double>(set.ell.data(), set.ell.data() + set.ell.size())},
                       {"residual", set.residual},
                       {"probability", mu.prob(static_cast<Eigen::Index>(s))}});
    }
    j["support"] = sup;
    j["W"] = std::vector<double>(mu.W.data(), mu.W.data() + mu.W.size());
    j["objective"] = mu.objective;
    j["fw_gap"] = mu.fw_gap;
    j["iterations"] = mu.iterations;
    return j;
}

}  // namespace ldreg
