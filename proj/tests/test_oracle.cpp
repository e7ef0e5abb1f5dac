#include <doctest.h>

#include <cmath>
#include <set>

#include "ldreg/error.hpp"
#include "ldreg/oracle.hpp"

using namespace ldreg;

namespace {

Dataset small(std::uint64_t seed, const AdversaryStrategy& st, int nin = 4, int n = 10, int d = 2) {
    Rng r(seed);
    Eigen::VectorXd ell(d);
    for (int k = 0; k < d; ++k) ell(k) = r.normal();
    ell.normalize();
    auto in = gen_inliers(DistTag::gaussian(), nin, ell, 0.0, seed);
    return apply_adversary(in, st, n, seed);
}

SolubleSet set_of(std::vector<int> idx) {
    SolubleSet s;
    s.indices = std::move(idx);
    s.ell = Eigen::VectorXd::Zero(1);
    return s;
}

}  // namespace

TEST_CASE("binomial coefficients") {
    CHECK(binomial(10, 4) == 210);
    CHECK(binomial(60, 30) == 118264581564861424LL);
    CHECK(binomial(5, 7) == 0);
}

TEST_CASE("inlier set is found with l*") {
    auto ds = small(1, AdversaryStrategy::random_uniform());
    auto rep = enumerate_soluble(ds, 4, 1e-9);
    auto inl = ds.inlier_indices();
    bool found = false;
    for (const auto& s : rep.sets)
        if (s.indices == inl) {
            found = true;
            CHECK((s.ell - *ds.ell_star).norm() <= 1e-12);
        }
    CHECK(found);
    CHECK(rep.examined == 210);
}

TEST_CASE("random outliers leave only the inlier set on a fixed seed") {
    auto ds = small(2, AdversaryStrategy::random_uniform());
    auto rep = enumerate_soluble(ds, 4, 1e-9);
    REQUIRE(rep.sets.size() == 1);
    CHECK(rep.sets[0].indices == ds.inlier_indices());
}

TEST_CASE("enumeration guard and warnings") {
    auto ds = small(3, AdversaryStrategy::random_uniform(), 20, 50);
    CHECK_THROWS_AS(enumerate_soluble(ds, 20, 1e-9), GuardExceeded);
    auto tiny = small(3, AdversaryStrategy::random_uniform(), 1, 4, 2);
    CHECK(enumerate_soluble(tiny, 1, 1e-9).warnings.size() == 1);
}

TEST_CASE("gv instance of dimension 2 yields all four sign patterns") {
    auto ds = gen_gv_instance(2, 4);
    auto rep = enumerate_soluble(ds, 2, 1e-9);
    std::set<std::pair<int, int>> patterns;
    const double v = 1.0 / std::sqrt(2.0);
    for (const auto& s : rep.sets) {
        if (std::abs(std::abs(s.ell(0)) - v) > 1e-12 || std::abs(std::abs(s.ell(1)) - v) > 1e-12) continue;
        patterns.insert({s.ell(0) > 0 ? 1 : -1, s.ell(1) > 0 ? 1 : -1});
    }
    CHECK(patterns.size() == 4);
}

TEST_CASE("simplex projection") {
    Eigen::VectorXd v(3);
    v << 0.5, 0.2, 0.3;
    CHECK((project_simplex(v) - v).norm() < 1e-15);
    v << 2.0, 0.0, 0.0;
    CHECK(project_simplex(v)(0) == 1.0);
    v << 0.7, 0.7, -1.0;
    auto p = project_simplex(v);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p(2) == 0.0);
}

TEST_CASE("single set gives a point mass") {
    auto mu = max_uniform_distribution({set_of({0, 2})}, 4);
    CHECK(mu.prob(0) == 1.0);
    CHECK(mu.W(0) == 1.0);
    CHECK(mu.W(1) == 0.0);
}

TEST_CASE("two disjoint covering sets split evenly") {
    auto mu = max_uniform_distribution({set_of({0, 1}), set_of({2, 3})}, 4);
    CHECK(mu.prob(0) == doctest::Approx(0.5).epsilon(1e-9));
    for (int i = 0; i < 4; ++i) CHECK(mu.W(i) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("an overlapping third set gets no mass") {
    std::vector<SolubleSet> sets = {set_of({0, 1, 2}), set_of({3, 4, 5}), set_of({2, 3, 4})};
    auto mu = max_uniform_distribution(sets, 6);
    CHECK(mu.prob(2) <= 1e-6);
    // exhaustive grid over the 2-simplex
    double best = 1e9, best_third = -1;
    const int G = 400;
    for (int a = 0; a <= G; ++a)
        for (int b = 0; a + b <= G; ++b) {
            Eigen::VectorXd p(3);
            p << a / double(G), b / double(G), (G - a - b) / double(G);
            double f = uniformity_objective(sets, 6, p);
            if (f < best) {
                best = f;
                best_third = p(2);
            }
        }
    CHECK(best_third == 0.0);
    CHECK(mu.objective <= best + 1e-12);
}

TEST_CASE("QP optimum beats uniform and every vertex") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 8;
        int K = 2 + static_cast<int>(rng.below(5));
        std::vector<SolubleSet> sets;
        std::set<std::vector<int>> seen;
        while (static_cast<int>(sets.size()) < K) {
            std::vector<int> idx;
            for (int i = 0; i < n; ++i)
                if (rng.below(2)) idx.push_back(i);
            if (idx.empty() || !seen.insert(idx).second) continue;
            sets.push_back(set_of(idx));
        }
        auto mu = max_uniform_distribution(sets, n);
        CHECK(std::abs(mu.prob.sum() - 1.0) < 1e-12);
        CHECK(mu.prob.minCoeff() >= 0.0);
        Eigen::VectorXd u = Eigen::VectorXd::Constant(K, 1.0 / K);
        CHECK(mu.objective <= uniformity_objective(sets, n, u) + 1e-12);
        for (int k = 0; k < K; ++k)
            CHECK(mu.objective <= uniformity_objective(sets, n, Eigen::VectorXd::Unit(K, k)) + 1e-12);
    }
}

TEST_CASE("fair weight on a second plant instance") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto ds = small(seed, AdversaryStrategy::second_plant());
        auto rep = enumerate_soluble(ds, 4, 1e-9);
        auto mu = max_uniform_distribution(rep.sets, ds.n());
        double inl = 0.0;
        for (int i : ds.inlier_indices()) inl += mu.W(i);
        CHECK(inl >= 0.4 * 4 - 1e-6);
        CHECK(mu.W.sum() == doctest::Approx(4.0).epsilon(1e-9));
        CHECK(mu.W.maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("identifiability list") {
    auto ds = small(5, AdversaryStrategy::second_plant());
    SolubleSet inl;
    inl.indices = ds.inlier_indices();
    inl.ell = *ds.ell_star;
    auto point = max_uniform_distribution({inl}, ds.n());
    auto l = identifiability_list(ds, point, 10, 3);
    for (const auto& e : l.entries) CHECK(e.vector == *ds.ell_star);
    CHECK(identifiability_draws(0.4, 0.2) == 100);
    CHECK(identifiability_draws(0.25, 0.125) == 160);
    auto rep = enumerate_soluble(ds, 4, 1e-9);
    auto mu = max_uniform_distribution(rep.sets, ds.n());
    auto a = identifiability_list(ds, mu, 100, 8), b = identifiability_list(ds, mu, 100, 8);
    for (size_t k = 0; k < a.size(); ++k) CHECK(a.entries[k].vector == b.entries[k].vector);
}

TEST_CASE("partition check") {
    auto ds = small(6, AdversaryStrategy::second_plant(), 5, 10);
    std::vector<int> inl = ds.inlier_indices(), out;
    for (int i = 0; i < ds.n(); ++i)
        if (!(*ds.inlier_mask)[i]) out.push_back(i);
    Eigen::VectorXd decoy = -*ds.ell_star;
    auto r = partition_check(ds, {{out, decoy}, {inl, *ds.ell_star}});
    REQUIRE(r.index);
    CHECK(*r.index == 1);
    CHECK(r.anti_concentrated);
    // every block a decoy: the inliers cannot be consistent with it
    CHECK_THROWS_AS(partition_check(ds, {{out, decoy}, {inl, decoy}}), ValidationError);
    CHECK_THROWS_AS(partition_check(ds, {{out, decoy}, {out, decoy}}), ValidationError);
    // inliers alone, one block
    auto in = gen_inliers(DistTag::gaussian(), 6, *ds.ell_star, 0.0, 1);
    auto solo = apply_adversary(in, AdversaryStrategy::random_uniform(), 6, 1);
    auto s = partition_check(solo, {{solo.inlier_indices(), *ds.ell_star}});
    REQUIRE(s.index);
    CHECK(*s.index == 0);
}
