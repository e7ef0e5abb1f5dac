#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ldreg/datagen.hpp"
#include "ldreg/error.hpp"

using namespace ldreg;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ldreg_test_" + name);
}

Eigen::VectorXd unit(int d, int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
    e(i) = 1.0;
    return e;
}

Dataset plant_instance(std::uint64_t seed) {
    Eigen::VectorXd ell(4);
    ell << 0.5, -0.5, 0.5, 0.5;
    auto in = gen_inliers(DistTag::gaussian(), 48, ell, 0.0, seed);
    return apply_adversary(in, AdversaryStrategy::second_plant(), 120, seed);
}

}  // namespace

TEST_CASE("noiseless gaussian labels equal the first coordinate") {
    Eigen::VectorXd ell(2);
    ell << 1.0, 0.0;
    auto s = gen_inliers(DistTag::gaussian(), 200, ell, 0.0, 3);
    for (int i = 0; i < 200; ++i) CHECK(s.y(i) == s.X(i, 0));
}

TEST_CASE("hypercube labels lie in the finite support") {
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(3, 1.0 / std::sqrt(3.0));
    auto s = gen_inliers(DistTag::hypercube01(), 500, ell, 0.0, 11);
    for (int i = 0; i < 500; ++i) {
        double k = s.y(i) * std::sqrt(3.0);
        CHECK(std::abs(k - std::round(k)) < 1e-12);
        CHECK(std::round(k) >= 0);
        CHECK(std::round(k) <= 3);
    }
}

TEST_CASE("gaussian second moments") {
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(4);
    ell(0) = 1.0;
    auto s = gen_inliers(DistTag::gaussian(), 10000, ell, 0.0, 5);
    for (int k = 0; k < 4; ++k) {
        double m2 = s.X.col(k).squaredNorm() / 10000.0;
        CHECK(m2 >= 0.9);
        CHECK(m2 <= 1.1);
    }
}

TEST_CASE("gen_inliers preconditions and determinism") {
    Eigen::VectorXd big = Eigen::VectorXd::Constant(2, 1.0);
    CHECK_THROWS_AS(gen_inliers(DistTag::gaussian(), 10, big, 0.0, 1), ValidationError);
    Eigen::VectorXd ell = unit(2, 0);
    CHECK_THROWS_AS(gen_inliers(DistTag::make_custom("cauchy"), 10, ell, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(gen_inliers(DistTag::gaussian(), 0, ell, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(gen_inliers(DistTag::gaussian(), 5, ell, -1.0, 1), ValidationError);
    auto a = gen_inliers(DistTag::gaussian(), 30, ell, 0.1, 9);
    auto b = gen_inliers(DistTag::gaussian(), 30, ell, 0.1, 9);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    for (int i = 0; i < 30; ++i) CHECK(std::abs(a.y(i) - a.X(i, 0)) <= 0.1);
}

TEST_CASE("second_plant outliers follow the decoy exactly") {
    auto ds = plant_instance(7);
    REQUIRE(ds.inlier_mask);
    Eigen::VectorXd decoy = -*ds.ell_star;
    int outliers = 0;
    for (int i = 0; i < ds.n(); ++i) {
        if ((*ds.inlier_mask)[i]) continue;
        ++outliers;
        CHECK(ds.y(i) == doctest::Approx(ds.X.row(i).dot(decoy)).epsilon(1e-14));
    }
    CHECK(outliers == 72);
    CHECK(ds.alpha == doctest::Approx(0.4));
    CHECK_NOTHROW(ds.validate());
}

TEST_CASE("gv_ensemble outliers contain every pair") {
    const int d = 4;
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(d, 0.5);
    auto in = gen_inliers(DistTag::make_custom("basis"), 8, ell, 0.0, 2);
    auto ds = apply_adversary(in, AdversaryStrategy::gv_ensemble(), 16, 2);
    std::set<std::pair<int, int>> seen;
    for (int i = 0; i < ds.n(); ++i) {
        if ((*ds.inlier_mask)[i]) continue;
        int coord = -1;
        for (int k = 0; k < d; ++k)
            if (ds.X(i, k) == 1.0) coord = k;
        REQUIRE(coord >= 0);
        CHECK(ds.X.row(i).sum() == 1.0);
        CHECK(std::abs(std::abs(ds.y(i)) - 0.5) < 1e-15);
        seen.insert({coord, ds.y(i) > 0 ? 1 : -1});
    }
    CHECK(seen.size() == 2 * d);
}

TEST_CASE("random_uniform outlier count") {
    Eigen::VectorXd ell = unit(3, 1);
    auto in = gen_inliers(DistTag::gaussian(), 40, ell, 0.0, 4);
    auto ds = apply_adversary(in, AdversaryStrategy::random_uniform(), 100, 4);
    CHECK(ds.n() == 100);
    CHECK(ds.inlier_indices().size() == 40);
    CHECK(100 - ds.inlier_indices().size() == 60);
    CHECK_THROWS_AS(apply_adversary(in, AdversaryStrategy::random_uniform(), 39, 4), ValidationError);
}

TEST_CASE("mixture_Ri outliers shift the label by a nonzero residue") {
    Eigen::VectorXd ell = unit(3, 1);
    auto in = gen_inliers(DistTag::qary(3), 30, ell, 0.0, 8);
    auto ds = apply_adversary(in, AdversaryStrategy::mixture_Ri(3, 2), 90, 8);
    for (int i = 0; i < ds.n(); ++i) {
        long shift = (static_cast<long>(ds.y(i)) - static_cast<long>(ds.X(i, 1)) + 3) % 3;
        if ((*ds.inlier_mask)[i]) CHECK(shift == 0);
        else CHECK(shift != 0);
    }
}

TEST_CASE("single component mixture matches gen_inliers") {
    Eigen::VectorXd ell(2);
    ell << 0.6, 0.8;
    auto mix = gen_mixed_regression({{1.0, ell}}, DistTag::gaussian(), 50, 12);
    auto in = gen_inliers(DistTag::gaussian(), 50, ell, 0.0, 12);
    CHECK(mix.X == in.X);
    CHECK(mix.y == in.y);
    CHECK_THROWS_AS(gen_mixed_regression({}, DistTag::gaussian(), 10, 1), ValidationError);
}

TEST_CASE("two component counts concentrate") {
    Eigen::VectorXd ell(2);
    ell << 0.6, 0.8;
    const int n = 4000;
    auto mix = gen_mixed_regression({{0.5, ell}, {0.5, -ell}}, DistTag::gaussian(), n, 21);
    int c0 = static_cast<int>(std::count(mix.component.begin(), mix.component.end(), 0));
    double sd = std::sqrt(n * 0.25);
    CHECK(std::abs(c0 - n / 2.0) <= 4.0 * sd);
    CHECK(mix.alpha == 0.5);
}

TEST_CASE("any component of a three-way mixture is a valid inlier set") {
    std::vector<MixtureComponent> comps = {{1.0 / 3, unit(3, 0)}, {1.0 / 3, unit(3, 1)}, {1.0 / 3, unit(3, 2)}};
    auto mix = gen_mixed_regression(comps, DistTag::gaussian(), 300, 17);
    for (int j = 0; j < 3; ++j) {
        auto ds = with_component_as_inliers(mix, j, comps[j].ell);
        CHECK_NOTHROW(ds.validate());
        CHECK(std::abs(ds.alpha - 1.0 / 3) < 0.1);
    }
}

TEST_CASE("gv instance of dimension 2 admits every sign pattern") {
    auto ds = gen_gv_instance(2, 3);
    CHECK(ds.ambiguous);
    const double v = 1.0 / std::sqrt(2.0);
    for (int s1 : {-1, 1})
        for (int s2 : {-1, 1}) {
            bool r1 = false, r2 = false;
            for (int i = 0; i < ds.n(); ++i) {
                if (ds.X(i, 0) == 1.0 && ds.y(i) == s1 * v) r1 = true;
                if (ds.X(i, 1) == 1.0 && ds.y(i) == s2 * v) r2 = true;
            }
            CHECK(r1);
            CHECK(r2);
        }
    for (int i : ds.inlier_indices()) CHECK(ds.X.row(i).dot(*ds.ell_star) == doctest::Approx(ds.y(i)));
}

TEST_CASE("gv instance of dimension 8 has many consistent candidates") {
    const int d = 8;
    auto ds = gen_gv_instance(d, 5);
    const double v = 1.0 / std::sqrt(static_cast<double>(d));
    int full = 0;
    for (int mask = 0; mask < (1 << d); ++mask) {
        Eigen::VectorXd a(d);
        for (int k = 0; k < d; ++k) a(k) = (mask >> k & 1) ? -v : v;
        int consistent = 0;
        std::set<int> coords;
        for (int i = 0; i < ds.n(); ++i)
            if (ds.y(i) == ds.X.row(i).dot(a)) {
                ++consistent;
                for (int k = 0; k < d; ++k)
                    if (ds.X(i, k) == 1.0) coords.insert(k);
            }
        if (consistent >= d && static_cast<int>(coords.size()) == d) ++full;
    }
    CHECK(full >= d);
    CHECK(full == (1 << d));
}

TEST_CASE("dataset file round trip is bit identical") {
    auto ds = plant_instance(13);
    auto p = tmp_path("roundtrip.json");
    save_dataset(ds, p);
    std::vector<std::string> warn;
    auto back = load_dataset(p, &warn);
    CHECK(warn.empty());
    CHECK(back.X == ds.X);
    CHECK(back.y == ds.y);
    CHECK(back.alpha == ds.alpha);
    CHECK(*back.ell_star == *ds.ell_star);
    CHECK(*back.inlier_mask == *ds.inlier_mask);
    CHECK(back.seed == ds.seed);
    CHECK(back.generator == "second_plant");
    CHECK(serialize_dataset(back) == serialize_dataset(ds));
    std::filesystem::remove(p);
}

TEST_CASE("missing alpha is named in the parse error") {
    auto j = nlohmann::json::parse(serialize_dataset(plant_instance(1)));
    j.erase("alpha");
    try {
        parse_dataset(j.dump());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.field == "alpha");
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
}

TEST_CASE("syntax errors report a line") {
    std::string text = serialize_dataset(plant_instance(1));
    auto pos = text.find("\"rows\"");
    text.insert(pos, "@");
    try {
        parse_dataset(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line > 1);
    }
}

TEST_CASE("unknown fields are ignored with a warning") {
    auto j = nlohmann::json::parse(serialize_dataset(plant_instance(1)));
    j["future_field"] = 42;
    std::vector<std::string> warn;
    auto ds = parse_dataset(j.dump(), &warn);
    REQUIRE(warn.size() == 1);
    CHECK(warn[0].find("future_field") != std::string::npos);
    CHECK(ds.n() == 120);
}

TEST_CASE("csv export has a header and n rows") {
    auto ds = plant_instance(2);
    auto p = tmp_path("export.csv");
    export_csv(ds, p);
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    CHECK(line == "x1,x2,x3,x4,y");
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 120);
    std::filesystem::remove(p);
}
