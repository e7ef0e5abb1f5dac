#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldreg/datagen.hpp"

namespace ldreg {

// modq: x ~ [q]^d, a ~ [q], y = (x_i + a) mod q.  boolean01: a ~ {0,1}, y = <x, (1-a) e_i>.
// [q] = {0, .., q-1}; a = 0 draws are the inliers.
enum class EnsembleVariant { modq, boolean01 };
std::string to_string(EnsembleVariant v);

struct EnsembleSpec {
    int q = 2;
    int d = 1;
    int i = 1;  // 1-based coordinate
    EnsembleVariant variant = EnsembleVariant::modq;
    void validate() const;
};

struct LabeledSample {
    Eigen::MatrixXi X;
    Eigen::VectorXi y;
    std::vector<int> a;
    std::vector<bool> inlier;
};

LabeledSample gen_Ri(const EnsembleSpec& spec, int n, std::uint64_t seed);
// inliers (a = 0) masked, ell_star = e_i, alpha = realized inlier fraction
Dataset to_dataset(const LabeledSample& s, const EnsembleSpec& spec, std::uint64_t seed);

inline constexpr long long kTableGuard = 10000000;

// exact law of (x, y) over [q]^{d+1}: probability of outcome k is count[k] / denominator,
// outcome k encodes (x_1, .., x_d, y) in base q with x_1 least significant
struct ProbTable {
    int q = 2;
    int d = 1;
    std::vector<long long> count;
    long long denominator = 1;
    bool operator==(const ProbTable& o) const {
        return q == o.q && d == o.d && count == o.count && denominator == o.denominator;
    }
};

ProbTable joint_law(const EnsembleSpec& spec);
// total variation as an exact fraction numerator / (2 * denominator); 0 iff identical
long long tv_numerator(const ProbTable& a, const ProbTable& b);
void export_table_csv(const ProbTable& t, const std::filesystem::path& path);

struct ExactProbability {
    long long count = 0;
    long long total = 1;
    double value() const { return static_cast<double>(count) / static_cast<double>(total); }
};

// Pr_{x ~ [q]^d}[<x, v> = 0] for integer v
ExactProbability hypercube_anticonc(const std::vector<long long>& v, int q);
// rational v given as (numerator, denominator) pairs; denominators are cleared first
ExactProbability hypercube_anticonc(const std::vector<std::pair<long long, long long>>& v, int q);

}  // namespace ldreg
