#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ldreg/datagen.hpp"
#include "ldreg/rounding.hpp"

namespace ldreg {

struct SolubleSet {
    std::vector<int> indices;
    Eigen::VectorXd ell;
    double residual = 0.0;  // max |y_i - <x_i, l>| over the subset
};

struct EnumerationReport {
    std::vector<SolubleSet> sets;
    long long examined = 0;
    std::vector<std::string> warnings;
};

inline constexpr long long kEnumerationGuard = 1000000;

long long binomial(int n, int k);  // saturates at LLONG_MAX

// every size-subset whose system is consistent within tol (min-norm least squares per subset)
EnumerationReport enumerate_soluble(const Dataset& ds, int size, double tol, long long guard = kEnumerationGuard);

struct SubsetDistribution {
    std::vector<SolubleSet> support;
    Eigen::VectorXd prob;
    Eigen::VectorXd W;  // W_i = sum_{S contains i} mu(S)
    double objective = 0.0;  // sum W_i^2
    double fw_gap = 0.0;
    int iterations = 0;
};

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

// minimizes sum_i W_i^2 over the simplex by projected gradient
SubsetDistribution max_uniform_distribution(const std::vector<SolubleSet>& sets, int n, double tol = 1e-9,
                                            int max_iter = 100000);
double uniformity_objective(const std::vector<SolubleSet>& sets, int n, const Eigen::VectorXd& prob);

int identifiability_draws(double alpha, double delta);  // ceil(20 / (alpha - delta))
CandidateList identifiability_list(const Dataset& ds, const SubsetDistribution& mu, int draws, std::uint64_t seed);

using PartitionBlock = std::pair<std::vector<int>, Eigen::VectorXd>;

struct PartitionResult {
    std::optional<int> index;
    bool anti_concentrated = false;
    double worst_fraction = 0.0;  // largest inlier fraction on a hyperplane <x, l_j - l*> = 0 with l_j != l*
};

// throws ValidationError when the blocks overlap, are too small, or are not consistent
PartitionResult partition_check(const Dataset& ds, const std::vector<PartitionBlock>& partition, double tol = 1e-9);

nlohmann::json to_json(const SubsetDistribution& mu);

}  // namespace ldreg
