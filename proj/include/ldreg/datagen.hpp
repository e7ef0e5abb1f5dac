#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ldreg/rng.hpp"

namespace ldreg {

struct DistTag {
    enum class Kind { gaussian, hypercube01, qary, custom };
    Kind kind = Kind::gaussian;
    std::optional<Eigen::MatrixXd> cov;  // gaussian only; identity when absent
    int q = 2;                           // qary only
    std::string custom;                  // "rademacher" ({+-1}^d) or "basis" (uniform on e_1..e_d)

    static DistTag gaussian() { return {}; }
    static DistTag gaussian(Eigen::MatrixXd cov);
    static DistTag hypercube01();
    static DistTag qary(int q);
    static DistTag make_custom(std::string name);
    std::string name() const;
};

enum class NoiseModel { uniform, gaussian };

std::string to_string(NoiseModel m);

struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    double alpha = 1.0;
    std::optional<Eigen::VectorXd> ell_star;
    std::optional<std::vector<bool>> inlier_mask;
    double zeta = 0.0;
    NoiseModel noise = NoiseModel::uniform;
    std::uint64_t seed = 0;
    DistTag dist;
    bool ambiguous = false;
    std::vector<int> component;  // mixture component per row, empty otherwise
    std::string generator;       // provenance, e.g. "second_plant"

    int n() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }
    std::vector<int> inlier_indices() const;
    // throws ValidationError when an invariant fails
    void validate() const;
};

// round half away from zero
long round_count(double v);

struct InlierSample {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    DistTag dist;
    Eigen::VectorXd ell_star;
    double zeta = 0.0;
    NoiseModel noise = NoiseModel::uniform;
    std::uint64_t seed = 0;
};

Eigen::MatrixXd sample_rows(const DistTag& dist, int n, int d, Rng& rng);

InlierSample gen_inliers(const DistTag& dist, int n_in, const Eigen::VectorXd& ell_star, double zeta,
                         std::uint64_t seed, NoiseModel noise = NoiseModel::uniform);

struct AdversaryStrategy {
    enum class Kind { random_uniform, second_plant, gv_ensemble, mixture_Ri };
    Kind kind = Kind::random_uniform;
    double range = 2.0;                    // random_uniform label range, also filler for second_plant
    std::optional<Eigen::VectorXd> decoy;  // second_plant; defaults to -ell_star
    double fraction = 1.0;                 // second_plant: share of outliers on the decoy
    int q = 2;                             // mixture_Ri
    int coord = 1;                         // mixture_Ri, 1-based

    static AdversaryStrategy random_uniform(double range = 2.0);
    static AdversaryStrategy second_plant(std::optional<Eigen::VectorXd> decoy = std::nullopt, double fraction = 1.0);
    static AdversaryStrategy gv_ensemble();
    static AdversaryStrategy mixture_Ri(int q, int coord);
    std::string name() const;
};

Dataset apply_adversary(const InlierSample& inliers, const AdversaryStrategy& strategy, int n_total,
                        std::uint64_t seed);

struct MixtureComponent {
    double weight;
    Eigen::VectorXd ell;
};

// no inlier mask; alpha = min weight. Use with_component_as_inliers to pick a cluster.
Dataset gen_mixed_regression(const std::vector<MixtureComponent>& components, const DistTag& dist, int n,
                             std::uint64_t seed, double zeta = 0.0);
Dataset with_component_as_inliers(const Dataset& ds, int component, const Eigen::VectorXd& ell);

// d standard normals from Rng(seed), normalized
Eigen::VectorXd random_unit_vector(int d, std::uint64_t seed);

// d inliers uniform on {e_i} labeled by 1/sqrt(d), plus `copies` copies of {(e_i, +-1/sqrt(d))}
Dataset gen_gv_instance(int d, std::uint64_t seed, int copies = 1);

nlohmann::json to_json(const DistTag& t);
DistTag dist_from_json(const nlohmann::json& j);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
// warnings (unknown fields) are appended to *warnings, or printed to stderr when null
Dataset load_dataset(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
Dataset parse_dataset(const std::string& text, std::vector<std::string>* warnings = nullptr);
std::string serialize_dataset(const Dataset& ds);
void export_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace ldreg
