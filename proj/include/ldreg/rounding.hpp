#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ldreg/momentprog.hpp"

namespace ldreg {

struct Candidate {
    Eigen::VectorXd vector;
    int source_index = 0;
    double weight = 0.0;  // pE[w_i] / (alpha n)
};

struct CandidateList {
    std::vector<Candidate> entries;
    std::uint64_t seed = 0;
    double dedupe_radius = -1.0;  // negative: not deduplicated
    std::vector<std::string> warnings;

    size_t size() const { return entries.size(); }
};

// row i = pE[w_i l] / pE[w_i] when pE[w_i] > eps_w, else 0
Eigen::MatrixXd compute_votes(const Eigen::VectorXd& pE_w, const Eigen::MatrixXd& pE_wl, double eps_w = 1e-9);
Eigen::MatrixXd compute_votes(const MomentSolution& sol, double eps_w = 1e-9);

int draw_count(double alpha, double c_list = 20.0);

CandidateList sample_list(const Eigen::MatrixXd& votes, const Eigen::VectorXd& pE_w, double alpha, int draws,
                          std::uint64_t seed);

// greedy in draw order: keep an entry iff it is farther than radius from every kept entry
CandidateList dedupe(const CandidateList& list, double radius);

struct Evaluation {
    double min_dist = 0.0;
    bool hit = false;
    int list_size = 0;
    int best = -1;
};

Evaluation evaluate(const CandidateList& list, const Eigen::VectorXd& ell_star, double eta);

// (1/|I|) sum_{i in I} pE[w_i] ||v_i - l*||
double weighted_vote_error(const Eigen::MatrixXd& votes, const Eigen::VectorXd& pE_w, const std::vector<int>& inliers,
                           const Eigen::VectorXd& ell_star);

nlohmann::json to_json(const CandidateList& list);
CandidateList candidate_list_from_json(const nlohmann::json& j);
void save_candidates(const CandidateList& list, const std::filesystem::path& path);
void export_candidates_csv(const CandidateList& list, const std::filesystem::path& path);

}  // namespace ldreg
