#include "ldreg/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"
#include "ldreg/rng.hpp"

namespace ldreg {

using nlohmann::json;

Eigen::MatrixXd compute_votes(const Eigen::VectorXd& pE_w, const Eigen::MatrixXd& pE_wl, double eps_w) {
    if (pE_wl.rows() != pE_w.size()) throw ValidationError("compute_votes: shape mismatch");
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(pE_wl.rows(), pE_wl.cols());
    for (Eigen::Index i = 0; i < pE_w.size(); ++i)
        if (pE_w(i) > eps_w) v.row(i) = pE_wl.row(i) / pE_w(i);
    return v;
}

Eigen::MatrixXd compute_votes(const MomentSolution& sol, double eps_w) {
    return compute_votes(sol.pE_w, sol.pE_wl, eps_w);
}

int draw_count(double alpha, double c_list) {
    if (!(alpha > 0.0)) throw ValidationError("draw_count: alpha must be positive");
    // guard against 20/0.25 landing a hair above 80
    return static_cast<int>(std::ceil(c_list / alpha - 1e-9));
}

CandidateList sample_list(const Eigen::MatrixXd& votes, const Eigen::VectorXd& pE_w, double alpha, int draws,
                          std::uint64_t seed) {
    const int n = static_cast<int>(pE_w.size());
    if (votes.rows() != n) throw ValidationError("sample_list: votes and weights disagree on n");
    if (draws < 0) throw ValidationError("sample_list: negative draw count");
    CandidateList out;
    out.seed = seed;
    Eigen::VectorXd w = pE_w.cwiseMax(0.0);
    double clamped = (w - pE_w).maxCoeff();
    if (clamped > 0.0) out.warnings.push_back(fmt::format("clamped negative pE[w] entries, largest magnitude {:.3g}", clamped));
    double total = w.sum();
    if (!(total > 0.0)) throw ValidationError("sample_list: all weights are zero");
    const double an = alpha * n;
    if (std::abs(total - an) > 0.1 * an)
        out.warnings.push_back(fmt::format("sum pE[w] = {:.6g} is more than 10% away from alpha n = {:.6g}; renormalized", total, an));
    std::vector<double> cum(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) cum[i] = (acc += w(i));
    Rng rng = Rng(seed).split("rounding/draws");
    for (int k = 0; k < draws; ++k) {
        double u = rng.uniform() * acc;
        int i = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        i = std::min(i, n - 1);
        while (w(i) == 0.0 && i > 0) --i;  // u landing exactly on a boundary
        out.entries.push_back({votes.row(i).transpose(), i, std::clamp(w(i) / an, 0.0, 1.0)});
    }
    return out;
}

CandidateList dedupe(const CandidateList& list, double radius) {
    if (!(radius >= 0.0)) throw ValidationError("dedupe: radius must be >= 0");
    CandidateList out = list;
    out.entries.clear();
    out.dedupe_radius = radius;
    for (const auto& e : list.entries) {
        bool keep = true;
        for (const auto& k : out.entries)
            if ((k.vector - e.vector).norm() <= radius) {
                keep = false;
                break;
            }
        if (keep) out.entries.push_back(e);
    }
    return out;
}

Evaluation evaluate(const CandidateList& list, const Eigen::VectorXd& ell_star, double eta) {
    if (list.entries.empty()) throw ValidationError("evaluate: empty candidate list");
    Evaluation ev;
    ev.list_size = static_cast<int>(list.size());
    ev.min_dist = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < list.size(); ++k) {
        double dist = (list.entries[k].vector - ell_star).norm();
        if (dist < ev.min_dist) {
            ev.min_dist = dist;
            ev.best = static_cast<int>(k);
        }
    }
    ev.hit = ev.min_dist < eta;
    return ev;
}

double weighted_vote_error(const Eigen::MatrixXd& votes, const Eigen::VectorXd& pE_w, const std::vector<int>& inliers,
                           const Eigen::VectorXd& ell_star) {
    if (inliers.empty()) return 0.0;
    double s = 0.0;
    for (int i : inliers) s += std::max(0.0, pE_w(i)) * (votes.row(i).transpose() - ell_star).norm();
    return s / static_cast<double>(inliers.size());
}

json to_json(const CandidateList& list) {
    json j;
    j["seed"] = list.seed;
    if (list.dedupe_radius >= 0.0) j["dedupe_radius"] = list.dedupe_radius;
    json arr = json::array();
    for (const auto& e : list.entries)
        arr.push_back({{"vector", std::vector<double>(e.vector.data(), e.vector.data() + e.vector.size())},
                       {"source_index", e.source_index},
                       {"weight", e.weight}});
    j["entries"] = arr;
    if (!list.warnings.empty()) j["warnings"] = list.warnings;
    return j;
}

CandidateList candidate_list_from_json(const json& j) {
    CandidateList l;
    try {
        l.seed = j.at("seed").get<std::uint64_t>();
        l.dedupe_radius = j.value("dedupe_radius", -1.0);
        for (const auto& e : j.at("entries")) {
            auto v = e.at("vector").get<std::vector<double>>();
            l.entries.push_back({Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                                 e.at("source_index").get<int>(), e.at("weight").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("candidate list: {}", e.what()), "entries");
    }
    return l;
}

void save_candidates(const CandidateList& list, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f << to_json(list).dump(2) << "\n";
}

void export_candidates_csv(const CandidateList& list, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    const int d = list.entries.empty() ? 0 : static_cast<int>(list.entries[0].vector.size());
    for (int k = 0; k < d; ++k) f << "v" << k + 1 << ",";
    f << "weight,source_index\n";
    for (const auto& e : list.entries) {
        for (int k = 0; k < d; ++k) f << fmt::format("{:.17g},", e.vector(k));
        f << fmt::format("{:.17g},{}\n", e.weight, e.source_index);
    }
}

}  // namespace ldreg
