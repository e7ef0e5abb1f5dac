#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "ldreg/datagen.hpp"
#include "ldreg/sdp.hpp"

namespace ldreg {

// variables 0..n-1 are w_1..w_n, n..n+d-1 are l_1..l_d; a monomial is a sorted multiset of variable ids
using Monomial = std::vector<int>;

struct MonomialIndex {
    int n = 0;
    int d = 0;
    bool idempotent = true;  // w_i^j -> w_i
    std::vector<Monomial> monos;
    std::map<Monomial, int> pos;

    MonomialIndex() = default;
    MonomialIndex(int n, int d, int half_degree);
    int size() const { return static_cast<int>(monos.size()); }
    int find(const Monomial& m) const;  // -1 when absent
    Monomial reduce(Monomial m) const;
    Monomial product(const Monomial& a, const Monomial& b) const;
    int degree(const Monomial& m) const { return static_cast<int>(m.size()); }
    std::string name(const Monomial& m) const;
    int w(int i) const { return i; }
    int l(int k) const { return n + k; }
};

enum class Variant { plain, boolean, noisy };
std::string to_string(Variant v);

struct MomentProgram {
    MonomialIndex index;
    int degree = 2;
    Variant variant = Variant::plain;
    double alpha = 0.0;
    double zeta = 0.0;
    int n = 0;
    int d = 0;
    SDPProblem sdp;
    int moment_block = 0;
    int arrow_block = 1;
    int localizing_block = -1;
    std::vector<std::string> block_labels;
    std::vector<std::string> warnings;
    // reduced monomial -> canonical (a, b) entry in the moment block
    std::map<Monomial, std::pair<int, int>> moment_entry;

    Entry pe(const Monomial& m, double coeff = 1.0) const;  // throws if deg m > degree
};

MomentProgram build_program(const Dataset& ds, double alpha, int degree = 2, Variant variant = Variant::plain,
                            double zeta = 0.0);

struct ResidualReport {
    double max_equality = 0.0;
    double max_inequality = 0.0;  // positive part of violations
    double min_eigenvalue = 0.0;  // moment block
    double trace = 0.0;
    double cs_max_excess = 0.0;   // max (pE[w_i l_j])^2 - pE[w_i] pE[l_j^2]
    std::map<std::string, double> family_max;
    std::vector<std::string> flagged;
    double tol = 0.0;
    bool passed = false;
};

struct MomentSolution {
    BlockValues blocks;
    Eigen::MatrixXd moment;
    Eigen::VectorXd pE_w;
    Eigen::MatrixXd pE_wl;  // n x d
    Eigen::MatrixXd pE_ll;  // d x d
    double objective = 0.0;
    SDPStatus status = SDPStatus::optimal;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int negative_w = 0;  // entries below -1e-6
    double min_w = 0.0;
    ResidualReport report;
    std::vector<TraceRow> trace;  // filled when SDPOptions::keep_trace
};

// rank-one lift of (1, 1_I, l*)
MomentSolution feasibility_witness(const Dataset& ds, const MomentProgram& prog);
BlockValues lift_point(const MomentProgram& prog, const Eigen::VectorXd& w, const Eigen::VectorXd& l);

MomentSolution extract_pseudo_moments(const SDPSolution& raw, const MomentProgram& prog);
MomentSolution solution_from_blocks(const BlockValues& blocks, const MomentProgram& prog);
ResidualReport validate_constraints(const MomentSolution& sol, const MomentProgram& prog, double tol);

MomentSolution solve_program(const MomentProgram& prog, const SDPOptions& opts = {});

struct MixtureStep {
    double lambda = 0.0;
    double norm_before = 0.0;
    double norm_after = 0.0;
    double lambda_exact = 0.0;  // unconstrained minimizer of the quadratic
    bool improved = false;
};

// backtracking from lambda = 1 on ||(1-lambda) u + lambda u*||
MixtureStep mixture_line_search(const Eigen::VectorXd& u, const Eigen::VectorXd& ustar, double margin = 1e-9);

void export_program(const MomentProgram& prog, std::ostream& os);

// pE arrays, status and residual report; blocks are not stored
nlohmann::json to_json(const ResidualReport& r);
nlohmann::json to_json(const MomentSolution& s);
MomentSolution moment_solution_from_json(const nlohmann::json& j);

}  // namespace ldreg
