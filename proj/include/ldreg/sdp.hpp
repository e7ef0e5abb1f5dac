#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ldreg {

// psd: dim x dim symmetric block. diag: dim nonnegative scalars (an LP cone; stored as dim x 1).
// arrow: the dim x dim block [[t, u'], [u, t I]] >= 0, i.e. t >= ||u||; entries (0,0) or (k,k) address t,
// (0,k) addresses u_k. Stored in solutions as the expanded dim x dim matrix.
enum class BlockKind { psd, diag, arrow };

struct Block {
    BlockKind kind = BlockKind::psd;
    int dim = 1;
};

// 0-based; the value multiplies the canonical i <= j entry once
struct Entry {
    int block;
    int i;
    int j;
    double value;
};

enum class Sense { eq, le, ge };

struct Constraint {
    std::vector<Entry> entries;
    Sense sense = Sense::eq;
    double rhs = 0.0;
    std::string family;
};

struct SDPProblem {
    std::vector<Block> blocks;
    std::vector<Constraint> constraints;
    std::vector<Entry> objective;  // minimized

    int add_block(BlockKind kind, int dim) {
        blocks.push_back({kind, dim});
        return static_cast<int>(blocks.size()) - 1;
    }
    // throws ValidationError on bad indices or empty rows with nonzero rhs
    void validate() const;
};

using BlockValues = std::vector<Eigen::MatrixXd>;

enum class SDPStatus { optimal, max_iter, infeasible_suspected };
std::string to_string(SDPStatus s);

struct TraceRow {
    int iter;
    double primal;
    double dual;
    double objective;
    double merit;
};

struct SDPOptions {
    double tol = 1e-6;
    int max_iter = 20000;
    double over_relaxation = 1.5;
    double rho = 0.1;
    int adapt_until = 100;  // rho is frozen after this iteration
    int check_every = 10;
    std::optional<BlockValues> warm_start;
    bool keep_trace = false;
};

struct SDPSolution {
    BlockValues X;
    Eigen::VectorXd y;  // constraint multipliers, sign convention c - A'y in the cone
    SDPStatus status = SDPStatus::max_iter;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double objective = 0.0;
    int iterations = 0;
    double final_rho = 0.0;
    std::vector<TraceRow> trace;
};

struct Residuals {
    double primal;  // ||violation|| / (1 + ||b||)
    double dual;    // dist(c - A'y, K) / (1 + ||c||)
    double gap;     // |c'x - b'y| / (1 + |c'x| + |b'y|)
};

SDPSolution solve(const SDPProblem& p, const SDPOptions& opts = {});

// nearest PSD matrix in Frobenius norm
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

double objective_value(const SDPProblem& p, const BlockValues& X);
Residuals residuals(const SDPProblem& p, const BlockValues& X, const Eigen::VectorXd& y);
double primal_residual(const SDPProblem& p, const BlockValues& X);
// per-row signed violation (0 for satisfied inequalities)
Eigen::VectorXd constraint_violations(const SDPProblem& p, const BlockValues& X);

void write_sdp(const SDPProblem& p, std::ostream& os);
SDPProblem read_sdp(std::istream& is);
void save_sdp(const SDPProblem& p, const std::filesystem::path& path);
SDPProblem load_sdp(const std::filesystem::path& path);
void write_trace_csv(const SDPSolution& s, const std::filesystem::path& path);

}  // namespace ldreg
