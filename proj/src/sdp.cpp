#include "ldreg/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>
#include <lapacke.h>

#include "ldreg/error.hpp"

namespace ldreg {

namespace {

const double kSqrt2 = std::sqrt(2.0);

int svec_size(const Block& b) {
    return b.kind == BlockKind::psd ? b.dim * (b.dim + 1) / 2 : b.dim;
}

// cone-coordinate layout; psd blocks use svec (off-diagonals times sqrt 2) so the Euclidean
// norm of the vector is the Frobenius norm of the block
struct Layout {
    std::vector<int> offset;
    int ncone = 0;

    explicit Layout(const SDPProblem& p) {
        for (const auto& b : p.blocks) {
            offset.push_back(ncone);
            ncone += svec_size(b);
        }
    }

    // coordinate and the factor converting an entry coefficient into a coordinate coefficient
    std::pair<int, double> coord(const SDPProblem& p, const Entry& e) const {
        const Block& b = p.blocks[e.block];
        int i = std::min(e.i, e.j), j = std::max(e.i, e.j);
        switch (b.kind) {
            case BlockKind::psd:
                return {offset[e.block] + j * (j + 1) / 2 + i, i == j ? 1.0 : 1.0 / kSqrt2};
            case BlockKind::diag:
                return {offset[e.block] + i, 1.0};
            case BlockKind::arrow:
                if (i == j) return {offset[e.block], 1.0};
                return {offset[e.block] + j, 1.0};
        }
        return {0, 0.0};
    }
};

void check_entry(const SDPProblem& p, const Entry& e, const std::string& where) {
    if (e.block < 0 || e.block >= static_cast<int>(p.blocks.size()))
        throw ValidationError(fmt::format("{}: block index {} out of range", where, e.block));
    const Block& b = p.blocks[e.block];
    if (e.i < 0 || e.j < 0 || e.i >= b.dim || e.j >= b.dim)
        throw ValidationError(fmt::format("{}: entry ({}, {}) outside block {} of dimension {}", where, e.i, e.j,
                                          e.block, b.dim));
    if (b.kind == BlockKind::diag && e.i != e.j)
        throw ValidationError(fmt::format("{}: off-diagonal entry in diagonal block {}", where, e.block));
    if (b.kind == BlockKind::arrow && e.i != e.j && std::min(e.i, e.j) != 0)
        throw ValidationError(fmt::format("{}: entry ({}, {}) is structurally zero in arrow block {}", where, e.i,
                                          e.j, e.block));
    if (!std::isfinite(e.value)) throw ValidationError(fmt::format("{}: non-finite coefficient", where));
}

Eigen::VectorXd pack(const SDPProblem& p, const Layout& L, const BlockValues& X) {
    if (X.size() != p.blocks.size()) throw ValidationError("block count mismatch");
    Eigen::VectorXd v(L.ncone);
    for (size_t k = 0; k < p.blocks.size(); ++k) {
        const Block& b = p.blocks[k];
        const auto& M = X[k];
        int off = L.offset[k];
        switch (b.kind) {
            case BlockKind::psd:
                if (M.rows() != b.dim || M.cols() != b.dim) throw ValidationError("psd block shape mismatch");
                for (int j = 0; j < b.dim; ++j)
                    for (int i = 0; i <= j; ++i)
                        v(off + j * (j + 1) / 2 + i) = i == j ? M(i, i) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
                break;
            case BlockKind::diag:
                if (M.size() != b.dim) throw ValidationError("diag block shape mismatch");
                for (int i = 0; i < b.dim; ++i) v(off + i) = M(i);
                break;
            case BlockKind::arrow:
                if (M.rows() != b.dim || M.cols() != b.dim) throw ValidationError("arrow block shape mismatch");
                v(off) = M(0, 0);
                for (int i = 1; i < b.dim; ++i) v(off + i) = M(0, i);
                break;
        }
    }
    return v;
}

Eigen::MatrixXd unpack_psd(const double* v, int n) {
    Eigen::MatrixXd M(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) {
            double x = v[j * (j + 1) / 2 + i];
            if (i == j) M(i, i) = x;
            else M(i, j) = M(j, i) = x / kSqrt2;
        }
    return M;
}

void pack_psd(const Eigen::MatrixXd& M, double* v) {
    const int n = static_cast<int>(M.rows());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) v[j * (j + 1) / 2 + i] = i == j ? M(i, i) : kSqrt2 * M(i, j);
}

BlockValues unpack(const SDPProblem& p, const Layout& L, const Eigen::VectorXd& v) {
    BlockValues X;
    for (size_t k = 0; k < p.blocks.size(); ++k) {
        const Block& b = p.blocks[k];
        int off = L.offset[k];
        switch (b.kind) {
            case BlockKind::psd: X.push_back(unpack_psd(v.data() + off, b.dim)); break;
            case BlockKind::diag: X.push_back(v.segment(off, b.dim)); break;
            case BlockKind::arrow: {
                Eigen::MatrixXd M = Eigen::MatrixXd::Zero(b.dim, b.dim);
                M.diagonal().setConstant(v(off));
                for (int i = 1; i < b.dim; ++i) M(0, i) = M(i, 0) = v(off + i);
                X.push_back(M);
                break;
            }
        }
    }
    return X;
}

// eigenpairs with eigenvalues in (vl, vu]; returns count
int syevr_range(Eigen::MatrixXd& a, double vl, double vu, Eigen::VectorXd& w, Eigen::MatrixXd& z) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    lapack_int m = 0;
    w.resize(n);
    z.resize(n, n);
    std::vector<lapack_int> isuppz(2 * static_cast<size_t>(n));
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', n, a.data(), n, vl, vu, 0, 0, 0.0, &m,
                                     w.data(), z.data(), n, isuppz.data());
    if (info != 0) throw SolverError(fmt::format("dsyevr failed with info {}", info));
    return static_cast<int>(m);
}

// projection with a hint on the number of positive eigenvalues so the smaller side is computed
Eigen::MatrixXd project_psd_hint(const Eigen::MatrixXd& m, int& npos) {
    const int n = static_cast<int>(m.rows());
    const double big = std::numeric_limits<double>::max();
    Eigen::MatrixXd a = m;
    Eigen::VectorXd w;
    Eigen::MatrixXd z;
    if (2 * npos <= n) {
        int k = syevr_range(a, 0.0, big, w, z);
        npos = k;
        auto V = z.leftCols(k);
        return V * w.head(k).asDiagonal() * V.transpose();
    }
    int k = syevr_range(a, -big, 0.0, w, z);
    npos = n - k;
    auto V = z.leftCols(k);
    Eigen::MatrixXd r = m - V * w.head(k).asDiagonal() * V.transpose();
    return 0.5 * (r + r.transpose());
}

double soc_project(double* v, int n) {  // in place, returns distance moved
    double t = v[0], s = 0.0;
    for (int i = 1; i < n; ++i) s += v[i] * v[i];
    s = std::sqrt(s);
    if (s <= t) return 0.0;
    if (s <= -t) {
        double d = std::sqrt(t * t + s * s);
        std::fill(v, v + n, 0.0);
        return d;
    }
    double a = 0.5 * (t + s), f = a / s;
    double d2 = (t - a) * (t - a);
    v[0] = a;
    for (int i = 1; i < n; ++i) {
        double nv = v[i] * f;
        d2 += (v[i] - nv) * (v[i] - nv);
        v[i] = nv;
    }
    return std::sqrt(d2);
}

// distance of a cone-coordinate vector to the cone (eigenvalues only for psd blocks)
double cone_distance(const SDPProblem& p, const Layout& L, const Eigen::VectorXd& v) {
    double d2 = 0.0;
    for (size_t k = 0; k < p.blocks.size(); ++k) {
        const Block& b = p.blocks[k];
        int off = L.offset[k];
        switch (b.kind) {
            case BlockKind::psd: {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unpack_psd(v.data() + off, b.dim),
                                                                  Eigen::EigenvaluesOnly);
                for (int i = 0; i < b.dim; ++i) d2 += std::pow(std::min(0.0, es.eigenvalues()(i)), 2);
                break;
            }
            case BlockKind::diag:
                for (int i = 0; i < b.dim; ++i) d2 += std::pow(std::min(0.0, v(off + i)), 2);
                break;
            case BlockKind::arrow: {
                Eigen::VectorXd tmp = v.segment(off, b.dim);
                double d = soc_project(tmp.data(), b.dim);
                d2 += d * d;
                break;
            }
        }
    }
    return std::sqrt(d2);
}

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Assembled {
    SpMat A;  // m x ncone, unscaled
    Eigen::VectorXd b, c;
    std::vector<Sense> sense;
};

Assembled assemble(const SDPProblem& p, const Layout& L) {
    const int m = static_cast<int>(p.constraints.size());
    std::vector<Eigen::Triplet<double>> t;
    Assembled a;
    a.b.resize(m);
    a.sense.resize(m);
    for (int r = 0; r < m; ++r) {
        const auto& con = p.constraints[r];
        for (const auto& e : con.entries) {
            auto [k, f] = L.coord(p, e);
            t.emplace_back(r, k, e.value * f);
        }
        a.b(r) = con.rhs;
        a.sense[r] = con.sense;
    }
    a.A.resize(m, L.ncone);
    a.A.setFromTriplets(t.begin(), t.end());
    a.c = Eigen::VectorXd::Zero(L.ncone);
    for (const auto& e : p.objective) {
        auto [k, f] = L.coord(p, e);
        a.c(k) += e.value * f;
    }
    return a;
}

Eigen::VectorXd violations(const Assembled& a, const Eigen::VectorXd& x) {
    Eigen::VectorXd r = a.A * x - a.b;
    for (int i = 0; i < r.size(); ++i) {
        if (a.sense[i] == Sense::le) r(i) = std::max(0.0, r(i));
        else if (a.sense[i] == Sense::ge) r(i) = std::min(0.0, r(i));
    }
    return r;
}

Residuals compute_residuals(const SDPProblem& p, const Layout& L, const Assembled& a, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y) {
    Residuals res{};
    res.primal = violations(a, x).norm() / (1.0 + a.b.norm());
    Eigen::VectorXd S = a.c - a.A.transpose() * y;
    double d = cone_distance(p, L, S);
    double d2 = d * d;
    for (int i = 0; i < y.size(); ++i) {
        if (a.sense[i] == Sense::le) d2 += std::pow(std::max(0.0, y(i)), 2);
        else if (a.sense[i] == Sense::ge) d2 += std::pow(std::min(0.0, y(i)), 2);
    }
    res.dual = std::sqrt(d2) / (1.0 + a.c.norm());
    double pobj = a.c.dot(x), dobj = a.b.dot(y);
    res.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    return res;
}

// greedy pivoted Cholesky on the Gram matrix; returns indices of a maximal independent row set
std::vector<int> independent_rows(const SpMat& A, double tol) {
    const int m = static_cast<int>(A.rows());
    Eigen::MatrixXd G = Eigen::MatrixXd(A * A.transpose());
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> keep;
    Eigen::VectorXd diag = G.diagonal();
    const double scale = std::max(1.0, diag.maxCoeff());
    Eigen::MatrixXd Lf = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        int best = k;
        for (int i = k + 1; i < m; ++i)
            if (diag(perm[i]) > diag(perm[best])) best = i;
        if (diag(perm[best]) <= tol * scale) break;
        std::swap(perm[k], perm[best]);
        int pk = perm[k];
        double piv = std::sqrt(diag(pk));
        Lf(pk, k) = piv;
        for (int i = k + 1; i < m; ++i) {
            int pi = perm[i];
            double s = G(pi, pk);
            for (int j = 0; j < k; ++j) s -= Lf(pi, j) * Lf(pk, j);
            Lf(pi, k) = s / piv;
            diag(pi) -= Lf(pi, k) * Lf(pi, k);
        }
        keep.push_back(pk);
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

}  // namespace

std::string to_string(SDPStatus s) {
    switch (s) {
        case SDPStatus::optimal: return "optimal";
        case SDPStatus::max_iter: return "max_iter";
        case SDPStatus::infeasible_suspected: return "infeasible_suspected";
    }
    return "?";
}

void SDPProblem::validate() const {
    for (size_t k = 0; k < blocks.size(); ++k)
        if (blocks[k].dim < 1 || (blocks[k].kind == BlockKind::arrow && blocks[k].dim < 2))
            throw ValidationError(fmt::format("block {} has invalid dimension {}", k, blocks[k].dim));
    for (size_t r = 0; r < constraints.size(); ++r) {
        const auto& con = constraints[r];
        std::string where = fmt::format("constraint {}", r + 1);
        for (const auto& e : con.entries) check_entry(*this, e, where);
        if (!std::isfinite(con.rhs)) throw ValidationError(where + ": non-finite rhs");
        bool empty = std::all_of(con.entries.begin(), con.entries.end(), [](const Entry& e) { return e.value == 0.0; });
        if (empty) {
            bool ok = (con.sense == Sense::eq && con.rhs == 0.0) || (con.sense == Sense::le && con.rhs >= 0.0) ||
                      (con.sense == Sense::ge && con.rhs <= 0.0);
            if (!ok) throw ValidationError(where + ": empty row with an unsatisfiable right-hand side");
        }
    }
    for (const auto& e : objective) check_entry(*this, e, "objective");
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ValidationError("project_psd: matrix is not square");
    if (!m.allFinite()) throw ValidationError("project_psd: non-finite entries");
    Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    int npos = 0;
    return project_psd_hint(s, npos);
}

double objective_value(const SDPProblem& p, const BlockValues& X) {
    Layout L(p);
    return assemble(p, L).c.dot(pack(p, L, X));
}

Residuals residuals(const SDPProblem& p, const BlockValues& X, const Eigen::VectorXd& y) {
    Layout L(p);
    auto a = assemble(p, L);
    if (y.size() != static_cast<long>(p.constraints.size())) throw ValidationError("residuals: y length mismatch");
    return compute_residuals(p, L, a, pack(p, L, X), y);
}

Eigen::VectorXd constraint_violations(const SDPProblem& p, const BlockValues& X) {
    Layout L(p);
    auto a = assemble(p, L);
    return violations(a, pack(p, L, X));
}

double primal_residual(const SDPProblem& p, const BlockValues& X) {
    Layout L(p);
    auto a = assemble(p, L);
    return violations(a, pack(p, L, X)).norm() / (1.0 + a.b.norm());
}

SDPSolution solve(const SDPProblem& p, const SDPOptions& o) {
    p.validate();
    if (!(o.over_relaxation > 0.0 && o.over_relaxation < 2.0))
        throw ValidationError("over_relaxation must lie in (0, 2)");
    if (!(o.rho > 0.0)) throw ValidationError("rho must be positive");
    const Layout L(p);
    const Assembled a = assemble(p, L);
    const int m = static_cast<int>(p.constraints.size());
    const int nc = L.ncone;

    // slack coordinates after the cone ones
    std::vector<int> slack(m, -1);
    int N = nc;
    for (int r = 0; r < m; ++r)
        if (a.sense[r] != Sense::eq) slack[r] = N++;

    // row-normalized constraint matrix over [cone | slack]
    Eigen::VectorXd D(m);
    std::vector<Eigen::Triplet<double>> t;
    for (int r = 0; r < m; ++r) {
        double nr2 = 0.0;
        for (SpMat::InnerIterator it(a.A, r); it; ++it) nr2 += it.value() * it.value();
        if (slack[r] >= 0) nr2 += 1.0;
        D(r) = nr2 > 0 ? 1.0 / std::sqrt(nr2) : 0.0;
        for (SpMat::InnerIterator it(a.A, r); it; ++it) t.emplace_back(r, static_cast<int>(it.col()), it.value() * D(r));
        if (slack[r] >= 0) t.emplace_back(r, slack[r], (a.sense[r] == Sense::le ? 1.0 : -1.0) * D(r));
    }
    SpMat As(m, N);
    As.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd bs = D.cwiseProduct(a.b);

    auto keep = independent_rows(As, 1e-10);
    const int mr = static_cast<int>(keep.size());
    SpMat Ar(mr, N);
    {
        std::vector<Eigen::Triplet<double>> tr;
        for (int k = 0; k < mr; ++k)
            for (SpMat::InnerIterator it(As, keep[k]); it; ++it) tr.emplace_back(k, static_cast<int>(it.col()), it.value());
        Ar.setFromTriplets(tr.begin(), tr.end());
    }
    Eigen::VectorXd br(mr);
    for (int k = 0; k < mr; ++k) br(k) = bs(keep[k]);
    Eigen::SparseMatrix<double> G = Ar * Ar.transpose();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(G);
    if (chol.info() != Eigen::Success) throw SolverError("factorization of A A' failed");
    const Eigen::SparseMatrix<double> ArT = Ar.transpose();

    const double cscale = std::max(1.0, a.c.norm());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
    c.head(nc) = a.c / cscale;

    auto project_affine = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd r = Ar * v - br;
        return v - ArT * chol.solve(r);
    };

    std::vector<int> npos(p.blocks.size(), 0);
    auto project_cone = [&](Eigen::VectorXd& v) {
        for (size_t k = 0; k < p.blocks.size(); ++k) {
            const Block& b = p.blocks[k];
            int off = L.offset[k];
            switch (b.kind) {
                case BlockKind::psd: {
                    Eigen::MatrixXd M = unpack_psd(v.data() + off, b.dim);
                    pack_psd(project_psd_hint(M, npos[k]), v.data() + off);
                    break;
                }
                case BlockKind::diag:
                    for (int i = 0; i < b.dim; ++i) v(off + i) = std::max(0.0, v(off + i));
                    break;
                case BlockKind::arrow: soc_project(v.data() + off, b.dim); break;
            }
        }
        for (int i = nc; i < N; ++i) v(i) = std::max(0.0, v(i));
    };

    Eigen::VectorXd z = Eigen::VectorXd::Zero(N), u = Eigen::VectorXd::Zero(N);
    if (o.warm_start) {
        z.head(nc) = pack(p, L, *o.warm_start);
        Eigen::VectorXd ax = a.A * z.head(nc);
        for (int r = 0; r < m; ++r)
            if (slack[r] >= 0) z(slack[r]) = std::max(0.0, a.sense[r] == Sense::le ? a.b(r) - ax(r) : ax(r) - a.b(r));
    }
    for (size_t k = 0; k < p.blocks.size(); ++k)
        if (p.blocks[k].kind == BlockKind::psd) npos[k] = p.blocks[k].dim / 2;

    double rho = o.rho;
    const double alpha = o.over_relaxation;
    SDPSolution sol;
    Eigen::VectorXd y_full = Eigen::VectorXd::Zero(m);
    Residuals res{1.0, 1.0, 1.0};
    double primal_mark = std::numeric_limits<double>::infinity();
    const int mark_iter = static_cast<int>(0.9 * o.max_iter);
    int it = 0;
    bool converged = false;
    for (it = 1; it <= o.max_iter; ++it) {
        Eigen::VectorXd x = project_affine(z - u - c / rho);
        Eigen::VectorXd xh = alpha * x + (1.0 - alpha) * z;
        Eigen::VectorXd zn = xh + u;
        project_cone(zn);
        Eigen::VectorXd un = u + xh - zn;
        const double merit = (zn - z).squaredNorm() + (un - u).squaredNorm();

        bool check = it % o.check_every == 0 || it == o.max_iter;
        if (check) {
            Eigen::VectorXd lam = chol.solve(Ar * (c + rho * (x - z + u)));
            y_full.setZero();
            for (int k = 0; k < mr; ++k) y_full(keep[k]) = lam(k) * D(keep[k]) * cscale;
            res = compute_residuals(p, L, a, zn.head(nc), y_full);
            if (o.keep_trace) sol.trace.push_back({it, res.primal, res.dual, a.c.dot(zn.head(nc)), merit});
            if (it >= mark_iter && primal_mark == std::numeric_limits<double>::infinity()) primal_mark = res.primal;
            if (std::max({res.primal, res.dual, res.gap}) <= o.tol) {
                z = zn;
                u = un;
                converged = true;
                break;
            }
        }
        if (it <= o.adapt_until && it % 20 == 0) {
            double rp = (x - zn).norm(), rd = rho * (zn - z).norm();
            if (rp > 0 && rd > 0) {
                double ratio = std::sqrt(rp / rd);
                if (ratio > 2.0 || ratio < 0.5) {
                    double nr = std::clamp(rho * ratio, 1e-6, 1e6);
                    un *= rho / nr;
                    rho = nr;
                }
            }
        }
        z = std::move(zn);
        u = std::move(un);
    }
    sol.iterations = std::min(it, o.max_iter);
    sol.X = unpack(p, L, z.head(nc));
    sol.y = y_full;
    // recompute from what is returned so stored and recomputed values agree
    res = residuals(p, sol.X, sol.y);
    sol.primal_residual = res.primal;
    sol.dual_residual = res.dual;
    sol.gap = res.gap;
    sol.objective = objective_value(p, sol.X);
    sol.final_rho = rho;
    if (converged) sol.status = SDPStatus::optimal;
    // too short a run says nothing about stalling
    else if (o.max_iter >= 1000 && res.primal > 1e3 * o.tol && res.primal > 0.5 * primal_mark)
        sol.status = SDPStatus::infeasible_suspected;
    else sol.status = SDPStatus::max_iter;
    return sol;
}

// ------------------------------------------------------------------ text format

namespace {

char sense_char(Sense s) {
    return s == Sense::eq ? '=' : s == Sense::le ? '<' : '>';
}

std::string block_token(const Block& b) {
    switch (b.kind) {
        case BlockKind::psd: return std::to_string(b.dim);
        case BlockKind::diag: return std::to_string(-b.dim);
        case BlockKind::arrow: return "a" + std::to_string(b.dim);
    }
    return "?";
}

}  // namespace

void write_sdp(const SDPProblem& p, std::ostream& os) {
    os << "# ldreg sparse block sdp v1: m, nblocks, block sizes (negative = diagonal, aN = arrow), rhs, senses,\n"
          "# then entries: block i j constraint value (1-based, constraint 0 = objective, i <= j)\n";
    for (size_t r = 0; r < p.constraints.size(); ++r)
        if (!p.constraints[r].family.empty()) os << "#f " << r + 1 << " " << p.constraints[r].family << "\n";
    os << p.constraints.size() << "\n" << p.blocks.size() << "\n";
    for (size_t k = 0; k < p.blocks.size(); ++k) os << (k ? " " : "") << block_token(p.blocks[k]);
    os << "\n";
    for (size_t r = 0; r < p.constraints.size(); ++r) os << (r ? " " : "") << fmt::format("{:.17g}", p.constraints[r].rhs);
    os << "\n";
    for (size_t r = 0; r < p.constraints.size(); ++r) os << (r ? " " : "") << sense_char(p.constraints[r].sense);
    os << "\n";
    auto put = [&](const Entry& e, size_t id) {
        os << fmt::format("{} {} {} {} {:.17g}\n", e.block + 1, std::min(e.i, e.j) + 1, std::max(e.i, e.j) + 1, id,
                          e.value);
    };
    for (const auto& e : p.objective) put(e, 0);
    for (size_t r = 0; r < p.constraints.size(); ++r)
        for (const auto& e : p.constraints[r].entries) put(e, r + 1);
}

SDPProblem read_sdp(std::istream& is) {
    SDPProblem p;
    std::string line;
    long lineno = 0;
    std::vector<std::string> families;
    std::vector<std::string> data;  // non-comment lines
    std::vector<long> data_line;
    std::vector<std::pair<long, std::string>> fam;
    while (std::getline(is, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            if (line.compare(first, 3, "#f ") == 0) {
                std::istringstream ss(line.substr(first + 3));
                long id;
                std::string name;
                if (ss >> id >> name) fam.emplace_back(id, name);
            }
            continue;
        }
        data.push_back(line);
        data_line.push_back(lineno);
    }
    auto fail = [&](size_t k, const std::string& what) -> ParseError {
        long ln = k < data_line.size() ? data_line[k] : lineno;
        return ParseError(fmt::format("sdp file line {}: {}", ln, what), what, ln);
    };
    if (data.size() < 5) throw fail(data.size(), "truncated header");
    long m, nb;
    {
        std::istringstream s0(data[0]), s1(data[1]);
        if (!(s0 >> m) || m < 0) throw fail(0, "constraint count");
        if (!(s1 >> nb) || nb < 1) throw fail(1, "block count");
    }
    {
        std::istringstream s(data[2]);
        std::string tok;
        for (long k = 0; k < nb; ++k) {
            if (!(s >> tok)) throw fail(2, "block sizes");
            Block b;
            try {
                if (tok[0] == 'a') {
                    b.kind = BlockKind::arrow;
                    b.dim = std::stoi(tok.substr(1));
                } else {
                    int v = std::stoi(tok);
                    b.kind = v < 0 ? BlockKind::diag : BlockKind::psd;
                    b.dim = std::abs(v);
                }
            } catch (const std::exception&) {
                throw fail(2, "block sizes");
            }
            p.blocks.push_back(b);
        }
    }
    p.constraints.resize(m);
    {
        std::istringstream s(data[3]);
        for (long r = 0; r < m; ++r)
            if (!(s >> p.constraints[r].rhs)) throw fail(3, "rhs");
    }
    {
        std::istringstream s(data[4]);
        for (long r = 0; r < m; ++r) {
            char ch;
            if (!(s >> ch)) throw fail(4, "senses");
            if (ch == '=') p.constraints[r].sense = Sense::eq;
            else if (ch == '<') p.constraints[r].sense = Sense::le;
            else if (ch == '>') p.constraints[r].sense = Sense::ge;
            else throw fail(4, "senses");
        }
    }
    for (size_t k = 5; k < data.size(); ++k) {
        std::istringstream s(data[k]);
        long b, i, j, id;
        double v;
        if (!(s >> b >> i >> j >> id >> v)) throw fail(k, "entry");
        if (id < 0 || id > m) throw fail(k, "constraint id");
        Entry e{static_cast<int>(b - 1), static_cast<int>(i - 1), static_cast<int>(j - 1), v};
        if (id == 0) p.objective.push_back(e);
        else p.constraints[id - 1].entries.push_back(e);
    }
    for (auto& [id, name] : fam)
        if (id >= 1 && id <= m) p.constraints[id - 1].family = name;
    try {
        p.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), "entry");
    }
    return p;
}

void save_sdp(const SDPProblem& p, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    write_sdp(p, f);
}

SDPProblem load_sdp(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(fmt::format("cannot read {}", path.string()));
    return read_sdp(f);
}

void write_trace_csv(const SDPSolution& s, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f << "iter,primal,dual,objective,merit\n";
    for (const auto& r : s.trace)
        f << fmt::format("{},{:.10g},{:.10g},{:.17g},{:.10g}\n", r.iter, r.primal, r.dual, r.objective, r.merit);
}

}  // namespace ldreg
