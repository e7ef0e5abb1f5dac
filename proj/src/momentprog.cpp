#include "ldreg/momentprog.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"

namespace ldreg {

MonomialIndex::MonomialIndex(int n_, int d_, int half_degree) : n(n_), d(d_) {
    const int nv = n + d;
    monos.push_back({});
    for (int v = 0; v < nv; ++v) monos.push_back({v});
    if (half_degree >= 2) {
        for (int a = 0; a < nv; ++a)
            for (int b = a; b < nv; ++b) {
                if (a == b && a < n) continue;  // w_i^2 reduces to w_i
                monos.push_back({a, b});
            }
    }
    if (half_degree > 2) throw ValidationError("monomial index supports half degree <= 2");
    for (int k = 0; k < size(); ++k) pos[monos[k]] = k;
}

int MonomialIndex::find(const Monomial& m) const {
    auto it = pos.find(m);
    return it == pos.end() ? -1 : it->second;
}

Monomial MonomialIndex::reduce(Monomial m) const {
    std::sort(m.begin(), m.end());
    if (!idempotent) return m;
    Monomial r;
    for (int v : m)
        if (!(v < n && !r.empty() && r.back() == v)) r.push_back(v);
    return r;
}

Monomial MonomialIndex::product(const Monomial& a, const Monomial& b) const {
    Monomial m = a;
    m.insert(m.end(), b.begin(), b.end());
    return reduce(std::move(m));
}

std::string MonomialIndex::name(const Monomial& m) const {
    if (m.empty()) return "1";
    std::string s;
    for (size_t k = 0; k < m.size(); ++k) {
        if (k) s += "*";
        s += m[k] < n ? fmt::format("w{}", m[k] + 1) : fmt::format("l{}", m[k] - n + 1);
    }
    return s;
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::plain: return "plain";
        case Variant::boolean: return "boolean";
        case Variant::noisy: return "noisy";
    }
    return "?";
}

Entry MomentProgram::pe(const Monomial& m, double coeff) const {
    auto it = moment_entry.find(index.reduce(m));
    if (it == moment_entry.end()) throw ValidationError(fmt::format("monomial {} exceeds the program degree", index.name(m)));
    return {moment_block, it->second.first, it->second.second, coeff};
}

namespace {

// accumulates a linear form over moments, merging repeated monomials
struct Form {
    std::map<Monomial, double> terms;
    void add(const MonomialIndex& idx, const Monomial& m, double c) { terms[idx.reduce(m)] += c; }
    std::vector<Entry> entries(const MomentProgram& p) const {
        std::vector<Entry> out;
        for (const auto& [m, c] : terms)
            if (c != 0.0) out.push_back(p.pe(m, c));
        return out;
    }
};

// all reduced monomials of degree <= k over the index variables
std::vector<Monomial> monomials_up_to(const MonomialIndex& idx, int k) {
    std::vector<Monomial> out = {{}};
    std::vector<Monomial> layer = {{}};
    const int nv = idx.n + idx.d;
    for (int deg = 1; deg <= k; ++deg) {
        std::vector<Monomial> next;
        for (const auto& m : layer) {
            int start = m.empty() ? 0 : m.back();
            for (int v = start; v < nv; ++v) {
                if (v < idx.n && !m.empty() && m.back() == v) continue;
                Monomial e = m;
                e.push_back(v);
                next.push_back(e);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

}  // namespace

MomentProgram build_program(const Dataset& ds, double alpha, int degree, Variant variant, double zeta) {
    if (degree != 2 && degree != 4) throw ValidationError(fmt::format("unsupported SoS degree {} (use 2 or 4)", degree));
    const int n = ds.n(), d = ds.d();
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
    if (alpha * n < 1.0) throw ValidationError("alpha * n must be >= 1");
    if (degree == 4 && n + d > 60) throw GuardExceeded(fmt::format("degree 4 needs n + d <= 60 (got {})", n + d));
    if (variant == Variant::noisy && !(zeta >= 0.0)) throw ValidationError("noisy variant needs zeta >= 0");

    MomentProgram p;
    p.degree = degree;
    p.variant = variant;
    p.alpha = alpha;
    p.zeta = zeta;
    p.n = n;
    p.d = d;
    p.index = MonomialIndex(n, d, degree / 2);
    if (alpha * n < d + 1)
        p.warnings.push_back(fmt::format("alpha n = {} is below d + 1 = {}", alpha * n, d + 1));
    const auto& idx = p.index;
    const int N = idx.size();

    p.moment_block = p.sdp.add_block(BlockKind::psd, N);
    p.block_labels.push_back("moment");
    p.arrow_block = p.sdp.add_block(BlockKind::arrow, n + 1);
    p.block_labels.push_back("objective_arrow");

    auto add = [&](std::vector<Entry> e, Sense s, double rhs, const char* fam) {
        p.sdp.constraints.push_back({std::move(e), s, rhs, fam});
    };

    // one decision variable per distinct moment; repeated products are tied
    for (int a = 0; a < N; ++a)
        for (int b = a; b < N; ++b) {
            Monomial raw = idx.monos[a];
            raw.insert(raw.end(), idx.monos[b].begin(), idx.monos[b].end());
            std::sort(raw.begin(), raw.end());
            Monomial red = idx.reduce(raw);
            auto [it, fresh] = p.moment_entry.try_emplace(red, a, b);
            if (!fresh) {
                const char* fam = red.size() < raw.size() ? "idempotent" : "consistency";
                add({{p.moment_block, a, b, 1.0}, {p.moment_block, it->second.first, it->second.second, -1.0}},
                    Sense::eq, 0.0, fam);
            }
        }

    add({p.pe({})}, Sense::eq, 1.0, "normalization");

    const double target = variant == Variant::noisy ? 0.5 * alpha * n : alpha * n;
    for (const auto& m : monomials_up_to(idx, degree - 1)) {
        Form f;
        for (int i = 0; i < n; ++i) {
            Monomial t = m;
            t.push_back(idx.w(i));
            f.add(idx, t, 1.0);
        }
        f.add(idx, m, -target);
        add(f.entries(p), Sense::eq, 0.0, "sum");
    }

    const auto low = monomials_up_to(idx, degree - 2);
    for (int i = 0; i < n; ++i) {
        auto residual_form = [&](const Monomial& m) {
            Form f;
            Monomial t = m;
            t.push_back(idx.w(i));
            f.add(idx, t, ds.y(i));
            for (int k = 0; k < d; ++k) {
                if (ds.X(i, k) == 0.0) continue;
                Monomial s = t;
                s.push_back(idx.l(k));
                f.add(idx, s, -ds.X(i, k));
            }
            return f;
        };
        if (variant == Variant::noisy) {
            auto e = residual_form({}).entries(p);
            add(e, Sense::le, 4.0 * zeta, "noise");
            add(e, Sense::ge, -4.0 * zeta, "noise");
        } else {
            for (const auto& m : low) add(residual_form(m).entries(p), Sense::eq, 0.0, "bilinear");
        }
    }

    if (variant == Variant::boolean) {
        for (int k = 0; k < d; ++k)
            for (const auto& m : low) {
                Form f;
                Monomial t = m;
                t.push_back(idx.l(k));
                t.push_back(idx.l(k));
                f.add(idx, t, 1.0);
                f.add(idx, m, -1.0 / d);
                add(f.entries(p), Sense::eq, 0.0, "boolean");
            }
    } else if (degree == 2) {
        Form f;
        for (int k = 0; k < d; ++k) f.add(idx, {idx.l(k), idx.l(k)}, 1.0);
        add(f.entries(p), Sense::le, 1.0, "trace");
    } else {
        // localizing block for 1 - sum l_k^2 over monomials of degree <= 1
        const int nl = 1 + n + d;
        p.localizing_block = p.sdp.add_block(BlockKind::psd, nl);
        p.block_labels.push_back("trace_localizing");
        for (int a = 0; a < nl; ++a)
            for (int b = a; b < nl; ++b) {
                Monomial mab = idx.product(idx.monos[a], idx.monos[b]);
                Form f;
                f.add(idx, mab, -1.0);
                for (int k = 0; k < d; ++k) {
                    Monomial t = mab;
                    t.push_back(idx.l(k));
                    t.push_back(idx.l(k));
                    f.add(idx, t, 1.0);
                }
                auto e = f.entries(p);
                e.push_back({p.localizing_block, a, b, 1.0});
                add(e, Sense::eq, 0.0, "localizing");
            }
    }

    // arrow block [[t, u'], [u, t I]] with u_i = pE[w_i]
    for (int i = 0; i < n; ++i)
        add({{p.arrow_block, 0, i + 1, 1.0}, p.pe({idx.w(i)}, -1.0)}, Sense::eq, 0.0, "objective_tie");
    p.sdp.objective = {{p.arrow_block, 0, 0, 1.0}};
    p.sdp.validate();
    return p;
}

BlockValues lift_point(const MomentProgram& prog, const Eigen::VectorXd& w, const Eigen::VectorXd& l) {
    const auto& idx = prog.index;
    Eigen::VectorXd v(idx.size());
    auto value = [&](const Monomial& m) {
        double r = 1.0;
        for (int x : m) r *= x < idx.n ? w(x) : l(x - idx.n);
        return r;
    };
    for (int k = 0; k < idx.size(); ++k) v(k) = value(idx.monos[k]);
    BlockValues b(prog.sdp.blocks.size());
    b[prog.moment_block] = v * v.transpose();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(prog.n + 1, prog.n + 1);
    A.diagonal().setConstant(w.norm());
    for (int i = 0; i < prog.n; ++i) A(0, i + 1) = A(i + 1, 0) = w(i);
    b[prog.arrow_block] = A;
    if (prog.localizing_block >= 0) {
        Eigen::VectorXd v1 = v.head(1 + prog.n + prog.d);
        b[prog.localizing_block] = (1.0 - l.squaredNorm()) * v1 * v1.transpose();
    }
    return b;
}

MomentSolution feasibility_witness(const Dataset& ds, const MomentProgram& prog) {
    if (!ds.inlier_mask || !ds.ell_star) throw ValidationError("feasibility_witness needs inlier_mask and ell_star");
    Eigen::VectorXd w(ds.n());
    for (int i = 0; i < ds.n(); ++i) w(i) = (*ds.inlier_mask)[i] ? 1.0 : 0.0;
    return solution_from_blocks(lift_point(prog, w, *ds.ell_star), prog);
}

MomentSolution solution_from_blocks(const BlockValues& blocks, const MomentProgram& prog) {
    MomentSolution s;
    s.blocks = blocks;
    s.moment = blocks[prog.moment_block];
    const auto& idx = prog.index;
    const int n = prog.n, d = prog.d;
    s.pE_w.resize(n);
    s.pE_wl.resize(n, d);
    s.pE_ll.resize(d, d);
    for (int i = 0; i < n; ++i) {
        s.pE_w(i) = s.moment(0, 1 + i);
        for (int k = 0; k < d; ++k) s.pE_wl(i, k) = s.moment(1 + i, 1 + n + k);
    }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) s.pE_ll(a, b) = s.moment(1 + n + a, 1 + n + b);
    (void)idx;
    s.objective = objective_value(prog.sdp, blocks);
    s.min_w = n ? s.pE_w.minCoeff() : 0.0;
    s.negative_w = static_cast<int>((s.pE_w.array() < -1e-6).count());
    s.primal_residual = primal_residual(prog.sdp, blocks);
    return s;
}

MomentSolution extract_pseudo_moments(const SDPSolution& raw, const MomentProgram& prog) {
    if (raw.status == SDPStatus::infeasible_suspected)
        throw SolverError(fmt::format("solver reports infeasible_suspected after {} iterations: primal {:.3g}, dual {:.3g}",
                                      raw.iterations, raw.primal_residual, raw.dual_residual));
    MomentSolution s = solution_from_blocks(raw.X, prog);
    s.status = raw.status;
    s.iterations = raw.iterations;
    s.primal_residual = raw.primal_residual;
    s.dual_residual = raw.dual_residual;
    s.objective = raw.objective;
    return s;
}

ResidualReport validate_constraints(const MomentSolution& sol, const MomentProgram& prog, double tol) {
    ResidualReport r;
    r.tol = tol;
    auto viol = constraint_violations(prog.sdp, sol.blocks);
    for (size_t k = 0; k < prog.sdp.constraints.size(); ++k) {
        const auto& c = prog.sdp.constraints[k];
        double v = std::abs(viol(static_cast<long>(k)));
        auto& fm = r.family_max[c.family];
        fm = std::max(fm, v);
        if (c.sense == Sense::eq) r.max_equality = std::max(r.max_equality, v);
        else r.max_inequality = std::max(r.max_inequality, v);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.moment, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.trace = sol.moment.trace();
    r.cs_max_excess = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < prog.n; ++i)
        for (int k = 0; k < prog.d; ++k)
            r.cs_max_excess = std::max(r.cs_max_excess, sol.pE_wl(i, k) * sol.pE_wl(i, k) - sol.pE_w(i) * sol.pE_ll(k, k));
    for (const auto& [fam, v] : r.family_max)
        if (v > tol) r.flagged.push_back(fam);
    if (r.min_eigenvalue < -tol * std::max(1.0, r.trace)) r.flagged.push_back("psd");
    r.passed = r.flagged.empty();
    return r;
}

MomentSolution solve_program(const MomentProgram& prog, const SDPOptions& opts) {
    auto raw = solve(prog.sdp, opts);
    auto s = extract_pseudo_moments(raw, prog);
    s.report = validate_constraints(s, prog, std::max(opts.tol * 10.0, 1e-6));
    s.trace = std::move(raw.trace);
    return s;
}

MixtureStep mixture_line_search(const Eigen::VectorXd& u, const Eigen::VectorXd& ustar, double margin) {
    MixtureStep st;
    st.norm_before = u.norm();
    Eigen::VectorXd dir = ustar - u;
    double dd = dir.squaredNorm();
    st.lambda_exact = dd > 0 ? -u.dot(dir) / dd : 0.0;
    double lambda = 1.0;
    for (int k = 0; k < 80; ++k, lambda *= 0.5) {
        double nv = (u + lambda * dir).norm();
        if (nv < st.norm_before - margin) {
            st.lambda = lambda;
            st.norm_after = nv;
            st.improved = true;
            return st;
        }
    }
    st.norm_after = st.norm_before;
    return st;
}

void export_program(const MomentProgram& prog, std::ostream& os) {
    os << fmt::format("# moment program: degree {}, variant {}, alpha {:.17g}, n {}, d {}\n", prog.degree,
                      to_string(prog.variant), prog.alpha, prog.n, prog.d);
    for (size_t b = 0; b < prog.block_labels.size(); ++b) os << "#b " << b + 1 << " " << prog.block_labels[b] << "\n";
    for (int k = 0; k < prog.index.size(); ++k) os << "#m " << k + 1 << " " << prog.index.name(prog.index.monos[k]) << "\n";
    write_sdp(prog.sdp, os);
}

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    auto j = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        std::vector<double> row(m.cols());
        for (int c = 0; c < m.cols(); ++c) row[c] = m(r, c);
        j.push_back(row);
    }
    return j;
}

Eigen::MatrixXd mat_from(const nlohmann::json& j, const char* field) {
    if (!j.is_array()) throw ParseError(fmt::format("{} must be an array of rows", field), field);
    Eigen::MatrixXd m(j.size(), j.empty() ? 0 : j[0].size());
    for (size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != static_cast<size_t>(m.cols())) throw ParseError(fmt::format("ragged {}", field), field);
        for (int c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace

nlohmann::json to_json(const ResidualReport& r) {
    return {{"max_equality", r.max_equality}, {"max_inequality", r.max_inequality},
            {"min_eigenvalue", r.min_eigenvalue}, {"trace", r.trace},
            {"cs_max_excess", r.cs_max_excess}, {"family_max", r.family_max},
            {"flagged", r.flagged}, {"tol", r.tol}, {"passed", r.passed}};
}

nlohmann::json to_json(const MomentSolution& s) {
    std::vector<double> w(s.pE_w.data(), s.pE_w.data() + s.pE_w.size());
    return {{"pE_w", w},
            {"pE_wl", mat_json(s.pE_wl)},
            {"pE_ll", mat_json(s.pE_ll)},
            {"objective", s.objective},
            {"status", to_string(s.status)},
            {"iterations", s.iterations},
            {"primal_residual", s.primal_residual},
            {"dual_residual", s.dual_residual},
            {"negative_w", s.negative_w},
            {"min_w", s.min_w},
            {"report", to_json(s.report)}};
}

MomentSolution moment_solution_from_json(const nlohmann::json& j) {
    for (const char* f : {"pE_w", "pE_wl", "pE_ll"})
        if (!j.contains(f)) throw ParseError(fmt::format("missing field {}", f), f);
    MomentSolution s;
    auto w = j.at("pE_w").get<std::vector<double>>();
    s.pE_w = Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
    s.pE_wl = mat_from(j.at("pE_wl"), "pE_wl");
    s.pE_ll = mat_from(j.at("pE_ll"), "pE_ll");
    if (s.pE_wl.rows() != s.pE_w.size()) throw ParseError("pE_wl rows must match pE_w", "pE_wl");
    s.objective = j.value("objective", 0.0);
    s.iterations = j.value("iterations", 0);
    s.primal_residual = j.value("primal_residual", 0.0);
    s.dual_residual = j.value("dual_residual", 0.0);
    s.negative_w = j.value("negative_w", 0);
    s.min_w = j.value("min_w", 0.0);
    auto st = j.value("status", std::string("optimal"));
    if (st == "optimal") s.status = SDPStatus::optimal;
    else if (st == "max_iter") s.status = SDPStatus::max_iter;
    else if (st == "infeasible_suspected") s.status = SDPStatus::infeasible_suspected;
    else throw ParseError("unknown status " + st, "status");
    return s;
}

}  // namespace ldreg
