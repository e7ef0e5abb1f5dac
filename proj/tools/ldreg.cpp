#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/datagen.hpp"
#include "ldreg/error.hpp"
#include "ldreg/lowerbound.hpp"
#include "ldreg/momentprog.hpp"
#include "ldreg/oracle.hpp"
#include "ldreg/polyapprox.hpp"
#include "ldreg/rounding.hpp"

using namespace ldreg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.3.0";
constexpr int kMetricsSchema = 1;
const std::vector<std::string> kMetricsColumns = {
    "seed",   "n",          "d",          "alpha",     "degree",   "variant",
    "status", "iterations", "objective",  "inlier_weight", "weighted_vote_error",
    "list_size", "min_dist", "hit",       "wall_time_s"};

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Global {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string format = "json";
    int verbosity = 1;
};

// every option goes through here so the manifest can echo and replay it
struct Recorded {
    std::string name;
    std::function<json()> value;
    bool flag = false;
};

struct Cmd {
    CLI::App* app = nullptr;
    std::vector<Recorded> opts;

    template <class T>
    CLI::Option* opt(const std::string& name, T& ref, const std::string& desc) {
        opts.push_back({name, [&ref] {
                            if constexpr (std::is_floating_point_v<T>)
                                if (std::isnan(ref)) return json(nullptr);
                            return json(ref);
                        }});
        auto* o = app->add_option("--" + name, ref, desc);
        if constexpr (std::is_floating_point_v<T>)
            if (std::isnan(ref)) return o;
        return o->capture_default_str();
    }
    CLI::Option* flag(const std::string& name, bool& ref, const std::string& desc) {
        opts.push_back({name, [&ref] { return json(ref); }, true});
        return app->add_flag("--" + name, ref, desc);
    }
    json config() const {
        json j = json::object();
        for (const auto& o : opts) j[o.name] = o.value();
        return j;
    }
    std::vector<std::string> argv() const {
        std::vector<std::string> a;
        for (const auto& o : opts) {
            json v = o.value();
            if (o.flag) {
                if (v.get<bool>()) a.push_back("--" + o.name);
                continue;
            }
            if (v.is_null()) continue;
            a.push_back("--" + o.name);
            a.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
        return a;
    }
};

bool isset(double v) { return !std::isnan(v); }

std::vector<double> parse_list(const std::string& s, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size() && tok.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError(fmt::format("--{}: cannot parse '{}' as a number", flag, tok));
        }
    }
    if (out.empty()) throw UsageError(fmt::format("--{} is empty", flag));
    return out;
}

class Run {
public:
    Run(const Global& g, std::string command) : g_(g), command_(std::move(command)) {
        fs::create_directories(g_.out);
    }

    fs::path path(const std::string& name) {
        outputs_.push_back(name);
        return fs::path(g_.out) / name;
    }
    void write_json(const std::string& name, const json& j) {
        std::ofstream f(path(name));
        f << j.dump(2) << "\n";
        if (!f) throw std::runtime_error("cannot write " + name);
    }
    bool csv() const { return g_.format == "csv"; }
    std::uint64_t seed() const { return g_.seed; }

    template <class... A>
    void info(fmt::format_string<A...> f, A&&... a) const {
        if (g_.verbosity >= 1) fmt::print("{}\n", fmt::format(f, std::forward<A>(a)...));
    }
    void warn(const std::string& w) const {
        if (g_.verbosity >= 1) fmt::print(stderr, "warning: {}\n", w);
    }
    int verbosity() const { return g_.verbosity; }

    json extra = json::object();

    void manifest(const Cmd& cmd, const std::vector<std::string>& global_argv) {
        std::vector<std::string> argv = global_argv;
        argv.push_back(command_);
        for (auto& a : cmd.argv()) argv.push_back(a);
        json m = {{"tool", "ldreg"},
                  {"version", kVersion},
                  {"command", command_},
                  {"argv", argv},
                  {"config",
                   {{"global", {{"seed", g_.seed}, {"out", g_.out}, {"format", g_.format}, {"verbosity", g_.verbosity}}},
                    {command_, cmd.config()}}},
                  {"rng", Rng::algorithm},
                  {"metrics_schema_version", kMetricsSchema},
                  {"metrics_columns", kMetricsColumns},
                  {"outputs", outputs_},
                  {"resolved", extra}};
        std::ofstream f(fs::path(g_.out) / "manifest.json");
        f << m.dump(2) << "\n";
    }

private:
    Global g_;
    std::string command_;
    std::vector<std::string> outputs_;
};

// ---- gen

struct GenCfg {
    std::string dist = "gaussian";
    int q = 2;
    int d = 0;
    int n = 0;
    double alpha = kUnset;
    std::string adversary = "random";
    double zeta = 0.0;
    std::string noise = "uniform";
    std::string ell;
    double decoy_fraction = 1.0;
    double range = 2.0;
    int coord = 1;
    int copies = 1;
};

DistTag dist_of(const GenCfg& c) {
    if (c.dist == "gaussian") return DistTag::gaussian();
    if (c.dist == "hypercube01") return DistTag::hypercube01();
    if (c.dist == "qary") return DistTag::qary(c.q);
    if (c.dist == "rademacher" || c.dist == "basis") return DistTag::make_custom(c.dist);
    throw UsageError("--dist must be one of gaussian, hypercube01, qary, rademacher, basis");
}

Dataset make_dataset(const GenCfg& c, std::uint64_t seed) {
    if (c.d < 1) throw UsageError("--d is required");
    if (c.adversary == "gv") return gen_gv_instance(c.d, seed, c.copies);
    if (c.n < 1) throw UsageError("--n is required");
    if (!isset(c.alpha)) throw UsageError("--alpha is required");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");

    DistTag dist = dist_of(c);
    Eigen::VectorXd ell;
    AdversaryStrategy st;
    if (c.adversary == "random") st = AdversaryStrategy::random_uniform(c.range);
    else if (c.adversary == "second_plant") st = AdversaryStrategy::second_plant(std::nullopt, c.decoy_fraction);
    else if (c.adversary == "mixture_ri") {
        if (dist.kind != DistTag::Kind::qary) throw UsageError("--adversary mixture_ri needs --dist qary");
        st = AdversaryStrategy::mixture_Ri(c.q, c.coord);
        if (c.coord < 1 || c.coord > c.d) throw UsageError("--coord must lie in 1..d");
        ell = Eigen::VectorXd::Unit(c.d, c.coord - 1);
    } else
        throw UsageError("--adversary must be one of random, second_plant, gv, mixture_ri");

    if (ell.size() == 0) {
        if (!c.ell.empty()) {
            auto v = parse_list(c.ell, "ell");
            if (static_cast<int>(v.size()) != c.d) throw UsageError("--ell must have d entries");
            ell = Eigen::Map<Eigen::VectorXd>(v.data(), c.d);
        } else {
            ell = random_unit_vector(c.d, seed);
        }
    }
    NoiseModel nm;
    if (c.noise == "uniform") nm = NoiseModel::uniform;
    else if (c.noise == "gaussian") nm = NoiseModel::gaussian;
    else throw UsageError("--noise must be uniform or gaussian");

    long n_in = round_count(c.alpha * c.n);
    if (n_in < 1) throw UsageError("--alpha * --n rounds to zero inliers");
    auto in = gen_inliers(dist, static_cast<int>(n_in), ell, c.zeta, seed, nm);
    return apply_adversary(in, st, c.n, seed);
}

void add_gen_options(Cmd& cmd, GenCfg& c) {
    cmd.opt("dist", c.dist, "gaussian | hypercube01 | qary | rademacher | basis");
    cmd.opt("q", c.q, "alphabet size for qary");
    cmd.opt("d", c.d, "dimension");
    cmd.opt("n", c.n, "total number of rows");
    cmd.opt("alpha", c.alpha, "inlier fraction");
    cmd.opt("adversary", c.adversary, "random | second_plant | gv | mixture_ri");
    cmd.opt("zeta", c.zeta, "inlier label noise bound");
    cmd.opt("noise", c.noise, "uniform | gaussian");
    cmd.opt("ell", c.ell, "comma separated l*, default a random unit vector");
    cmd.opt("decoy-fraction", c.decoy_fraction, "second_plant share of outliers on the decoy");
    cmd.opt("range", c.range, "random outlier label range");
    cmd.opt("coord", c.coord, "mixture_ri coordinate (1-based)");
    cmd.opt("copies", c.copies, "gv outlier copies");
}

// ---- solve and round

struct SolveCfg {
    std::string data;
    double alpha = kUnset;
    int degree = 2;
    std::string variant = "plain";
    double zeta = kUnset;
    double tol = 1e-6;
    int max_iter = 20000;
    double rho = 0.1;
    std::string warm_start = "none";
    bool trace = false;
    bool export_sdp = false;
};

struct RoundCfg {
    std::string moments;
    int draws = 0;
    double dedupe = -1.0;
    double eta = 0.1;
    bool refit = false;
    double refit_tol = 1e-6;
};

void add_solve_options(Cmd& cmd, SolveCfg& c, bool with_data = true) {
    if (with_data) {
        cmd.opt("data", c.data, "dataset json")->required();
        cmd.opt("alpha", c.alpha, "inlier fraction, default from the dataset");
    }
    cmd.opt("degree", c.degree, "2 or 4");
    cmd.opt("variant", c.variant, "plain | boolean | noisy");
    cmd.opt("zeta", c.zeta, "noise bound; a positive value selects the noisy variant");
    cmd.opt("tol", c.tol, "solver tolerance");
    cmd.opt("max-iter", c.max_iter, "solver iteration cap");
    cmd.opt("rho", c.rho, "initial ADMM penalty");
    cmd.opt("warm-start", c.warm_start, "none | witness (needs l* and the inlier mask)");
    cmd.flag("trace", c.trace, "write trace.csv");
    cmd.flag("export-sdp", c.export_sdp, "write program.sdp");
}

void add_round_options(Cmd& cmd, RoundCfg& c, bool with_moments) {
    if (with_moments) cmd.opt("moments", c.moments, "moments json from solve")->required();
    cmd.opt("draws", c.draws, "number of draws, default ceil(20/alpha)");
    cmd.opt("dedupe", c.dedupe, "merge radius, negative keeps every draw");
    cmd.opt("eta", c.eta, "hit radius for evaluation");
    cmd.flag("refit", c.refit, "post-hoc least squares on each candidate's consistent rows (not part of the core algorithm)");
    cmd.opt("refit-tol", c.refit_tol, "residual bound that defines a candidate's rows for --refit");
}

Dataset read_dataset(const std::string& p, const Run& run) {
    std::vector<std::string> warns;
    auto ds = load_dataset(p, &warns);
    for (auto& w : warns) run.warn(w);
    return ds;
}

struct Solved {
    MomentProgram prog;
    MomentSolution sol;
};

Variant variant_of(const SolveCfg& c, double zeta) {
    if (c.variant == "plain") return zeta > 0.0 ? Variant::noisy : Variant::plain;
    if (c.variant == "boolean") return Variant::boolean;
    if (c.variant == "noisy") return Variant::noisy;
    throw UsageError("--variant must be plain, boolean or noisy");
}

Solved solve_stage(const Dataset& ds, const SolveCfg& c) {
    double alpha = isset(c.alpha) ? c.alpha : ds.alpha;
    double zeta = isset(c.zeta) ? c.zeta : (c.variant == "noisy" ? ds.zeta : 0.0);
    Variant v = variant_of(c, zeta);
    auto prog = build_program(ds, alpha, c.degree, v, zeta);
    SDPOptions o;
    o.tol = c.tol;
    o.max_iter = c.max_iter;
    o.rho = c.rho;
    o.keep_trace = c.trace;
    if (c.warm_start == "witness") {
        if (!ds.ell_star || !ds.inlier_mask) throw UsageError("--warm-start witness needs l* and the inlier mask in the dataset");
        o.warm_start = feasibility_witness(ds, prog).blocks;
    } else if (c.warm_start != "none")
        throw UsageError("--warm-start must be none or witness");
    auto sol = solve_program(prog, o);
    return {std::move(prog), std::move(sol)};
}

json program_summary(const MomentProgram& p) {
    std::map<std::string, int> fam;
    for (const auto& c : p.sdp.constraints) ++fam[c.family];
    json blocks = json::array();
    for (size_t b = 0; b < p.sdp.blocks.size(); ++b)
        blocks.push_back({{"label", b < p.block_labels.size() ? p.block_labels[b] : ""}, {"dim", p.sdp.blocks[b].dim}});
    return {{"degree", p.degree},
            {"variant", to_string(p.variant)},
            {"alpha", p.alpha},
            {"zeta", p.zeta},
            {"noise_bound", p.variant == Variant::noisy ? json(4.0 * p.zeta) : json(nullptr)},
            {"constraint_families", fam},
            {"constraints", p.sdp.constraints.size()},
            {"blocks", blocks},
            {"warnings", p.warnings}};
}

// sum of pE[w] over n: alpha, halved in the noisy variant
double weight_fraction(const MomentProgram& p) { return p.variant == Variant::noisy ? 0.5 * p.alpha : p.alpha; }

void write_solution(Run& run, const Solved& s, const SolveCfg& c) {
    json j = to_json(s.sol);
    j["program_warnings"] = s.prog.warnings;
    j["alpha"] = s.prog.alpha;
    j["variant"] = to_string(s.prog.variant);
    j["weight_fraction"] = weight_fraction(s.prog);
    run.write_json("moments.json", j);
    if (run.csv()) {
        std::ofstream f(run.path("moments.csv"));
        f << "i,pE_w";
        for (int k = 0; k < s.sol.pE_wl.cols(); ++k) f << ",pE_wl" << k + 1;
        f << "\n";
        for (int i = 0; i < s.sol.pE_w.size(); ++i) {
            f << i << fmt::format(",{:.17g}", s.sol.pE_w(i));
            for (int k = 0; k < s.sol.pE_wl.cols(); ++k) f << fmt::format(",{:.17g}", s.sol.pE_wl(i, k));
            f << "\n";
        }
    }
    if (c.trace) {
        std::ofstream f(run.path("trace.csv"));
        f << "iter,primal,dual,objective,merit\n";
        for (const auto& t : s.sol.trace)
            f << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", t.iter, t.primal, t.dual, t.objective, t.merit);
    }
    if (c.export_sdp) {
        std::ofstream f(run.path("program.sdp"));
        export_program(s.prog, f);
    }
    run.extra["program"] = program_summary(s.prog);
    for (auto& w : s.prog.warnings) run.warn(w);
}

void check_status(const MomentSolution& sol) {
    if (sol.status == SDPStatus::optimal) return;
    std::string fam;
    for (const auto& [k, v] : sol.report.family_max) fam += fmt::format(" {}={:.3g}", k, v);
    throw SolverFailure(fmt::format(
        "solver stopped with status {} after {} iterations: primal {:.3g}, dual {:.3g}, min eigenvalue {:.3g};{}",
        to_string(sol.status), sol.iterations, sol.primal_residual, sol.dual_residual, sol.report.min_eigenvalue, fam));
}

CandidateList refit(const Dataset& ds, CandidateList list, double tol) {
    for (auto& c : list.entries) {
        Eigen::ArrayXd r = (ds.y - ds.X * c.vector).array().abs();
        std::vector<int> rows;
        for (int i = 0; i < ds.n(); ++i)
            if (r(i) <= tol) rows.push_back(i);
        if (static_cast<int>(rows.size()) < ds.d()) continue;
        Eigen::MatrixXd A(rows.size(), ds.d());
        Eigen::VectorXd b(rows.size());
        for (size_t k = 0; k < rows.size(); ++k) {
            A.row(k) = ds.X.row(rows[k]);
            b(k) = ds.y(rows[k]);
        }
        c.vector = A.colPivHouseholderQr().solve(b);
    }
    return list;
}

struct Metrics {
    std::uint64_t seed = 0;
    int n = 0, d = 0, degree = 2;
    double alpha = 0.0;
    std::string variant, status;
    int iterations = 0;
    double objective = 0.0;
    double inlier_weight = kUnset, vote_error = kUnset, min_dist = kUnset;
    int list_size = 0;
    int hit = -1;  // -1 when l* is unknown
    double wall = 0.0;
};

std::string num(double v) { return std::isnan(v) ? "" : fmt::format("{:.17g}", v); }

std::string csv_row(const Metrics& m) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3f}", m.seed, m.n, m.d, num(m.alpha), m.degree,
                       m.variant, m.status, m.iterations, num(m.objective), num(m.inlier_weight), num(m.vote_error),
                       m.list_size, num(m.min_dist), m.hit < 0 ? "" : (m.hit ? "1" : "0"), m.wall);
}

std::string csv_header() {
    std::string h;
    for (size_t k = 0; k < kMetricsColumns.size(); ++k) h += (k ? "," : "") + kMetricsColumns[k];
    return h;
}

json metrics_json(const Metrics& m) {
    auto opt = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return {{"seed", m.seed},
            {"n", m.n},
            {"d", m.d},
            {"alpha", m.alpha},
            {"degree", m.degree},
            {"variant", m.variant},
            {"status", m.status},
            {"iterations", m.iterations},
            {"objective", m.objective},
            {"inlier_weight", opt(m.inlier_weight)},
            {"weighted_vote_error", opt(m.vote_error)},
            {"list_size", m.list_size},
            {"min_dist", opt(m.min_dist)},
            {"hit", m.hit < 0 ? json(nullptr) : json(m.hit == 1)},
            {"wall_time_s", m.wall}};
}

struct RoundResult {
    CandidateList list;
    Metrics metrics;
};

RoundResult round_stage(const Dataset& ds, const MomentSolution& sol, double alpha, double mass, const RoundCfg& c,
                        std::uint64_t seed) {
    if (sol.pE_w.size() != ds.n()) throw UsageError("moments do not match the dataset size");
    auto votes = compute_votes(sol.pE_w, sol.pE_wl);
    int draws = c.draws > 0 ? c.draws : draw_count(alpha);
    auto list = sample_list(votes, sol.pE_w, mass, draws, seed);
    if (c.dedupe >= 0.0) list = dedupe(list, c.dedupe);
    if (c.refit) list = refit(ds, list, c.refit_tol);

    Metrics m;
    m.seed = seed;
    m.n = ds.n();
    m.d = ds.d();
    m.alpha = alpha;
    m.status = to_string(sol.status);
    m.iterations = sol.iterations;
    m.objective = sol.objective;
    m.list_size = static_cast<int>(list.size());
    if (ds.inlier_mask) {
        double s = 0.0;
        for (int i : ds.inlier_indices()) s += sol.pE_w(i);
        m.inlier_weight = s;
    }
    if (ds.ell_star) {
        auto ev = evaluate(list, *ds.ell_star, c.eta);
        m.min_dist = ev.min_dist;
        m.hit = ev.hit ? 1 : 0;
        if (ds.inlier_mask) m.vote_error = weighted_vote_error(votes, sol.pE_w, ds.inlier_indices(), *ds.ell_star);
    }
    return {std::move(list), m};
}

void write_round(Run& run, const RoundResult& r) {
    for (auto& w : r.list.warnings) run.warn(w);
    save_candidates(r.list, run.path("candidates.json"));
    if (run.csv()) export_candidates_csv(r.list, run.path("candidates.csv"));
    {
        std::ofstream f(run.path("metrics.csv"));
        f << csv_header() << "\n" << csv_row(r.metrics) << "\n";
    }
    if (!run.csv()) run.write_json("metrics.json", metrics_json(r.metrics));
    const auto& m = r.metrics;
    run.info("candidates: {}  objective: {:.6g}  status: {}", m.list_size, m.objective, m.status);
    if (m.hit >= 0) run.info("min_dist: {:.6g}  hit: {}", m.min_dist, m.hit ? "true" : "false");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- oracle

struct OracleCfg {
    std::string data;
    int size = 0;
    double tol = kUnset;
    double guard = kEnumerationGuard;
    double delta = kUnset;
    int draws = 0;
};

json set_json(const SolubleSet& s) {
    return {{"indices", s.indices}, {"ell", std::vector<double>(s.ell.data(), s.ell.data() + s.ell.size())},
            {"residual", s.residual}};
}

void cmd_oracle(Run& run, const OracleCfg& c) {
    auto ds = read_dataset(c.data, run);
    int size = c.size > 0 ? c.size : static_cast<int>(round_count(ds.alpha * ds.n()));
    double tol = isset(c.tol) ? c.tol : (ds.zeta > 0.0 ? 4.0 * ds.zeta : 1e-9);
    auto rep = enumerate_soluble(ds, size, tol, static_cast<long long>(c.guard));
    for (auto& w : rep.warnings) run.warn(w);
    run.info("soluble sets: {} of {} examined", rep.sets.size(), rep.examined);
    run.extra["size"] = size;
    run.extra["tol"] = tol;

    json out = {{"size", size}, {"tol", tol}, {"examined", rep.examined}, {"count", rep.sets.size()}};
    json sets = json::array();
    for (const auto& s : rep.sets) sets.push_back(set_json(s));
    out["sets"] = sets;
    if (rep.sets.empty()) {
        run.warn("no soluble set of this size");
        run.write_json("oracle.json", out);
        return;
    }
    auto mu = max_uniform_distribution(rep.sets, ds.n());
    out["distribution"] = to_json(mu);
    double alpha = static_cast<double>(size) / ds.n();
    double delta = isset(c.delta) ? c.delta : alpha / 2.0;
    int draws = c.draws > 0 ? c.draws : identifiability_draws(alpha, delta);
    auto list = identifiability_list(ds, mu, draws, run.seed());
    out["identifiability"] = {{"delta", delta}, {"draws", draws}, {"list", to_json(list)}};
    if (ds.ell_star) {
        // fitted vectors carry rounding error, so "exact" means within 1e-9
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : list.entries) best = std::min(best, (e.vector - *ds.ell_star).norm());
        out["identifiability"]["min_dist"] = best;
        out["identifiability"]["contains_ell_star"] = best <= 1e-9;
        run.info("list contains l*: {}  (min distance {:.3g})", best <= 1e-9 ? "true" : "false", best);
    }
    if (ds.inlier_mask) {
        double wi = 0.0;
        auto inl = ds.inlier_indices();
        for (int i : inl) wi += mu.W(i);
        out["inlier_W_sum"] = wi;
        out["fair_weight_bound"] = alpha * static_cast<double>(inl.size());
        run.info("inlier W sum: {:.6g}  (alpha |I| = {:.6g})", wi, alpha * inl.size());
    }
    run.write_json("oracle.json", out);
    if (run.csv()) {
        std::ofstream f(run.path("oracle_W.csv"));
        f << "i,W,inlier\n";
        for (int i = 0; i < ds.n(); ++i)
            f << fmt::format("{},{:.17g},{}\n", i, mu.W(i), ds.inlier_mask ? ((*ds.inlier_mask)[i] ? "1" : "0") : "");
    }
}

// ---- certify

struct CertifyCfg {
    double delta = 0.1;
    double C = 2.0;
    std::string dist = "gauss";
};

json report_json(const AntiConcReport& r) {
    return {{"q0", r.q0},       {"max_dev_core", r.max_dev_core}, {"band_max", r.band_max},
            {"expectation", r.expectation}, {"delta", r.delta}, {"L", r.L}, {"C", r.C}, {"passed", r.passed}};
}

void cmd_certify(Run& run, const CertifyCfg& c) {
    if (!(c.delta > 0.0) || !(c.C > 0.0)) throw UsageError("--delta and --C must be positive");
    DistHint hint;
    if (c.dist == "gauss") hint = DistHint::gaussian;
    else if (c.dist == "subexp") hint = DistHint::subexponential;
    else throw UsageError("--dist must be gauss or subexp");
    auto ch = choose_core_indicator(c.delta, c.C, hint);
    run.write_json("core_indicator.json", {{"poly", to_json(ch.q)}, {"L", ch.L}, {"report", report_json(ch.report)}});
    run.info("core indicator degree {}  E q^2 = {:.6g}  report passed: {}", ch.q.degree(), ch.report.expectation,
             ch.report.passed ? "true" : "false");
    if (hint != DistHint::gaussian) {
        run.info("no certificate: only the Gaussian reduction is certified");
        return;
    }
    // certified at (C, 2 delta): s F(s) <= 2 C delta on [0, 1]
    Poly F = gaussian_univariate_reduction(ch.q);
    auto cert = certify_anticoncentration(F, c.C, 2.0 * c.delta);
    json j = to_json(cert);
    j["residual"] = cert.residual();
    j["C"] = c.C;
    j["delta"] = 2.0 * c.delta;
    j["reduced"] = to_json(F);
    run.write_json("certificate.json", j);
    run.extra["certified_delta"] = 2.0 * c.delta;
    run.info("certificate: {} + {} square factors, residual {:.3g}", cert.sigma0.size(), cert.sigma1.size(),
             cert.residual());
}

// ---- lowerbound

struct LowerCfg {
    int q = 2;
    int d = 3;
    int i = 1;
    std::string variant = "modq";
    int n = 0;
    bool check_joint = false;
    std::string anticonc;
};

void cmd_lowerbound(Run& run, const LowerCfg& c) {
    EnsembleVariant v;
    if (c.variant == "modq") v = EnsembleVariant::modq;
    else if (c.variant == "boolean01") v = EnsembleVariant::boolean01;
    else throw UsageError("--variant must be modq or boolean01");
    EnsembleSpec spec{c.q, c.d, c.i, v};
    spec.validate();
    json out = {{"q", c.q}, {"d", c.d}, {"i", c.i}, {"variant", c.variant}};

    auto table = joint_law(spec);
    export_table_csv(table, run.path("joint_law.csv"));
    out["denominator"] = table.denominator;
    out["support"] = std::count_if(table.count.begin(), table.count.end(), [](long long x) { return x > 0; });

    if (c.check_joint) {
        bool identical = true;
        json tv = json::array();
        for (int j = 1; j <= c.d; ++j) {
            auto other = joint_law({c.q, c.d, j, v});
            identical &= other == table;
            tv.push_back(fmt::format("{}/{}", tv_numerator(table, other), 2 * table.denominator * other.denominator));
        }
        out["identical"] = identical;
        out["tv"] = tv;
        fmt::print("identical: {}\n", identical ? "true" : "false");
    }
    if (!c.anticonc.empty()) {
        auto raw = parse_list(c.anticonc, "anticonc");
        std::vector<long long> vv;
        for (double x : raw) {
            if (x != std::round(x)) throw UsageError("--anticonc takes integer entries");
            vv.push_back(static_cast<long long>(x));
        }
        if (static_cast<int>(vv.size()) != c.d) throw UsageError("--anticonc must have d entries");
        auto p = hypercube_anticonc(vv, c.q);
        out["anticonc"] = {{"v", vv}, {"count", p.count}, {"total", p.total}, {"value", p.value()}};
        run.info("Pr[<x, v> = 0] = {}/{}", p.count, p.total);
    }
    if (c.n > 0) {
        auto s = gen_Ri(spec, c.n, run.seed());
        save_dataset(to_dataset(s, spec, run.seed()), run.path("dataset.json"));
        std::ofstream f(run.path("samples.csv"));
        for (int k = 0; k < c.d; ++k) f << "x" << k + 1 << ",";
        f << "y,a,inlier\n";
        for (int r = 0; r < c.n; ++r) {
            for (int k = 0; k < c.d; ++k) f << s.X(r, k) << ",";
            f << s.y(r) << "," << s.a[r] << "," << (s.inlier[r] ? 1 : 0) << "\n";
        }
    }
    run.write_json("lowerbound.json", out);
}

// ---- bench

struct BenchCfg {
    std::string n = "120";
    std::string d = "4";
    std::string alpha = "0.4";
    int seeds = 10;
    std::string adversary = "second_plant";
    int jobs = 0;
};

void cmd_bench(Run& run, const BenchCfg& b, const SolveCfg& sc, const RoundCfg& rc) {
    auto ns = parse_list(b.n, "n"), ds_ = parse_list(b.d, "d"), as = parse_list(b.alpha, "alpha");
    if (b.seeds < 1) throw UsageError("--seeds must be >= 1");
    struct Point {
        GenCfg g;
        std::uint64_t seed;
    };
    std::vector<Point> pts;
    Rng root = Rng(run.seed()).split("bench");
    for (double n : ns)
        for (double d : ds_)
            for (double a : as)
                for (int s = 0; s < b.seeds; ++s) {
                    GenCfg g;
                    g.n = static_cast<int>(n);
                    g.d = static_cast<int>(d);
                    g.alpha = a;
                    g.adversary = b.adversary;
                    g.zeta = isset(sc.zeta) ? sc.zeta : 0.0;
                    pts.push_back({g, root.split(static_cast<std::uint64_t>(pts.size())).next_u64()});
                }
    std::vector<std::string> rows(pts.size());
    std::vector<int> hits(pts.size(), -1);
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::string first_error;
    auto worker = [&] {
        for (size_t k; (k = next++) < pts.size();) {
            try {
                auto t0 = std::chrono::steady_clock::now();
                auto ds = make_dataset(pts[k].g, pts[k].seed);
                auto s = solve_stage(ds, sc);
                auto r = round_stage(ds, s.sol, s.prog.alpha, weight_fraction(s.prog), rc, pts[k].seed);
                r.metrics.degree = s.prog.degree;
                r.metrics.variant = to_string(s.prog.variant);
                r.metrics.wall = seconds_since(t0);
                rows[k] = csv_row(r.metrics);
                hits[k] = r.metrics.hit;
            } catch (const std::exception& e) {
                std::lock_guard lk(err_mu);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };
    int jobs = b.jobs > 0 ? b.jobs : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw std::runtime_error("bench point failed: " + first_error);

    std::ofstream f(run.path("bench.csv"));
    f << csv_header() << "\n";
    for (auto& r : rows) f << r << "\n";
    int h = static_cast<int>(std::count(hits.begin(), hits.end(), 1));
    run.info("points: {}  hits: {}", pts.size(), h);
    run.extra["points"] = pts.size();
    run.extra["jobs"] = jobs;
}

// ---- dispatch

int run_cli(std::vector<std::string> args);

int dispatch(std::vector<std::string> args) {
    CLI::App app{"list-decodable linear regression toolkit", "ldreg"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);

    Global g;
    Cmd global{&app, {}};
    global.opt("seed", g.seed, "global seed");
    global.opt("out", g.out, "output directory");
    global.opt("format", g.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    global.opt("verbosity", g.verbosity, "0 quiet, 1 summary, 2 detail");

    GenCfg gen;
    Cmd c_gen{app.add_subcommand("gen", "generate a corrupted regression instance"), {}};
    add_gen_options(c_gen, gen);

    SolveCfg solve;
    Cmd c_solve{app.add_subcommand("solve", "solve the moment relaxation"), {}};
    add_solve_options(c_solve, solve);

    std::string round_data;
    double round_alpha = kUnset;
    RoundCfg round;
    Cmd c_round{app.add_subcommand("round", "sample the candidate list from solved moments"), {}};
    c_round.opt("data", round_data, "dataset json")->required();
    c_round.opt("alpha", round_alpha, "inlier fraction, default from the dataset");
    add_round_options(c_round, round, true);

    SolveCfg sr_solve;
    RoundCfg sr_round;
    Cmd c_sr{app.add_subcommand("solve-round", "solve and round in one pass"), {}};
    add_solve_options(c_sr, sr_solve);
    add_round_options(c_sr, sr_round, false);

    OracleCfg oracle;
    Cmd c_oracle{app.add_subcommand("oracle", "enumerate soluble sets and the maximally uniform distribution"), {}};
    c_oracle.opt("data", oracle.data, "dataset json")->required();
    c_oracle.opt("size", oracle.size, "subset size, default round(alpha n)");
    c_oracle.opt("tol", oracle.tol, "consistency tolerance, default 1e-9 or 4 zeta");
    c_oracle.opt("guard", oracle.guard, "maximum number of subsets examined");
    c_oracle.opt("delta", oracle.delta, "anti-concentration parameter, default alpha/2");
    c_oracle.opt("draws", oracle.draws, "identifiability draws, default ceil(20/(alpha - delta))");

    CertifyCfg cert;
    Cmd c_cert{app.add_subcommand("certify", "build and certify a core indicator"), {}};
    c_cert.opt("delta", cert.delta, "core radius");
    c_cert.opt("C", cert.C, "anti-concentration constant");
    c_cert.opt("dist", cert.dist, "gauss | subexp");

    LowerCfg lower;
    Cmd c_lower{app.add_subcommand("lowerbound", "lower-bound ensembles and exact laws"), {}};
    c_lower.opt("q", lower.q, "alphabet size");
    c_lower.opt("d", lower.d, "dimension");
    c_lower.opt("i", lower.i, "planted coordinate (1-based)");
    c_lower.opt("variant", lower.variant, "modq | boolean01");
    c_lower.opt("n", lower.n, "also sample this many rows");
    c_lower.flag("check-joint", lower.check_joint, "compare the joint law across all coordinates");
    c_lower.opt("anticonc", lower.anticonc, "integer direction v: exact Pr[<x, v> = 0]");

    BenchCfg bench;
    SolveCfg b_solve;
    RoundCfg b_round;
    Cmd c_bench{app.add_subcommand("bench", "solve-round over a grid of instances"), {}};
    c_bench.opt("n", bench.n, "comma separated n values");
    c_bench.opt("d", bench.d, "comma separated d values");
    c_bench.opt("alpha", bench.alpha, "comma separated alpha values");
    c_bench.opt("seeds", bench.seeds, "seeds per grid point");
    c_bench.opt("adversary", bench.adversary, "random | second_plant");
    c_bench.opt("jobs", bench.jobs, "worker threads, default all cores");
    add_solve_options(c_bench, b_solve, false);
    add_round_options(c_bench, b_round, false);

    std::string manifest_path;
    auto* c_replay = app.add_subcommand("replay", "re-run the command recorded in a manifest; --out overrides its directory");
    c_replay->add_option("--manifest", manifest_path, "manifest.json")->required();

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return 2;
    }

    if (c_replay->parsed()) {
        std::ifstream f(manifest_path);
        if (!f) throw UsageError("cannot read " + manifest_path);
        json m = json::parse(f);
        auto a = m.at("argv").get<std::vector<std::string>>();
        if (app.count("--out") > 0)
            for (size_t k = 0; k + 1 < a.size(); ++k)
                if (a[k] == "--out") a[k + 1] = g.out;
        return run_cli(a);
    }

    auto t0 = std::chrono::steady_clock::now();
    std::string name = app.get_subcommands().front()->get_name();
    Run run(g, name);
    const Cmd* cmd = nullptr;
    int rc = 0;

    if (name == "gen") {
        cmd = &c_gen;
        auto ds = make_dataset(gen, g.seed);
        save_dataset(ds, run.path("dataset.json"));
        if (run.csv()) export_csv(ds, run.path("dataset.csv"));
        int nin = ds.inlier_mask ? static_cast<int>(ds.inlier_indices().size()) : 0;
        run.extra["inliers"] = nin;
        run.extra["ambiguous"] = ds.ambiguous;
        run.info("dataset: n={} d={} inliers={} alpha={:.6g} generator={}{}", ds.n(), ds.d(), nin, ds.alpha,
                 ds.generator, ds.ambiguous ? " ambiguous" : "");
    } else if (name == "solve") {
        cmd = &c_solve;
        auto ds = read_dataset(solve.data, run);
        auto s = solve_stage(ds, solve);
        write_solution(run, s, solve);
        run.info("status: {}  iterations: {}  objective: {:.6g}", to_string(s.sol.status), s.sol.iterations,
                 s.sol.objective);
        run.manifest(*cmd, global.argv());
        check_status(s.sol);
        return 0;
    } else if (name == "round") {
        cmd = &c_round;
        auto ds = read_dataset(round_data, run);
        std::ifstream f(round.moments);
        if (!f) throw UsageError("cannot read " + round.moments);
        json mj = json::parse(f);
        auto sol = moment_solution_from_json(mj);
        double alpha = isset(round_alpha) ? round_alpha : mj.value("alpha", ds.alpha);
        auto r = round_stage(ds, sol, alpha, mj.value("weight_fraction", alpha), round, g.seed);
        r.metrics.wall = seconds_since(t0);
        write_round(run, r);
    } else if (name == "solve-round") {
        cmd = &c_sr;
        auto ds = read_dataset(sr_solve.data, run);
        auto s = solve_stage(ds, sr_solve);
        write_solution(run, s, sr_solve);
        if (s.sol.status != SDPStatus::optimal) {
            run.manifest(*cmd, global.argv());
            check_status(s.sol);
        }
        auto r = round_stage(ds, s.sol, s.prog.alpha, weight_fraction(s.prog), sr_round, g.seed);
        r.metrics.degree = s.prog.degree;
        r.metrics.variant = to_string(s.prog.variant);
        r.metrics.wall = seconds_since(t0);
        write_round(run, r);
        if (sr_round.refit) run.extra["refit"] = "post-hoc least squares, outside the core algorithm";
    } else if (name == "oracle") {
        cmd = &c_oracle;
        cmd_oracle(run, oracle);
    } else if (name == "certify") {
        cmd = &c_cert;
        cmd_certify(run, cert);
    } else if (name == "lowerbound") {
        cmd = &c_lower;
        cmd_lowerbound(run, lower);
    } else if (name == "bench") {
        cmd = &c_bench;
        cmd_bench(run, bench, b_solve, b_round);
    }
    run.manifest(*cmd, global.argv());
    return rc;
}

int run_cli(std::vector<std::string> args) {
    try {
        return dispatch(std::move(args));
    } catch (const UsageError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        fmt::print(stderr, "invalid argument: {}\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        fmt::print(stderr, "parse error ({}{}): {}\n", e.field, e.line >= 0 ? fmt::format(", line {}", e.line) : "",
                   e.what());
        return 2;
    } catch (const GuardExceeded& e) {
        fmt::print(stderr, "resource guard: {}\n", e.what());
        return 4;
    } catch (const SolverFailure& e) {
        fmt::print(stderr, "solver failure: {}\n", e.what());
        return 3;
    } catch (const SolverError& e) {
        fmt::print(stderr, "solver failure: {}\n", e.what());
        return 3;
    } catch (const CertificationFailed& e) {
        fmt::print(stderr, "certification failed at s={:.6g}, margin {:.3g}: {}\n", e.worst_s, e.margin, e.what());
        return 3;
    } catch (const ConstructionError& e) {
        fmt::print(stderr, "construction failed: {}\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args);
}
