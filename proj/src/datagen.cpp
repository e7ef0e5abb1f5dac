#include "ldreg/datagen.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ldreg/error.hpp"

namespace ldreg {

using nlohmann::json;

DistTag DistTag::gaussian(Eigen::MatrixXd cov) {
    DistTag t;
    t.cov = std::move(cov);
    return t;
}

DistTag DistTag::hypercube01() {
    DistTag t;
    t.kind = Kind::hypercube01;
    return t;
}

DistTag DistTag::qary(int q) {
    DistTag t;
    t.kind = Kind::qary;
    t.q = q;
    return t;
}

DistTag DistTag::make_custom(std::string name) {
    DistTag t;
    t.kind = Kind::custom;
    t.custom = std::move(name);
    return t;
}

std::string DistTag::name() const {
    switch (kind) {
        case Kind::gaussian: return cov ? "gaussian(cov)" : "gaussian(I)";
        case Kind::hypercube01: return "hypercube01";
        case Kind::qary: return fmt::format("qary({})", q);
        case Kind::custom: return fmt::format("custom({})", custom);
    }
    return "?";
}

std::string to_string(NoiseModel m) {
    return m == NoiseModel::uniform ? "uniform" : "gaussian";
}

long round_count(double v) {
    return std::lround(v);
}

std::vector<int> Dataset::inlier_indices() const {
    std::vector<int> idx;
    if (!inlier_mask) return idx;
    for (int i = 0; i < n(); ++i)
        if ((*inlier_mask)[i]) idx.push_back(i);
    return idx;
}

void Dataset::validate() const {
    if (y.size() != X.rows()) throw ValidationError("dataset: y length does not match X rows");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("dataset: alpha must lie in (0, 1]");
    if (zeta < 0.0) throw ValidationError("dataset: zeta must be >= 0");
    if (ell_star) {
        if (ell_star->size() != X.cols()) throw ValidationError("dataset: ell_star dimension mismatch");
        if (ell_star->norm() > 1.0 + 1e-9) throw ValidationError("dataset: ||ell_star|| exceeds 1");
    }
    if (inlier_mask) {
        if (static_cast<long>(inlier_mask->size()) != X.rows())
            throw ValidationError("dataset: inlier_mask length mismatch");
        long cnt = std::count(inlier_mask->begin(), inlier_mask->end(), true);
        if (cnt != round_count(alpha * n()))
            throw ValidationError(fmt::format("dataset: inlier count {} != round(alpha n) = {}", cnt,
                                              round_count(alpha * n())));
        if (ell_star) {
            for (int i = 0; i < n(); ++i) {
                if (!(*inlier_mask)[i]) continue;
                double pred = X.row(i).dot(*ell_star);
                double r = std::abs(y(i) - pred);
                if (zeta == 0.0 && r > 1e-12 * std::max(1.0, std::abs(pred)))
                    throw ValidationError(fmt::format("dataset: noiseless inlier {} violates y = <x, ell*>", i));
                if (zeta > 0.0 && noise == NoiseModel::uniform && r > 4.0 * zeta + 1e-12)
                    throw ValidationError(fmt::format("dataset: inlier {} residual exceeds 4 zeta", i));
            }
        }
    }
    if (!component.empty() && static_cast<long>(component.size()) != X.rows())
        throw ValidationError("dataset: component length mismatch");
}

Eigen::MatrixXd sample_rows(const DistTag& dist, int n, int d, Rng& rng) {
    Eigen::MatrixXd X(n, d);
    switch (dist.kind) {
        case DistTag::Kind::gaussian: {
            Eigen::MatrixXd L;
            if (dist.cov) {
                if (dist.cov->rows() != d || dist.cov->cols() != d)
                    throw ValidationError("gaussian covariance has the wrong shape");
                Eigen::LLT<Eigen::MatrixXd> llt(*dist.cov);
                if (llt.info() != Eigen::Success) throw ValidationError("gaussian covariance is not positive definite");
                L = llt.matrixL();
            }
            Eigen::VectorXd z(d);
            for (int i = 0; i < n; ++i) {
                for (int k = 0; k < d; ++k) z(k) = rng.normal();
                X.row(i) = dist.cov ? Eigen::VectorXd(L * z) : z;
            }
            break;
        }
        case DistTag::Kind::hypercube01:
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < d; ++k) X(i, k) = static_cast<double>(rng.below(2));
            break;
        case DistTag::Kind::qary:
            if (dist.q < 2) throw ValidationError("qary distribution needs q >= 2");
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < d; ++k) X(i, k) = static_cast<double>(rng.below(dist.q));
            break;
        case DistTag::Kind::custom:
            if (dist.custom == "rademacher") {
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < d; ++k) X(i, k) = rng.below(2) ? 1.0 : -1.0;
            } else if (dist.custom == "basis") {
                X.setZero();
                for (int i = 0; i < n; ++i) X(i, static_cast<Eigen::Index>(rng.below(d))) = 1.0;
            } else {
                throw ValidationError(fmt::format("unknown distribution custom({})", dist.custom));
            }
            break;
    }
    return X;
}

namespace {

double draw_noise(double zeta, NoiseModel m, Rng& rng) {
    if (zeta == 0.0) return 0.0;
    return m == NoiseModel::uniform ? rng.uniform(-zeta, zeta) : zeta * rng.normal();
}

std::vector<int> permutation(int n, Rng& rng) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    return p;
}

}  // namespace

InlierSample gen_inliers(const DistTag& dist, int n_in, const Eigen::VectorXd& ell_star, double zeta,
                         std::uint64_t seed, NoiseModel noise) {
    if (n_in < 1) throw ValidationError("gen_inliers: n_in must be >= 1");
    if (!(zeta >= 0.0)) throw ValidationError("gen_inliers: zeta must be >= 0");
    if (ell_star.norm() > 1.0 + 1e-9) throw ValidationError("gen_inliers: ||ell_star|| exceeds 1");
    Rng root(seed);
    Rng xs = root.split("x"), ns = root.split("noise");
    InlierSample s;
    s.X = sample_rows(dist, n_in, static_cast<int>(ell_star.size()), xs);
    s.y = s.X * ell_star;
    for (int i = 0; i < n_in; ++i) s.y(i) += draw_noise(zeta, noise, ns);
    s.dist = dist;
    s.ell_star = ell_star;
    s.zeta = zeta;
    s.noise = noise;
    s.seed = seed;
    return s;
}

AdversaryStrategy AdversaryStrategy::random_uniform(double range) {
    AdversaryStrategy s;
    s.range = range;
    return s;
}

AdversaryStrategy AdversaryStrategy::second_plant(std::optional<Eigen::VectorXd> decoy, double fraction) {
    AdversaryStrategy s;
    s.kind = Kind::second_plant;
    s.decoy = std::move(decoy);
    s.fraction = fraction;
    return s;
}

AdversaryStrategy AdversaryStrategy::gv_ensemble() {
    AdversaryStrategy s;
    s.kind = Kind::gv_ensemble;
    return s;
}

AdversaryStrategy AdversaryStrategy::mixture_Ri(int q, int coord) {
    AdversaryStrategy s;
    s.kind = Kind::mixture_Ri;
    s.q = q;
    s.coord = coord;
    return s;
}

std::string AdversaryStrategy::name() const {
    switch (kind) {
        case Kind::random_uniform: return "random_uniform";
        case Kind::second_plant: return "second_plant";
        case Kind::gv_ensemble: return "gv_ensemble";
        case Kind::mixture_Ri: return "mixture_Ri";
    }
    return "?";
}

Dataset apply_adversary(const InlierSample& in, const AdversaryStrategy& st, int n_total, std::uint64_t seed) {
    const int n_in = static_cast<int>(in.X.rows());
    const int d = static_cast<int>(in.X.cols());
    if (n_total < n_in) throw ValidationError("apply_adversary: n_total is smaller than the inlier count");
    const int n_out = n_total - n_in;
    Rng root(seed);
    Rng xs = root.split("outliers/x"), ys = root.split("outliers/y"), sh = root.split("shuffle");

    Eigen::MatrixXd Xo(n_out, d);
    Eigen::VectorXd yo(n_out);
    switch (st.kind) {
        case AdversaryStrategy::Kind::random_uniform:
            Xo = sample_rows(in.dist, n_out, d, xs);
            for (int i = 0; i < n_out; ++i) yo(i) = ys.uniform(-st.range, st.range);
            break;
        case AdversaryStrategy::Kind::second_plant: {
            Eigen::VectorXd decoy = st.decoy ? *st.decoy : Eigen::VectorXd(-in.ell_star);
            if (decoy.size() != d) throw ValidationError("apply_adversary: decoy dimension mismatch");
            if (!(st.fraction >= 0.0 && st.fraction <= 1.0))
                throw ValidationError("apply_adversary: decoy fraction must lie in [0, 1]");
            int n_decoy = static_cast<int>(round_count(st.fraction * n_out));
            Xo = sample_rows(in.dist, n_out, d, xs);
            for (int i = 0; i < n_out; ++i) {
                if (i < n_decoy) yo(i) = Xo.row(i).dot(decoy) + draw_noise(in.zeta, in.noise, ys);
                else yo(i) = ys.uniform(-st.range, st.range);
            }
            break;
        }
        case AdversaryStrategy::Kind::gv_ensemble: {
            Xo.setZero();
            const double v = 1.0 / std::sqrt(static_cast<double>(d));
            for (int i = 0; i < n_out; ++i) {
                int pair = i % (2 * d);
                Xo(i, pair / 2) = 1.0;
                yo(i) = (pair % 2) ? -v : v;
            }
            break;
        }
        case AdversaryStrategy::Kind::mixture_Ri: {
            if (st.q < 2) throw ValidationError("mixture_Ri: q must be >= 2");
            if (st.coord < 1 || st.coord > d) throw ValidationError("mixture_Ri: coordinate out of range");
            Xo = sample_rows(DistTag::qary(st.q), n_out, d, xs);
            for (int i = 0; i < n_out; ++i) {
                // a != 0: the a = 0 draws are the inliers
                auto a = 1 + static_cast<long>(ys.below(st.q - 1));
                yo(i) = static_cast<double>((static_cast<long>(Xo(i, st.coord - 1)) + a) % st.q);
            }
            break;
        }
    }

    Dataset ds;
    ds.X.resize(n_total, d);
    ds.y.resize(n_total);
    std::vector<bool> mask(n_total, false);
    auto perm = permutation(n_total, sh);
    for (int k = 0; k < n_total; ++k) {
        int src = perm[k];
        if (src < n_in) {
            ds.X.row(k) = in.X.row(src);
            ds.y(k) = in.y(src);
            mask[k] = true;
        } else {
            ds.X.row(k) = Xo.row(src - n_in);
            ds.y(k) = yo(src - n_in);
        }
    }
    ds.alpha = static_cast<double>(n_in) / n_total;
    ds.ell_star = in.ell_star;
    ds.inlier_mask = std::move(mask);
    ds.zeta = in.zeta;
    ds.noise = in.noise;
    ds.seed = seed;
    ds.dist = in.dist;
    ds.generator = st.name();
    return ds;
}

Dataset gen_mixed_regression(const std::vector<MixtureComponent>& comps, const DistTag& dist, int n,
                             std::uint64_t seed, double zeta) {
    if (comps.empty()) throw ValidationError("gen_mixed_regression: empty component list");
    double total = 0.0, wmin = 1.0;
    for (const auto& c : comps) {
        if (!(c.weight > 0.0)) throw ValidationError("gen_mixed_regression: weights must be positive");
        if (c.ell.norm() > 1.0 + 1e-9) throw ValidationError("gen_mixed_regression: component norm exceeds 1");
        if (c.ell.size() != comps[0].ell.size()) throw ValidationError("gen_mixed_regression: dimension mismatch");
        total += c.weight;
        wmin = std::min(wmin, c.weight);
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("gen_mixed_regression: weights must sum to 1");
    const int d = static_cast<int>(comps[0].ell.size());
    Rng root(seed);
    Rng xs = root.split("x"), ns = root.split("noise"), cs = root.split("component");
    Dataset ds;
    ds.X = sample_rows(dist, n, d, xs);
    ds.y.resize(n);
    ds.component.resize(n);
    for (int i = 0; i < n; ++i) {
        int j = 0;
        if (comps.size() > 1) {
            double u = cs.uniform(), acc = 0.0;
            j = static_cast<int>(comps.size()) - 1;
            for (size_t k = 0; k < comps.size(); ++k) {
                acc += comps[k].weight;
                if (u < acc) {
                    j = static_cast<int>(k);
                    break;
                }
            }
        }
        ds.component[i] = j;
        ds.y(i) = ds.X.row(i).dot(comps[j].ell) + draw_noise(zeta, NoiseModel::uniform, ns);
    }
    ds.alpha = wmin;
    ds.zeta = zeta;
    ds.seed = seed;
    ds.dist = dist;
    ds.generator = "mixed_regression";
    return ds;
}

Dataset with_component_as_inliers(const Dataset& ds, int component, const Eigen::VectorXd& ell) {
    if (ds.component.empty()) throw ValidationError("with_component_as_inliers: dataset has no component labels");
    Dataset out = ds;
    std::vector<bool> mask(ds.n());
    int cnt = 0;
    for (int i = 0; i < ds.n(); ++i) {
        mask[i] = ds.component[i] == component;
        cnt += mask[i];
    }
    if (cnt == 0) throw ValidationError("with_component_as_inliers: component is empty");
    out.inlier_mask = std::move(mask);
    out.ell_star = ell;
    out.alpha = static_cast<double>(cnt) / ds.n();
    out.validate();
    return out;
}

Eigen::VectorXd random_unit_vector(int d, std::uint64_t seed) {
    if (d < 1) throw ValidationError("d must be >= 1");
    Rng r(seed);
    Eigen::VectorXd v(d);
    for (int k = 0; k < d; ++k) v(k) = r.normal();
    return v / v.norm();
}

Dataset gen_gv_instance(int d, std::uint64_t seed, int copies) {
    if (d < 2) throw ValidationError("gen_gv_instance: d must be >= 2");
    if (copies < 1) throw ValidationError("gen_gv_instance: copies must be >= 1");
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    auto in = gen_inliers(DistTag::make_custom("basis"), d, ell, 0.0, Rng(seed).split("gv/inliers").next_u64());
    Dataset ds = apply_adversary(in, AdversaryStrategy::gv_ensemble(), d + 2 * d * copies, seed);
    ds.ambiguous = true;
    ds.generator = "gv_instance";
    ds.seed = seed;
    return ds;
}

// ------------------------------------------------------------------ file format

json to_json(const DistTag& t) {
    json j;
    switch (t.kind) {
        case DistTag::Kind::gaussian:
            j["kind"] = "gaussian";
            if (t.cov) {
                json rows = json::array();
                for (Eigen::Index i = 0; i < t.cov->rows(); ++i) {
                    std::vector<double> r(t.cov->cols());
                    for (Eigen::Index k = 0; k < t.cov->cols(); ++k) r[k] = (*t.cov)(i, k);
                    rows.push_back(r);
                }
                j["cov"] = rows;
            }
            break;
        case DistTag::Kind::hypercube01: j["kind"] = "hypercube01"; break;
        case DistTag::Kind::qary:
            j["kind"] = "qary";
            j["q"] = t.q;
            break;
        case DistTag::Kind::custom:
            j["kind"] = "custom";
            j["name"] = t.custom;
            break;
    }
    return j;
}

DistTag dist_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ParseError("dist_tag: missing kind", "dist_tag.kind");
    auto k = j.at("kind").get<std::string>();
    if (k == "gaussian") {
        if (!j.contains("cov")) return DistTag::gaussian();
        auto rows = j.at("cov").get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd C(rows.size(), rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.size()) throw ParseError("dist_tag: cov must be square", "dist_tag.cov");
            for (size_t c = 0; c < rows.size(); ++c) C(i, c) = rows[i][c];
        }
        return DistTag::gaussian(C);
    }
    if (k == "hypercube01") return DistTag::hypercube01();
    if (k == "qary") {
        if (!j.contains("q")) throw ParseError("dist_tag: qary needs q", "dist_tag.q");
        return DistTag::qary(j.at("q").get<int>());
    }
    if (k == "custom") return DistTag::make_custom(j.value("name", std::string{}));
    throw ParseError(fmt::format("dist_tag: unknown kind '{}'", k), "dist_tag.kind");
}

std::string serialize_dataset(const Dataset& ds) {
    json h;
    h["format"] = "ldreg.dataset";
    h["version"] = 1;
    h["n"] = ds.n();
    h["d"] = ds.d();
    h["alpha"] = ds.alpha;
    h["zeta"] = ds.zeta;
    h["seed"] = ds.seed;
    h["dist_tag"] = to_json(ds.dist);
    h["noise"] = to_string(ds.noise);
    h["prng"] = Rng::algorithm;
    h["generator"] = ds.generator;
    h["ambiguous"] = ds.ambiguous;
    if (ds.ell_star) h["ell_star"] = std::vector<double>(ds.ell_star->data(), ds.ell_star->data() + ds.ell_star->size());
    if (ds.inlier_mask) {
        std::vector<int> m(ds.inlier_mask->begin(), ds.inlier_mask->end());
        h["inlier_mask"] = m;
    }
    if (!ds.component.empty()) h["component"] = ds.component;
    std::string head = h.dump(2);
    head.pop_back();  // closing brace
    while (!head.empty() && (head.back() == '\n' || head.back() == ' ')) head.pop_back();
    std::string out = head + ",\n  \"rows\": [";
    for (int i = 0; i < ds.n(); ++i) {
        out += i ? ",\n    [" : "\n    [";
        for (int k = 0; k < ds.d(); ++k) out += fmt::format("{:.17g}, ", ds.X(i, k));
        out += fmt::format("{:.17g}]", ds.y(i));
    }
    out += "\n  ]\n}\n";
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f << serialize_dataset(ds);
    if (!f) throw Error(fmt::format("write failed for {}", path.string()));
}

namespace {

long line_of_offset(const std::string& text, size_t off) {
    off = std::min(off, text.size());
    return 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(off), '\n'));
}

template <class T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) throw ParseError(fmt::format("dataset: missing required field '{}'", name), name);
    try {
        return j.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("dataset: field '{}' has the wrong type: {}", name, e.what()), name);
    }
}

}  // namespace

Dataset parse_dataset(const std::string& text, std::vector<std::string>* warnings) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        long line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(fmt::format("dataset: syntax error at line {}: {}", line, e.what()), "", line);
    }
    if (!j.is_object()) throw ParseError("dataset: top level must be an object", "");
    static const std::set<std::string> known = {"format", "version", "n",           "d",         "alpha",
                                                "zeta",   "seed",    "dist_tag",    "noise",     "prng",
                                                "generator", "ambiguous", "ell_star", "inlier_mask", "component",
                                                "rows"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            std::string msg = fmt::format("dataset: ignoring unknown field '{}'", it.key());
            if (warnings) warnings->push_back(msg);
            else std::cerr << "warning: " << msg << "\n";
        }
    }
    Dataset ds;
    const int n = field<int>(j, "n");
    const int d = field<int>(j, "d");
    ds.alpha = field<double>(j, "alpha");
    ds.zeta = field<double>(j, "zeta");
    ds.seed = field<std::uint64_t>(j, "seed");
    if (!j.contains("dist_tag")) throw ParseError("dataset: missing required field 'dist_tag'", "dist_tag");
    ds.dist = dist_from_json(j.at("dist_tag"));
    if (j.contains("noise")) {
        auto nm = field<std::string>(j, "noise");
        if (nm == "uniform") ds.noise = NoiseModel::uniform;
        else if (nm == "gaussian") ds.noise = NoiseModel::gaussian;
        else throw ParseError(fmt::format("dataset: unknown noise model '{}'", nm), "noise");
    }
    if (j.contains("generator")) ds.generator = field<std::string>(j, "generator");
    if (j.contains("ambiguous")) ds.ambiguous = field<bool>(j, "ambiguous");
    if (j.contains("ell_star")) {
        auto v = field<std::vector<double>>(j, "ell_star");
        if (static_cast<int>(v.size()) != d) throw ParseError("dataset: ell_star length != d", "ell_star");
        ds.ell_star = Eigen::Map<Eigen::VectorXd>(v.data(), d);
    }
    if (j.contains("inlier_mask")) {
        auto v = field<std::vector<int>>(j, "inlier_mask");
        if (static_cast<int>(v.size()) != n) throw ParseError("dataset: inlier_mask length != n", "inlier_mask");
        std::vector<bool> m(n);
        for (int i = 0; i < n; ++i) {
            if (v[i] != 0 && v[i] != 1) throw ParseError("dataset: inlier_mask entries must be 0 or 1", "inlier_mask");
            m[i] = v[i] == 1;
        }
        ds.inlier_mask = std::move(m);
    }
    if (j.contains("component")) ds.component = field<std::vector<int>>(j, "component");
    if (!j.contains("rows")) throw ParseError("dataset: missing required field 'rows'", "rows");
    const auto& rows = j.at("rows");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n)
        throw ParseError(fmt::format("dataset: rows must be an array of n = {} rows", n), "rows");
    ds.X.resize(n, d);
    ds.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[i];
        if (!r.is_array() || static_cast<int>(r.size()) != d + 1)
            throw ParseError(fmt::format("dataset: rows[{}] must hold d + 1 = {} numbers", i, d + 1),
                             fmt::format("rows[{}]", i));
        for (int k = 0; k <= d; ++k) {
            if (!r[k].is_number())
                throw ParseError(fmt::format("dataset: rows[{}][{}] is not a number", i, k),
                                 fmt::format("rows[{}][{}]", i, k));
            double v = r[k].get<double>();
            if (k < d) ds.X(i, k) = v; else ds.y(i) = v;
        }
    }
    try {
        ds.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), "");
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) throw Error(fmt::format("cannot read {}", path.string()));
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_dataset(ss.str(), warnings);
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    for (int k = 0; k < ds.d(); ++k) f << "x" << (k + 1) << ",";
    f << "y\n";
    for (int i = 0; i < ds.n(); ++i) {
        for (int k = 0; k < ds.d(); ++k) f << fmt::format("{:.17g},", ds.X(i, k));
        f << fmt::format("{:.17g}\n", ds.y(i));
    }
}

}  // namespace ldreg
