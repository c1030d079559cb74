#include "cpq/structures.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

namespace cpq {

using nlohmann::json;

// ---------------------------------------------------------------- JSON spec

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("expected an object", where.empty() ? "/" : where);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("unknown key \"" + it.key() + "\"", where + "/" + it.key());
    }
}

std::string expr_string(const json& j, const std::string& where) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
        return buf;
    }
    throw ConfigError("expected an expression string", where);
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError("expected an array", where);
    std::vector<std::string> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(expr_string(j[k], where + "/" + std::to_string(k)));
    return out;
}

std::vector<std::vector<std::string>> string_matrix(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError("expected an array of arrays", where);
    std::vector<std::vector<std::string>> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(string_list(j[k], where + "/" + std::to_string(k)));
    return out;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError("expected a number", where);
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError("expected an integer", where);
    return j.get<int>();
}

json matrix_json(const std::vector<std::vector<std::string>>& m) {
    json a = json::array();
    for (const auto& row : m) a.push_back(row);
    return a;
}

}  // namespace

StructureSpec spec_from_json(const json& j, const std::string& where) {
    check_keys(j, where, {"name", "kind", "r", "sigmas", "epsilons", "blocks", "box", "coordinates", "metric", "A", "eigenvalues",
                          "multiplicities"});
    StructureSpec s;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("expected a string", where + "/name");
        s.name = j["name"].get<std::string>();
    }
    if (j.contains("kind")) {
        const std::string k = j["kind"].is_string() ? j["kind"].get<std::string>() : "";
        if (k == "c-projective") s.geometry = Geometry::CProjective;
        else if (k == "projective") s.geometry = Geometry::Projective;
        else throw ConfigError("kind must be \"c-projective\" or \"projective\"", where + "/kind");
    }
    if (j.contains("r")) s.r = integer(j["r"], where + "/r");
    if (j.contains("sigmas")) s.sigmas = string_list(j["sigmas"], where + "/sigmas");
    if (j.contains("epsilons")) {
        const json& e = j["epsilons"];
        if (!e.is_array()) throw ConfigError("expected an array", where + "/epsilons");
        for (std::size_t k = 0; k < e.size(); ++k) s.epsilons.push_back(integer(e[k], where + "/epsilons/" + std::to_string(k)));
    }
    if (j.contains("blocks")) {
        const json& bl = j["blocks"];
        if (!bl.is_array()) throw ConfigError("expected an array", where + "/blocks");
        for (std::size_t k = 0; k < bl.size(); ++k) {
            const std::string w = where + "/blocks/" + std::to_string(k);
            check_keys(bl[k], w, {"c", "m", "metric", "omega", "alphas"});
            BlockSpec b;
            if (!bl[k].contains("c")) throw ConfigError("missing key \"c\"", w);
            b.c = number(bl[k]["c"], w + "/c");
            if (bl[k].contains("m")) b.m = integer(bl[k]["m"], w + "/m");
            if (bl[k].contains("metric")) b.metric = string_matrix(bl[k]["metric"], w + "/metric");
            if (bl[k].contains("omega")) b.omega = string_matrix(bl[k]["omega"], w + "/omega");
            if (bl[k].contains("alphas")) b.alphas = string_matrix(bl[k]["alphas"], w + "/alphas");
            s.blocks.push_back(std::move(b));
        }
    }
    if (j.contains("box")) {
        const json& b = j["box"];
        if (!b.is_object()) throw ConfigError("expected an object", where + "/box");
        for (auto it = b.begin(); it != b.end(); ++it) {
            const std::string w = where + "/box/" + it.key();
            if (!it.value().is_array() || it.value().size() != 2) throw ConfigError("expected [lo, hi]", w);
            s.box[it.key()] = {number(it.value()[0], w + "/0"), number(it.value()[1], w + "/1")};
        }
    }
    if (j.contains("coordinates")) s.coordinates = string_list(j["coordinates"], where + "/coordinates");
    if (j.contains("metric")) s.metric = string_matrix(j["metric"], where + "/metric");
    if (j.contains("A")) s.endomorphism = string_matrix(j["A"], where + "/A");
    if (j.contains("eigenvalues")) s.eigenvalues = string_list(j["eigenvalues"], where + "/eigenvalues");
    if (j.contains("multiplicities")) {
        const json& e = j["multiplicities"];
        if (!e.is_array()) throw ConfigError("expected an array", where + "/multiplicities");
        for (std::size_t k = 0; k < e.size(); ++k)
            s.multiplicities.push_back(integer(e[k], where + "/multiplicities/" + std::to_string(k)));
    }
    return s;
}

json spec_to_json(const StructureSpec& s) {
    json j;
    if (!s.name.empty()) j["name"] = s.name;
    j["kind"] = s.geometry == Geometry::CProjective ? "c-projective" : "projective";
    if (s.geometry == Geometry::CProjective) {
        j["r"] = s.r;
        j["sigmas"] = s.sigmas;
        j["epsilons"] = s.epsilons;
        json bl = json::array();
        for (const auto& b : s.blocks) {
            json o{{"c", b.c}, {"m", b.m}, {"metric", matrix_json(b.metric)}, {"alphas", matrix_json(b.alphas)}};
            if (!b.omega.empty()) o["omega"] = matrix_json(b.omega);
            bl.push_back(o);
        }
        j["blocks"] = bl;
    } else {
        j["coordinates"] = s.coordinates;
        j["metric"] = matrix_json(s.metric);
        j["A"] = matrix_json(s.endomorphism);
        j["eigenvalues"] = s.eigenvalues;
        j["multiplicities"] = s.multiplicities;
    }
    json box = json::object();
    for (const auto& [k, v] : s.box) box[k] = {v[0], v[1]};
    j["box"] = box;
    return j;
}

// ---------------------------------------------------------------- builtins

std::vector<std::string> builtin_names() { return {"flat_trivial", "dim4_two_eigen", "dim6_one_block", "liouville2d", "sphere2"}; }

StructureSpec builtin_spec(std::string_view name) {
    StructureSpec s;
    s.name = std::string(name);
    const std::vector<std::vector<std::string>> flat2{{"1", "0"}, {"0", "1"}};
    if (name == "flat_trivial") {
        s.r = 0;
        s.blocks.push_back({1.0, 2, flat2, {}, {}});
        s.blocks.push_back({3.0, 2, flat2, {}, {}});
        for (const char* y : {"y1", "y2", "y3", "y4"}) s.box[y] = {-1.0, 1.0};
    } else if (name == "dim4_two_eigen" || name == "dim6_one_block") {
        s.r = 2;
        s.sigmas = {"x1", "x2"};
        s.epsilons = {1, -1};
        s.box["x1"] = {2.0, 3.0};
        s.box["x2"] = {0.0, 1.0};
        s.box["t1"] = {0.0, 1.0};
        s.box["t2"] = {0.0, 1.0};
        if (name == "dim6_one_block") {
            s.blocks.push_back({5.0, 2, flat2, {}, {{"0", "-5*y1"}, {"0", "y1"}}});
            s.box["y1"] = {-1.0, 1.0};
            s.box["y2"] = {-1.0, 1.0};
        }
    } else if (name == "liouville2d") {
        s.geometry = Geometry::Projective;
        s.coordinates = {"x", "y"};
        s.metric = {{"x - y", "0"}, {"0", "x - y"}};
        s.endomorphism = {{"x", "0"}, {"0", "y"}};
        s.eigenvalues = {"x", "y"};
        s.multiplicities = {1, 1};
        s.box["x"] = {2.0, 3.0};
        s.box["y"] = {0.0, 1.0};
    } else if (name == "sphere2") {
        s.geometry = Geometry::Projective;
        s.coordinates = {"theta", "phi"};
        s.metric = {{"1", "0"}, {"0", "sin(theta)^2"}};
        s.endomorphism = flat2;
        s.eigenvalues = {"1"};
        s.multiplicities = {2};
        s.box["theta"] = {0.5, 2.5};
        s.box["phi"] = {0.0, 6.0};
    } else {
        throw ConfigError("unknown builtin \"" + std::string(name) + "\"", "/builtin");
    }
    return s;
}

Perturbation parse_perturbation(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError("perturbation must look like TARGET:EPS", "/perturb");
    Perturbation p;
    const std::string_view target = text.substr(0, colon);
    if (target == "A") p.target = Perturbation::Target::A;
    else if (target == "J") p.target = Perturbation::Target::J;
    else throw ConfigError("perturbation target must be A or J", "/perturb");
    try {
        std::size_t used = 0;
        const std::string v(text.substr(colon + 1));
        p.eps = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
        throw ConfigError("bad perturbation magnitude", "/perturb");
    }
    return p;
}

// ---------------------------------------------------------------- Structure

namespace {

std::vector<Expr> parse_row(const std::vector<std::string>& row, const std::vector<std::string>& vars) {
    std::vector<Expr> out;
    for (const auto& s : row) out.push_back(parse(s, vars));
    return out;
}

std::vector<std::vector<Expr>> parse_matrix(const std::vector<std::vector<std::string>>& m, const std::vector<std::string>& vars) {
    std::vector<std::vector<Expr>> out;
    for (const auto& row : m) out.push_back(parse_row(row, vars));
    return out;
}

void require_vars(const Expr& e, const std::set<std::string>& allowed, const std::string& what) {
    for (const auto& v : free_vars(e))
        if (!allowed.count(v)) throw ConfigError(what + " may not depend on " + v);
}

/// Elementary symmetric polynomials e_0..e_n of the given jets.
std::vector<Jet> elementary_symmetric(const std::vector<Jet>& v, const JetContext& ctx) {
    std::vector<Jet> e(v.size() + 1, Jet(ctx));
    e[0] = Jet(ctx, 1.0);
    for (std::size_t k = 0; k < v.size(); ++k)
        for (std::size_t j = k + 1; j >= 1; --j) e[j] += v[k] * e[j - 1];
    return e;
}

}  // namespace

Structure::Structure(StructureSpec spec, Perturbation p) : spec_(std::move(spec)), perturb_(p) { validate(); }

void Structure::validate() {
    if (spec_.geometry == Geometry::CProjective) {
        const int r = spec_.r;
        if (r < 0) throw ConfigError("r must be non-negative", "/r");
        if (static_cast<int>(spec_.sigmas.size()) != r) throw ConfigError("need one sigma per non-constant eigenvalue", "/sigmas");
        if (spec_.epsilons.empty()) {
            for (int k = 0; k < r; ++k) spec_.epsilons.push_back(k % 2 == 0 ? 1 : -1);
        }
        if (static_cast<int>(spec_.epsilons.size()) != r) throw ConfigError("need one epsilon per non-constant eigenvalue", "/epsilons");
        for (int e : spec_.epsilons)
            if (e != 1 && e != -1) throw ConfigError("epsilons must be +1 or -1", "/epsilons");
        for (int k = 0; k < r; ++k) coords_.push_back("x" + std::to_string(k + 1));
        for (int k = 0; k < r; ++k) coords_.push_back("t" + std::to_string(k + 1));
        int y = 0;
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
            const BlockSpec& bl = spec_.blocks[b];
            const std::string w = "/blocks/" + std::to_string(b);
            if (bl.m < 2 || bl.m % 2 != 0) throw ConfigError("block multiplicity must be even and positive", w + "/m");
            block_offset_.push_back(static_cast<int>(coords_.size()));
            for (int q = 0; q < bl.m; ++q) coords_.push_back("y" + std::to_string(++y));
        }
        if (coords_.empty()) throw ConfigError("structure has dimension zero");
        for (int k = 0; k < r; ++k) {
            sigma_.push_back(parse(spec_.sigmas[static_cast<std::size_t>(k)], coords_));
            require_vars(sigma_.back(), {coords_[static_cast<std::size_t>(k)]}, "sigma" + std::to_string(k + 1));
        }
        std::set<double> consts;
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
            const BlockSpec& bl = spec_.blocks[b];
            const std::string w = "/blocks/" + std::to_string(b);
            if (!consts.insert(bl.c).second) throw ConfigError("block eigenvalues must be distinct", w + "/c");
            std::set<std::string> own, ys;
            for (int q = 0; q < bl.m; ++q) own.insert(coords_[static_cast<std::size_t>(block_offset_[b] + q)]);
            for (std::size_t v = static_cast<std::size_t>(2 * r); v < coords_.size(); ++v) ys.insert(coords_[v]);
            auto square = [&](const std::vector<std::vector<std::string>>& m, const std::string& key) {
                if (static_cast<int>(m.size()) != bl.m) throw ConfigError("expected an m x m matrix", w + "/" + key);
                for (const auto& row : m)
                    if (static_cast<int>(row.size()) != bl.m) throw ConfigError("expected an m x m matrix", w + "/" + key);
            };
            square(bl.metric, "metric");
            block_metric_.push_back(parse_matrix(bl.metric, coords_));
            for (const auto& row : block_metric_.back())
                for (const auto& e : row) require_vars(e, own, "block metric");
            if (bl.omega.empty()) {
                if (bl.m != 2) throw ConfigError("blocks with m >= 4 need an explicit omega", w + "/omega");
                block_omega_.emplace_back();
            } else {
                square(bl.omega, "omega");
                block_omega_.push_back(parse_matrix(bl.omega, coords_));
                for (const auto& row : block_omega_.back())
                    for (const auto& e : row) require_vars(e, own, "block omega");
            }
            std::vector<std::vector<std::string>> alphas = bl.alphas;
            if (alphas.empty()) alphas.assign(static_cast<std::size_t>(r), std::vector<std::string>(static_cast<std::size_t>(bl.m), "0"));
            if (static_cast<int>(alphas.size()) != r) throw ConfigError("need one alpha row per non-constant eigenvalue", w + "/alphas");
            for (const auto& row : alphas)
                if (static_cast<int>(row.size()) != bl.m) throw ConfigError("alpha rows need m components", w + "/alphas");
            block_alpha_.push_back(parse_matrix(alphas, coords_));
            for (const auto& row : block_alpha_.back())
                for (const auto& e : row) require_vars(e, ys, "alpha");
        }
        for (std::size_t v = 0; v < coords_.size(); ++v) {
            const std::string& n = coords_[v];
            auto it = spec_.box.find(n);
            if (it == spec_.box.end()) {
                if (n[0] == 'x') throw ConfigError("missing box range for " + n, "/box");
                spec_.box[n] = n[0] == 't' ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{-1.0, 1.0};
            }
        }
    } else {
        coords_ = spec_.coordinates;
        const int d = static_cast<int>(coords_.size());
        if (d < 1) throw ConfigError("projective structure needs coordinates", "/coordinates");
        auto square = [&](const std::vector<std::vector<std::string>>& m, const std::string& key) {
            if (static_cast<int>(m.size()) != d) throw ConfigError("expected a dim x dim matrix", "/" + key);
            for (const auto& row : m)
                if (static_cast<int>(row.size()) != d) throw ConfigError("expected a dim x dim matrix", "/" + key);
        };
        square(spec_.metric, "metric");
        square(spec_.endomorphism, "A");
        metric_ = parse_matrix(spec_.metric, coords_);
        endo_ = parse_matrix(spec_.endomorphism, coords_);
        if (spec_.eigenvalues.size() != spec_.multiplicities.size() || spec_.eigenvalues.empty())
            throw ConfigError("eigenvalues and multiplicities must be non-empty and of equal length", "/eigenvalues");
        int total = 0;
        for (int m : spec_.multiplicities) total += m;
        if (total != d) throw ConfigError("multiplicities must add up to the dimension", "/multiplicities");
        eig_ = parse_row(spec_.eigenvalues, coords_);
        for (const auto& n : coords_)
            if (!spec_.box.count(n)) throw ConfigError("missing box range for " + n, "/box");
    }
    for (const auto& [k, v] : spec_.box) {
        if (std::find(coords_.begin(), coords_.end(), k) == coords_.end()) throw ConfigError("box names unknown coordinate", "/box/" + k);
        if (!(v[0] <= v[1])) throw ConfigError("box range must satisfy lo <= hi", "/box/" + k);
    }
    for (const auto& n : coords_) ranges_.push_back(spec_.box.at(n));

    if (spec_.geometry == Geometry::CProjective) {
        // Eigenvalue ranges on the box: non-vanishing differential, pairwise disjoint, away from the constants.
        const int r = spec_.r;
        std::vector<std::array<double, 2>> span(static_cast<std::size_t>(r));
        const JetContext& c1 = JetContext::get(1, 1);
        for (int k = 0; k < r; ++k) {
            const auto& rg = ranges_[static_cast<std::size_t>(k)];
            double lo = INFINITY, hi = -INFINITY;
            const int n = 256;
            for (int s = 0; s <= n; ++s) {
                const double x = rg[0] + (rg[1] - rg[0]) * s / n;
                JetEnv env{{coords_[static_cast<std::size_t>(k)], lift_var(0, x, c1)}};
                const Jet v = eval_jet(sigma_[static_cast<std::size_t>(k)], env);
                if (!(std::abs(v[1]) > 1e-12)) throw DegeneratePointError("d sigma" + std::to_string(k + 1) + " vanishes on the box");
                lo = std::min(lo, v.value());
                hi = std::max(hi, v.value());
            }
            span[static_cast<std::size_t>(k)] = {lo, hi};
        }
        for (int a = 0; a < r; ++a) {
            const auto& sa = span[static_cast<std::size_t>(a)];
            for (int b = a + 1; b < r; ++b) {
                const auto& sb = span[static_cast<std::size_t>(b)];
                if (!(sa[1] < sb[0] || sb[1] < sa[0])) throw DegeneratePointError("eigenvalue ranges overlap on the box");
            }
            for (const auto& bl : spec_.blocks)
                if (bl.c >= sa[0] && bl.c <= sa[1]) throw DegeneratePointError("a non-constant eigenvalue reaches a block constant");
        }
        if (!spec_.blocks.empty()) {
            std::vector<double> mid;
            for (const auto& rg : ranges_) mid.push_back(0.5 * (rg[0] + rg[1]));
            std::vector<std::vector<double>> probes{mid};
            for (int corner = 0; corner < 4; ++corner) {
                std::vector<double> p = mid;
                for (std::size_t v = static_cast<std::size_t>(2 * r); v < p.size(); ++v) {
                    const auto& rg = ranges_[v];
                    p[v] = ((corner >> (v % 2)) & 1) ? rg[1] : rg[0];
                }
                probes.push_back(p);
            }
            for (const auto& p : probes)
                if (alpha_closure_residual(p) > 1e-10) throw ConfigError("alphas do not satisfy the closure condition", "/blocks");
        }
    }
}

int Structure::coordinate_index(std::string_view name) const {
    for (std::size_t k = 0; k < coords_.size(); ++k)
        if (coords_[k] == name) return static_cast<int>(k);
    throw ConfigError("unknown coordinate " + std::string(name));
}

JetEnv Structure::environment(std::span<const double> x, const JetContext& ctx) const {
    if (static_cast<int>(x.size()) != dim()) throw ContextError("point dimension does not match the structure");
    JetEnv env;
    for (int v = 0; v < dim(); ++v) env.emplace(coords_[static_cast<std::size_t>(v)], lift_var(v, x[static_cast<std::size_t>(v)], ctx));
    return env;
}

std::vector<double> Structure::sample(Rng& rng) const {
    std::vector<double> p;
    for (const auto& rg : ranges_) p.push_back(rng.uniform(rg[0], rg[1]));
    return p;
}

Tensor Structure::block_metric(std::size_t b, const JetEnv& env, const JetContext& ctx) const {
    const int m = spec_.blocks.at(b).m;
    Tensor g(m, 0, 2, ctx);
    for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) g(a, c) = eval_jet(block_metric_[b][static_cast<std::size_t>(a)][static_cast<std::size_t>(c)], env);
    return g;
}

Tensor Structure::block_omega(std::size_t b, const JetEnv& env, const JetContext& ctx) const {
    const int m = spec_.blocks.at(b).m;
    Tensor w(m, 0, 2, ctx);
    if (block_omega_[b].empty()) {
        const Tensor g = block_metric(b, env, ctx);
        const Jet d = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
        const Jet vol = d.value() > 0 ? sqrt(d) : sqrt(-d);
        w(0, 1) = vol;
        w(1, 0) = -vol;
        return w;
    }
    for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) w(a, c) = eval_jet(block_omega_[b][static_cast<std::size_t>(a)][static_cast<std::size_t>(c)], env);
    return w;
}

Jet Structure::alpha(std::size_t b, int i, int q, const JetEnv& env) const {
    return eval_jet(block_alpha_.at(b).at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(q)), env);
}

double Structure::alpha_closure_residual(std::span<const double> x) const {
    if (spec_.geometry != Geometry::CProjective) return 0.0;
    const int r = spec_.r;
    const JetContext& ctx = JetContext::get(dim(), 1);
    const JetEnv env = environment(x, ctx);
    const int y0 = 2 * r;
    const int M = dim() - y0;
    double worst = 0.0;
    for (int i = 1; i <= r; ++i) {
        // Full alpha_i on all y coordinates.
        std::vector<Jet> a(static_cast<std::size_t>(M), Jet(ctx));
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b)
            for (int q = 0; q < spec_.blocks[b].m; ++q)
                a[static_cast<std::size_t>(block_offset_[b] - y0 + q)] = alpha(b, i - 1, q, env);
        std::vector<double> target(static_cast<std::size_t>(M * M), 0.0);
        for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
            const Tensor w = block_omega(b, env, ctx);
            const double f = (i % 2 == 0 ? 1.0 : -1.0) * std::pow(spec_.blocks[b].c, r - i);
            const int m = spec_.blocks[b].m, o = block_offset_[b] - y0;
            for (int p = 0; p < m; ++p)
                for (int q = 0; q < m; ++q) target[static_cast<std::size_t>((o + p) * M + o + q)] = f * w(p, q).value();
        }
        for (int p = 0; p < M; ++p)
            for (int q = 0; q < M; ++q) {
                const double da = derivative(a[static_cast<std::size_t>(q)], y0 + p).value() - derivative(a[static_cast<std::size_t>(p)], y0 + q).value();
                worst = std::max(worst, std::abs(da - target[static_cast<std::size_t>(p * M + q)]));
            }
    }
    return worst;
}

void Structure::build_projective_point(StructureEval& se, const JetEnv& env, const JetContext& ctx) const {
    const int d = dim();
    Tensor g(d, 0, 2, ctx), A(d, 1, 1, ctx);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            g(i, j) = eval_jet(metric_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], env);
            A(i, j) = eval_jet(endo_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], env);
        }
    se.metric = make_metric(g);
    se.A = A;
    for (std::size_t k = 0; k < eig_.size(); ++k) {
        se.eigenvalues.push_back(eval_jet(eig_[k], env));
        se.multiplicities.push_back(spec_.multiplicities[k]);
        se.constant.push_back(free_vars(eig_[k]).empty() ? 1 : 0);
    }
}

NormalFrame Structure::frame_at(std::span<const double> x, const JetEnv& env, const JetContext& ctx) const {
    const int r = spec_.r;
    const int D = dim();
    const int N = ctx.order();
    std::vector<Jet> rho, rp;
    const JetContext& c1 = JetContext::get(1, N + 1);
    for (int k = 0; k < r; ++k) {
        const std::string& name = coords_[static_cast<std::size_t>(k)];
        JetEnv e1{{name, lift_var(0, x[static_cast<std::size_t>(k)], c1)}};
        const Jet s = eval_jet(sigma_[static_cast<std::size_t>(k)], e1);
        std::vector<double> a(static_cast<std::size_t>(N) + 1), b(static_cast<std::size_t>(N) + 1);
        for (int j = 0; j <= N; ++j) {
            a[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(j)] = (j + 1) * s[static_cast<std::size_t>(j) + 1];
        }
        const Jet& X = env.at(name);
        rho.push_back(compose<double, double>(a, X));
        rp.push_back(compose<double, double>(b, X));
    }
    const std::vector<Jet> mu = elementary_symmetric(rho, ctx);
    std::vector<std::vector<Jet>> mu_hat;
    std::vector<Jet> delta;
    for (int s = 0; s < r; ++s) {
        std::vector<Jet> others;
        Jet dl(ctx, 1.0);
        for (int l = 0; l < r; ++l)
            if (l != s) {
                others.push_back(rho[static_cast<std::size_t>(l)]);
                dl = dl * (rho[static_cast<std::size_t>(s)] - rho[static_cast<std::size_t>(l)]);
            }
        mu_hat.push_back(elementary_symmetric(others, ctx));
        delta.push_back(dl);
    }
    auto eps = [&](int k) { return static_cast<double>(spec_.epsilons[static_cast<std::size_t>(k)]); };

    Tensor G(D, 0, 2, ctx), Af(D, 1, 1, ctx), Jf(D, 1, 1, ctx);
    Tensor T = identity_matrix(D, ctx), Tinv = identity_matrix(D, ctx);
    for (int k = 0; k < r; ++k) {
        G(k, k) = delta[static_cast<std::size_t>(k)] * eps(k);
        Af(k, k) = rho[static_cast<std::size_t>(k)];
    }
    std::vector<Jet> w(static_cast<std::size_t>(r), Jet(ctx));
    for (int s = 0; s < r; ++s) w[static_cast<std::size_t>(s)] = rp[static_cast<std::size_t>(s)] * rp[static_cast<std::size_t>(s)] / (delta[static_cast<std::size_t>(s)] * eps(s));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            Jet sum(ctx);
            for (int s = 0; s < r; ++s)
                sum += mu_hat[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] * mu_hat[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(s)];
            G(r + i, r + j) = sum;
        }
    // A on the t block: A(e_{t_i}) = mu_{i+1} d_{t_1} - d_{t_{i+2}} (0-based i)
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            Jet v(ctx);
            if (j == 0) v += mu[static_cast<std::size_t>(i) + 1];
            if (i == j - 1) v += -1.0;
            Af(r + j, r + i) = v;
        }
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            Jf(i, r + j) = -(rp[static_cast<std::size_t>(i)] * mu_hat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) / (delta[static_cast<std::size_t>(i)] * eps(i));
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            Jf(r + i, j) = powi(rho[static_cast<std::size_t>(j)], r - 1 - i) / rp[static_cast<std::size_t>(j)] * ((i % 2 == 0 ? 1.0 : -1.0) * eps(j));
    for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
        const BlockSpec& bl = spec_.blocks[b];
        const int o = block_offset_[b];
        Jet P(ctx, 1.0);
        for (int k = 0; k < r; ++k) P = P * (bl.c - rho[static_cast<std::size_t>(k)]);
        const Tensor gb = block_metric(b, env, ctx);
        const Tensor gbinv = invert_matrix_jets(gb, 2, 0);
        const Tensor wb = block_omega(b, env, ctx);
        for (int a = 0; a < bl.m; ++a) {
            Af(o + a, o + a) = Jet(ctx, bl.c);
            for (int c = 0; c < bl.m; ++c) {
                G(o + a, o + c) = P * gb(a, c);
                Jet jv(ctx);
                for (int e = 0; e < bl.m; ++e) jv += gbinv(a, e) * wb(c, e);
                Jf(o + a, o + c) = jv;
            }
        }
        for (int i = 0; i < r; ++i)
            for (int q = 0; q < bl.m; ++q) {
                const Jet al = alpha(b, i, q, env);
                T(r + i, o + q) = al;
                Tinv(r + i, o + q) = -al;
            }
    }
    NormalFrame f;
    f.T = std::move(T);
    f.Tinv = std::move(Tinv);
    f.G = std::move(G);
    f.A = std::move(Af);
    f.J = std::move(Jf);
    f.rho = std::move(rho);
    f.rho_prime = std::move(rp);
    f.epsilons.assign(spec_.epsilons.begin(), spec_.epsilons.end());
    return f;
}

NormalFrame Structure::normal_frame(std::span<const double> x, int order) const {
    if (spec_.geometry != Geometry::CProjective) throw ContextError("normal frame exists only for c-projective structures");
    const JetContext& ctx = JetContext::get(dim(), order);
    return frame_at(x, environment(x, ctx), ctx);
}

void Structure::build_normal_form_point(StructureEval& se, const JetEnv& env, const JetContext& ctx) const {
    const int r = spec_.r;
    NormalFrame f = frame_at(se.point, env, ctx);
    const Tensor& T = f.T;
    const Tensor& Tinv = f.Tinv;
    const Tensor& G = f.G;
    const Tensor& Af = f.A;
    const Tensor& Jf = f.J;
    const std::vector<Jet>& rho = f.rho;
    const std::vector<Jet>& rp = f.rho_prime;
    const Tensor g = matmul(matmul(transpose(T), G, 0, 2), T, 0, 2);
    se.metric = make_metric(g);
    se.A = matmul(matmul(Tinv, Af, 1, 1), T, 1, 1);
    se.J = matmul(matmul(Tinv, Jf, 1, 1), T, 1, 1);
    for (int k = 0; k < r; ++k) {
        se.eigenvalues.push_back(rho[static_cast<std::size_t>(k)]);
        se.multiplicities.push_back(2);
        se.constant.push_back(0);
    }
    for (const auto& bl : spec_.blocks) {
        se.eigenvalues.push_back(Jet(ctx, bl.c));
        se.multiplicities.push_back(bl.m);
        se.constant.push_back(1);
    }
    se.rho_prime = rp;
}

StructureEval Structure::evaluate(std::span<const double> x, int order) const {
    if (order < 0) throw ContextError("negative jet order");
    StructureEval se;
    se.geometry = spec_.geometry;
    se.dim = dim();
    se.order = order;
    se.point.assign(x.begin(), x.end());
    const JetContext& ctx = JetContext::get(dim(), order);
    const JetEnv env = environment(x, ctx);
    if (spec_.geometry == Geometry::CProjective) build_normal_form_point(se, env, ctx);
    else build_projective_point(se, env, ctx);

    if (perturb_.target == Perturbation::Target::A && dim() >= 2) se.A(0, 1) += env.at(coords_[0]) * perturb_.eps;
    if (perturb_.target == Perturbation::Target::J && dim() >= 2 && se.J.size() > 0) se.J(0, 1) += perturb_.eps;

    const int d = dim();
    if (se.J.size() > 0) {
        se.Omega = Tensor(d, 0, 2, ctx);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                Jet s(ctx);
                for (int k = 0; k < d; ++k) s += se.J(k, i) * se.metric.g(k, j);
                se.Omega(i, j) = s;
            }
    }
    Jet tr(ctx);
    for (int i = 0; i < d; ++i) tr += se.A(i, i);
    se.lambda = tr * (spec_.geometry == Geometry::CProjective ? 0.25 : 0.5);
    if (order >= 1) {
        se.conn = christoffel(se.metric);
        se.dlambda = gradient(se.lambda);
        if (se.J.size() > 0) {
            se.dlambda_bar = Tensor(d, 0, 1, se.dlambda.context());
            for (int i = 0; i < d; ++i) {
                Jet s(se.dlambda.context());
                for (int j = 0; j < d; ++j) s += se.J(j, i) * se.dlambda(j);
                se.dlambda_bar(i) = s;
            }
        }
    }
    return se;
}

// ---------------------------------------------------------------- checks

namespace {

double max_abs(const Tensor& t) { return t.size() == 0 ? 0.0 : t.max_abs(); }

Tensor lower_first(const Tensor& A, const Tensor& g) {
    const int d = A.dim();
    Tensor out(d, 0, 2, A.context().with_order(std::min(A.order(), g.order())));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            Jet s(out.context());
            for (int l = 0; l < d; ++l) s += g(i, l) * A(l, j);
            out(i, j) = s;
        }
    return out;
}

double gamma_scale(const ConnectionEval& c) { return max_abs(c.gamma); }

}  // namespace

KahlerResiduals check_kahler(const StructureEval& se) {
    KahlerResiduals out;
    if (se.J.size() == 0) return out;
    const int d = se.dim;
    const Tensor& J = se.J;
    const Tensor& g = se.metric.g;
    const double jmax = max_abs(J), gmax = max_abs(g);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double jj = 0.0, h = 0.0;
            for (int k = 0; k < d; ++k) jj += J(i, k).value() * J(k, j).value();
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) h += J(a, i).value() * J(b, j).value() * g(a, b).value();
            out.j_squared.value = std::max(out.j_squared.value, std::abs(jj + (i == j ? 1.0 : 0.0)));
            out.hermitian.value = std::max(out.hermitian.value, std::abs(h - g(i, j).value()));
        }
    out.j_squared.scale = std::max(1.0, jmax * jmax);
    out.hermitian.scale = std::max(1.0, jmax * jmax * gmax);
    if (se.order >= 1) {
        const Tensor dJ = covariant_derivative(J, se.conn);
        out.nabla_j.value = max_abs(dJ);
        out.nabla_j.scale = std::max({1.0, max_abs(partial_derivative(J)), jmax * gamma_scale(se.conn)});
        const Tensor dO = covariant_derivative(se.Omega, se.conn);
        out.nabla_omega.value = max_abs(dO);
        const Tensor pO = partial_derivative(se.Omega);
        out.nabla_omega.scale = std::max({1.0, max_abs(pO), max_abs(se.Omega) * gamma_scale(se.conn)});
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    out.d_omega.value = std::max(out.d_omega.value, std::abs(pO(j, k, i).value() + pO(k, i, j).value() + pO(i, j, k).value()));
        out.d_omega.scale = std::max(1.0, max_abs(pO));
    }
    const Tensor Al = lower_first(se.A, g);
    const double amax = max_abs(se.A);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double c = 0.0;
            for (int k = 0; k < d; ++k) c += se.A(i, k).value() * J(k, j).value() - J(i, k).value() * se.A(k, j).value();
            out.a_hermitian.value = std::max({out.a_hermitian.value, std::abs(Al(i, j).value() - Al(j, i).value()), std::abs(c)});
        }
    out.a_hermitian.scale = std::max({1.0, max_abs(Al), amax * jmax});
    return out;
}

namespace {

CompatResiduals compat_impl(const StructureEval& se, bool with_omega) {
    if (se.order < 1) throw ContextError("compatibility check needs jets of order >= 1");
    const int d = se.dim;
    CompatResiduals out;
    const Tensor Al = lower_first(se.A, se.metric.g);
    const Tensor dA = covariant_derivative(Al, se.conn);
    const Tensor& g = se.metric.g;
    const Tensor& l = se.dlambda;
    double rhs_max = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double rhs = l(i).value() * g(j, k).value() + l(j).value() * g(i, k).value();
                if (with_omega)
                    rhs += se.dlambda_bar(i).value() * se.Omega(j, k).value() + se.dlambda_bar(j).value() * se.Omega(i, k).value();
                rhs_max = std::max(rhs_max, std::abs(rhs));
                out.compat.value = std::max(out.compat.value, std::abs(dA(i, j, k).value() - rhs));
            }
    out.compat.scale = std::max({max_abs(dA), rhs_max, max_abs(se.A)});

    // Jacobi formula: d det A = c det A (A^{-1})^s_k lambda_s with c = 4 (c-projective) or 2.
    const Jet det = det_jets(se.A);
    const double amax = max_abs(se.A);
    if (std::abs(det.value()) > 1e-8 * std::pow(std::max(amax, 1e-300), d)) {
        const Tensor Ainv = invert_matrix_jets(se.A, 1, 1);
        const double c = with_omega ? 4.0 : 2.0;
        double lhs_max = 0.0, r_max = 0.0;
        for (int k = 0; k < d; ++k) {
            const double lhs = derivative(det, k).value();
            double rhs = 0.0;
            for (int s = 0; s < d; ++s) rhs += Ainv(s, k).value() * l(s).value();
            rhs *= c * det.value();
            lhs_max = std::max(lhs_max, std::abs(lhs));
            r_max = std::max(r_max, std::abs(rhs));
            out.ddet.value = std::max(out.ddet.value, std::abs(lhs - rhs));
        }
        out.ddet.scale = std::max({lhs_max, r_max, std::abs(det.value())});
    }
    return out;
}

}  // namespace

CompatResiduals check_c_compatibility(const StructureEval& se) {
    if (se.J.size() == 0) throw ContextError("c-compatibility needs a complex structure");
    return compat_impl(se, true);
}

CompatResiduals check_projective_compatibility(const StructureEval& se) { return compat_impl(se, false); }

CompatResiduals check_compatibility(const StructureEval& se) {
    return se.geometry == Geometry::CProjective ? check_c_compatibility(se) : check_projective_compatibility(se);
}

Residual hessian_selfadjointness(const StructureEval& se) {
    if (se.order < 2) throw ContextError("hessian check needs jets of order >= 2");
    const int d = se.dim;
    const Tensor H = covariant_derivative(se.dlambda, se.conn);  // lambda_{j,k} at (j, k)
    Residual out;
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k) {
            double v = 0.0;
            for (int j = 0; j < d; ++j) v += se.A(j, l).value() * H(j, k).value() - se.A(j, k).value() * H(j, l).value();
            out.value = std::max(out.value, std::abs(v));
        }
    out.scale = std::max(max_abs(se.A) * max_abs(H) * d, 1e-300);
    return out;
}

Residual charpoly_residual(const StructureEval& se) {
    const int d = se.dim;
    const std::vector<double> got = characteristic_polynomial(se.A.values(), d);
    std::vector<double> want{1.0};
    for (std::size_t k = 0; k < se.eigenvalues.size(); ++k)
        for (int m = 0; m < se.multiplicities[k]; ++m) {
            // multiply by (t - rho)
            std::vector<double> next(want.size() + 1, 0.0);
            for (std::size_t j = 0; j < want.size(); ++j) {
                next[j + 1] += want[j];
                next[j] -= se.eigenvalues[k].value() * want[j];
            }
            want = next;
        }
    Residual out;
    if (want.size() != got.size()) {
        out.value = INFINITY;
        return out;
    }
    for (std::size_t j = 0; j < got.size(); ++j) {
        out.value = std::max(out.value, std::abs(got[j] - want[j]));
        out.scale = std::max(out.scale, std::abs(want[j]));
    }
    return out;
}

Residual lambda_consistency(const StructureEval& se) {
    if (se.order < 1) throw ContextError("lambda consistency needs jets of order >= 1");
    const double c = se.geometry == Geometry::CProjective ? 0.25 : 0.5;
    Residual out;
    for (int i = 0; i < se.dim; ++i) {
        double route = 0.0;
        for (std::size_t k = 0; k < se.eigenvalues.size(); ++k) route += c * se.multiplicities[k] * derivative(se.eigenvalues[k], i).value();
        out.value = std::max(out.value, std::abs(route - se.dlambda(i).value()));
        out.scale = std::max({out.scale, std::abs(route), std::abs(se.dlambda(i).value())});
    }
    out.scale = std::max(out.scale, 1.0);
    return out;
}

EigenDecomposition eigen_decomposition(const StructureEval& se) {
    const int d = se.dim;
    const std::size_t n = se.eigenvalues.size();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (std::abs(se.eigenvalues[a].value() - se.eigenvalues[b].value()) < 1e-8)
                throw DegeneratePointError("eigenvalues " + std::to_string(a + 1) + " and " + std::to_string(b + 1) + " coincide");
    Eigen::MatrixXd A(d, d), J = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            A(i, j) = se.A(i, j).value();
            if (se.J.size() > 0) J(i, j) = se.J(i, j).value();
        }
    EigenDecomposition out;
    out.eigenvalues = se.eigenvalues;
    out.multiplicities = se.multiplicities;
    for (std::size_t a = 0; a < n; ++a) {
        const double ra = se.eigenvalues[a].value();
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(d, d);
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double rb = se.eigenvalues[b].value();
            P = P * (A - rb * Eigen::MatrixXd::Identity(d, d)) / (ra - rb);
        }
        out.eigen_residual = std::max(out.eigen_residual, (A * P - ra * P).cwiseAbs().maxCoeff());
        out.j_commutation = std::max(out.j_commutation, (P * J - J * P).cwiseAbs().maxCoeff());
        std::vector<double> flat(static_cast<std::size_t>(d * d));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) flat[static_cast<std::size_t>(i * d + j)] = P(i, j);
        out.projectors.push_back(std::move(flat));
    }
    return out;
}

}  // namespace cpq
