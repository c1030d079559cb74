#include "cpq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cpq {

using nlohmann::json;

Suite parse_suite(std::string_view s) {
    if (s == "kahler") return Suite::Kahler;
    if (s == "compat") return Suite::Compat;
    if (s == "classical") return Suite::Classical;
    if (s == "quantum") return Suite::Quantum;
    if (s == "potentials") return Suite::Potentials;
    if (s == "separation") return Suite::Separation;
    if (s == "all") return Suite::All;
    throw ConfigError("unknown suite '" + std::string(s) + "'", "/suite");
}

std::string suite_name(Suite s) {
    switch (s) {
        case Suite::Kahler: return "kahler";
        case Suite::Compat: return "compat";
        case Suite::Classical: return "classical";
        case Suite::Quantum: return "quantum";
        case Suite::Potentials: return "potentials";
        case Suite::Separation: return "separation";
        case Suite::All: return "all";
    }
    return "all";
}

const std::map<std::string, CheckInfo>& tolerance_table() {
    static const std::map<std::string, CheckInfo> table{
        {"kahler.j_squared", {"Definition of a Kaehler structure", 1e-9}},
        {"kahler.hermitian", {"Definition of a Kaehler structure", 1e-9}},
        {"kahler.nabla_j", {"Definition of a Kaehler structure", 1e-9}},
        {"kahler.nabla_omega", {"Definition of a Kaehler structure", 1e-9}},
        {"kahler.d_omega", {"Definition of a Kaehler structure", 1e-9}},
        {"kahler.a_hermitian", {"Definition of c-compatibility", 1e-9}},
        {"compat.equation", {"Compatibility equation", 1e-9}},
        {"compat.det_gradient", {"Compatibility equation, trace form", 1e-9}},
        {"compat.charpoly", {"Normal form, Example 5", 1e-9}},
        {"compat.lambda", {"Compatibility equation, trace form", 1e-9}},
        {"classical.poisson_II", {"Theorem 1", 1e-9}},
        {"classical.poisson_IL", {"Theorem 1", 1e-9}},
        {"classical.poisson_LL", {"Theorem 1", 1e-9}},
        {"classical.killing_K", {"Theorem 1", 1e-8}},
        {"classical.killing_V", {"Theorem 1", 1e-8}},
        {"quantum.commutator_II", {"Theorem 2", 1e-7}},
        {"quantum.commutator_IL", {"Theorem 2", 1e-7}},
        {"quantum.commutator_LL", {"Theorem 2", 1e-7}},
        {"quantum.commutator_projective", {"Theorem 3", 1e-7}},
        {"quantum.lie_V_K", {"Theorem 2, mixed case", 1e-8}},
        {"quantum.divergence_V", {"Theorem 2, mixed case", 1e-8}},
        {"quantum.master_identity", {"Commutator formula, Section 3.2", 1e-7}},
        {"quantum.b_divergence", {"Commutator formula, Section 3.2", 1e-7}},
        {"quantum.b_vanishes", {"Remark closing Section 3.2", 1e-9}},
        {"quantum.lemma_hessian", {"Lemma 10", 1e-8}},
        {"quantum.lemma_curvature_A", {"Lemma 12", 1e-8}},
        {"quantum.lemma_curvature_K", {"Lemma 13", 1e-8}},
        {"quantum.lemma_ricci", {"A commutes with the Ricci tensor", 1e-8}},
        {"quantum.lemma_reduced_b", {"Reduced B tensor", 1e-8}},
        {"potentials.exactness", {"Theorem 4", 1e-8}},
        {"potentials.eigenform", {"Theorem 4", 1e-8}},
        {"potentials.killing", {"Theorem 4", 1e-8}},
        {"potentials.poisson", {"Theorem 4", 1e-7}},
        {"potentials.commutator_QQ", {"Theorem 4", 1e-7}},
        {"potentials.commutator_QL", {"Theorem 4", 1e-7}},
        {"potentials.commutator_LL", {"Theorem 4", 1e-7}},
        {"potentials.commutator_projective", {"Theorem 5", 1e-7}},
        {"separation.route", {"Theorem 8, proof", 1e-8}},
        {"separation.ode_residual", {"Theorem 8, ODE", 1e-6}},
        {"separation.ode_order", {"Theorem 8, ODE", 0.2}},
        {"separation.pde_residual", {"Theorem 8, block PDE", 1e-8}},
        {"separation.eigen_Q", {"Theorem 8", 1e-5}},
        {"separation.eigen_L", {"Theorem 8", 1e-8}},
    };
    return table;
}

double RunConfig::tolerance(const std::string& id) const {
    const auto it = tol.find(id);
    if (it != tol.end()) return it->second;
    return tolerance_table().at(id).tol;
}

void validate_config(const RunConfig& c) {
    if (c.builtin.empty() == (c.spec_path.empty() && !c.spec)) throw ConfigError("exactly one of builtin or spec is required", "");
    if (!c.builtin.empty()) {
        const auto names = builtin_names();
        if (std::find(names.begin(), names.end(), c.builtin) == names.end())
            throw ConfigError("unknown builtin '" + c.builtin + "'", "/builtin");
    }
    if (c.points < 1) throw ConfigError("points must be at least 1", "/points");
    for (const auto& [id, v] : c.tol) {
        if (!tolerance_table().count(id)) throw ConfigError("unknown check '" + id + "'", "/tol/" + id);
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("tolerance must be positive", "/tol/" + id);
    }
    if (c.grid.size() < 2) throw ConfigError("grid needs at least two values", "/grid");
    if (c.killing_grid.empty()) throw ConfigError("killing grid is empty", "/killing_grid");
    if (c.format != "json" && c.format != "text") throw ConfigError("format must be json or text", "/format");
    if (!c.perturb.empty()) parse_perturbation(c.perturb);
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be an object", "");
    static const std::set<std::string> keys{"builtin", "spec",  "suite", "seed",   "points", "tol",
                                            "grid",    "killing_grid", "force_coefficient_path", "perturb", "out", "format"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError("unknown key '" + it.key() + "'", "/" + it.key());

    auto str = [&](const char* k) {
        const json& v = j.at(k);
        if (!v.is_string()) throw ConfigError("expected a string", std::string("/") + k);
        return v.get<std::string>();
    };
    auto numbers = [&](const char* k) {
        const json& v = j.at(k);
        if (!v.is_array()) throw ConfigError("expected an array", std::string("/") + k);
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError("expected a number", std::string("/") + k + "/" + std::to_string(i));
            out.push_back(v[i].get<double>());
        }
        return out;
    };

    RunConfig c;
    if (j.contains("builtin")) c.builtin = str("builtin");
    if (j.contains("spec")) {
        if (j["spec"].is_string())
            c.spec_path = str("spec");
        else if (j["spec"].is_object())
            c.spec = spec_from_json(j["spec"], "/spec");
        else
            throw ConfigError("expected a path or an object", "/spec");
    }
    if (j.contains("suite")) c.suite = parse_suite(str("suite"));
    if (j.contains("seed")) {
        const json& sv = j["seed"];
        if (!sv.is_number_unsigned() && !(sv.is_number_integer() && sv.get<std::int64_t>() >= 0)) throw ConfigError("seed must be a non-negative integer", "/seed");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("points")) {
        if (!j["points"].is_number_integer()) throw ConfigError("points must be an integer", "/points");
        c.points = j["points"].get<int>();
    }
    if (j.contains("tol")) {
        if (!j["tol"].is_object()) throw ConfigError("expected an object", "/tol");
        for (auto it = j["tol"].begin(); it != j["tol"].end(); ++it) {
            if (!it.value().is_number()) throw ConfigError("expected a number", "/tol/" + it.key());
            c.tol[it.key()] = it.value().get<double>();
        }
    }
    if (j.contains("grid")) c.grid = numbers("grid");
    if (j.contains("killing_grid")) c.killing_grid = numbers("killing_grid");
    if (j.contains("force_coefficient_path")) {
        if (!j["force_coefficient_path"].is_boolean()) throw ConfigError("expected a boolean", "/force_coefficient_path");
        c.force_coefficient_path = j["force_coefficient_path"].get<bool>();
    }
    if (j.contains("perturb")) c.perturb = str("perturb");
    if (j.contains("out")) c.out = str("out");
    if (j.contains("format")) c.format = str("format");
    validate_config(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

Structure build_structure(const RunConfig& c) {
    StructureSpec spec;
    if (!c.builtin.empty()) {
        spec = builtin_spec(c.builtin);
    } else if (c.spec) {
        spec = *c.spec;
    } else {
        std::ifstream in(c.spec_path);
        if (!in) throw ConfigError("cannot open structure file " + c.spec_path, "/spec");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON in structure file: ") + e.what(), "/spec");
        }
        spec = spec_from_json(j);
    }
    const Perturbation p = c.perturb.empty() ? Perturbation{} : parse_perturbation(c.perturb);
    return Structure(std::move(spec), p);
}

namespace {

struct Tally {
    int points = 0;
    int last_point = -1;
    double max = 0.0, scale = 0.0;
    bool nan = false;
};

class Recorder {
public:
    void add(const std::string& id, const Residual& r, int point) {
        Tally& t = tallies_[id];
        if (point != t.last_point) {
            ++t.points;
            t.last_point = point;
        }
        const double rel = r.relative();
        if (std::isnan(rel)) {
            t.nan = true;
            return;
        }
        if (rel >= t.max) {
            t.max = rel;
            t.scale = r.scale;
        }
    }

    std::vector<CheckRecord> records(const RunConfig& c) const {
        std::vector<CheckRecord> out;
        for (const auto& [id, t] : tallies_) {
            CheckRecord rec;
            rec.id = id;
            rec.anchor = tolerance_table().at(id).anchor;
            rec.points = t.points;
            rec.max_residual = t.nan ? NAN : t.max;
            rec.scale = t.scale;
            rec.tol = c.tolerance(id);
            rec.pass = !t.nan && t.max < rec.tol;
            out.push_back(rec);
        }
        return out;
    }

private:
    std::map<std::string, Tally> tallies_;
};

bool wants(Suite sel, Suite s) { return sel == Suite::All || sel == s; }

/// Each suite draws from its own stream so selecting suites does not shift the others.
Rng suite_rng(std::uint64_t seed, Suite s) { return Rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(s) + 1); }

std::vector<std::pair<double, double>> grid_pairs(const std::vector<double>& g, bool with_diagonal) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = with_diagonal ? 0 : i + 1; j < g.size(); ++j)
            if (with_diagonal || i != j) out.emplace_back(g[i], g[j]);
    return out;
}

void check_grid(const Structure& s, const RunConfig& c) {
    if (c.force_coefficient_path) return;
    Rng rng(c.seed);
    std::vector<std::array<double, 2>> spans;
    for (int i = 0; i < 64; ++i) {
        const auto x = s.sample(rng);
        const StructureEval se = s.evaluate(x, 0);
        spans.resize(se.eigenvalues.size(), {INFINITY, -INFINITY});
        for (std::size_t k = 0; k < se.eigenvalues.size(); ++k) {
            spans[k][0] = std::min(spans[k][0], se.eigenvalues[k].value());
            spans[k][1] = std::max(spans[k][1], se.eigenvalues[k].value());
        }
    }
    for (std::size_t i = 0; i < c.grid.size(); ++i)
        for (const auto& sp : spans)
            if (c.grid[i] >= sp[0] - 1e-6 && c.grid[i] <= sp[1] + 1e-6)
                throw ConfigError("grid value lies in the range of an eigenvalue", "/grid/" + std::to_string(i));
}

std::vector<std::string> default_potential(const Structure& s, const StructureEval& se) {
    (void)s;
    return std::vector<std::string>(se.eigenvalues.size(), "rho^2");
}

void run_kahler(const Structure& s, const RunConfig& c, Recorder& rec) {
    if (s.geometry() != Geometry::CProjective) return;
    Rng rng = suite_rng(c.seed, Suite::Kahler);
    for (int i = 0; i < c.points; ++i) {
        const StructureEval se = s.evaluate(s.sample(rng), 2);
        const KahlerResiduals k = check_kahler(se);
        rec.add("kahler.j_squared", k.j_squared, i);
        rec.add("kahler.hermitian", k.hermitian, i);
        rec.add("kahler.nabla_j", k.nabla_j, i);
        rec.add("kahler.nabla_omega", k.nabla_omega, i);
        rec.add("kahler.d_omega", k.d_omega, i);
        rec.add("kahler.a_hermitian", k.a_hermitian, i);
    }
}

void run_compat(const Structure& s, const RunConfig& c, Recorder& rec) {
    Rng rng = suite_rng(c.seed, Suite::Compat);
    for (int i = 0; i < c.points; ++i) {
        const StructureEval se = s.evaluate(s.sample(rng), 2);
        const CompatResiduals r = check_compatibility(se);
        rec.add("compat.equation", r.compat, i);
        rec.add("compat.det_gradient", r.ddet, i);
        rec.add("compat.charpoly", charpoly_residual(se), i);
        rec.add("compat.lambda", lambda_consistency(se), i);
    }
}

void run_classical(const Structure& s, const RunConfig& c, Recorder& rec) {
    const bool cp = s.geometry() == Geometry::CProjective;
    Rng rng = suite_rng(c.seed, Suite::Classical);
    const auto pairs = grid_pairs(c.grid, false);
    for (int i = 0; i < c.points; ++i) {
        const StructureEval se = s.evaluate(s.sample(rng), 2);
        std::vector<double> p(static_cast<std::size_t>(se.dim));
        for (double& v : p) v = rng.uniform(-1.0, 1.0);
        std::map<double, Observable> I, L;
        for (double v : c.grid) {
            I.emplace(v, integral_I(se, v));
            if (cp) L.emplace(v, integral_L(se, v));
        }
        for (const auto& [v, w] : pairs) rec.add("classical.poisson_II", poisson_bracket(I.at(v), I.at(w), p), i);
        if (cp)
            for (double v : c.grid)
                for (double w : c.grid) {
                    rec.add("classical.poisson_IL", poisson_bracket(I.at(v), L.at(w), p), i);
                    if (v < w) rec.add("classical.poisson_LL", poisson_bracket(L.at(v), L.at(w), p), i);
                }
        for (double t : c.killing_grid) {
            rec.add("classical.killing_K", killing_equation_residual(se, t), i);
            if (cp) rec.add("classical.killing_V", killing_vector_residual(killing_vector_V(se, t), se), i);
        }
    }
}

int quantum_points(const RunConfig& c) { return std::min(c.points, 20); }

void run_quantum(const Structure& s, const RunConfig& c, Recorder& rec) {
    const bool cp = s.geometry() == Geometry::CProjective;
    Rng rng = suite_rng(c.seed, Suite::Quantum);
    const auto battery = test_battery(s.dim(), phase_coordinates(s), c.seed);
    const auto pairs = grid_pairs(c.grid, false);
    for (int i = 0; i < quantum_points(c); ++i) {
        const auto x = s.sample(rng);
        const StructureEval se = s.evaluate(x, 4);
        const JetContext& ctx = se.A.context();
        const GeometryEval geo = geometry_of(se);
        std::map<double, DiffOperator> I, L;
        for (double v : c.grid) {
            I.emplace(v, operator_I(se, v));
            if (cp) L.emplace(v, operator_L(se, v));
        }
        for (const auto& tf : battery) {
            const CJet f = tf.eval(x, ctx);
            for (const auto& [v, w] : pairs) {
                rec.add(cp ? "quantum.commutator_II" : "quantum.commutator_projective", commutator_residual(I.at(v), I.at(w), f), i);
                if (cp) rec.add("quantum.commutator_LL", commutator_residual(L.at(v), L.at(w), f), i);
            }
            if (cp)
                for (double v : c.grid)
                    for (double w : c.grid) {
                        const MixedResiduals m = mixed_IL_commutator_check(se, v, w, f);
                        rec.add("quantum.commutator_IL", m.commutator, i);
                        rec.add("quantum.lie_V_K", m.lie, i);
                        rec.add("quantum.divergence_V", m.divergence, i);
                    }
            const std::uint64_t qs = c.seed + static_cast<std::uint64_t>(i) * 7919u;
            const Tensor P = random_quadratic(x, ctx, qs), Q = random_quadratic(x, ctx, qs + 1);
            rec.add("quantum.master_identity", commutator_formula_check(P, Q, f, geo).residual, i);
        }
        for (const auto& [v, w] : pairs) {
            const BTensorEval b = b_tensor(cp ? killing_tensor_K(se, v) : projective_killing_K(se, v),
                                           cp ? killing_tensor_K(se, w) : projective_killing_K(se, w), geo);
            rec.add("quantum.b_divergence", Residual{b.divB.max_abs(), 1.0}, i);
            if (!cp) rec.add("quantum.b_vanishes", Residual{b.B.max_abs(), 1.0}, i);
            if (cp) {
                const LemmaResiduals l = lemma_diagnostics(se, v, w);
                rec.add("quantum.lemma_hessian", l.hessian, i);
                rec.add("quantum.lemma_curvature_A", l.curvature_A, i);
                rec.add("quantum.lemma_curvature_K", l.curvature_K, i);
                rec.add("quantum.lemma_ricci", l.ricci, i);
                rec.add("quantum.lemma_reduced_b", l.reduced_div, i);
            }
        }
    }
}

void run_potentials(const Structure& s, const RunConfig& c, Recorder& rec) {
    const bool cp = s.geometry() == Geometry::CProjective;
    Rng rng = suite_rng(c.seed, Suite::Potentials);
    const auto battery = test_battery(s.dim(), phase_coordinates(s), c.seed + 1);
    const auto pairs = grid_pairs(c.grid, false);
    std::optional<Potential> pot;
    for (int i = 0; i < quantum_points(c); ++i) {
        const auto x = s.sample(rng);
        const StructureEval se = s.evaluate(x, 4);
        if (!pot) pot.emplace(s, default_potential(s, se));
        std::vector<double> p(static_cast<std::size_t>(se.dim));
        for (double& v : p) v = rng.uniform(-1.0, 1.0);
        for (const auto& [v, w] : pairs) {
            const PotentialResiduals r = potential_condition_residuals(se, *pot, v, w);
            rec.add("potentials.exactness", r.exactness, i);
            if (cp) {
                rec.add("potentials.eigenform", r.eigenform, i);
                rec.add("potentials.killing", r.killing, i);
            }
            const Observable Fv = integral_I(se, v) + Observable::scalar(pot->U(se, v));
            const Observable Fw = integral_I(se, w) + Observable::scalar(pot->U(se, w));
            rec.add("potentials.poisson", poisson_bracket(Fv, Fw, p), i);
            if (cp) {
                rec.add("potentials.poisson", poisson_bracket(Fv, integral_L(se, w), p), i);
                rec.add("potentials.poisson", poisson_bracket(Fw, integral_L(se, v), p), i);
            }
            for (const auto& tf : battery) {
                const PotentialOperatorResiduals q = potential_operator_checks(se, *pot, v, w, tf.eval(x, se.A.context()));
                rec.add(cp ? "potentials.commutator_QQ" : "potentials.commutator_projective", q.QQ, i);
                if (cp) {
                    rec.add("potentials.commutator_QL", q.QL, i);
                    rec.add("potentials.commutator_LL", q.LL, i);
                }
            }
        }
    }
}

void run_separation(const Structure& s, const RunConfig& c, Recorder& rec) {
    if (s.geometry() != Geometry::CProjective) return;
    Rng rng = suite_rng(c.seed, Suite::Separation);
    const int npts = std::min(c.points, 50);
    const auto battery = test_battery(s.dim(), phase_coordinates(s), c.seed + 2);
    for (int i = 0; i < npts; ++i) {
        const auto x = s.sample(rng);
        for (double v : c.grid)
            for (const auto& tf : battery) rec.add("separation.route", normal_coords_operator(s, x, v, tf).residual, i);
    }

    const int r = s.r();
    const auto& blocks = s.spec().blocks;
    SeparationProblem prob{&s, {}, {}, {}};
    for (int q = 0; q < r; ++q) prob.omega.push_back(rng.uniform(-1.0, 1.0));
    for (int k = 0; k < r; ++k) prob.f.push_back("rho^2");
    for (std::size_t b = 0; b < blocks.size(); ++b) prob.f.push_back("0.7");

    Ansatz an;
    std::vector<double> constants, values;
    const auto probe = s.sample(rng);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].m != 2) return;
        const double B = block_field(prob, b, probe);
        BlockFactor Y = std::abs(B) > 1e-12 ? BlockFactor{BlockFactor::Kind::Landau, 0.3, 0.0, B}
                                            : BlockFactor{BlockFactor::Kind::Plane, 0.5, 1.2, 0.0};
        an.blocks.push_back(Y);
        constants.push_back(blocks[b].c);
        values.push_back(block_lambda_value(prob, b, Y, 0.7));
    }
    std::vector<double> high;
    for (int k = 0; k < r; ++k) high.push_back(rng.uniform(-0.5, 0.5));
    prob.lambda_tilde = lambda_tilde_fit(constants, values, high);

    for (int k = 0; k < r; ++k) {
        const auto& rg = s.range(k);
        const double w = rg[1] - rg[0];
        an.phi.push_back(integrate_ode(prob, k, rg[0], rg[1], 1.0, 0.2, w / 1000.0));
        const OdeGrid& g = an.phi.back();
        for (std::size_t n = 2; n + 2 < g.phi.size(); n += 10)
            rec.add("separation.ode_residual", separated_ode_residual(prob, k, g, n), static_cast<int>(n));
        const double order = convergence_order(prob, k, rg[0], rg[1], 1.0, 0.2, w / 20.0);
        rec.add("separation.ode_order", Residual{std::abs(order - 4.0), 1.0}, k);
    }
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < npts; ++i) pts.push_back(s.sample(rng));
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (int i = 0; i < npts; ++i) rec.add("separation.pde_residual", separated_pde_residual(prob, b, an.blocks[b], pts[static_cast<std::size_t>(i)]), i);
    for (int i = 0; i < npts; ++i) {
        const EigenResiduals e = eigen_residual(prob, an, c.grid, {pts[static_cast<std::size_t>(i)]});
        rec.add("separation.eigen_Q", e.Q, i);
        rec.add("separation.eigen_L", e.L, i);
    }
}

}  // namespace

VerificationReport run_suite(const RunConfig& c) {
    validate_config(c);
    const Structure s = build_structure(c);
    check_grid(s, c);
    Recorder rec;
    if (wants(c.suite, Suite::Kahler)) run_kahler(s, c, rec);
    if (wants(c.suite, Suite::Compat)) run_compat(s, c, rec);
    if (wants(c.suite, Suite::Classical)) run_classical(s, c, rec);
    if (wants(c.suite, Suite::Quantum)) run_quantum(s, c, rec);
    if (wants(c.suite, Suite::Potentials)) run_potentials(s, c, rec);
    if (wants(c.suite, Suite::Separation)) run_separation(s, c, rec);
    VerificationReport out;
    out.seed = c.seed;
    out.checks = rec.records(c);
    out.pass = std::all_of(out.checks.begin(), out.checks.end(), [](const CheckRecord& r) { return r.pass; });
    return out;
}

nlohmann::ordered_json report_to_json(const VerificationReport& r) {
    nlohmann::ordered_json j;
    j["version"] = r.version;
    j["seed"] = r.seed;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : r.checks) {
        nlohmann::ordered_json e;
        e["id"] = c.id;
        e["anchor"] = c.anchor;
        e["points"] = c.points;
        e["max_residual"] = c.max_residual;
        e["scale"] = c.scale;
        e["tol"] = c.tol;
        e["pass"] = c.pass;
        j["checks"].push_back(std::move(e));
    }
    j["pass"] = r.pass;
    return j;
}

VerificationReport report_from_json(const json& j) {
    VerificationReport r;
    r.version = j.at("version").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("checks")) {
        CheckRecord c;
        c.id = e.at("id").get<std::string>();
        c.anchor = e.at("anchor").get<std::string>();
        c.points = e.value("points", 0);
        c.max_residual = e.at("max_residual").is_null() ? NAN : e.at("max_residual").get<double>();
        c.scale = e.at("scale").get<double>();
        c.tol = e.at("tol").get<double>();
        c.pass = e.at("pass").get<bool>();
        r.checks.push_back(c);
    }
    r.pass = j.at("pass").get<bool>();
    return r;
}

std::string emit_report(const VerificationReport& r, std::string_view format) {
    if (format == "json") return report_to_json(r).dump(2) + "\n";
    if (format != "text") throw ConfigError("format must be json or text", "/format");
    std::size_t w = 5, wa = 6;
    for (const auto& c : r.checks) {
        w = std::max(w, c.id.size());
        wa = std::max(wa, c.anchor.size());
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(w)) << "check" << "  " << std::setw(static_cast<int>(wa)) << "anchor"
       << "  " << std::right << std::setw(6) << "points" << "  " << std::setw(10) << "residual" << "  " << std::setw(10) << "scale"
       << "  " << std::setw(10) << "tol" << "  result\n";
    for (const auto& c : r.checks) {
        os << std::left << std::setw(static_cast<int>(w)) << c.id << "  " << std::setw(static_cast<int>(wa)) << c.anchor << "  "
           << std::right << std::setw(6) << c.points << "  " << std::scientific << std::setprecision(3) << std::setw(10)
           << c.max_residual << "  " << std::setw(10) << c.scale << "  " << std::setw(10) << c.tol << "  "
           << (c.pass ? "PASS" : "FAIL") << "\n";
    }
    os << "seed " << r.seed << "  overall " << (r.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace cpq
