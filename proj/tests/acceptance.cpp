// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cpq/cli.hpp"

using namespace cpq;
using nlohmann::json;

namespace {

int failures = 0;

void line(int n, bool ok, const std::string& title, const std::string& detail) {
    std::printf("criterion %2d  %s  %-28s %s\n", n, ok ? "PASS" : "FAIL", title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

VerificationReport run(const std::string& builtin, const std::string& suite, int points) {
    return run_suite(config_from_json(json{{"builtin", builtin}, {"suite", suite}, {"points", points}}));
}

/// Largest relative residual among records whose id starts with one of the prefixes; NaN if none.
double worst(const VerificationReport& r, std::initializer_list<const char*> ids) {
    double w = -1.0;
    for (const auto& c : r.checks)
        for (const char* id : ids)
            if (c.id.rfind(id, 0) == 0) w = std::isnan(c.max_residual) ? INFINITY : std::max(w, c.max_residual);
    return w < 0.0 ? NAN : w;
}

bool below(double v, double tol) { return std::isfinite(v) && v < tol; }

void structures() {
    const auto t0 = std::chrono::steady_clock::now();
    double compat = 0.0, kahler = 0.0;
    for (const char* n : {"flat_trivial", "dim4_two_eigen", "dim6_one_block"}) {
        compat = std::max(compat, worst(run(n, "compat", 200), {"compat.equation"}));
        kahler = std::max(kahler, worst(run(n, "kahler", 200), {"kahler."}));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    line(1, below(compat, 1e-9) && below(kahler, 1e-9) && secs < 10.0, "structure certification",
         "compat " + sci(compat) + "  kahler " + sci(kahler) + "  " + sci(secs) + " s");
}

void classical() {
    double br = 0.0, kil = 0.0;
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const VerificationReport r = run(n, "classical", 100);
        br = std::max(br, worst(r, {"classical.poisson_"}));
        kil = std::max(kil, worst(r, {"classical.killing_K"}));
    }
    line(2, below(br, 1e-9) && below(kil, 1e-8), "classical integrability", "brackets " + sci(br) + "  killing " + sci(kil));
}

void quantum(const VerificationReport& d4, const VerificationReport& d6, const VerificationReport& liou, const VerificationReport& sph) {
    const double c = std::max(worst(d4, {"quantum.commutator_"}), worst(d6, {"quantum.commutator_"}));
    const double p = worst(liou, {"quantum.commutator_projective"});
    line(3, below(c, 1e-7) && below(p, 1e-7), "quantum commutation", "c-projective " + sci(c) + "  projective " + sci(p));
    const double m = std::max(worst(sph, {"quantum.master_identity"}), worst(d4, {"quantum.master_identity"}));
    line(4, below(m, 1e-7), "master identity", "sphere2 + dim4 " + sci(m));
}

void b_contrast() {
    Rng rng(42);
    double b4 = 0.0, div4 = 0.0, b6 = 0.0, bl = 0.0;
    const Structure d4(builtin_spec("dim4_two_eigen")), d6(builtin_spec("dim6_one_block")), li(builtin_spec("liouville2d"));
    for (int i = 0; i < 200; ++i) {
        const StructureEval a = d4.evaluate(d4.sample(rng), 3);
        const BTensorEval ba = b_tensor(killing_tensor_K(a, -1.0), killing_tensor_K(a, 4.0), geometry_of(a));
        b4 = std::max(b4, ba.B.max_abs());
        div4 = std::max(div4, ba.divB.max_abs());
        const StructureEval c = d6.evaluate(d6.sample(rng), 3);
        b6 = std::max(b6, b_tensor(killing_tensor_K(c, -1.0), killing_tensor_K(c, 4.0), geometry_of(c)).B.max_abs());
        const StructureEval l = li.evaluate(li.sample(rng), 3);
        bl = std::max(bl, b_tensor(projective_killing_K(l, -1.0), projective_killing_K(l, 4.0), geometry_of(l)).B.max_abs());
    }
    line(5, b4 > 1e-4 && div4 < 1e-7 && bl < 1e-9, "B-tensor contrast",
         "dim4 max|B| " + sci(b4) + " max|divB| " + sci(div4) + "  liouville max|B| " + sci(bl) + "  (dim6 max|B| " + sci(b6) + ")");
}

void lemmas(const VerificationReport& d4, const VerificationReport& d6) {
    const double w = std::max(worst(d4, {"quantum.lemma_"}), worst(d6, {"quantum.lemma_"}));
    line(6, below(w, 1e-8), "lemma diagnostics", sci(w));
}

void potentials() {
    double good = 0.0, control = 0.0;
    for (const char* n : {"dim4_two_eigen", "dim6_one_block"}) {
        const Structure s(builtin_spec(n));
        const std::size_t count = s.spec().blocks.size() + static_cast<std::size_t>(s.r());
        const auto battery = test_battery(s.dim(), phase_coordinates(s), 42);
        for (const char* f : {"rho^2", "rho^3"}) {
            const Potential pot(s, std::vector<std::string>(count, f));
            Rng rng(42);
            for (int i = 0; i < 10; ++i) {
                const auto x = s.sample(rng);
                const StructureEval se = s.evaluate(x, 4);
                std::vector<double> p(static_cast<std::size_t>(s.dim()));
                for (double& v : p) v = rng.uniform(-1.0, 1.0);
                for (double v : {-1.0, 4.0})
                    for (double w : {1.5, 10.0}) {
                        const Observable Fv = integral_I(se, v) + Observable::scalar(pot.U(se, v));
                        const Observable Fw = integral_I(se, w) + Observable::scalar(pot.U(se, w));
                        good = std::max({good, poisson_bracket(Fv, Fw, p).relative(), poisson_bracket(Fv, integral_L(se, w), p).relative()});
                        for (const auto& tf : battery) {
                            const auto r = potential_operator_checks(se, pot, v, w, tf.eval(x, se.A.context()));
                            good = std::max({good, r.QQ.relative(), r.QL.relative(), r.LL.relative()});
                        }
                    }
            }
        }
    }
    const Structure s(builtin_spec("dim4_two_eigen"));
    const Potential bad(s, {"x2", "rho^2"});
    const auto battery = test_battery(s.dim(), phase_coordinates(s), 42);
    Rng rng(42);
    for (int i = 0; i < 5; ++i) {
        const auto x = s.sample(rng);
        const StructureEval se = s.evaluate(x, 4);
        for (const auto& tf : battery) control = std::max(control, potential_operator_checks(se, bad, -1.0, 4.0, tf.eval(x, se.A.context())).QQ.relative());
    }
    line(7, below(good, 1e-7) && control > 1e-3, "potentials", "admissible " + sci(good) + "  control " + sci(control));
}

void separation() {
    const VerificationReport d4 = run("dim4_two_eigen", "separation", 50), d6 = run("dim6_one_block", "separation", 50);
    const double order = std::max(worst(d4, {"separation.ode_order"}), worst(d6, {"separation.ode_order"}));
    const double q4 = worst(d4, {"separation.eigen_Q"}), l4 = worst(d4, {"separation.eigen_L"});
    const double q6 = worst(d6, {"separation.eigen_Q"});
    line(8, below(order, 0.2) && below(q4, 1e-5) && below(l4, 1e-8) && below(q6, 1e-5), "separation",
         "|order-4| " + sci(order) + "  dim4 Q " + sci(q4) + " L " + sci(l4) + "  dim6 Q " + sci(q6));
}

using VecField = std::function<std::vector<double>(const std::vector<double>&)>;

/// Nested central differences along the listed directions.
std::vector<double> fd(const VecField& f, const std::vector<double>& x, const std::vector<int>& dirs, double h) {
    if (dirs.empty()) return f(x);
    const std::vector<int> rest(dirs.begin() + 1, dirs.end());
    std::vector<double> xp = x, xm = x;
    xp[static_cast<std::size_t>(dirs[0])] += h;
    xm[static_cast<std::size_t>(dirs[0])] -= h;
    std::vector<double> a = fd(f, xp, rest, h);
    const std::vector<double> b = fd(f, xm, rest, h);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - b[i]) / (2 * h);
    return a;
}

void derivatives() {
    const double tol[4] = {0.0, 1e-6, 1e-5, 1e-4}, step[4] = {0.0, 1e-5, 1e-4, 1e-3};
    double err[4] = {0.0, 0.0, 0.0, 0.0};
    for (const auto& name : builtin_names()) {
        const Structure s(builtin_spec(name));
        const int n = s.dim();
        auto entries = [&](const StructureEval& se) {
            std::vector<Jet> out;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    out.push_back(se.metric.g(a, b));
                    out.push_back(se.A(a, b));
                }
            for (double t : {-1.0, 10.0}) out.push_back(sqrtdet_factor(se, t));
            return out;
        };
        const VecField values = [&](const std::vector<double>& y) {
            std::vector<double> v;
            for (const Jet& j : entries(s.evaluate(y, 0))) v.push_back(j.value());
            return v;
        };
        Rng rng(42);
        for (int trial = 0; trial < 3; ++trial) {
            const auto x0 = s.sample(rng);
            const std::vector<double> x(x0.begin(), x0.end());
            const std::vector<Jet> jets = entries(s.evaluate(x, 3));
            std::vector<std::vector<int>> dirs;
            for (int i = 0; i < n; ++i) {
                dirs.push_back({i});
                for (int j = i; j < n; ++j) {
                    dirs.push_back({i, j});
                    for (int k = j; k < n; ++k) dirs.push_back({i, j, k});
                }
            }
            for (const auto& d : dirs) {
                std::vector<int> e(static_cast<std::size_t>(n), 0);
                for (int i : d) ++e[static_cast<std::size_t>(i)];
                const MultiIndex mi(e);
                const std::size_t ord = d.size();
                const std::vector<double> want = fd(values, x, d, step[ord]);
                for (std::size_t q = 0; q < jets.size(); ++q)
                    err[ord] = std::max(err[ord], std::abs(partial(jets[q], mi) - want[q]) / std::max(1.0, std::abs(want[q])));
            }
        }
    }
    line(9, err[1] < tol[1] && err[2] < tol[2] && err[3] < tol[3], "AD vs finite differences",
         "1st " + sci(err[1]) + "  2nd " + sci(err[2]) + "  3rd " + sci(err[3]));
}

void determinism() {
    const RunConfig c = config_from_json(json{{"builtin", "dim4_two_eigen"}, {"points", 20}});
    const std::string a = emit_report(run_suite(c), "json"), b = emit_report(run_suite(c), "json");
    line(10, a == b, "determinism", std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different"));
}

}  // namespace

int main() {
    try {
        structures();
        classical();
        const VerificationReport d4 = run("dim4_two_eigen", "quantum", 20), d6 = run("dim6_one_block", "quantum", 20);
        const VerificationReport liou = run("liouville2d", "quantum", 20), sph = run("sphere2", "quantum", 20);
        quantum(d4, d6, liou, sph);
        b_contrast();
        lemmas(d4, d6);
        potentials();
        separation();
        derivatives();
        determinism();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 3;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
