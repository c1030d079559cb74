// verify: run the residual checks on a structure and print a report.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cpq/cli.hpp"

namespace {

enum Exit { kPass = 0, kFail = 1, kConfig = 2, kInternal = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual verification of compatible structures and their integrals"};
    std::string config_path, builtin, spec, suite, perturb, out, format;
    std::vector<std::string> tols;
    std::uint64_t seed = 0;
    int points = 0;
    bool list = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--builtin", builtin, "builtin structure name");
    app.add_option("--spec", spec, "structure JSON file");
    app.add_option("--suite", suite, "kahler|compat|classical|quantum|potentials|separation|all");
    auto* seed_opt = app.add_option("--seed", seed, "PRNG seed");
    auto* points_opt = app.add_option("--points", points, "sample points per check");
    app.add_option("--tol", tols, "tolerance override CHECK=V")->take_all();
    app.add_option("--perturb", perturb, "negative control TARGET:EPS");
    app.add_option("--out", out, "write the report here");
    app.add_option("--format", format, "json|text");
    app.add_flag("--list-checks", list, "print the tolerance table and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kPass : kConfig;
    }

    if (list) {
        for (const auto& [id, info] : cpq::tolerance_table()) std::printf("%-32s %-36s %g\n", id.c_str(), info.anchor.c_str(), info.tol);
        return kPass;
    }

    cpq::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = cpq::load_config(config_path);
        if (!builtin.empty()) {
            cfg.builtin = builtin;
            cfg.spec_path.clear();
            cfg.spec.reset();
        }
        if (!spec.empty()) {
            cfg.spec_path = spec;
            cfg.builtin.clear();
            cfg.spec.reset();
        }
        if (!suite.empty()) cfg.suite = cpq::parse_suite(suite);
        if (*seed_opt) cfg.seed = seed;
        if (*points_opt) cfg.points = points;
        for (const auto& t : tols) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw cpq::ConfigError("expected CHECK=V in --tol " + t);
            try {
                cfg.tol[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
            } catch (const std::logic_error&) {
                throw cpq::ConfigError("bad tolerance value in --tol " + t);
            }
        }
        if (!perturb.empty()) cfg.perturb = perturb;
        if (!out.empty()) cfg.out = out;
        if (!format.empty()) cfg.format = format;
        cpq::validate_config(cfg);
    } catch (const cpq::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    }

    cpq::VerificationReport report;
    try {
        report = cpq::run_suite(cfg);
    } catch (const cpq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }

    const std::string text = cpq::emit_report(report, cfg.format);
    if (cfg.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(cfg.out, std::ios::binary);
        if (!f) {
            std::cerr << "cannot write " << cfg.out << "\n";
            return kInternal;
        }
        f << text;
        if (cfg.format == "json") std::cout << cpq::emit_report(report, "text");
    }
    return report.pass ? kPass : kFail;
}
