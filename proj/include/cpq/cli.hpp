#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpq/separation.hpp"
#include "json.hpp"

namespace cpq {

enum class Suite { Kahler, Compat, Classical, Quantum, Potentials, Separation, All };
Suite parse_suite(std::string_view s);
std::string suite_name(Suite s);

/// Default tolerance and anchor of one check id.
struct CheckInfo {
    std::string anchor;
    double tol;
};
/// The single source of truth for check ids, anchors and tolerances.
const std::map<std::string, CheckInfo>& tolerance_table();

struct RunConfig {
    std::string builtin;
    std::string spec_path;
    std::optional<StructureSpec> spec;  ///< inline spec from a config file
    Suite suite = Suite::All;
    std::uint64_t seed = 42;
    int points = 200;
    std::map<std::string, double> tol;  ///< overrides keyed by check id
    std::vector<double> grid{-1.0, 1.5, 4.0, 7.0, 10.0};
    std::vector<double> killing_grid{-1.0, 0.2, 1.5, 10.0};
    /// Allow grid values inside the spectrum (K(t) then uses the coefficient path).
    bool force_coefficient_path = false;
    std::string perturb;
    std::string out;
    std::string format = "json";

    double tolerance(const std::string& id) const;
};

/// Validates and fills defaults; errors are ConfigError with a JSON pointer.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
/// Checks fields that do not depend on the structure (tolerances, counts, names).
void validate_config(const RunConfig& c);

struct CheckRecord {
    std::string id, anchor;
    int points = 0;
    double max_residual = 0.0;
    double scale = 0.0;
    double tol = 0.0;
    bool pass = true;
};

struct VerificationReport {
    int version = 1;
    std::uint64_t seed = 42;
    std::vector<CheckRecord> checks;
    bool pass = true;
};

/// Builds the structure named by the config.
Structure build_structure(const RunConfig& c);
/// Runs the selected checks; records are ordered by id.
VerificationReport run_suite(const RunConfig& c);

nlohmann::ordered_json report_to_json(const VerificationReport& r);
VerificationReport report_from_json(const nlohmann::json& j);
/// "json" or "text"; the text form has one aligned line per check.
std::string emit_report(const VerificationReport& r, std::string_view format);

}  // namespace cpq
