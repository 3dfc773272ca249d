#pragma once

// JSON experiment configuration (schema-checked, unknown keys rejected) and
// the CSV/JSON emitters used by the command-line front end.

#include "stf/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace stf {

using Json = nlohmann::ordered_json;

struct BudgetOptions {
    BudgetKind kind = BudgetKind::energy;
    bool refinement = true; ///< also run the deterministic dt-halving study
};

struct QvOptions {
    TestFunction phi = TestFunction::sine;
    int mode = 1;
};

struct SweepOptions {
    SweepAxis axis = SweepAxis::eps;
    std::vector<double> values{1e-1, 1e-2, 1e-3};
};

/// Quantities derived from the configuration rather than given in it.
struct DerivedConstants {
    double c_strat = 0.0;
    double S = 0.0;
    double S_A3 = 0.0;
    double S_A3star = 0.0;
    double alpha = 0.0;
    EstimateConstants estimate{};
};

struct RunConfig {
    ExperimentSetup setup;
    double mu = 0.05;
    double eta = 1e-3;
    int ensemble_count = 16;
    std::vector<double> q{1.0, 2.0};
    SweepOptions sweep;
    BudgetOptions budget;
    QvOptions qv;
    InequalityOptions inequalities;
    MmsOptions convergence;
    DerivedConstants derived;
    Json resolved; ///< the configuration with every default filled in
};

/// Parses and validates a configuration document. Throws ConfigError naming
/// the offending key for missing, mistyped, unknown or out-of-range entries.
RunConfig load_config(const Json& doc);
RunConfig load_config_file(const std::filesystem::path& path);

inline constexpr const char* kSeriesHeader =
    "time,mass,energy,energy_eps,entropy,alpha_entropy,dissipation,min_u,max_u,support_length";

/// CSV with kSeriesHeader; floats with 17 significant digits.
std::string series_csv(const FunctionalSeries& series);

/// %.17g formatting of one value.
std::string format_double(double v);

Json to_json(const Trajectory& trajectory);
Json to_json(const EnsembleSummary& summary);
Json to_json(const BudgetReport& report);
Json to_json(const BudgetRefinement& refinement);
Json to_json(const QvReport& report);
Json to_json(const SweepReport& report);
Json to_json(const InequalityReport& report);
Json to_json(const MmsReport& report);
Json to_json(const SupportReport& report);
Json to_json(const DerivedConstants& derived);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& doc);

} // namespace stf
