#pragma once

// Ensemble orchestration and the verification harness: initial data,
// ensemble statistics, Ito budgets, martingale tests, uniform-estimate
// sweeps, the inequality battery and manufactured-solution convergence.
//
// Every entry point that runs more than one trajectory takes a thread count.
// threads <= 1 selects the serial reference loop; larger values distribute
// whole trajectories over an OpenMP team. Results never depend on it.

#include "stf/functionals.hpp"
#include "stf/grid.hpp"
#include "stf/noise.hpp"
#include "stf/rng.hpp"
#include "stf/stepper.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stf {

enum class DatumKind { constant, perturbed_constant, bump };

DatumKind parse_datum_kind(const std::string& name);
std::string to_string(DatumKind kind);

struct InitialDatum {
    DatumKind kind = DatumKind::perturbed_constant;
    double height = 1.0;
    double width = 0.5;                  ///< bump width; absolute length
    std::optional<double> center;        ///< defaults to L/2
    double amplitude = 0.5;              ///< cosine perturbation amplitude
    double delta_shift = 0.0;            ///< added last
    bool randomize_height = false;       ///< height ~ U[h/2, h] per trajectory
};

/// Samples the datum on `grid`. With randomize_height a height is drawn from
/// the initial-datum purpose of `stream`; the stream itself is not advanced.
GridFunction make_initial(const InitialDatum& datum, const PeriodicGrid& grid,
                          const RngStream* stream = nullptr);

/// Solver settings together with the initial law.
struct ExperimentSetup {
    SolverConfig solver;
    InitialDatum datum;
};

/// Copy of `setup` with the shift delta applied to both solver and datum.
ExperimentSetup with_delta(ExperimentSetup setup, double delta);
/// Copy of `setup` with potential strength eps.
ExperimentSetup with_eps(ExperimentSetup setup, double eps);

struct ColumnStats {
    int count = 0;
    double mean = 0.0;
    double se = 0.0;             ///< standard error of the mean
    double min = 0.0;
    double max = 0.0;
    std::vector<double> moments; ///< E|X|^q, one per configured q
    std::vector<double> moment_se;
};

/// Statistics of `values` over independent trajectories. Sums are taken in
/// sorted order, so the result does not depend on the input order.
ColumnStats column_stats(std::vector<double> values, const std::vector<double>& q);

struct TrajectoryFailure {
    int id;
    std::string message;
};

/// Per-trajectory positivity diagnostics collected at every accepted step.
struct PositivityTrace {
    double min_u = 0.0;         ///< smallest nodal value over all accepted steps
    double min_cbar = 0.0;      ///< smallest min(u)/(eps^{1/(p-2)} sigma^{2/(p-2)}) over records
    double max_cp = 0.0;        ///< largest sup(1/u) constant over records
    bool tracked = false;       ///< eps > 0 and the field stayed positive
};

struct EnsembleSummary {
    std::vector<std::string> columns;
    std::vector<double> q;
    std::vector<double> times;
    std::vector<std::vector<ColumnStats>> at_time; ///< [time][column]
    std::vector<ColumnStats> sup;                  ///< statistics of max_t X per column
    int count = 0;
    int frozen = 0;
    int degenerate = 0;
    std::vector<TrajectoryFailure> failures;
    double min_u_all = 0.0;     ///< over trajectories and accepted steps
    ColumnStats cbar;           ///< across trajectories; empty when untracked
    ColumnStats cp;

    int column_index(const std::string& name) const;
};

struct EnsembleRun {
    std::vector<Trajectory> trajectories; ///< indexed by trajectory id
    std::vector<PositivityTrace> positivity;
    EnsembleSummary summary;
};

/// Names of the aggregated columns: the CSV functionals followed by the
/// cumulative monitor integrals.
std::vector<std::string> ensemble_columns();

/// Runs trajectories 0..M-1 with streams (base_seed, id). Failures are
/// collected, not thrown.
EnsembleRun run_ensemble(const ExperimentSetup& setup, int M, std::uint64_t base_seed, const std::vector<double>& q = {1.0},
                         int threads = 1);

EnsembleSummary summarize(const std::vector<Trajectory>& trajectories, const std::vector<PositivityTrace>& positivity,
                          const std::vector<double>& q);

enum class BudgetKind { energy, entropy };

struct BudgetReport {
    BudgetKind kind = BudgetKind::energy;
    std::vector<double> times;
    std::vector<double> mean_residual;
    std::vector<double> se_residual;
    std::vector<double> mean_functional;
    int count = 0;
    std::vector<TrajectoryFailure> failures;
    double max_abs_over_se = 0.0; ///< max_t |mean|/SE over t > 0 (0/0 counts as 0)
    bool within_3se = false;
};

/// Mean and standard error of r(t) = Phi(t) - Phi(0) - int (deterministic Ito
/// rates) along M trajectories. Requires eps > 0 and delta > 0.
BudgetReport ito_budget(const ExperimentSetup& setup, int M, std::uint64_t base_seed, BudgetKind kind, int threads = 1);

struct BudgetRefinement {
    double residual_coarse = 0.0; ///< |r(T)| with dt0, noise switched off
    double residual_fine = 0.0;   ///< |r(T)| with dt0 / 2
    double ratio = 0.0;
};

/// Deterministic budget residual at dt0 and dt0/2.
BudgetRefinement budget_refinement(const ExperimentSetup& setup, BudgetKind kind);

enum class TestFunction { sine, constant };

struct QvReport {
    std::vector<double> times;
    std::vector<double> mean_martingale;
    std::vector<double> se_martingale;
    double qv_empirical = 0.0;     ///< mean over trajectories at T
    double qv_formula = 0.0;
    double qv_gap = 0.0;           ///< |emp - formula| / formula
    double qv_se_ratio = 0.0;      ///< SE of (emp - formula) / formula
    double qv_gap_tolerance = 0.0; ///< max(0.1, 3 qv_se_ratio)
    double max_abs_martingale = 0.0;
    int count = 0;
    std::vector<TrajectoryFailure> failures;
    bool mean_within_3se = false;
    bool qv_within_tolerance = false;
};

/// Weak-form martingale residual for phi = sin(2 pi mode x / L) or phi = 1.
QvReport martingale_qv_test(const ExperimentSetup& setup, int M, std::uint64_t base_seed, TestFunction phi, int mode = 1,
                            int threads = 1);

enum class SweepAxis { eps, delta };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepStatistic {
    std::string name;        ///< e.g. "sup_energy" or a monitor name
    double q = 1.0;
    std::vector<double> values; ///< one per axis value
    double ratio = 1.0;      ///< max / min over the axis
    bool gated = true;       ///< participates in the ratio acceptance
};

struct SweepReport {
    SweepAxis axis = SweepAxis::eps;
    std::vector<double> axis_values;
    std::vector<SweepStatistic> statistics;
    std::vector<int> degenerate;     ///< per axis value
    std::vector<int> failed;
    double max_gated_ratio = 1.0;
    double ratio_limit = 5.0;
    bool pass = false;
};

/// Statistics E[(sup_t E)^q] and E[(int_0^T monitored integrand)^q] across
/// the axis, with max/min ratios. Statistics that vanish with eps are
/// reported but not gated.
SweepReport estimate_sweep(const ExperimentSetup& setup, int M, std::uint64_t base_seed, SweepAxis axis,
                           const std::vector<double>& values, const std::vector<double>& q, int threads = 1);

struct InequalityOptions {
    int samples = 100;
    std::vector<int> resolutions{128, 256};
    double L = 1.0;
    double n = 2.5;
    double p = 4.0;
    double eps = 1e-3;
    int max_mode = 4;
    int onb_K = 8;
    int onb_N = 128;
    std::uint64_t seed = 0;
};

struct ResolutionBattery {
    int N = 0;
    std::array<double, 3> max_ratio_uniform{};  ///< ratio1..3 with zeta = 1
    std::array<double, 3> max_ratio_cutoff{};   ///< ratio1..3 with a compact cutoff
    bool all_finite = true;
    double max_cp = 0.0;
    double min_cbar = 0.0;
    bool positivity_finite = true;
};

struct InequalityReport {
    std::vector<ResolutionBattery> resolutions;
    double onb_max_dev = 0.0;
    double max_ratio_spread = 0.0; ///< largest max-ratio quotient between the two finest resolutions
};

/// Random strictly positive trigonometric polynomial (modes 1..max_mode,
/// offset keeping it above a positive floor). Sampled from the test-samples
/// purpose of stream (seed, id).
GridFunction random_positive_sample(const PeriodicGrid& grid, int max_mode, std::uint64_t seed, std::uint32_t id);

InequalityReport inequality_battery(const InequalityOptions& options, int threads = 1);

struct MmsOptions {
    double L = 2.0 * 3.14159265358979323846;
    double n = 2.5;
    double T = 0.1;
    /// Constant target value; the default target is 2 + 0.5 cos(2 pi x/L) cos t.
    std::optional<double> constant_target;
    std::vector<int> spatial_N{64, 128, 256};
    double spatial_dt = 1e-5;
    int temporal_N = 64;
    std::vector<double> temporal_dt{1e-3, 5e-4, 2.5e-4};
    int reference_refinement = 16;
};

struct MmsReport {
    std::vector<double> spatial_dx;
    std::vector<double> spatial_error;   ///< max norm against the target at T
    std::vector<double> temporal_dt;
    std::vector<double> temporal_error;  ///< max norm against a finer-dt run
    std::optional<double> spatial_order; ///< nullopt when all errors are at roundoff
    std::optional<double> temporal_order;
};

/// Least-squares slope of log(err) against log(h).
double fitted_order(const std::vector<double>& h, const std::vector<double>& err);

/// Manufactured forcing for the target u*, eps = 0, no noise.
Forcing mms_forcing(const PeriodicGrid& grid, double n, std::optional<double> constant_target = std::nullopt);
GridFunction mms_target(const PeriodicGrid& grid, double t, std::optional<double> constant_target = std::nullopt);

MmsReport mms_convergence(const MmsOptions& options);

struct SupportSample {
    double time;
    double length;
    double left;   ///< leftmost support endpoint, unwrapped around the datum center
    double right;
};

struct SupportReport {
    std::vector<SupportSample> samples;
    bool frozen = false;
    std::optional<double> t_sigma;
    std::string failure;
};

/// Support of the connected component around the datum center at each record.
SupportReport support_diagnostic(const ExperimentSetup& setup, std::uint64_t seed, std::uint32_t trajectory_id = 0);

} // namespace stf
