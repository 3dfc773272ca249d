#pragma once

// Semi-implicit Euler-Maruyama time stepping with lagged mobilities,
// positivity rejection, stopping-time freezing and functional recording.

#include "stf/dynamics.hpp"
#include "stf/errors.hpp"
#include "stf/functionals.hpp"
#include "stf/grid.hpp"
#include "stf/noise.hpp"
#include "stf/rng.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stf {

/// Source term added to the drift, evaluated at the end of each step.
using Forcing = std::function<GridFunction(double t)>;

struct SolverConfig {
    ModelParams params;
    double delta = 0.0;
    PeriodicGrid grid{1.0, 64};
    NoiseSpectrum spec;
    double dt0 = 1e-4;
    double T = 0.1;
    double sigma_stop = 1e-8;
    double dt_min = 1e-12;
    /// Records are taken on the fixed time grid k * record_every * dt0 (and at T).
    int record_every = 1;
    /// Relative floor: a trial state is rejected if min u <= pos_floor * max u.
    double pos_floor = 1e-10;
    double solver_tol = 1e-12;
    double dt_growth = 1.2;
    /// alpha-entropy exponent; defaults to 1.25 - n.
    std::optional<double> alpha;
    /// Threshold for support_length; defaults to delta + 1e-8 max(u0).
    std::optional<double> support_threshold;
    /// Accumulate the time integrals of the monitored integrands.
    bool monitor_integrals = true;
    Forcing forcing;

    /// Throws InvalidArgument on inconsistent settings.
    void validate() const;
    double alpha_value() const { return alpha.value_or(1.25 - params.n); }
};

/// Time-integrated integrands tracked along a trajectory.
enum class Monitor : int {
    dissipation,     ///< u^n p_x^2 (face form)
    third_order,     ///< u^n u_xxx^2
    gradient_quartic, ///< u^{n-4} u_x^4
    curvature,       ///< u^{n-2} u_xx^2
    laplacian,       ///< u_xx^2
    log_gradient,    ///< u^{-2} u_x^2
    potential_mobility, ///< eps F''(u) u^{n-2} u_x^2
    potential_gradient, ///< eps F''(u) u_x^2
    power_gradient6, ///< |(u^{(n+2)/6})_x|^6
    power_third,     ///< |(u^{(n+2)/2})_xxx|^2
    power_gradient4, ///< |(u^{n/4})_x|^4
};
inline constexpr int kMonitorCount = 11;
using MonitorValues = std::array<double, kMonitorCount>;

std::string_view monitor_name(Monitor m);
std::optional<Monitor> parse_monitor(std::string_view name);

/// Instantaneous integrands of every Monitor at state f. Terms with negative
/// weights are restricted to nodes above 1e-8 max(f).
MonitorValues monitor_rates(const GridFunction& f, const ModelParams& params);

struct SeriesRecord {
    double time = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double energy_eps = 0.0;
    double entropy = 0.0;       ///< NaN once the field touches zero
    double alpha_entropy = 0.0; ///< NaN once the field touches zero
    double dissipation = 0.0;   ///< cumulative time integral of the dissipation
    double min_u = 0.0;
    double max_u = 0.0;
    double support_length = 0.0;
    MonitorValues integrals{};  ///< cumulative time integrals
};

using FunctionalSeries = std::vector<SeriesRecord>;

struct TrajectoryState {
    double t = 0.0;
    GridFunction u;
    double dt = 0.0;
    bool frozen = false;
    std::optional<double> t_sigma;
    RngStream rng;
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    double smallest_dt = 0.0;
};

struct Trajectory {
    FunctionalSeries series;
    TrajectoryState final_state;
    StepStats step_stats;
    bool degenerate = false;
    std::string failure;
};

/// dt fell below dt_min while rejecting. Carries the trajectory up to the
/// last accepted state.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, Trajectory partial) : Error(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

/// Data handed to observers for every accepted step.
struct StepEvent {
    double t_old;
    double dt;
    const GridFunction& u_old;
    const GridFunction& u_new;
    std::span<const double> increments;
};

class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void on_start(const TrajectoryState&) {}
    virtual void on_step(const StepEvent&) {}
    virtual void on_record(const TrajectoryState&, const SeriesRecord&) {}
};

/// Reusable per-trajectory integrator. Caches the face basis table.
/// With strict_positivity a trial state is rejected when min u <= pos_floor *
/// max u; otherwise (degenerate data with zeros) only when min u < 0.
class Stepper {
public:
    explicit Stepper(SolverConfig config, bool strict_positivity = true);

    /// Advances `state` by one accepted step of length <= min(state.dt, t_limit - state.t).
    /// Returns the increments used. Throws StepFailure (with an empty partial
    /// trajectory) on dt underflow and LinearSolveFailure on solver breakdown.
    std::vector<double> step(TrajectoryState& state, double t_limit, StepStats& stats);

    const SolverConfig& config() const { return config_; }
    const FaceBasis& basis() const { return basis_; }

private:
    bool acceptable(const GridFunction& u) const;

    SolverConfig config_;
    FaceBasis basis_;
    bool strict_positivity_;
};

/// One accepted step up to the horizon T.
TrajectoryState step(const TrajectoryState& state, const SolverConfig& config);

TrajectoryState initial_state(const SolverConfig& config, const GridFunction& u0, const RngStream& stream);

/// Integrates u0 to T, freezing once energy_eps >= 1/sigma_stop.
Trajectory advance(const SolverConfig& config, const GridFunction& u0, const RngStream& stream,
                   StepObserver* observer = nullptr);

/// Functionals of f; `cumulative` supplies the running time integrals.
SeriesRecord make_record(double t, const GridFunction& f, const SolverConfig& config, const MonitorValues& cumulative,
                         double support_threshold);

} // namespace stf
