#include "stf/stepper.hpp"

#include "stf/cyclic_banded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stf {

namespace {

constexpr std::array<std::string_view, kMonitorCount> kMonitorNames = {
    "dissipation",        "third_order",        "gradient_quartic", "curvature",
    "laplacian",          "log_gradient",       "potential_mobility", "potential_gradient",
    "power_gradient6",    "power_third",        "power_gradient4",
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ((f_j + f_{j+1})/2)^a with the average clamped at zero; positive exponents only
// ever see nonnegative data here.
void face_powers(const GridFunction& f, double a, std::vector<double>& out)
{
    const int N = f.size();
    out.resize(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j)
        out[static_cast<std::size_t>(j)] = std::pow(std::max(0.5 * (f[j] + f.at(j + 1)), 0.0), a);
}

GridFunction clamped_power(const GridFunction& f, double b)
{
    GridFunction out(f.grid());
    for (int i = 0; i < f.size(); ++i)
        out[i] = std::pow(std::max(f[i], 0.0), b);
    return out;
}

} // namespace

void SolverConfig::validate() const
{
    params.validate();
    if (!(delta >= 0.0))
        throw InvalidArgument("delta must be >= 0");
    if (!(dt0 > 0.0) || !(T > 0.0))
        throw InvalidArgument("dt0 and T must be positive");
    if (!(dt_min > 0.0) || dt_min > dt0)
        throw InvalidArgument("dt_min must lie in (0, dt0]");
    if (!(sigma_stop > 0.0 && sigma_stop <= 1.0))
        throw InvalidArgument("sigma_stop must lie in (0, 1]");
    if (!(solver_tol > 0.0 && solver_tol <= 1e-10))
        throw InvalidArgument("solver_tol must lie in (0, 1e-10]");
    if (record_every < 1)
        throw InvalidArgument("record_every must be >= 1");
    if (!(pos_floor >= 0.0 && pos_floor < 1.0))
        throw InvalidArgument("pos_floor must lie in [0, 1)");
    if (!(dt_growth >= 1.0))
        throw InvalidArgument("dt_growth must be >= 1");
    if (std::abs(spec.length() - grid.length()) > 1e-12 * grid.length())
        throw InvalidArgument("noise spectrum length does not match the grid");
    if (4 * spec.truncation() >= grid.size())
        throw TruncationTooLarge("noise truncation K must satisfy 4K < N");
    const double a = alpha_value();
    if (a == 0.0 || a == -1.0)
        throw AlphaSingular("alpha must avoid {0, -1}");
}

std::string_view monitor_name(Monitor m)
{
    return kMonitorNames[static_cast<std::size_t>(m)];
}

std::optional<Monitor> parse_monitor(std::string_view name)
{
    for (int i = 0; i < kMonitorCount; ++i)
        if (kMonitorNames[static_cast<std::size_t>(i)] == name)
            return static_cast<Monitor>(i);
    return std::nullopt;
}

MonitorValues monitor_rates(const GridFunction& f, const ModelParams& params)
{
    const PeriodicGrid& g = f.grid();
    const int N = g.size();
    const double h = g.dx();
    const double n = params.n;
    const double eps = params.eps;
    const GridFunction ux = deriv(f, 1);
    const GridFunction uxx = deriv(f, 2);
    const GridFunction uxxx = deriv(f, 3);
    const double floor = 1e-8 * std::max(f.max(), 0.0);

    GridFunction p(g);
    for (int i = 0; i < N; ++i)
        p[i] = -uxx[i] + (eps > 0.0 ? eps * potential_d1(f[i], params.p) : 0.0);
    std::vector<double> M;
    face_powers(f, n, M);

    MonitorValues r{};
    auto add = [&r](Monitor m, double v) { r[static_cast<std::size_t>(m)] += v; };
    for (int j = 0; j < N; ++j) {
        const double px = (p.at(j + 1) - p[j]) / h;
        add(Monitor::dissipation, M[static_cast<std::size_t>(j)] * px * px);
    }
    for (int i = 0; i < N; ++i) {
        const double fi = f[i];
        const double fp = std::max(fi, 0.0);
        const double gx2 = ux[i] * ux[i];
        add(Monitor::third_order, std::pow(fp, n) * uxxx[i] * uxxx[i]);
        add(Monitor::curvature, std::pow(fp, n - 2.0) * uxx[i] * uxx[i]);
        add(Monitor::laplacian, uxx[i] * uxx[i]);
        if (fi > floor) {
            add(Monitor::gradient_quartic, std::pow(fi, n - 4.0) * gx2 * gx2);
            add(Monitor::log_gradient, gx2 / (fi * fi));
            if (eps > 0.0) {
                const double w = eps * potential_d2(fi, params.p);
                add(Monitor::potential_mobility, w * std::pow(fi, n - 2.0) * gx2);
                add(Monitor::potential_gradient, w * gx2);
            }
        }
    }
    const GridFunction d6 = deriv(clamped_power(f, (n + 2.0) / 6.0), 1);
    const GridFunction d3 = deriv(clamped_power(f, (n + 2.0) / 2.0), 3);
    const GridFunction d4 = deriv(clamped_power(f, n / 4.0), 1);
    for (int i = 0; i < N; ++i) {
        const double a2 = d6[i] * d6[i];
        add(Monitor::power_gradient6, a2 * a2 * a2);
        add(Monitor::power_third, d3[i] * d3[i]);
        const double b2 = d4[i] * d4[i];
        add(Monitor::power_gradient4, b2 * b2);
    }
    for (double& v : r)
        v *= h;
    return r;
}

SeriesRecord make_record(double t, const GridFunction& f, const SolverConfig& config, const MonitorValues& cumulative,
                         double support_threshold)
{
    SeriesRecord rec;
    rec.time = t;
    rec.mass = mass(f);
    rec.energy = energy(f);
    const bool positive = f.min() > 0.0;
    rec.energy_eps = config.params.eps == 0.0 ? rec.energy : (positive ? energy_eps(f, config.params) : kNaN);
    rec.entropy = positive ? entropy(f, config.params.n) : kNaN;
    rec.alpha_entropy = positive ? alpha_entropy(f, config.alpha_value()) : kNaN;
    rec.dissipation = cumulative[static_cast<std::size_t>(Monitor::dissipation)];
    const MinSupport ms = min_and_support(f, support_threshold);
    rec.min_u = ms.min;
    rec.max_u = f.max();
    rec.support_length = ms.support_length;
    rec.integrals = cumulative;
    return rec;
}

Stepper::Stepper(SolverConfig config, bool strict_positivity)
    : config_(std::move(config)), basis_(config_.spec, config_.grid), strict_positivity_(strict_positivity)
{
}

bool Stepper::acceptable(const GridFunction& u) const
{
    if (!u.all_finite())
        return false;
    if (strict_positivity_)
        return u.min() > config_.pos_floor * u.max();
    return u.min() >= 0.0;
}

// Solves (I + dt A) d = dt (drift(u) + forcing) + noise for the increment
// d = u+ - u, where A v = D-(M D+ lap v) - (c+S) D-(Mc D+ v) carries the
// lagged mobilities. Working with the increment keeps the flux-form drift on
// the right-hand side, so near-constant states are not swamped by roundoff.
std::vector<double> Stepper::step(TrajectoryState& state, double t_limit, StepStats& stats)
{
    const SolverConfig& cfg = config_;
    const PeriodicGrid& g = cfg.grid;
    const int N = g.size();
    const double h = g.dx();
    const double h2 = h * h;
    const double h4 = h2 * h2;
    const double n = cfg.params.n;
    const double eps = cfg.params.eps;
    const double corr = cfg.params.correction();
    const GridFunction& u = state.u;
    const NoiseSpectrum& spec = cfg.spec;
    const int K = spec.truncation();

    std::vector<double> M, Mc, amp;
    face_powers(u, n, M);
    face_powers(u, n - 2.0, Mc);

    // Deterministic drift at u in flux form.
    GridFunction p = deriv(u, 2);
    p *= -1.0;
    if (eps > 0.0)
        for (int i = 0; i < N; ++i)
            p[i] += eps * potential_d1(u[i], cfg.params.p);
    std::vector<double> flux(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        const auto js = static_cast<std::size_t>(j);
        flux[js] = M[js] * (p.at(j + 1) - p[j]) / h + corr * Mc[js] * (u.at(j + 1) - u[j]) / h;
    }
    std::vector<double> drift_u(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        drift_u[static_cast<std::size_t>(i)] =
            (flux[static_cast<std::size_t>(i)] - flux[static_cast<std::size_t>(g.wrap(i - 1))]) / h;

    const bool noisy = !spec.is_zero();
    if (noisy) {
        std::vector<double> nodal(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i)
            nodal[static_cast<std::size_t>(i)] = std::pow(std::max(u[i], 0.0), 0.5 * n);
        amp.resize(static_cast<std::size_t>(N));
        for (int j = 0; j < N; ++j)
            amp[static_cast<std::size_t>(j)] =
                0.5 * (nodal[static_cast<std::size_t>(j)] + nodal[static_cast<std::size_t>(g.wrap(j + 1))]);
    }

    const double gap = t_limit - state.t;
    double dt = state.dt;
    bool to_limit = false;
    if (dt >= gap * (1.0 - 1e-9) || gap - dt < 1e-6 * dt) {
        dt = gap;
        to_limit = true;
    }
    bool rejected_any = false;
    std::vector<double> increments(static_cast<std::size_t>(spec.mode_count()), 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(N));
    std::vector<double> wflux(static_cast<std::size_t>(N));
    GridFunction trial(g);

    for (;;) {
        if (noisy)
            increments = sample_increments(spec, dt, state.rng);

        CyclicBandedMatrix A(N);
        for (int i = 0; i < N; ++i) {
            const double Mi = M[static_cast<std::size_t>(i)];
            const double Mm = M[static_cast<std::size_t>(g.wrap(i - 1))];
            const double Ci = corr * Mc[static_cast<std::size_t>(i)];
            const double Cm = corr * Mc[static_cast<std::size_t>(g.wrap(i - 1))];
            A.coef(i, 2) = dt * Mi / h4;
            A.coef(i, 1) = dt * (-3.0 * Mi - Mm) / h4 - dt * Ci / h2;
            A.coef(i, 0) = 1.0 + dt * 3.0 * (Mi + Mm) / h4 + dt * (Ci + Cm) / h2;
            A.coef(i, -1) = dt * (-Mi - 3.0 * Mm) / h4 - dt * Cm / h2;
            A.coef(i, -2) = dt * Mm / h4;
        }

        for (int i = 0; i < N; ++i)
            rhs[static_cast<std::size_t>(i)] = dt * drift_u[static_cast<std::size_t>(i)];
        if (cfg.forcing) {
            const GridFunction f = cfg.forcing(state.t + dt);
            for (int i = 0; i < N; ++i)
                rhs[static_cast<std::size_t>(i)] += dt * f[i];
        }
        if (noisy) {
            for (int j = 0; j < N; ++j) {
                double w = 0.0;
                for (int k = -K; k <= K; ++k) {
                    const double c = spec.lambda(k) * increments[static_cast<std::size_t>(k + K)];
                    if (c != 0.0)
                        w += c * basis_(k, j);
                }
                wflux[static_cast<std::size_t>(j)] = w * amp[static_cast<std::size_t>(j)];
            }
            for (int i = 0; i < N; ++i)
                rhs[static_cast<std::size_t>(i)] +=
                    (wflux[static_cast<std::size_t>(i)] - wflux[static_cast<std::size_t>(g.wrap(i - 1))]) / h;
        }

        const CyclicBandedSolver solver(A);
        const std::vector<double> d = solver.solve(rhs, cfg.solver_tol);
        for (int i = 0; i < N; ++i)
            trial[i] = u[i] + d[static_cast<std::size_t>(i)];

        if (acceptable(trial))
            break;
        ++stats.rejected;
        rejected_any = true;
        to_limit = false;
        dt *= 0.5;
        if (dt < cfg.dt_min) {
            Trajectory partial{.series = {}, .final_state = state, .step_stats = stats, .degenerate = true,
                               .failure = {}};
            throw StepFailure("time step fell below dt_min = " + std::to_string(cfg.dt_min) + " at t = " +
                                  std::to_string(state.t),
                              std::move(partial));
        }
    }

    state.t = to_limit ? t_limit : state.t + dt;
    state.u = trial;
    state.dt = rejected_any ? dt : std::min(state.dt * cfg.dt_growth, cfg.dt0);
    ++stats.accepted;
    stats.smallest_dt = stats.accepted == 1 ? dt : std::min(stats.smallest_dt, dt);
    return increments;
}

TrajectoryState initial_state(const SolverConfig& config, const GridFunction& u0, const RngStream& stream)
{
    return TrajectoryState{0.0, u0, config.dt0, false, std::nullopt, stream};
}

TrajectoryState step(const TrajectoryState& state, const SolverConfig& config)
{
    if (state.frozen)
        throw InvalidArgument("step: state is frozen");
    if (!(state.u.grid() == config.grid))
        throw InvalidArgument("step: state lives on another grid");
    Stepper stepper(config, state.u.min() > 0.0);
    TrajectoryState next = state;
    StepStats stats;
    stepper.step(next, config.T, stats);
    return next;
}

Trajectory advance(const SolverConfig& config, const GridFunction& u0, const RngStream& stream,
                   StepObserver* observer)
{
    config.validate();
    if (!(u0.grid() == config.grid))
        throw InvalidArgument("advance: initial datum lives on another grid");
    if (!u0.all_finite())
        throw InvalidArgument("advance: initial datum is not finite");
    if (config.params.eps > 0.0 && !(u0.min() > 0.0))
        throw NonPositiveField("advance: initial datum must be strictly positive when epsilon > 0");
    if (!(u0.min() >= 0.0))
        throw NonPositiveField("advance: initial datum must be nonnegative");
    if (!(mass(u0) > 0.0))
        throw InvalidArgument("advance: initial datum must have positive mass");

    Stepper stepper(config, u0.min() > 0.0);
    const double threshold = config.support_threshold.value_or(config.delta + 1e-8 * u0.max());
    const double stop_level = 1.0 / config.sigma_stop;

    Trajectory traj{.series = {}, .final_state = initial_state(config, u0, stream), .step_stats = {},
                    .degenerate = false, .failure = {}};
    TrajectoryState& state = traj.final_state;
    MonitorValues cumulative{};
    MonitorValues rates_old{};
    if (config.monitor_integrals)
        rates_old = monitor_rates(u0, config.params);

    auto emit = [&](double t) {
        traj.series.push_back(make_record(t, state.u, config, cumulative, threshold));
        if (observer)
            observer->on_record(state, traj.series.back());
    };

    if (observer)
        observer->on_start(state);
    if (energy_eps(u0, config.params) >= stop_level) {
        state.frozen = true;
        state.t_sigma = 0.0;
    }
    emit(0.0);

    const double stride = config.record_every * config.dt0;
    for (long k = 1;; ++k) {
        double next = static_cast<double>(k) * stride;
        if (next > config.T - 1e-9 * config.dt0)
            next = config.T;
        while (!state.frozen && state.t < next) {
            const GridFunction u_old = state.u;
            const double t_old = state.t;
            std::vector<double> inc;
            try {
                inc = stepper.step(state, next, traj.step_stats);
            } catch (const StepFailure& e) {
                traj.degenerate = true;
                traj.failure = e.what();
                throw StepFailure(e.what(), traj);
            } catch (const LinearSolveFailure& e) {
                traj.failure = e.what();
                throw StepFailure(e.what(), traj);
            }
            const double dt = state.t - t_old;
            if (config.monitor_integrals) {
                const MonitorValues rates_new = monitor_rates(state.u, config.params);
                for (int m = 0; m < kMonitorCount; ++m) {
                    const auto ms = static_cast<std::size_t>(m);
                    cumulative[ms] += 0.5 * dt * (rates_old[ms] + rates_new[ms]);
                }
                rates_old = rates_new;
            }
            if (observer)
                observer->on_step(StepEvent{t_old, dt, u_old, state.u, inc});
            if (energy_eps(state.u, config.params) >= stop_level) {
                state.frozen = true;
                state.t_sigma = state.t;
            }
        }
        emit(next);
        if (next == config.T)
            break;
    }
    return traj;
}

} // namespace stf
