#include "stf/experiments.hpp"

#include "stf/dynamics.hpp"
#include "stf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <tuple>

namespace stf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(0..M-1). The serial loop is the reference; the OpenMP loop hands
// out whole trajectories and stores results by index, so scheduling cannot
// influence any output. The lowest failing index is rethrown in both paths.
template <class Body>
void for_each_trajectory(int M, int threads, Body&& body)
{
    if (threads <= 1) {
        for (int j = 0; j < M; ++j)
            body(j);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(M));
#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (int j = 0; j < M; ++j) {
        try {
            body(j);
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors)
        if (e)
            std::rethrow_exception(e);
}

struct Outcome {
    Trajectory trajectory;
    bool failed = false;
    std::string message;
};

Outcome run_one(const ExperimentSetup& setup, std::uint64_t seed, int id, StepObserver* observer)
{
    const RngStream stream(seed, static_cast<std::uint32_t>(id));
    const GridFunction u0 = make_initial(setup.datum, setup.solver.grid, &stream);
    try {
        return {advance(setup.solver, u0, stream, observer), false, {}};
    } catch (const StepFailure& e) {
        return {e.partial(), true, e.what()};
    } catch (const Error& e) {
        // Raised by an observer; nothing of the path survives.
        Trajectory t{.series = {}, .final_state = initial_state(setup.solver, u0, stream), .step_stats = {},
                     .degenerate = false, .failure = e.what()};
        return {std::move(t), true, e.what()};
    }
}

void require_count(int M)
{
    if (M < 1)
        throw InvalidArgument("trajectory count must be >= 1");
}

double face_diff(const GridFunction& f, int j) { return f.at(j + 1) - f[j]; }

double column_value(const SeriesRecord& r, int c)
{
    switch (c) {
    case 0: return r.mass;
    case 1: return r.energy;
    case 2: return r.energy_eps;
    case 3: return r.entropy;
    case 4: return r.alpha_entropy;
    case 5: return r.dissipation;
    case 6: return r.min_u;
    case 7: return r.max_u;
    case 8: return r.support_length;
    default: return r.integrals[static_cast<std::size_t>(c - 9)];
    }
}

class PositivityObserver : public StepObserver {
public:
    explicit PositivityObserver(const ModelParams& params) : params_(params) {}

    void on_start(const TrajectoryState& s) override
    {
        trace_.min_u = s.u.min();
        trace_.min_cbar = std::numeric_limits<double>::infinity();
        trace_.max_cp = 0.0;
        trace_.tracked = params_.eps > 0.0;
    }
    void on_step(const StepEvent& e) override { trace_.min_u = std::min(trace_.min_u, e.u_new.min()); }
    void on_record(const TrajectoryState& s, const SeriesRecord&) override
    {
        if (!trace_.tracked)
            return;
        if (!(s.u.min() > 0.0)) {
            trace_.tracked = false;
            return;
        }
        const FunctionalReport r = positivity_bound_check(s.u, params_);
        trace_.min_cbar = std::min(trace_.min_cbar, r.metadata.at("Cbar_p"));
        trace_.max_cp = std::max(trace_.max_cp, r.metadata.at("C_p"));
    }

    const PositivityTrace& trace() const { return trace_; }

private:
    ModelParams params_;
    PositivityTrace trace_;
};

// Deterministic Ito rate of the energy or entropy and the functional itself.
class BudgetTerms {
public:
    BudgetTerms(const SolverConfig& cfg, BudgetKind kind) : cfg_(cfg), kind_(kind), basis_(cfg.spec, cfg.grid) {}

    double functional(const GridFunction& u) const
    {
        return kind_ == BudgetKind::energy ? energy_eps(u, cfg_.params) : entropy(u, cfg_.params.n);
    }

    double rate(const GridFunction& u) const
    {
        const ModelParams& mp = cfg_.params;
        const PeriodicGrid& g = u.grid();
        const int N = g.size();
        const double h = g.dx();
        const FluxField flux = drift_flux(u, mp);

        // <dPhi, drift> in summation-by-parts form: -sum F_j D+(dPhi)_j h.
        GridFunction w(g);
        if (kind_ == BudgetKind::energy)
            w = pressure(u, mp);
        else
            for (int i = 0; i < N; ++i)
                w[i] = entropy_density_d1(u[i], mp.n);
        double det = 0.0;
        for (int j = 0; j < N; ++j)
            det -= flux.face_values[static_cast<std::size_t>(j)] * face_diff(w, j);

        double ito = 0.0;
        const NoiseSpectrum& spec = cfg_.spec;
        for (int k = -spec.truncation(); k <= spec.truncation(); ++k) {
            const double lam = spec.lambda(k);
            if (lam == 0.0)
                continue;
            const GridFunction b = noise_column(u, k, basis_, mp.n);
            double quad = 0.0;
            if (kind_ == BudgetKind::energy) {
                for (int j = 0; j < N; ++j) {
                    const double d = face_diff(b, j);
                    quad += d * d / h;
                }
                if (mp.eps > 0.0)
                    for (int i = 0; i < N; ++i)
                        quad += mp.eps * potential_d2(u[i], mp.p) * b[i] * b[i] * h;
            } else {
                for (int i = 0; i < N; ++i)
                    quad += std::pow(u[i], -mp.n) * b[i] * b[i] * h;
            }
            ito += 0.5 * lam * lam * quad;
        }
        return det + ito;
    }

private:
    const SolverConfig& cfg_;
    BudgetKind kind_;
    FaceBasis basis_;
};

class BudgetObserver : public StepObserver {
public:
    BudgetObserver(const SolverConfig& cfg, BudgetKind kind) : terms_(cfg, kind) {}

    void on_start(const TrajectoryState& s) override
    {
        phi0_ = terms_.functional(s.u);
        rate_old_ = terms_.rate(s.u);
        integral_ = 0.0;
    }
    void on_step(const StepEvent& e) override
    {
        const double rate_new = terms_.rate(e.u_new);
        integral_ += 0.5 * e.dt * (rate_old_ + rate_new);
        rate_old_ = rate_new;
    }
    void on_record(const TrajectoryState& s, const SeriesRecord&) override
    {
        const double phi = terms_.functional(s.u);
        functional.push_back(phi);
        residual.push_back(phi - phi0_ - integral_);
    }

    std::vector<double> functional;
    std::vector<double> residual;

private:
    BudgetTerms terms_;
    double phi0_ = 0.0;
    double rate_old_ = 0.0;
    double integral_ = 0.0;
};

class QvObserver : public StepObserver {
public:
    QvObserver(const SolverConfig& cfg, GridFunction phi) : cfg_(cfg), phi_(std::move(phi)), basis_(cfg.spec, cfg.grid) {}

    void on_start(const TrajectoryState& s) override
    {
        drift_old_ = drift_pairing(s.u);
        qv_old_ = qv_rate(s.u);
    }
    void on_step(const StepEvent& e) override
    {
        const int N = e.u_new.size();
        const double h = e.u_new.grid().dx();
        double change = 0.0;
        for (int i = 0; i < N; ++i)
            change += (e.u_new[i] - e.u_old[i]) * phi_[i] * h;
        const double drift_new = drift_pairing(e.u_new);
        const double qv_new = qv_rate(e.u_new);
        const double dm = change - 0.5 * e.dt * (drift_old_ + drift_new);
        martingale_ += dm;
        qv_empirical += dm * dm;
        qv_formula += 0.5 * e.dt * (qv_old_ + qv_new);
        drift_old_ = drift_new;
        qv_old_ = qv_new;
    }
    void on_record(const TrajectoryState&, const SeriesRecord&) override { martingale.push_back(martingale_); }

    std::vector<double> martingale;
    double qv_empirical = 0.0;
    double qv_formula = 0.0;

private:
    // <div F, phi> h = -sum_j F_j (phi_{j+1} - phi_j); exactly zero for constant phi.
    double drift_pairing(const GridFunction& u) const
    {
        const FluxField flux = drift_flux(u, cfg_.params);
        double s = 0.0;
        for (int j = 0; j < u.size(); ++j)
            s -= flux.face_values[static_cast<std::size_t>(j)] * face_diff(phi_, j);
        return s;
    }

    double qv_rate(const GridFunction& u) const
    {
        const NoiseSpectrum& spec = cfg_.spec;
        const int K = spec.truncation();
        std::vector<double> unit(static_cast<std::size_t>(spec.mode_count()), 0.0);
        double s = 0.0;
        for (int k = -K; k <= K; ++k) {
            if (spec.lambda(k) == 0.0)
                continue;
            unit.assign(unit.size(), 0.0);
            unit[static_cast<std::size_t>(k + K)] = 1.0;
            const FluxField flux = noise_flux(u, unit, basis_, cfg_.params.n);
            double pair = 0.0;
            for (int j = 0; j < u.size(); ++j)
                pair -= flux.face_values[static_cast<std::size_t>(j)] * face_diff(phi_, j);
            s += pair * pair;
        }
        return s;
    }

    const SolverConfig& cfg_;
    GridFunction phi_;
    FaceBasis basis_;
    double martingale_ = 0.0;
    double drift_old_ = 0.0;
    double qv_old_ = 0.0;
};

std::vector<double> times_of(const Trajectory& t)
{
    std::vector<double> out;
    out.reserve(t.series.size());
    for (const SeriesRecord& r : t.series)
        out.push_back(r.time);
    return out;
}

double sorted_mean(std::vector<double> v)
{
    return v.empty() ? kNaN : canonical_sum(v) / static_cast<double>(v.size());
}

} // namespace

DatumKind parse_datum_kind(const std::string& name)
{
    if (name == "constant")
        return DatumKind::constant;
    if (name == "perturbed-constant")
        return DatumKind::perturbed_constant;
    if (name == "bump")
        return DatumKind::bump;
    throw InvalidArgument("unknown initial datum kind '" + name + "'");
}

std::string to_string(DatumKind kind)
{
    switch (kind) {
    case DatumKind::constant: return "constant";
    case DatumKind::perturbed_constant: return "perturbed-constant";
    case DatumKind::bump: return "bump";
    }
    return "?";
}

GridFunction make_initial(const InitialDatum& datum, const PeriodicGrid& grid, const RngStream* stream)
{
    if (!(datum.height > 0.0))
        throw InvalidArgument("initial height must be positive");
    if (!(datum.delta_shift >= 0.0))
        throw InvalidArgument("delta shift must be nonnegative");
    const double L = grid.length();
    const double x0 = datum.center.value_or(0.5 * L);
    double h = datum.height;
    if (datum.randomize_height) {
        if (!stream)
            throw InvalidArgument("randomized height needs a random stream");
        RngStream copy = *stream;
        double u = 0.0;
        copy.uniforms(std::span<double>(&u, 1), StreamPurpose::initial_datum);
        h *= 0.5 + 0.5 * u;
    }

    GridFunction f(grid);
    switch (datum.kind) {
    case DatumKind::constant:
        f = GridFunction(grid, h);
        break;
    case DatumKind::perturbed_constant:
        if (!(std::abs(datum.amplitude) <= h))
            throw InvalidArgument("perturbation amplitude exceeds the height");
        f = GridFunction::sample(grid, [&](double x) { return h + datum.amplitude * std::cos(2 * kPi * (x - x0) / L); });
        break;
    case DatumKind::bump: {
        const double w = datum.width;
        if (!(w > 0.0 && w <= L))
            throw InvalidArgument("bump width must lie in (0, L]");
        f = GridFunction::sample(grid, [&](double x) {
            double d = std::fmod(x - x0, L);
            if (d > 0.5 * L)
                d -= L;
            else if (d < -0.5 * L)
                d += L;
            if (std::abs(d) > 0.5 * w)
                return 0.0;
            const double c = std::cos(kPi * d / w);
            return h * c * c * c * c;
        });
        break;
    }
    }
    if (datum.delta_shift > 0.0)
        for (int i = 0; i < f.size(); ++i)
            f[i] += datum.delta_shift;
    return f;
}

ExperimentSetup with_delta(ExperimentSetup setup, double delta)
{
    setup.solver.delta = delta;
    setup.datum.delta_shift = delta;
    return setup;
}

ExperimentSetup with_eps(ExperimentSetup setup, double eps)
{
    setup.solver.params.eps = eps;
    return setup;
}

ColumnStats column_stats(std::vector<double> values, const std::vector<double>& q)
{
    ColumnStats s;
    s.count = static_cast<int>(values.size());
    s.moments.assign(q.size(), kNaN);
    s.moment_se.assign(q.size(), kNaN);
    const bool any_nan = std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); });
    if (values.empty() || any_nan) {
        s.mean = s.se = s.min = s.max = kNaN;
        return s;
    }
    std::sort(values.begin(), values.end());
    const double m = static_cast<double>(values.size());
    auto mean_se = [m](std::vector<double> v) {
        const double mean = canonical_sum(v) / m;
        if (v.size() < 2)
            return std::pair{mean, 0.0};
        for (double& x : v)
            x = (x - mean) * (x - mean);
        const double var = canonical_sum(v) / (m - 1.0);
        return std::pair{mean, std::sqrt(var / m)};
    };
    std::tie(s.mean, s.se) = mean_se(values);
    s.min = values.front();
    s.max = values.back();
    for (std::size_t k = 0; k < q.size(); ++k) {
        std::vector<double> pw(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            pw[i] = std::pow(std::abs(values[i]), q[k]);
        std::tie(s.moments[k], s.moment_se[k]) = mean_se(std::move(pw));
    }
    return s;
}

std::vector<std::string> ensemble_columns()
{
    std::vector<std::string> c{"mass",    "energy",  "energy_eps", "entropy",       "alpha_entropy",
                               "dissipation", "min_u", "max_u",    "support_length"};
    for (int m = 0; m < kMonitorCount; ++m)
        c.push_back("int_" + std::string(monitor_name(static_cast<Monitor>(m))));
    return c;
}

int EnsembleSummary::column_index(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end())
        throw InvalidArgument("unknown ensemble column '" + name + "'");
    return static_cast<int>(it - columns.begin());
}

EnsembleSummary summarize(const std::vector<Trajectory>& trajectories, const std::vector<PositivityTrace>& positivity,
                          const std::vector<double>& q)
{
    EnsembleSummary s;
    s.columns = ensemble_columns();
    s.q = q;
    const int C = static_cast<int>(s.columns.size());

    std::vector<const Trajectory*> ok;
    for (std::size_t id = 0; id < trajectories.size(); ++id) {
        const Trajectory& t = trajectories[id];
        if (!t.failure.empty())
            s.failures.push_back({static_cast<int>(id), t.failure});
        else
            ok.push_back(&t);
        s.frozen += t.final_state.frozen ? 1 : 0;
        s.degenerate += t.degenerate ? 1 : 0;
    }
    s.count = static_cast<int>(ok.size());
    if (!ok.empty()) {
        s.times = times_of(*ok.front());
        for (const Trajectory* t : ok)
            if (times_of(*t) != s.times)
                throw InvalidArgument("summarize: trajectories recorded at different times");
    }

    s.at_time.resize(s.times.size());
    std::vector<double> col(ok.size());
    for (std::size_t ti = 0; ti < s.times.size(); ++ti)
        for (int c = 0; c < C; ++c) {
            for (std::size_t j = 0; j < ok.size(); ++j)
                col[j] = column_value(ok[j]->series[ti], c);
            s.at_time[ti].push_back(column_stats(col, q));
        }
    for (int c = 0; c < C; ++c) {
        for (std::size_t j = 0; j < ok.size(); ++j) {
            double m = -std::numeric_limits<double>::infinity();
            for (const SeriesRecord& r : ok[j]->series) {
                const double v = column_value(r, c);
                m = std::isnan(v) || std::isnan(m) ? kNaN : std::max(m, v);
            }
            col[j] = m;
        }
        s.sup.push_back(column_stats(col, q));
    }

    s.min_u_all = std::numeric_limits<double>::infinity();
    std::vector<double> cbar, cp;
    for (const PositivityTrace& p : positivity) {
        s.min_u_all = std::min(s.min_u_all, p.min_u);
        if (p.tracked) {
            cbar.push_back(p.min_cbar);
            cp.push_back(p.max_cp);
        }
    }
    s.cbar = column_stats(cbar, {});
    s.cp = column_stats(cp, {});
    return s;
}

EnsembleRun run_ensemble(const ExperimentSetup& setup, int M, std::uint64_t base_seed, const std::vector<double>& q, int threads)
{
    require_count(M);
    setup.solver.validate();
    EnsembleRun run;
    std::vector<std::optional<Trajectory>> slots(static_cast<std::size_t>(M));
    run.positivity.resize(static_cast<std::size_t>(M));
    for_each_trajectory(M, threads, [&](int j) {
        PositivityObserver obs(setup.solver.params);
        Outcome o = run_one(setup, base_seed, j, &obs);
        if (o.failed && o.trajectory.failure.empty())
            o.trajectory.failure = o.message;
        slots[static_cast<std::size_t>(j)] = std::move(o.trajectory);
        run.positivity[static_cast<std::size_t>(j)] = obs.trace();
    });
    run.trajectories.reserve(slots.size());
    for (std::optional<Trajectory>& t : slots)
        run.trajectories.push_back(std::move(*t));
    run.summary = summarize(run.trajectories, run.positivity, q);
    return run;
}

BudgetReport ito_budget(const ExperimentSetup& setup, int M, std::uint64_t base_seed, BudgetKind kind, int threads)
{
    require_count(M);
    setup.solver.validate();
    if (!(setup.solver.params.eps > 0.0) || !(setup.datum.delta_shift > 0.0))
        throw InvalidArgument("ito_budget requires eps > 0 and delta > 0");
    if (setup.solver.forcing)
        throw InvalidArgument("ito_budget does not support forcing");

    std::vector<std::vector<double>> residuals(static_cast<std::size_t>(M));
    std::vector<std::vector<double>> functionals(static_cast<std::size_t>(M));
    std::vector<std::vector<double>> times(static_cast<std::size_t>(M));
    std::vector<std::string> failures(static_cast<std::size_t>(M));
    for_each_trajectory(M, threads, [&](int j) {
        const auto js = static_cast<std::size_t>(j);
        BudgetObserver obs(setup.solver, kind);
        const Outcome o = run_one(setup, base_seed, j, &obs);
        if (o.failed)
            failures[js] = o.message;
        residuals[js] = std::move(obs.residual);
        functionals[js] = std::move(obs.functional);
        times[js] = times_of(o.trajectory);
    });

    BudgetReport rep;
    rep.kind = kind;
    std::vector<std::size_t> ok;
    for (std::size_t j = 0; j < failures.size(); ++j) {
        if (!failures[j].empty())
            rep.failures.push_back({static_cast<int>(j), failures[j]});
        else
            ok.push_back(j);
    }
    rep.count = static_cast<int>(ok.size());
    if (ok.empty())
        return rep;
    rep.times = times[ok.front()];
    rep.within_3se = true;
    for (std::size_t ti = 0; ti < rep.times.size(); ++ti) {
        std::vector<double> r, f;
        for (std::size_t j : ok) {
            r.push_back(residuals[j][ti]);
            f.push_back(functionals[j][ti]);
        }
        const ColumnStats rs = column_stats(r, {});
        rep.mean_residual.push_back(rs.mean);
        rep.se_residual.push_back(rs.se);
        rep.mean_functional.push_back(sorted_mean(f));
        if (ti == 0)
            continue;
        const double z = rs.se > 0.0 ? std::abs(rs.mean) / rs.se : (rs.mean == 0.0 ? 0.0 : kNaN);
        if (std::isnan(z) || z > 3.0)
            rep.within_3se = false;
        rep.max_abs_over_se = std::isnan(z) || std::isnan(rep.max_abs_over_se) ? kNaN : std::max(rep.max_abs_over_se, z);
    }
    return rep;
}

BudgetRefinement budget_refinement(const ExperimentSetup& setup, BudgetKind kind)
{
    auto residual_at_T = [&](double dt) {
        ExperimentSetup s = setup;
        const NoiseSpectrum& spec = setup.solver.spec;
        s.solver.spec = build_spectrum(SpectrumMode::flat, 0.0, 0.0, 0, spec.length());
        s.solver.params.c_strat = 0.0;
        s.solver.dt0 = dt;
        s.solver.dt_min = std::min(s.solver.dt_min, dt);
        s.solver.record_every = std::max(1, static_cast<int>(std::ceil(s.solver.T / dt)));
        s.solver.monitor_integrals = false;
        BudgetObserver obs(s.solver, kind);
        const GridFunction u0 = make_initial(s.datum, s.solver.grid);
        advance(s.solver, u0, RngStream(0, 0), &obs);
        return std::abs(obs.residual.back());
    };
    BudgetRefinement r;
    r.residual_coarse = residual_at_T(setup.solver.dt0);
    r.residual_fine = residual_at_T(0.5 * setup.solver.dt0);
    r.ratio = r.residual_coarse / r.residual_fine;
    return r;
}

QvReport martingale_qv_test(const ExperimentSetup& setup, int M, std::uint64_t base_seed, TestFunction phi, int mode,
                            int threads)
{
    require_count(M);
    setup.solver.validate();
    if (setup.solver.forcing)
        throw InvalidArgument("martingale_qv_test does not support forcing");
    const PeriodicGrid& g = setup.solver.grid;
    const GridFunction test = phi == TestFunction::constant
                                  ? GridFunction(g, 1.0)
                                  : GridFunction::sample(g, [&](double x) { return std::sin(2 * kPi * mode * x / g.length()); });

    std::vector<std::vector<double>> mart(static_cast<std::size_t>(M));
    std::vector<double> emp(static_cast<std::size_t>(M)), form(static_cast<std::size_t>(M));
    std::vector<std::vector<double>> times(static_cast<std::size_t>(M));
    std::vector<std::string> failures(static_cast<std::size_t>(M));
    for_each_trajectory(M, threads, [&](int j) {
        const auto js = static_cast<std::size_t>(j);
        QvObserver obs(setup.solver, test);
        const Outcome o = run_one(setup, base_seed, j, &obs);
        if (o.failed)
            failures[js] = o.message;
        mart[js] = std::move(obs.martingale);
        emp[js] = obs.qv_empirical;
        form[js] = obs.qv_formula;
        times[js] = times_of(o.trajectory);
    });

    QvReport rep;
    std::vector<std::size_t> ok;
    for (std::size_t j = 0; j < failures.size(); ++j) {
        if (!failures[j].empty())
            rep.failures.push_back({static_cast<int>(j), failures[j]});
        else
            ok.push_back(j);
    }
    rep.count = static_cast<int>(ok.size());
    if (ok.empty())
        return rep;
    rep.times = times[ok.front()];
    for (std::size_t ti = 0; ti < rep.times.size(); ++ti) {
        std::vector<double> v;
        for (std::size_t j : ok) {
            v.push_back(mart[j][ti]);
            rep.max_abs_martingale = std::max(rep.max_abs_martingale, std::abs(mart[j][ti]));
        }
        const ColumnStats s = column_stats(v, {});
        rep.mean_martingale.push_back(s.mean);
        rep.se_martingale.push_back(s.se);
    }
    std::vector<double> e, f, d;
    for (std::size_t j : ok) {
        e.push_back(emp[j]);
        f.push_back(form[j]);
        d.push_back(emp[j] - form[j]);
    }
    rep.qv_empirical = sorted_mean(e);
    rep.qv_formula = sorted_mean(f);
    const ColumnStats ds = column_stats(d, {});
    const double m = rep.mean_martingale.back(), se = rep.se_martingale.back();
    rep.mean_within_3se = se > 0.0 ? std::abs(m) <= 3.0 * se : m == 0.0;
    if (rep.qv_formula > 0.0) {
        rep.qv_gap = std::abs(rep.qv_empirical - rep.qv_formula) / rep.qv_formula;
        rep.qv_se_ratio = ds.se / rep.qv_formula;
        rep.qv_gap_tolerance = std::max(0.1, 3.0 * rep.qv_se_ratio);
        rep.qv_within_tolerance = rep.qv_gap <= rep.qv_gap_tolerance;
    } else {
        rep.qv_gap = rep.qv_empirical == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        rep.qv_gap_tolerance = 0.1;
        rep.qv_within_tolerance = rep.qv_empirical == 0.0;
    }
    return rep;
}

SweepAxis parse_sweep_axis(const std::string& name)
{
    if (name == "eps" || name == "epsilon")
        return SweepAxis::eps;
    if (name == "delta")
        return SweepAxis::delta;
    throw InvalidArgument("unknown sweep axis '" + name + "'");
}

std::string to_string(SweepAxis axis) { return axis == SweepAxis::eps ? "eps" : "delta"; }

SweepReport estimate_sweep(const ExperimentSetup& setup, int M, std::uint64_t base_seed, SweepAxis axis,
                           const std::vector<double>& values, const std::vector<double>& q, int threads)
{
    require_count(M);
    if (values.empty())
        throw InvalidArgument("sweep needs at least one axis value");
    if (q.empty())
        throw InvalidArgument("sweep needs at least one moment exponent");
    for (double v : values)
        if (!(v > 0.0))
            throw InvalidArgument("sweep axis values must be positive");

    // (column, gated). Potential-weighted terms carry a factor eps and vanish
    // with it, so they cannot be bounded away from zero across an eps axis.
    std::vector<std::pair<std::string, bool>> stats;
    if (axis == SweepAxis::eps)
        stats = {{"energy", true},
                 {"entropy", true},
                 {"int_dissipation", true},
                 {"int_gradient_quartic", true},
                 {"int_curvature", true},
                 {"int_laplacian", true},
                 {"int_log_gradient", true},
                 {"energy_eps", false},
                 {"int_third_order", false},
                 {"int_potential_mobility", false},
                 {"int_potential_gradient", false}};
    else
        stats = {{"energy", true},
                 {"int_dissipation", true},
                 {"int_gradient_quartic", true},
                 {"int_curvature", true},
                 {"int_power_gradient6", true},
                 {"int_power_third", true},
                 {"int_power_gradient4", true}};

    SweepReport rep;
    rep.axis = axis;
    rep.axis_values = values;
    for (const auto& [name, gated] : stats)
        for (double qq : q)
            rep.statistics.push_back({name, qq, {}, 1.0, gated});

    for (double v : values) {
        const ExperimentSetup s = axis == SweepAxis::eps ? with_eps(setup, v) : with_delta(setup, v);
        const EnsembleRun run = run_ensemble(s, M, base_seed, q, threads);
        rep.degenerate.push_back(run.summary.degenerate);
        rep.failed.push_back(static_cast<int>(run.summary.failures.size()));
        std::size_t k = 0;
        for (const auto& entry : stats) {
            const ColumnStats& cs = run.summary.sup[static_cast<std::size_t>(run.summary.column_index(entry.first))];
            for (std::size_t qi = 0; qi < q.size(); ++qi)
                rep.statistics[k++].values.push_back(cs.moments[qi]);
        }
    }

    rep.max_gated_ratio = 1.0;
    bool finite = true;
    for (SweepStatistic& st : rep.statistics) {
        const auto [lo, hi] = std::minmax_element(st.values.begin(), st.values.end());
        if (std::any_of(st.values.begin(), st.values.end(), [](double x) { return !std::isfinite(x); }))
            st.ratio = kNaN;
        else if (*hi == 0.0)
            st.ratio = 1.0;
        else
            st.ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
        if (!st.gated)
            continue;
        if (!std::isfinite(st.ratio))
            finite = false;
        else
            rep.max_gated_ratio = std::max(rep.max_gated_ratio, st.ratio);
    }
    const bool no_failures = std::all_of(rep.failed.begin(), rep.failed.end(), [](int f) { return f == 0; });
    rep.pass = finite && no_failures && rep.max_gated_ratio <= rep.ratio_limit;
    return rep;
}

GridFunction random_positive_sample(const PeriodicGrid& grid, int max_mode, std::uint64_t seed, std::uint32_t id)
{
    if (max_mode < 1)
        throw InvalidArgument("random sample needs at least one mode");
    RngStream stream(seed, id);
    std::vector<double> u(static_cast<std::size_t>(2 * max_mode + 1));
    stream.uniforms(u, StreamPurpose::test_samples);
    std::vector<double> a(static_cast<std::size_t>(max_mode)), b(static_cast<std::size_t>(max_mode));
    double offset = 0.2 + 0.8 * u.back();
    for (int m = 1; m <= max_mode; ++m) {
        const auto ms = static_cast<std::size_t>(m - 1);
        a[ms] = (2.0 * u[2 * ms] - 1.0) / m;
        b[ms] = (2.0 * u[2 * ms + 1] - 1.0) / m;
        offset += std::abs(a[ms]) + std::abs(b[ms]);
    }
    const double L = grid.length();
    return GridFunction::sample(grid, [&](double x) {
        double v = offset;
        for (int m = 1; m <= max_mode; ++m) {
            const auto ms = static_cast<std::size_t>(m - 1);
            v += a[ms] * std::cos(2 * kPi * m * x / L) + b[ms] * std::sin(2 * kPi * m * x / L);
        }
        return v;
    });
}

InequalityReport inequality_battery(const InequalityOptions& o, int threads)
{
    if (o.samples < 1)
        throw InvalidArgument("inequality battery needs at least one sample");
    if (o.resolutions.empty())
        throw InvalidArgument("inequality battery needs at least one resolution");
    ModelParams mp;
    mp.n = o.n;
    mp.p = o.p;
    mp.eps = o.eps;
    mp.validate();

    const std::size_t R = o.resolutions.size();
    struct SampleResult {
        std::array<double, 3> uniform{};
        std::array<double, 3> cutoff{};
        double cp = 0.0;
        double cbar = 0.0;
    };
    std::vector<std::vector<SampleResult>> results(static_cast<std::size_t>(o.samples), std::vector<SampleResult>(R));
    for_each_trajectory(o.samples, threads, [&](int s) {
        for (std::size_t r = 0; r < R; ++r) {
            const PeriodicGrid g(o.L, o.resolutions[r]);
            const GridFunction f = random_positive_sample(g, o.max_mode, o.seed, static_cast<std::uint32_t>(s));
            InitialDatum cut;
            cut.kind = DatumKind::bump;
            cut.width = 0.6 * o.L;
            const GridFunction zeta = make_initial(cut, g);
            const FunctionalReport bu = bernis_check(f, GridFunction(g, 1.0), o.n);
            const FunctionalReport bc = bernis_check(f, zeta, o.n);
            SampleResult& out = results[static_cast<std::size_t>(s)][r];
            for (int k = 0; k < 3; ++k) {
                const std::string key = "ratio" + std::to_string(k + 1);
                out.uniform[static_cast<std::size_t>(k)] = bu.metadata.at(key);
                out.cutoff[static_cast<std::size_t>(k)] = bc.metadata.at(key);
            }
            if (o.eps > 0.0) {
                const FunctionalReport pb = positivity_bound_check(f, mp);
                out.cp = pb.metadata.at("C_p");
                out.cbar = pb.metadata.at("Cbar_p");
            }
        }
    });

    InequalityReport rep;
    for (std::size_t r = 0; r < R; ++r) {
        ResolutionBattery b;
        b.N = o.resolutions[r];
        b.min_cbar = std::numeric_limits<double>::infinity();
        for (const auto& sample : results) {
            const SampleResult& s = sample[r];
            for (std::size_t k = 0; k < 3; ++k) {
                b.all_finite = b.all_finite && std::isfinite(s.uniform[k]) && std::isfinite(s.cutoff[k]);
                b.max_ratio_uniform[k] = std::max(b.max_ratio_uniform[k], s.uniform[k]);
                b.max_ratio_cutoff[k] = std::max(b.max_ratio_cutoff[k], s.cutoff[k]);
            }
            b.positivity_finite = b.positivity_finite && std::isfinite(s.cp) && std::isfinite(s.cbar);
            b.max_cp = std::max(b.max_cp, s.cp);
            b.min_cbar = std::min(b.min_cbar, s.cbar);
        }
        rep.resolutions.push_back(b);
    }
    if (R >= 2) {
        const ResolutionBattery& a = rep.resolutions[R - 2];
        const ResolutionBattery& b = rep.resolutions[R - 1];
        for (std::size_t k = 0; k < 3; ++k)
            for (const auto& [x, y] : {std::pair{a.max_ratio_uniform[k], b.max_ratio_uniform[k]},
                                       std::pair{a.max_ratio_cutoff[k], b.max_ratio_cutoff[k]}})
                if (x > 0.0 && y > 0.0)
                    rep.max_ratio_spread = std::max(rep.max_ratio_spread, std::max(x / y, y / x));
                else if (x != y)
                    rep.max_ratio_spread = std::numeric_limits<double>::infinity();
    }
    const NoiseSpectrum spec = build_spectrum(SpectrumMode::flat, 1.0, 0.0, o.onb_K, o.L);
    rep.onb_max_dev = onb_relation_values(spec, PeriodicGrid(o.L, o.onb_N)).max_deviation;
    return rep;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& err)
{
    if (h.size() != err.size() || h.size() < 2)
        throw InvalidArgument("fitted_order needs matching samples (at least two)");
    double sx = 0.0, sy = 0.0;
    const double m = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        sx += std::log(h[i]);
        sy += std::log(err[i]);
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = std::log(h[i]) - sx / m;
        sxx += dx * dx;
        sxy += dx * (std::log(err[i]) - sy / m);
    }
    return sxy / sxx;
}

GridFunction mms_target(const PeriodicGrid& grid, double t, std::optional<double> constant_target)
{
    if (constant_target)
        return GridFunction(grid, *constant_target);
    const double k = 2 * kPi / grid.length();
    return GridFunction::sample(grid, [&](double x) { return 2.0 + 0.5 * std::cos(k * x) * std::cos(t); });
}

Forcing mms_forcing(const PeriodicGrid& grid, double n, std::optional<double> constant_target)
{
    if (constant_target)
        return [grid](double) { return GridFunction(grid, 0.0); };
    // d_t u* + (u*^n u*_xxx)_x, differentiated by hand.
    const double k = 2 * kPi / grid.length();
    return [grid, n, k](double t) {
        const double a = 0.5 * std::cos(t);
        return GridFunction::sample(grid, [&](double x) {
            const double c = std::cos(k * x), s = std::sin(k * x);
            const double u = 2.0 + a * c;
            const double ux = -a * k * s;
            const double uxxx = a * k * k * k * s;
            const double uxxxx = a * k * k * k * k * c;
            return -0.5 * c * std::sin(t) + n * std::pow(u, n - 1.0) * ux * uxxx + std::pow(u, n) * uxxxx;
        });
    };
}

MmsReport mms_convergence(const MmsOptions& o)
{
    if (o.spatial_N.size() < 3 || o.temporal_dt.size() < 3)
        throw InvalidArgument("convergence study needs at least three levels");
    auto run = [&](int N, double dt) {
        SolverConfig c;
        c.grid = PeriodicGrid(o.L, N);
        c.spec = build_spectrum(SpectrumMode::flat, 0.0, 0.0, 0, o.L);
        c.params.n = o.n;
        c.dt0 = dt;
        c.dt_min = std::min(c.dt_min, dt);
        c.T = o.T;
        c.record_every = std::max(1, static_cast<int>(std::ceil(o.T / dt)));
        c.monitor_integrals = false;
        c.forcing = mms_forcing(c.grid, o.n, o.constant_target);
        return advance(c, mms_target(c.grid, 0.0, o.constant_target), RngStream(0, 0)).final_state.u;
    };
    auto max_diff = [](const GridFunction& a, const GridFunction& b) {
        double e = 0.0;
        for (int i = 0; i < a.size(); ++i)
            e = std::max(e, std::abs(a[i] - b[i]));
        return e;
    };
    const double roundoff = 1e-12 * (o.constant_target ? std::abs(*o.constant_target) : 2.5);

    MmsReport rep;
    for (int N : o.spatial_N) {
        const GridFunction u = run(N, o.spatial_dt);
        rep.spatial_dx.push_back(o.L / N);
        rep.spatial_error.push_back(max_diff(u, mms_target(u.grid(), o.T, o.constant_target)));
    }
    const double dt_ref = *std::min_element(o.temporal_dt.begin(), o.temporal_dt.end()) / o.reference_refinement;
    const GridFunction ref = run(o.temporal_N, dt_ref);
    for (double dt : o.temporal_dt) {
        rep.temporal_dt.push_back(dt);
        rep.temporal_error.push_back(max_diff(run(o.temporal_N, dt), ref));
    }
    auto order = [roundoff](const std::vector<double>& h, const std::vector<double>& e) -> std::optional<double> {
        if (std::all_of(e.begin(), e.end(), [roundoff](double x) { return x <= roundoff; }))
            return std::nullopt;
        return fitted_order(h, e);
    };
    rep.spatial_order = order(rep.spatial_dx, rep.spatial_error);
    rep.temporal_order = order(rep.temporal_dt, rep.temporal_error);
    return rep;
}

namespace {

class SupportObserver : public StepObserver {
public:
    SupportObserver(double center, double threshold) : center_(center), threshold_(threshold) {}

    void on_record(const TrajectoryState& s, const SeriesRecord& r) override
    {
        const PeriodicGrid& g = s.u.grid();
        const int N = g.size();
        const double h = g.dx();
        const int ic = g.wrap(static_cast<int>(std::lround(center_ / h)));
        const double xc = g.node(ic);
        if (!(s.u[ic] > threshold_)) {
            samples.push_back({r.time, 0.0, xc, xc});
            return;
        }
        int left = 0, right = 0;
        while (left + right + 1 < N && s.u.at(ic - left - 1) > threshold_)
            ++left;
        while (left + right + 1 < N && s.u.at(ic + right + 1) > threshold_)
            ++right;
        const double length = std::min(g.length(), (left + right + 1) * h);
        samples.push_back({r.time, length, xc - left * h, xc + right * h});
    }

    std::vector<SupportSample> samples;

private:
    double center_;
    double threshold_;
};

} // namespace

SupportReport support_diagnostic(const ExperimentSetup& setup, std::uint64_t seed, std::uint32_t trajectory_id)
{
    setup.solver.validate();
    const PeriodicGrid& g = setup.solver.grid;
    const RngStream stream(seed, trajectory_id);
    const GridFunction u0 = make_initial(setup.datum, g, &stream);
    const double threshold = setup.solver.support_threshold.value_or(setup.solver.delta + 1e-8 * u0.max());
    SupportObserver obs(setup.datum.center.value_or(0.5 * g.length()), threshold);
    SupportReport rep;
    try {
        const Trajectory t = advance(setup.solver, u0, stream, &obs);
        rep.frozen = t.final_state.frozen;
        rep.t_sigma = t.final_state.t_sigma;
    } catch (const StepFailure& e) {
        rep.failure = e.what();
        rep.frozen = e.partial().final_state.frozen;
        rep.t_sigma = e.partial().final_state.t_sigma;
    }
    rep.samples = std::move(obs.samples);
    return rep;
}

} // namespace stf
