#include "stf/io.hpp"

#include "stf/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace stf {

namespace {

// One JSON object level: typed lookups with defaults, a record of the keys
// seen, and the resolved copy of the level.
class Section {
public:
    Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            throw ConfigError(where() + " must be a JSON object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    double number(const std::string& key, double fallback)
    {
        const double v = has(key) ? read_number(key) : fallback;
        resolved_[key] = v;
        return v;
    }

    double required_number(const std::string& key)
    {
        if (!has(key))
            throw ConfigError("missing required config key '" + name(key) + "'");
        return number(key, 0.0);
    }

    std::optional<double> optional_number(const std::string& key)
    {
        if (!has(key))
            return std::nullopt;
        return number(key, 0.0);
    }

    int integer(const std::string& key, int fallback)
    {
        int v = fallback;
        if (has(key)) {
            seen_.insert(key);
            const Json& j = obj_.at(key);
            if (!j.is_number_integer())
                throw ConfigError("config key '" + name(key) + "' must be an integer");
            v = j.get<int>();
        }
        resolved_[key] = v;
        return v;
    }

    bool boolean(const std::string& key, bool fallback)
    {
        bool v = fallback;
        if (has(key)) {
            seen_.insert(key);
            const Json& j = obj_.at(key);
            if (!j.is_boolean())
                throw ConfigError("config key '" + name(key) + "' must be true or false");
            v = j.get<bool>();
        }
        resolved_[key] = v;
        return v;
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        std::string v = fallback;
        if (has(key)) {
            seen_.insert(key);
            const Json& j = obj_.at(key);
            if (!j.is_string())
                throw ConfigError("config key '" + name(key) + "' must be a string");
            v = j.get<std::string>();
        }
        resolved_[key] = v;
        return v;
    }

    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback)
    {
        std::vector<double> v = fallback;
        if (has(key)) {
            const Json& j = array(key);
            v.clear();
            for (const Json& e : j) {
                if (!e.is_number())
                    throw ConfigError("config key '" + name(key) + "' must be an array of numbers");
                v.push_back(e.get<double>());
            }
        }
        resolved_[key] = v;
        return v;
    }

    std::vector<int> integers(const std::string& key, const std::vector<int>& fallback)
    {
        std::vector<int> v = fallback;
        if (has(key)) {
            const Json& j = array(key);
            v.clear();
            for (const Json& e : j) {
                if (!e.is_number_integer())
                    throw ConfigError("config key '" + name(key) + "' must be an array of integers");
                v.push_back(e.get<int>());
            }
        }
        resolved_[key] = v;
        return v;
    }

    /// Sub-object; an absent key behaves like an empty object.
    Section child(const std::string& key)
    {
        seen_.insert(key);
        static const Json empty = Json::object();
        return Section(has(key) ? obj_.at(key) : empty, name(key));
    }

    void attach(const std::string& key, Json value) { resolved_[key] = std::move(value); }

    /// Rejects keys that were never looked up and returns the resolved level.
    Json finish() const
    {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.contains(key))
                throw ConfigError("unknown config key '" + name(key) + "'");
        return resolved_;
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "configuration" : "config key '" + path_ + "'"; }

    double read_number(const std::string& key)
    {
        seen_.insert(key);
        const Json& j = obj_.at(key);
        if (!j.is_number())
            throw ConfigError("config key '" + name(key) + "' must be a number");
        const double v = j.get<double>();
        if (!std::isfinite(v))
            throw ConfigError("config key '" + name(key) + "' must be finite");
        return v;
    }

    const Json& array(const std::string& key)
    {
        seen_.insert(key);
        const Json& j = obj_.at(key);
        if (!j.is_array())
            throw ConfigError("config key '" + name(key) + "' must be an array");
        return j;
    }

    const Json& obj_;
    std::string path_;
    std::set<std::string> seen_;
    Json resolved_ = Json::object();
};

// Runs a validation step, reporting library errors as configuration errors.
template <class F>
auto checked(F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
}

void require(bool ok, const std::string& message)
{
    if (!ok)
        throw ConfigError(message);
}

Json stats_json(const ColumnStats& s, const std::vector<double>& q)
{
    Json j{{"count", s.count}, {"mean", s.mean}, {"se", s.se}, {"min", s.min}, {"max", s.max}};
    Json m = Json::object();
    for (std::size_t k = 0; k < q.size() && k < s.moments.size(); ++k)
        m[format_double(q[k])] = {{"value", s.moments[k]}, {"se", s.moment_se[k]}};
    if (!q.empty())
        j["moments"] = m;
    return j;
}

Json failures_json(const std::vector<TrajectoryFailure>& f)
{
    Json a = Json::array();
    for (const TrajectoryFailure& x : f)
        a.push_back({{"id", x.id}, {"message", x.message}});
    return a;
}

std::string budget_name(BudgetKind k) { return k == BudgetKind::energy ? "energy" : "entropy"; }

} // namespace

RunConfig load_config(const Json& doc)
{
    RunConfig rc;
    Section root(doc, "");

    const double L = root.number("L", 1.0);
    const int N = root.integer("N", 64);
    const double n = root.required_number("n");
    const double p = root.number("p", 4.0);
    const double eps = root.number("epsilon", 0.0);
    const double delta = root.number("delta", 0.0);
    const double alpha = root.number("alpha", 1.25 - n);
    rc.mu = root.number("mu", 0.05);
    rc.eta = root.number("eta", 1e-3);
    require(eps >= 0.0, "config key 'epsilon' must be >= 0");
    require(delta >= 0.0, "config key 'delta' must be >= 0");

    SolverConfig& sc = rc.setup.solver;
    sc.grid = checked([&] { return PeriodicGrid(L, N); });
    sc.params.n = n;
    sc.params.p = p;
    sc.params.eps = eps;
    sc.delta = delta;
    sc.alpha = alpha;

    {
        Section noise = root.child("noise");
        const std::string mode = noise.text("mode", "power-decay");
        const double amplitude = noise.number("amplitude", 0.0);
        const double decay = noise.number("decay", 3.0);
        const int K = noise.integer("K", 0);
        sc.spec = checked([&] { return build_spectrum(parse_spectrum_mode(mode), amplitude, decay, K, L); });
        root.attach("noise", noise.finish());
    }

    sc.dt0 = root.number("dt0", 1e-4);
    sc.T = root.number("T", 0.1);
    sc.sigma_stop = root.number("sigma_stop", 1e-8);
    sc.dt_min = root.number("dt_min", 1e-12);
    sc.record_every = root.integer("record_every", 1);
    sc.pos_floor = root.number("pos_floor", 1e-10);
    sc.solver_tol = root.number("solver_tol", 1e-12);
    sc.dt_growth = root.number("dt_growth", 1.2);

    DerivedConstants& d = rc.derived;
    d.c_strat = checked([&] { return c_strat(sc.spec, n); });
    const SThresholds th = checked([&] { return s_thresholds(n, d.c_strat); });
    d.S_A3 = th.S_A3;
    d.S_A3star = th.S_A3star;
    if (root.has("S") && doc.at("S").is_number()) {
        d.S = root.number("S", 0.0);
    } else {
        Section s = root.child("S");
        const std::string mode = s.text("mode", "factor-above-A3star");
        if (mode == "factor-above-A3star")
            d.S = s.number("factor", 2.0) * th.S_A3star;
        else if (mode == "factor-above-A3")
            d.S = s.number("factor", 2.0) * th.S_A3;
        else if (mode == "value")
            d.S = s.required_number("value");
        else if (mode == "backward-ito")
            d.S = d.c_strat;
        else
            throw ConfigError("config key 'S.mode' must be one of factor-above-A3star, factor-above-A3, value, "
                              "backward-ito");
        root.attach("S", s.finish());
    }
    require(d.S >= 0.0, "config key 'S' must resolve to a nonnegative value");
    sc.params.c_strat = d.c_strat;
    sc.params.S = d.S;
    d.alpha = alpha;
    d.estimate = estimate_constants(n, d.S, d.c_strat, rc.mu, rc.eta);
    checked([&] {
        sc.validate();
        return 0;
    });

    {
        Section init = root.child("initial");
        InitialDatum& datum = rc.setup.datum;
        datum.kind = checked([&] { return parse_datum_kind(init.text("kind", "perturbed-constant")); });
        datum.height = init.number("height", 1.0);
        datum.width = init.number("width", 0.5 * L);
        datum.center = init.number("center", 0.5 * L);
        datum.amplitude = init.number("amplitude", 0.5);
        datum.randomize_height = init.boolean("randomize_height", false);
        datum.delta_shift = delta;
        root.attach("initial", init.finish());
        const RngStream probe(0, 0);
        const GridFunction u0 = checked([&] { return make_initial(datum, sc.grid, &probe); });
        require(!(eps > 0.0) || u0.min() > 0.0, "epsilon > 0 needs a strictly positive initial datum (set delta > 0)");
    }

    {
        Section ens = root.child("ensemble");
        rc.ensemble_count = ens.integer("count", 16);
        require(rc.ensemble_count >= 1, "config key 'ensemble.count' must be >= 1");
        root.attach("ensemble", ens.finish());
    }
    {
        Section mom = root.child("moments");
        rc.q = mom.numbers("q", {1.0, 2.0});
        require(!rc.q.empty(), "config key 'moments.q' must not be empty");
        for (double q : rc.q)
            require(q >= 1.0, "config key 'moments.q' entries must be >= 1");
        root.attach("moments", mom.finish());
    }
    {
        Section sw = root.child("sweep");
        rc.sweep.axis = checked([&] { return parse_sweep_axis(sw.text("axis", "eps")); });
        const std::vector<double> fallback = rc.sweep.axis == SweepAxis::eps ? std::vector<double>{1e-1, 1e-2, 1e-3}
                                                                             : std::vector<double>{0.2, 0.1, 0.05, 0.025};
        rc.sweep.values = sw.numbers("values", fallback);
        require(!rc.sweep.values.empty(), "config key 'sweep.values' must not be empty");
        for (double v : rc.sweep.values)
            require(v > 0.0, "config key 'sweep.values' entries must be positive");
        root.attach("sweep", sw.finish());
    }
    {
        Section b = root.child("budget");
        const std::string which = b.text("which", "energy");
        require(which == "energy" || which == "entropy", "config key 'budget.which' must be energy or entropy");
        rc.budget.kind = which == "energy" ? BudgetKind::energy : BudgetKind::entropy;
        rc.budget.refinement = b.boolean("refinement", true);
        root.attach("budget", b.finish());
    }
    {
        Section qv = root.child("qv");
        const std::string phi = qv.text("phi", "sine");
        require(phi == "sine" || phi == "constant", "config key 'qv.phi' must be sine or constant");
        rc.qv.phi = phi == "sine" ? TestFunction::sine : TestFunction::constant;
        rc.qv.mode = qv.integer("mode", 1);
        require(rc.qv.mode >= 1, "config key 'qv.mode' must be >= 1");
        root.attach("qv", qv.finish());
    }
    {
        Section in = root.child("inequalities");
        InequalityOptions& o = rc.inequalities;
        o.samples = in.integer("samples", 100);
        o.resolutions = in.integers("resolutions", {128, 256});
        o.max_mode = in.integer("max_mode", 4);
        o.onb_K = in.integer("onb_K", 8);
        o.onb_N = in.integer("onb_N", 128);
        o.L = L;
        o.n = n;
        o.p = p;
        o.eps = eps;
        require(o.samples >= 1, "config key 'inequalities.samples' must be >= 1");
        require(!o.resolutions.empty(), "config key 'inequalities.resolutions' must not be empty");
        require(o.max_mode >= 1, "config key 'inequalities.max_mode' must be >= 1");
        checked([&] {
            for (int r : o.resolutions)
                (void)PeriodicGrid(L, r);
            if (4 * o.onb_K >= o.onb_N)
                throw TruncationTooLarge("inequalities.onb_K must satisfy 4 K < onb_N");
            return 0;
        });
        root.attach("inequalities", in.finish());
    }
    {
        Section cv = root.child("convergence");
        MmsOptions& o = rc.convergence;
        o.L = L;
        o.n = n;
        o.T = cv.number("T", 0.1);
        o.constant_target = cv.optional_number("constant_target");
        o.spatial_N = cv.integers("spatial_N", {64, 128, 256});
        o.spatial_dt = cv.number("spatial_dt", 1e-5);
        o.temporal_N = cv.integer("temporal_N", 64);
        o.temporal_dt = cv.numbers("temporal_dt", {1e-3, 5e-4, 2.5e-4});
        o.reference_refinement = cv.integer("reference_refinement", 16);
        require(o.T > 0.0 && o.spatial_dt > 0.0, "config key 'convergence' needs positive T and spatial_dt");
        require(o.spatial_N.size() >= 3 && o.temporal_dt.size() >= 3,
                "config key 'convergence' needs at least three spatial and temporal levels");
        for (double dt : o.temporal_dt)
            require(dt > 0.0, "config key 'convergence.temporal_dt' entries must be positive");
        require(o.reference_refinement >= 2, "config key 'convergence.reference_refinement' must be >= 2");
        checked([&] {
            for (int r : o.spatial_N)
                (void)PeriodicGrid(L, r);
            (void)PeriodicGrid(L, o.temporal_N);
            return 0;
        });
        root.attach("convergence", cv.finish());
    }

    rc.resolved = root.finish();
    return rc;
}

RunConfig load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path.string() + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return load_config(doc);
}

std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string series_csv(const FunctionalSeries& series)
{
    std::ostringstream out;
    out << kSeriesHeader << '\n';
    for (const SeriesRecord& r : series) {
        const double row[] = {r.time,          r.mass,        r.energy, r.energy_eps, r.entropy,
                              r.alpha_entropy, r.dissipation, r.min_u,  r.max_u,      r.support_length};
        for (std::size_t i = 0; i < std::size(row); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
    return out.str();
}

Json to_json(const Trajectory& t)
{
    const TrajectoryState& s = t.final_state;
    Json j{{"final_time", s.t},
           {"frozen", s.frozen},
           {"t_sigma", s.t_sigma ? Json(*s.t_sigma) : Json(nullptr)},
           {"accepted_steps", t.step_stats.accepted},
           {"rejected_steps", t.step_stats.rejected},
           {"smallest_dt", t.step_stats.smallest_dt},
           {"degenerate", t.degenerate},
           {"failure", t.failure.empty() ? Json(nullptr) : Json(t.failure)},
           {"records", t.series.size()}};
    if (!t.series.empty()) {
        Json integrals = Json::object();
        for (int m = 0; m < kMonitorCount; ++m)
            integrals[std::string(monitor_name(static_cast<Monitor>(m)))] =
                t.series.back().integrals[static_cast<std::size_t>(m)];
        j["final_integrals"] = integrals;
    }
    return j;
}

Json to_json(const EnsembleSummary& s)
{
    Json cols = Json::object();
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
        Json mean = Json::array(), se = Json::array(), mn = Json::array(), mx = Json::array();
        Json moments = Json::object();
        for (std::size_t t = 0; t < s.times.size(); ++t) {
            const ColumnStats& x = s.at_time[t][c];
            mean.push_back(x.mean);
            se.push_back(x.se);
            mn.push_back(x.min);
            mx.push_back(x.max);
            for (std::size_t k = 0; k < s.q.size(); ++k)
                moments[format_double(s.q[k])].push_back(x.moments[k]);
        }
        cols[s.columns[c]] = {{"mean", mean}, {"se", se}, {"min", mn}, {"max", mx}, {"moments", moments}};
    }
    Json sup = Json::object();
    for (std::size_t c = 0; c < s.columns.size(); ++c)
        sup[s.columns[c]] = stats_json(s.sup[c], s.q);
    return Json{{"count", s.count},
                {"frozen", s.frozen},
                {"degenerate", s.degenerate},
                {"failures", failures_json(s.failures)},
                {"q", s.q},
                {"times", s.times},
                {"columns", cols},
                {"sup_over_time", sup},
                {"positivity",
                 {{"min_u_all_steps", s.min_u_all}, {"Cbar_p", stats_json(s.cbar, {})}, {"C_p", stats_json(s.cp, {})}}}};
}

Json to_json(const BudgetReport& r)
{
    return Json{{"which", budget_name(r.kind)},
                {"count", r.count},
                {"failures", failures_json(r.failures)},
                {"times", r.times},
                {"mean_residual", r.mean_residual},
                {"se_residual", r.se_residual},
                {"mean_functional", r.mean_functional},
                {"max_abs_mean_over_se", r.max_abs_over_se},
                {"within_3se", r.within_3se}};
}

Json to_json(const BudgetRefinement& r)
{
    return Json{{"residual_dt", r.residual_coarse}, {"residual_half_dt", r.residual_fine}, {"ratio", r.ratio}};
}

Json to_json(const QvReport& r)
{
    return Json{{"count", r.count},
                {"failures", failures_json(r.failures)},
                {"times", r.times},
                {"mean_martingale", r.mean_martingale},
                {"se_martingale", r.se_martingale},
                {"max_abs_martingale", r.max_abs_martingale},
                {"qv_empirical", r.qv_empirical},
                {"qv_formula", r.qv_formula},
                {"qv_gap", r.qv_gap},
                {"qv_se_ratio", r.qv_se_ratio},
                {"qv_gap_tolerance", r.qv_gap_tolerance},
                {"mean_within_3se", r.mean_within_3se},
                {"qv_within_tolerance", r.qv_within_tolerance}};
}

Json to_json(const SweepReport& r)
{
    Json stats = Json::array();
    for (const SweepStatistic& s : r.statistics)
        stats.push_back({{"name", s.name}, {"q", s.q}, {"values", s.values}, {"ratio", s.ratio}, {"gated", s.gated}});
    return Json{{"axis", to_string(r.axis)},
                {"axis_values", r.axis_values},
                {"statistics", stats},
                {"degenerate", r.degenerate},
                {"failed", r.failed},
                {"max_gated_ratio", r.max_gated_ratio},
                {"ratio_limit", r.ratio_limit},
                {"pass", r.pass}};
}

Json to_json(const InequalityReport& r)
{
    Json bernis = Json::array(), positivity = Json::array();
    for (const ResolutionBattery& b : r.resolutions) {
        bernis.push_back({{"N", b.N},
                          {"max_ratio_uniform_cutoff", b.max_ratio_uniform},
                          {"max_ratio_compact_cutoff", b.max_ratio_cutoff},
                          {"all_finite", b.all_finite}});
        positivity.push_back(
            {{"N", b.N}, {"max_C_p", b.max_cp}, {"min_Cbar_p", b.min_cbar}, {"all_finite", b.positivity_finite}});
    }
    return Json{{"bernis_ratios", bernis},
                {"max_ratio_spread", r.max_ratio_spread},
                {"onb_max_dev", r.onb_max_dev},
                {"positivity_constants", positivity}};
}

Json to_json(const MmsReport& r)
{
    auto order = [](const std::optional<double>& o) { return o ? Json(*o) : Json("exact"); };
    return Json{{"spatial", {{"dx", r.spatial_dx}, {"error", r.spatial_error}, {"order", order(r.spatial_order)}}},
                {"temporal", {{"dt", r.temporal_dt}, {"error", r.temporal_error}, {"order", order(r.temporal_order)}}}};
}

Json to_json(const SupportReport& r)
{
    Json samples = Json::array();
    for (const SupportSample& s : r.samples)
        samples.push_back({{"time", s.time}, {"length", s.length}, {"left", s.left}, {"right", s.right}});
    return Json{{"samples", samples},
                {"frozen", r.frozen},
                {"t_sigma", r.t_sigma ? Json(*r.t_sigma) : Json(nullptr)},
                {"failure", r.failure.empty() ? Json(nullptr) : Json(r.failure)}};
}

Json to_json(const DerivedConstants& d)
{
    return Json{{"c_strat", d.c_strat},
                {"S", d.S},
                {"S_A3", d.S_A3},
                {"S_A3star", d.S_A3star},
                {"alpha", d.alpha},
                {"estimate_c1", d.estimate.c1},
                {"estimate_c2", d.estimate.c2},
                {"estimate_admissible", d.estimate.admissible}};
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out)
        throw Error("failed writing '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

} // namespace stf
