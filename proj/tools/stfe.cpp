// stfe: command-line front end for the stochastic thin-film experiments.
//
//   stfe <subcommand> --config c.json [--seed U64] [--out DIR] [--threads INT]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure (outputs
// written so far are kept).

#include "stf/errors.hpp"
#include "stf/experiments.hpp"
#include "stf/io.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>

namespace fs = std::filesystem;
using stf::Json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunIdentity {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = ".";
    int threads = 1;
};

struct Context {
    const stf::RunConfig& cfg;
    const RunIdentity& id;
    fs::path out;
};

// Summary skeleton shared by every subcommand; reports are merged in at top level.
Json summary_head(const std::string& command, const Context& ctx)
{
    return Json{{"command", command}, {"seed", ctx.id.seed}, {"derived", stf::to_json(ctx.cfg.derived)}};
}

void merge(Json& into, const Json& report)
{
    for (const auto& [key, value] : report.items())
        into[key] = value;
}

int finish(const Context& ctx, const Json& summary, bool failed)
{
    stf::write_json(ctx.out / "summary.json", summary);
    return failed ? kExitNumerical : 0;
}

void write_series(const Context& ctx, const std::vector<stf::Trajectory>& trajectories)
{
    for (std::size_t j = 0; j < trajectories.size(); ++j)
        stf::write_text(ctx.out / ("series_" + std::to_string(j) + ".csv"), stf::series_csv(trajectories[j].series));
}

int run_simulate(const Context& ctx)
{
    const stf::EnsembleRun run = stf::run_ensemble(ctx.cfg.setup, 1, ctx.id.seed, ctx.cfg.q, 1);
    write_series(ctx, run.trajectories);
    Json s = summary_head("simulate", ctx);
    s["trajectory"] = stf::to_json(run.trajectories.front());
    return finish(ctx, s, !run.summary.failures.empty());
}

int run_ensemble(const Context& ctx)
{
    const stf::EnsembleRun run =
        stf::run_ensemble(ctx.cfg.setup, ctx.cfg.ensemble_count, ctx.id.seed, ctx.cfg.q, ctx.id.threads);
    write_series(ctx, run.trajectories);
    Json s = summary_head("ensemble", ctx);
    merge(s, stf::to_json(run.summary));
    return finish(ctx, s, !run.summary.failures.empty());
}

int run_sweep(const Context& ctx)
{
    const stf::SweepReport rep = stf::estimate_sweep(ctx.cfg.setup, ctx.cfg.ensemble_count, ctx.id.seed,
                                                     ctx.cfg.sweep.axis, ctx.cfg.sweep.values, ctx.cfg.q,
                                                     ctx.id.threads);
    Json s = summary_head("sweep", ctx);
    merge(s, stf::to_json(rep));
    bool failed = false;
    for (int f : rep.failed)
        failed = failed || f > 0;
    return finish(ctx, s, failed);
}

int run_budget(const Context& ctx)
{
    const stf::BudgetReport rep = stf::ito_budget(ctx.cfg.setup, ctx.cfg.ensemble_count, ctx.id.seed,
                                                  ctx.cfg.budget.kind, ctx.id.threads);
    Json s = summary_head("budget", ctx);
    merge(s, stf::to_json(rep));
    // Written before the refinement study so a failure there keeps the ensemble result.
    stf::write_json(ctx.out / "summary.json", s);
    if (ctx.cfg.budget.refinement)
        s["refinement"] = stf::to_json(stf::budget_refinement(ctx.cfg.setup, ctx.cfg.budget.kind));
    return finish(ctx, s, !rep.failures.empty());
}

int run_qv(const Context& ctx)
{
    const stf::QvReport rep = stf::martingale_qv_test(ctx.cfg.setup, ctx.cfg.ensemble_count, ctx.id.seed,
                                                      ctx.cfg.qv.phi, ctx.cfg.qv.mode, ctx.id.threads);
    Json s = summary_head("qv-test", ctx);
    s["phi"] = ctx.cfg.qv.phi == stf::TestFunction::sine ? "sine" : "constant";
    s["mode"] = ctx.cfg.qv.mode;
    merge(s, stf::to_json(rep));
    return finish(ctx, s, !rep.failures.empty());
}

int run_inequalities(const Context& ctx)
{
    stf::InequalityOptions opts = ctx.cfg.inequalities;
    opts.seed = ctx.id.seed;
    const stf::InequalityReport rep = stf::inequality_battery(opts, ctx.id.threads);
    Json s = summary_head("inequalities", ctx);
    merge(s, stf::to_json(rep));
    return finish(ctx, s, false);
}

int run_convergence(const Context& ctx)
{
    const stf::MmsReport rep = stf::mms_convergence(ctx.cfg.convergence);
    Json s = summary_head("convergence", ctx);
    merge(s, stf::to_json(rep));
    return finish(ctx, s, false);
}

bool is_config_error(const stf::Error& e)
{
    return dynamic_cast<const stf::ConfigError*>(&e) || dynamic_cast<const stf::InvalidArgument*>(&e) ||
           dynamic_cast<const stf::MobilityOutOfRange*>(&e) || dynamic_cast<const stf::DecayTooWeak*>(&e) ||
           dynamic_cast<const stf::TruncationTooLarge*>(&e) || dynamic_cast<const stf::AlphaSingular*>(&e) ||
           dynamic_cast<const stf::AlphaOutOfRange*>(&e);
}

} // namespace

int main(int argc, char** argv)
{
    const std::map<std::string, std::function<int(const Context&)>> commands{
        {"simulate", run_simulate},   {"ensemble", run_ensemble},         {"sweep", run_sweep},
        {"budget", run_budget},       {"qv-test", run_qv},                {"inequalities", run_inequalities},
        {"convergence", run_convergence},
    };

    CLI::App app{"Stochastic thin-film experiments"};
    app.require_subcommand(1);
    RunIdentity id;
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", id.config, "JSON configuration file")->required();
        sub->add_option("--seed", id.seed, "base seed of the random streams");
        sub->add_option("--out", id.out, "output directory");
        sub->add_option("--threads", id.threads, "worker threads (results do not depend on it)")
            ->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    stf::RunConfig cfg;
    try {
        cfg = stf::load_config_file(id.config);
    } catch (const stf::Error& e) {
        std::cerr << "stfe: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        const Context ctx{cfg, id, fs::path(id.out)};
        fs::create_directories(ctx.out);
        stf::write_json(ctx.out / "resolved_config.json", cfg.resolved);
        const int code = commands.at(command)(ctx);
        if (code == kExitNumerical)
            std::cerr << "stfe: " << command << ": some trajectories failed; see summary.json\n";
        return code;
    } catch (const stf::Error& e) {
        std::cerr << "stfe: " << command << ": " << e.what() << '\n';
        return is_config_error(e) ? kExitConfig : kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "stfe: " << command << ": " << e.what() << '\n';
        return kExitNumerical;
    }
}
