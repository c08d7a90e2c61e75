#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "barriersim/experiment.hpp"

using nlohmann::json;
using namespace barriersim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = -1;
    std::optional<int> replications;

    std::optional<int> workers, k, l;
    std::optional<std::string> mode;
    std::optional<double> rate, utilization, arrival_rate, p_bem;
    std::optional<std::uint64_t> sim_jobs;
    std::optional<double> quantile;
    bool simulate_stability = false;
    std::optional<std::string> convention;
    bool dump_pi = false;
    std::vector<double> epsilons;
    std::optional<std::string> bound_case;
    std::optional<double> sigma_A;
    std::optional<int> curve_points;
    std::optional<double> interval;
    std::optional<std::uint64_t> samples;
    std::optional<int> points;
    std::string figure;
    bool dump_config = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--jobs", o.threads, "worker threads for sweeps (0: available parallelism)");
}

void add_system(CLI::App* sub, Overrides& o) {
    sub->add_option("--workers,-s", o.workers, "number of workers");
    sub->add_option("--k,-k", o.k, "tasks per job");
    sub->add_option("--l,-l", o.l, "task completions that end a job");
    sub->add_option("--mode", o.mode, "barrier mode")->check(CLI::IsMember({"one", "two"}));
    sub->add_option("--rate,--mu", o.rate, "task service rate");
}

void add_arrivals(CLI::App* sub, Overrides& o) {
    auto* u = sub->add_option("--utilization,--rho", o.utilization, "target utilization");
    auto* a = sub->add_option("--arrival-rate,--lambda", o.arrival_rate, "Poisson arrival rate");
    u->excludes(a);
}

ExperimentConfig build_config(Command command, const Overrides& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : parse_config_file(o.config);
    cfg.command = command;

    json params = json::object();
    if (o.workers) params["workers"] = *o.workers;
    if (o.k) params["k"] = *o.k;
    if (o.l) params["l"] = *o.l;
    if (o.mode) params["barrier_mode"] = *o.mode;
    if (o.rate) params["service_rate"] = *o.rate;
    if (o.p_bem) params["p_bem"] = *o.p_bem;
    if (o.arrival_rate) params["arrival_rate"] = *o.arrival_rate;
    if (o.utilization) params["utilization"] = *o.utilization;
    if (o.sim_jobs) params["jobs"] = *o.sim_jobs;
    if (!params.empty()) {
        try {
            cfg = apply_point(cfg, params);
        } catch (const std::invalid_argument& e) {
            throw ConfigError({e.what()});
        }
    }

    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.replications) cfg.replications = *o.replications;
    if (o.quantile) cfg.simulation.quantile = *o.quantile;
    if (o.simulate_stability) cfg.stability.simulate = true;
    if (o.convention) cfg.ctmc.convention = *o.convention == "literal" ? ctmc::RateConvention::Literal : ctmc::RateConvention::PerTask;
    if (o.dump_pi) cfg.ctmc.dump_pi = true;
    if (!o.epsilons.empty()) cfg.bounds.epsilons = o.epsilons;
    if (o.bound_case) cfg.bounds.kind = *o.bound_case == "G" ? snc::BoundCase::G : snc::BoundCase::GI;
    if (o.sigma_A) cfg.bounds.sigma_A = *o.sigma_A;
    if (o.curve_points) cfg.bounds.curve_points = *o.curve_points;
    if (o.interval) {
        if (!cfg.system.overhead) cfg.system.overhead = OverheadConfig{};
        cfg.system.overhead->interval = *o.interval;
    }
    if (o.samples) cfg.overhead_curve.samples = *o.samples;
    if (o.points) cfg.overhead_curve.points = *o.points;

    if (auto issues = validate_experiment(cfg); !issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

ExperimentConfig preset(const std::string& id) {
    try {
        return figure_preset(id);
    } catch (const std::invalid_argument& e) {
        throw ConfigError({e.what()});
    }
}

int run_figure(const Overrides& o) {
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        const ExperimentConfig base = parse_config_file(o.config);
        if (!base.figure && o.figure.empty()) throw ConfigError({"figure: no preset id given"});
        cfg = preset(o.figure.empty() ? *base.figure : o.figure);
        cfg.seed = base.seed;
        cfg.output_dir = base.output_dir;
        cfg.threads = base.threads;
    } else {
        if (o.figure.empty()) throw ConfigError({"figure: no preset id given (--figure)"});
        cfg = preset(o.figure);
    }
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads >= 0) cfg.threads = o.threads;
    if (o.replications) cfg.replications = *o.replications;
    if (o.dump_config) {
        std::cout << to_json(cfg).dump(2) << '\n';
        return kExitOk;
    }
    const auto outcome = run_sweep(cfg, cfg.threads);
    std::cout << json{{"succeeded", outcome.succeeded}, {"failed", outcome.failed}, {"manifest", outcome.manifest_path}}.dump(2)
              << '\n';
    return outcome.failed ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Barrier-mode parallel queueing: simulation, stability, Markov chain and bound tools"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));
    Overrides o;

    auto* simulate = app.add_subcommand("simulate", "simulate the queue and write per-job records and a summary");
    add_common(simulate, o);
    add_system(simulate, o);
    add_arrivals(simulate, o);
    simulate->add_option("--sim-jobs", o.sim_jobs, "arrivals per replication");
    simulate->add_option("--replications", o.replications, "number of replications");
    simulate->add_option("--quantile", o.quantile, "quantile level reported in the summary");

    auto* stability = app.add_subcommand("stability", "stability limits for a system");
    add_common(stability, o);
    add_system(stability, o);
    stability->add_flag("--simulate", o.simulate_stability, "also estimate the limit by simulation");

    auto* ctmc_cmd = app.add_subcommand("ctmc", "solve the 1-barrier (s,k,l) Markov chain");
    add_common(ctmc_cmd, o);
    add_system(ctmc_cmd, o);
    ctmc_cmd->add_option("--convention", o.convention, "transition rate convention")
        ->check(CLI::IsMember({"per_task", "literal"}));
    ctmc_cmd->add_flag("--dump-pi", o.dump_pi, "write the stationary distribution as CSV");

    auto* bounds = app.add_subcommand("bounds", "waiting and sojourn quantile bounds");
    add_common(bounds, o);
    add_system(bounds, o);
    add_arrivals(bounds, o);
    bounds->add_option("--p-bem", o.p_bem, "share of barrier jobs in a barrier/non-barrier mix");
    bounds->add_option("--epsilon", o.epsilons, "violation probabilities");
    bounds->add_option("--case", o.bound_case, "arrival envelope case")->check(CLI::IsMember({"GI", "G"}));
    bounds->add_option("--sigma-A", o.sigma_A, "arrival burst term for the G case");
    bounds->add_option("--curve-points", o.curve_points, "points on the CDF curves (0: none)");

    auto* overhead = app.add_subcommand("overhead", "overhead distribution curve and samples");
    add_common(overhead, o);
    add_arrivals(overhead, o);
    overhead->add_option("--interval", o.interval, "polling interval in seconds");
    overhead->add_option("--samples", o.samples, "number of samples to dump");
    overhead->add_option("--points", o.points, "points on the curve");

    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep from a config file");
    add_common(sweep, o);
    sweep->add_option("--replications", o.replications, "replications per simulated grid point");

    auto* figure = app.add_subcommand("figure", "run a figure preset sweep");
    add_common(figure, o);
    figure->add_option("--figure", o.figure, "preset id")->check(CLI::IsMember(figure_ids()));
    figure->add_option("--replications", o.replications, "replications per simulated grid point");
    figure->add_flag("--dump-config", o.dump_config, "print the preset config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (figure->parsed()) return run_figure(o);
        if (sweep->parsed()) {
            if (o.config.empty()) throw ConfigError({"sweep: --config is required"});
            const ExperimentConfig cfg = build_config(Command::Sweep, o);
            const auto outcome = run_sweep(cfg, cfg.threads);
            std::cout << json{{"succeeded", outcome.succeeded}, {"failed", outcome.failed},
                              {"manifest", outcome.manifest_path}}
                             .dump(2)
                      << '\n';
            return outcome.failed ? kExitPartial : kExitOk;
        }
        if (simulate->parsed()) {
            std::cout << run_simulate(build_config(Command::Simulate, o)).dump(2) << '\n';
        } else if (stability->parsed()) {
            const json summary = run_stability(build_config(Command::Stability, o));
            std::cout << stability_report(summary);
        } else if (ctmc_cmd->parsed()) {
            std::cout << run_ctmc(build_config(Command::Ctmc, o)).dump(2) << '\n';
        } else if (bounds->parsed()) {
            std::cout << run_bounds(build_config(Command::Bounds, o)).dump(2) << '\n';
        } else if (overhead->parsed()) {
            std::cout << run_overhead(build_config(Command::Overhead, o)).dump(2) << '\n';
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& issue : e.issues()) std::cerr << "  " << issue << '\n';
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
