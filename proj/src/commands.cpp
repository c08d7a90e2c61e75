#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "barriersim/experiment.hpp"
#include "barriersim/stability.hpp"

namespace barriersim {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const JobClass& single_class(const WorkloadSpec& spec, const char* command) {
    if (spec.classes.size() != 1) throw std::invalid_argument(std::string(command) + " expects exactly one job class");
    return spec.classes.front();
}

int fixed_k(const JobClass& cls, const char* command) {
    if (!cls.k_dist.is_fixed()) throw std::invalid_argument(std::string(command) + " expects a fixed task count");
    return cls.k_dist.max_k();
}

json aggregate(const std::vector<json>& reps, const std::vector<std::string>& keys) {
    json out = json::object();
    for (const auto& key : keys) {
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        int n = 0;
        for (const auto& r : reps) {
            if (!r.contains(key) || !r[key].is_number()) continue;
            const double v = r[key].get<double>();
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++n;
        }
        if (n > 0) out[key] = {{"mean", sum / n}, {"min", lo}, {"max", hi}};
    }
    return out;
}

}  // namespace

SimResult simulate_replication(const ExperimentConfig& cfg, std::uint64_t seed, bool keep_records) {
    const WorkloadSpec spec = cfg.workload();
    RunOptions opts;
    opts.horizon = cfg.simulation.time ? Horizon::sim_time(*cfg.simulation.time) : Horizon::job_count(cfg.simulation.jobs);
    opts.warmup_jobs = cfg.simulation.warmup;
    opts.keep_records = keep_records;
    opts.drift = cfg.stability.probe.drift;
    return run(cfg.system, spec, opts, root_stream(seed));
}

json simulation_summary(const SimResult& r, const SimulationSettings& settings) {
    json s;
    s["jobs_arrived"] = r.jobs_arrived;
    s["measured_jobs"] = r.measured_jobs();
    s["end_time"] = r.end_time;
    s["busy_fraction"] = r.busy_fraction;
    s["drift"] = {{"slope", r.drift.slope}, {"final_queue", r.drift.final_queue}, {"unstable", r.drift.unstable}};
    if (r.measured_jobs() == 0) return s;
    s["mean_waiting"] = r.mean_waiting();
    s["mean_sojourn"] = r.mean_sojourn();
    s["mean_total_server_time"] = r.mean_total_server_time();
    s["mean_useful_server_time"] = r.mean_useful_server_time();
    s["useful_fraction"] = r.total_server_time > 0.0 ? r.useful_server_time / r.total_server_time : kNaN;
    s["q_level"] = settings.quantile;
    s["q_waiting"] = empirical_quantile(r.waiting, settings.quantile);
    s["q_sojourn"] = empirical_quantile(r.sojourn, settings.quantile);
    json qw = json::object(), qs = json::object();
    for (double p : {0.5, 0.9, 0.99}) {
        std::ostringstream key;
        key << p;
        qw[key.str()] = empirical_quantile(r.waiting, p);
        qs[key.str()] = empirical_quantile(r.sojourn, p);
    }
    s["waiting_quantiles"] = qw;
    s["sojourn_quantiles"] = qs;
    return s;
}

json run_simulate(const ExperimentConfig& cfg) {
    ensure_directory(cfg.output_dir);
    const OutputMeta meta = make_meta(cfg, cfg.seed);
    std::vector<json> reps;
    for (int r = 0; r < cfg.replications; ++r) {
        const std::uint64_t seed = replication_seed(cfg.seed, r);
        const SimResult res = simulate_replication(cfg, seed, cfg.simulation.write_jobs);
        json summary = simulation_summary(res, cfg.simulation);
        summary["replication"] = r;
        summary["seed"] = seed;
        if (cfg.simulation.write_jobs) {
            const std::string name = "jobs_r" + std::to_string(r) + ".csv";
            CsvWriter csv(join_path(cfg.output_dir, name), OutputMeta{meta.command, meta.config_hash, seed},
                          {"n", "class", "k", "arrival", "waiting", "sojourn", "preempted", "total_server_time",
                           "useful_server_time"});
            for (const auto& rec : res.records)
                csv.row({static_cast<std::int64_t>(rec.n), static_cast<std::int64_t>(rec.class_id),
                         static_cast<std::int64_t>(rec.k), rec.arrival, rec.waiting(), rec.sojourn(),
                         static_cast<std::int64_t>(rec.preempted), rec.total_server_time, rec.useful_server_time});
            csv.close();
            summary["jobs_csv"] = name;
            const std::string qname = "queue_r" + std::to_string(r) + ".csv";
            CsvWriter q(join_path(cfg.output_dir, qname), OutputMeta{meta.command, meta.config_hash, seed},
                        {"time", "queue_length"});
            for (const auto& sample : res.queue_series)
                q.row({sample.time, static_cast<std::int64_t>(sample.length)});
            q.close();
            summary["queue_csv"] = qname;
        }
        reps.push_back(std::move(summary));
    }
    json body;
    body["config"] = to_json(cfg);
    const WorkloadSpec spec = cfg.workload();
    body["arrival_rate"] = spec.arrival_rate();
    body["utilization"] = spec.has_poisson_arrivals() ? json(utilization(spec, cfg.system)) : json(nullptr);
    body["replications"] = reps;
    body["aggregate"] = aggregate(reps, {"mean_waiting", "mean_sojourn", "q_waiting", "q_sojourn", "busy_fraction",
                                         "mean_total_server_time", "mean_useful_server_time", "useful_fraction"});
    write_json(join_path(cfg.output_dir, "summary.json"), meta, body);
    return body;
}

json run_stability(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    const JobClass& cls = single_class(spec, "stability");
    const int s = cfg.system.workers;
    const int k = fixed_k(cls, "stability");
    json out;
    out["s"] = s;
    out["k"] = k;
    out["l"] = cfg.system.skl ? json(cfg.system.skl->l) : json(nullptr);
    out["mode"] = to_string(cfg.system.mode);
    if (cls.service.is_exponential() && cls.has_start_barrier) {
        const double mu = cls.service.exponential_rate();
        out["mu"] = mu;
        const double one = max_util_1barrier(s, k);
        out["one_barrier"] = {{"rho_max", one}, {"lambda_max", one * s * mu / k}};
        const auto two = two_barrier_stability(s, k, mu);
        out["two_barrier"] = {{"rho_max", two.rho_max},
                              {"lambda_max", two.lambda_max},
                              {"concurrent_jobs", two.concurrent_jobs},
                              {"idle_workers", two.idle_workers}};
        if (cfg.system.skl) {
            const int l = cfg.system.skl->l;
            const auto skl = skl_2barrier(s, k, l, mu);
            out["skl_two_barrier"] = {{"rho_total", skl.rho_skl},
                                      {"rho_useful", skl.rho_useful},
                                      {"lambda_max", skl.lambda_max},
                                      {"k_divides_s", skl.k_divides_s}};
            try {
                const auto u = ctmc::max_utilization_1barrier_skl(s, k, l, mu, cfg.ctmc.convention, cfg.ctmc.state_cap);
                out["skl_one_barrier"] = {{"rho_total", u.rho_total},
                                          {"rho_useful", u.rho_useful},
                                          {"lambda_max", u.throughput},
                                          {"states", u.states}};
            } catch (const std::exception& e) {
                out["skl_one_barrier"] = {{"error", e.what()}};
            }
        }
    } else {
        out["closed_form"] = "requires exponential service and a barrier class";
    }
    if (cfg.stability.simulate) {
        const auto est = estimate_max_stable_utilization(cfg.system, cls, cfg.stability.probe, root_stream(cfg.seed));
        out["simulated"] = {{"rho_max", est.rho},
                            {"lo", est.lo},
                            {"hi", est.hi},
                            {"conclusive", est.conclusive},
                            {"lambda_max", est.lambda_max(s)},
                            {"server_time_per_job", est.server_time_per_job},
                            {"probes", est.probes.size()}};
    }
    ensure_directory(cfg.output_dir);
    write_json(join_path(cfg.output_dir, "stability.json"), make_meta(cfg, cfg.seed), out);
    return out;
}

std::string stability_report(const json& st) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    os << "s=" << st["s"] << " k=" << st["k"];
    if (!st["l"].is_null()) os << " l=" << st["l"];
    os << " mode=" << st["mode"].get<std::string>() << "\n";
    auto line = [&](const char* label, const char* section, const char* key) {
        if (!st.contains(section)) return;
        const json& n = st[section];
        if (n.contains("error")) {
            os << "  " << std::left << std::setw(26) << label << "error: " << n["error"].get<std::string>() << "\n";
            return;
        }
        os << "  " << std::left << std::setw(26) << label << std::right << std::setw(10) << n[key].get<double>();
        if (n.contains("rho_useful")) os << "  useful " << n["rho_useful"].get<double>();
        if (n.contains("lambda_max")) os << "  lambda_max " << n["lambda_max"].get<double>();
        os << "\n";
    };
    os << "  maximum stable utilization\n";
    line("1-barrier", "one_barrier", "rho_max");
    line("2-barrier", "two_barrier", "rho_max");
    line("(s,k,l) 2-barrier", "skl_two_barrier", "rho_total");
    line("(s,k,l) 1-barrier (ctmc)", "skl_one_barrier", "rho_total");
    if (st.contains("closed_form")) os << "  closed forms: " << st["closed_form"].get<std::string>() << "\n";
    if (st.contains("simulated")) {
        const json& sim = st["simulated"];
        os << "  " << std::left << std::setw(26) << "simulated" << std::right << std::setw(10)
           << sim["rho_max"].get<double>() << "  bracket [" << sim["lo"].get<double>() << ", "
           << sim["hi"].get<double>() << "]" << (sim["conclusive"].get<bool>() ? "" : "  inconclusive") << "\n";
    }
    return os.str();
}

json run_ctmc(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    const JobClass& cls = single_class(spec, "ctmc");
    if (cfg.system.mode != BarrierMode::OneBarrier) throw std::invalid_argument("ctmc models the 1-barrier system");
    if (!cls.service.is_exponential()) throw std::invalid_argument("ctmc requires exponential task service");
    const int s = cfg.system.workers;
    const int k = fixed_k(cls, "ctmc");
    const int l = cfg.system.skl ? cfg.system.skl->l : k;
    const double mu = cls.service.exponential_rate();
    const ctmc::CtmcModel model = ctmc::solve_model(s, k, l, mu, cfg.ctmc.convention, cfg.ctmc.state_cap);
    const JobServerTime job = expected_job_server_time(k, l, mu);
    json out{{"s", s},
             {"k", k},
             {"l", l},
             {"mu", mu},
             {"rate_convention", ctmc::to_string(cfg.ctmc.convention)},
             {"states", model.states.size()},
             {"throughput", model.throughput},
             {"rho_total", model.throughput * job.total / s},
             {"rho_useful", model.throughput * job.useful / s},
             {"residual", ctmc::balance_residual(model, model.pi)}};
    ensure_directory(cfg.output_dir);
    const OutputMeta meta = make_meta(cfg, cfg.seed);
    if (cfg.ctmc.dump_pi) {
        std::vector<std::string> cols;
        for (int r = k - l + 1; r <= k; ++r) cols.push_back("c" + std::to_string(r));
        cols.push_back("running_tasks");
        cols.push_back("pi");
        CsvWriter csv(join_path(cfg.output_dir, "ctmc_pi.csv"), meta, cols);
        for (std::size_t i = 0; i < model.states.size(); ++i) {
            std::vector<CsvCell> row;
            for (int c : model.states[i].counts) row.emplace_back(static_cast<std::int64_t>(c));
            row.emplace_back(static_cast<std::int64_t>(model.states[i].running_tasks()));
            row.emplace_back(model.pi[i]);
            csv.row(row);
        }
        csv.close();
        out["pi_csv"] = "ctmc_pi.csv";
    }
    write_json(join_path(cfg.output_dir, "ctmc.json"), meta, out);
    return out;
}

json run_bounds(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    if (!spec.has_poisson_arrivals()) throw std::invalid_argument("bounds require Poisson arrivals");
    const snc::ServiceProcessSpec sp = service_process(cfg);
    const snc::ArrivalSpec arrival{spec.arrival_rate(), cfg.bounds.kind, cfg.bounds.sigma_A};
    json out;
    out["lambda"] = arrival.lambda;
    out["utilization"] = utilization(spec, cfg.system);
    out["s"] = sp.s;
    out["mu"] = sp.mu;
    out["k_max"] = sp.k_max();
    out["case"] = snc::to_string(arrival.kind);
    out["mean_omega"] = snc::mean_Omega(sp);
    out["theta_star"] = snc::theta_star(arrival, sp);
    json results = json::array();
    double tau_max = 0.0;
    for (double eps : cfg.bounds.epsilons) {
        const auto w = snc::waiting_quantile(eps, arrival, sp, cfg.bounds.grid_points);
        const auto t = snc::sojourn_quantile(eps, arrival, sp, cfg.bounds.grid_points);
        tau_max = std::max(tau_max, t.tau);
        results.push_back({{"epsilon", eps},
                           {"waiting", {{"tau", w.tau}, {"theta", w.theta}, {"alpha", number_or_null(w.alpha)}}},
                           {"sojourn",
                            {{"tau", t.tau},
                             {"theta", t.theta},
                             {"alpha", number_or_null(t.alpha)},
                             {"quadrature_fallback", t.quadrature_fallback}}}});
    }
    out["results"] = results;
    ensure_directory(cfg.output_dir);
    const OutputMeta meta = make_meta(cfg, cfg.seed);
    if (cfg.bounds.curve_points > 0) {
        std::vector<double> taus;
        const int n = cfg.bounds.curve_points;
        for (int i = 0; i < n; ++i) taus.push_back(1.5 * tau_max * i / std::max(1, n - 1));
        const auto wc = snc::waiting_cdf_curve(taus, arrival, sp);
        const auto sc = snc::sojourn_cdf_curve(taus, arrival, sp);
        CsvWriter csv(join_path(cfg.output_dir, "bounds_cdf.csv"), meta, {"tau", "waiting_cdf", "sojourn_cdf"});
        for (std::size_t i = 0; i < taus.size(); ++i) csv.row({taus[i], wc[i].cdf, sc[i].cdf});
        csv.close();
        out["cdf_csv"] = "bounds_cdf.csv";
    }
    write_json(join_path(cfg.output_dir, "bounds.json"), meta, out);
    return out;
}

json run_overhead(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    RevivePollingModel model = cfg.system.overhead ? *resolve_overhead(cfg.system, spec)
                                                   : RevivePollingModel(RevivePollingModel::kDefaultInterval,
                                                                        spec.has_poisson_arrivals() ? spec.arrival_rate() : 0.0);
    ensure_directory(cfg.output_dir);
    const OutputMeta meta = make_meta(cfg, cfg.seed);
    const int n = cfg.overhead_curve.points;
    CsvWriter csv(join_path(cfg.output_dir, "overhead_curve.csv"), meta, {"y", "ccdf", "cdf", "pdf"});
    for (int i = 0; i < n; ++i) {
        const double y = model.interval() * i / (n - 1);
        csv.row({y, overhead_ccdf(y, model), overhead_cdf(y, model), overhead_pdf(y, model)});
    }
    csv.close();
    json out{{"interval", model.interval()},
             {"arrival_rate", model.arrival_rate()},
             {"mean", model.mean()},
             {"curve_csv", "overhead_curve.csv"}};
    if (cfg.overhead_curve.samples > 0) {
        RngStream rng = root_stream(cfg.seed).split(StreamId::Overhead);
        CsvWriter samples(join_path(cfg.output_dir, "overhead_samples.csv"), meta, {"sample"});
        double sum = 0.0;
        for (std::uint64_t i = 0; i < cfg.overhead_curve.samples; ++i) {
            const double y = sample_overhead(model, rng);
            sum += y;
            samples.row({y});
        }
        samples.close();
        out["samples_csv"] = "overhead_samples.csv";
        out["sample_mean"] = sum / static_cast<double>(cfg.overhead_curve.samples);
    }
    write_json(join_path(cfg.output_dir, "overhead.json"), meta, out);
    return out;
}

}  // namespace barriersim
