#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "barriersim/experiment.hpp"
#include "barriersim/stability.hpp"

namespace barriersim {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Values = std::map<std::string, double>;

const std::vector<std::string>& metric_columns(Metric m) {
    static const std::map<Metric, std::vector<std::string>> columns{
        {Metric::ClosedFormStability,
         {"cf_rho_max", "cf_rho_useful", "cf_lambda_max", "cf_one_barrier", "cf_two_barrier", "cf_skl_two_total",
          "cf_skl_two_useful"}},
        {Metric::Ctmc, {"ctmc_states", "ctmc_throughput", "ctmc_rho_total", "ctmc_rho_useful"}},
        {Metric::Bounds,
         {"bound_epsilon", "bound_unstable", "theta_star", "bound_waiting", "bound_sojourn", "bound_fallback"}},
        {Metric::Simulation,
         {"sim_measured_jobs", "sim_mean_waiting", "sim_mean_sojourn", "sim_q_level", "sim_q_waiting", "sim_q_sojourn",
          "sim_busy_fraction", "sim_useful_fraction", "sim_mean_total_server_time", "sim_unstable"}},
        {Metric::SimulatedStability, {"sim_rho_max", "sim_rho_lo", "sim_rho_hi", "sim_conclusive"}},
        {Metric::IdleGaps, {"gap_count", "gap_mean", "gap_ks_d", "overhead_mean"}},
    };
    return columns.at(m);
}

struct PointContext {
    std::string dir;
    std::size_t index;
    OutputMeta meta;
};

std::string point_name(std::size_t index, const std::string& suffix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "point_%04zu", index);
    return buf + suffix;
}

const JobClass& only_class(const WorkloadSpec& spec) {
    if (spec.classes.size() != 1) throw std::invalid_argument("metric requires exactly one job class");
    return spec.classes.front();
}

Values closed_form(const ExperimentConfig& cfg) {
    Values v;
    for (const auto& c : metric_columns(Metric::ClosedFormStability)) v[c] = kNaN;
    const WorkloadSpec spec = cfg.workload();
    const JobClass& cls = only_class(spec);
    if (!cls.service.is_exponential() || !cls.k_dist.is_fixed() || !cls.has_start_barrier) return v;
    const int s = cfg.system.workers;
    const int k = cls.k_dist.max_k();
    const double mu = cls.service.exponential_rate();
    const double one = max_util_1barrier(s, k);
    const auto two = two_barrier_stability(s, k, mu);
    v["cf_one_barrier"] = one;
    v["cf_two_barrier"] = two.rho_max;
    if (cfg.system.skl) {
        const auto skl = skl_2barrier(s, k, cfg.system.skl->l, mu);
        v["cf_skl_two_total"] = skl.rho_skl;
        v["cf_skl_two_useful"] = skl.rho_useful;
        if (cfg.system.mode == BarrierMode::TwoBarrier) {
            v["cf_rho_max"] = skl.rho_skl;
            v["cf_rho_useful"] = skl.rho_useful;
            v["cf_lambda_max"] = skl.lambda_max;
        }
    } else if (cfg.system.mode == BarrierMode::OneBarrier) {
        v["cf_rho_max"] = v["cf_rho_useful"] = one;
        v["cf_lambda_max"] = one * s * mu / k;
    } else {
        v["cf_rho_max"] = v["cf_rho_useful"] = two.rho_max;
        v["cf_lambda_max"] = two.lambda_max;
    }
    return v;
}

Values ctmc_metric(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    const JobClass& cls = only_class(spec);
    if (cfg.system.mode != BarrierMode::OneBarrier) throw std::invalid_argument("ctmc metric needs a 1-barrier system");
    if (!cls.service.is_exponential() || !cls.k_dist.is_fixed())
        throw std::invalid_argument("ctmc metric needs exponential service and a fixed task count");
    const int k = cls.k_dist.max_k();
    const int l = cfg.system.skl ? cfg.system.skl->l : k;
    const auto u = ctmc::max_utilization_1barrier_skl(cfg.system.workers, k, l, cls.service.exponential_rate(),
                                                      cfg.ctmc.convention, cfg.ctmc.state_cap);
    return {{"ctmc_states", static_cast<double>(u.states)},
            {"ctmc_throughput", u.throughput},
            {"ctmc_rho_total", u.rho_total},
            {"ctmc_rho_useful", u.rho_useful}};
}

Values bounds_metric(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    const snc::ServiceProcessSpec sp = service_process(cfg);
    const snc::ArrivalSpec arrival{spec.arrival_rate(), cfg.bounds.kind, cfg.bounds.sigma_A};
    const double eps = cfg.bounds.epsilons.front();
    Values v{{"bound_epsilon", eps}, {"bound_unstable", 0.0}, {"theta_star", kNaN},
             {"bound_waiting", kNaN}, {"bound_sojourn", kNaN}, {"bound_fallback", kNaN}};
    try {
        v["theta_star"] = snc::theta_star(arrival, sp);
        v["bound_waiting"] = snc::waiting_quantile(eps, arrival, sp, cfg.bounds.grid_points).tau;
        const auto t = snc::sojourn_quantile(eps, arrival, sp, cfg.bounds.grid_points);
        v["bound_sojourn"] = t.tau;
        v["bound_fallback"] = t.quadrature_fallback ? 1.0 : 0.0;
    } catch (const snc::UnstableError&) {
        v["bound_unstable"] = 1.0;
    }
    return v;
}

double number(const json& j, const char* key) {
    return j.contains(key) && j[key].is_number() ? j[key].get<double>() : kNaN;
}

Values simulation_metric(const ExperimentConfig& cfg, std::uint64_t seed) {
    const SimResult r = simulate_replication(cfg, seed);
    const json s = simulation_summary(r, cfg.simulation);
    return {{"sim_measured_jobs", number(s, "measured_jobs")},
            {"sim_mean_waiting", number(s, "mean_waiting")},
            {"sim_mean_sojourn", number(s, "mean_sojourn")},
            {"sim_q_level", cfg.simulation.quantile},
            {"sim_q_waiting", number(s, "q_waiting")},
            {"sim_q_sojourn", number(s, "q_sojourn")},
            {"sim_busy_fraction", number(s, "busy_fraction")},
            {"sim_useful_fraction", number(s, "useful_fraction")},
            {"sim_mean_total_server_time", number(s, "mean_total_server_time")},
            {"sim_unstable", r.drift.unstable ? 1.0 : 0.0}};
}

Values simulated_stability(const ExperimentConfig& cfg, std::uint64_t seed) {
    const WorkloadSpec spec = cfg.workload();
    const auto est = estimate_max_stable_utilization(cfg.system, only_class(spec), cfg.stability.probe, root_stream(seed));
    return {{"sim_rho_max", est.rho},
            {"sim_rho_lo", est.lo},
            {"sim_rho_hi", est.hi},
            {"sim_conclusive", est.conclusive ? 1.0 : 0.0}};
}

double ks_statistic(std::vector<double> samples, const RevivePollingModel& model) {
    if (samples.empty()) return kNaN;
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = overhead_cdf(samples[i], model);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

Values idle_gap_metric(const ExperimentConfig& cfg, std::uint64_t seed, int replication, const PointContext& ctx) {
    const WorkloadSpec spec = cfg.workload();
    const auto model = resolve_overhead(cfg.system, spec);
    if (!model) throw std::invalid_argument("idle_gaps metric needs an overhead model");
    const Horizon horizon =
        cfg.simulation.time ? Horizon::sim_time(*cfg.simulation.time) : Horizon::job_count(cfg.simulation.jobs);
    const auto gaps = idle_gap_trace(cfg.system, spec, horizon, root_stream(seed));

    CsvWriter samples(join_path(ctx.dir, point_name(ctx.index, "_gaps_r" + std::to_string(replication) + ".csv")),
                      OutputMeta{ctx.meta.command, ctx.meta.config_hash, seed}, {"gap"});
    for (double g : gaps) samples.row({g});
    samples.close();
    if (replication == 0) {
        CsvWriter pdf(join_path(ctx.dir, point_name(ctx.index, "_overhead_pdf.csv")), ctx.meta, {"y", "pdf", "ccdf"});
        const int n = cfg.overhead_curve.points;
        for (int i = 0; i < n; ++i) {
            const double y = model->interval() * i / (n - 1);
            pdf.row({y, overhead_pdf(y, *model), overhead_ccdf(y, *model)});
        }
        pdf.close();
    }
    double mean = kNaN;
    if (!gaps.empty()) {
        mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
    }
    return {{"gap_count", static_cast<double>(gaps.size())},
            {"gap_mean", mean},
            {"gap_ks_d", ks_statistic(gaps, *model)},
            {"overhead_mean", model->mean()}};
}

CsvCell param_cell(const json& v) {
    if (v.is_number_integer()) return static_cast<std::int64_t>(v.get<std::int64_t>());
    if (v.is_number()) return v.get<double>();
    if (v.is_boolean()) return static_cast<std::int64_t>(v.get<bool>() ? 1 : 0);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return std::string();
    return v.dump();
}

struct PointOutcome {
    bool ok = false;
    std::string error;
    std::vector<std::uint64_t> seeds;
    std::string file;
    double lambda = kNaN;
    double rho = kNaN;
    double k_over_s = kNaN;
    Values analytic;
    std::vector<Values> replications;
};

PointOutcome evaluate_point(const ExperimentConfig& base, const SweepPoint& point, const std::vector<std::string>& axis_names,
                            const std::vector<std::string>& analytic_cols, const std::vector<std::string>& sim_cols,
                            const OutputMeta& meta) {
    PointOutcome out;
    try {
        ExperimentConfig cfg = apply_point(base, point.params);
        const WorkloadSpec spec = cfg.workload();
        require_valid(cfg.system, spec);
        int k_max = 0;
        for (const auto& c : spec.classes) k_max = std::max(k_max, c.k_dist.max_k());
        out.k_over_s = static_cast<double>(k_max) / cfg.system.workers;
        if (spec.has_poisson_arrivals()) {
            out.lambda = spec.arrival_rate();
            out.rho = utilization(spec, cfg.system);
        }
        const PointContext ctx{cfg.output_dir, point.index, meta};
        bool any_sim = false;
        for (Metric m : cfg.sweep.metrics) {
            if (is_simulated(m)) {
                any_sim = true;
                continue;
            }
            Values v;
            switch (m) {
                case Metric::ClosedFormStability: v = closed_form(cfg); break;
                case Metric::Ctmc: v = ctmc_metric(cfg); break;
                case Metric::Bounds: v = bounds_metric(cfg); break;
                default: break;
            }
            out.analytic.insert(v.begin(), v.end());
        }
        const int reps = any_sim ? cfg.replications : 1;
        for (int r = 0; r < reps; ++r) {
            const std::uint64_t seed = replication_seed(cfg.seed, r);
            out.seeds.push_back(seed);
            Values v;
            for (Metric m : cfg.sweep.metrics) {
                Values part;
                switch (m) {
                    case Metric::Simulation: part = simulation_metric(cfg, seed); break;
                    case Metric::SimulatedStability: part = simulated_stability(cfg, seed); break;
                    case Metric::IdleGaps: part = idle_gap_metric(cfg, seed, r, ctx); break;
                    default: break;
                }
                v.insert(part.begin(), part.end());
            }
            out.replications.push_back(std::move(v));
        }

        std::vector<std::string> cols{"point", "replication", "seed"};
        cols.insert(cols.end(), axis_names.begin(), axis_names.end());
        cols.push_back("lambda");
        cols.push_back("rho");
        cols.push_back("k_over_s");
        cols.insert(cols.end(), analytic_cols.begin(), analytic_cols.end());
        cols.insert(cols.end(), sim_cols.begin(), sim_cols.end());
        out.file = point_name(point.index, ".csv");
        CsvWriter csv(join_path(cfg.output_dir, out.file), meta, cols);
        for (int r = 0; r < reps; ++r) {
            std::vector<CsvCell> row{static_cast<std::int64_t>(point.index), static_cast<std::int64_t>(r),
                                     static_cast<std::int64_t>(out.seeds[static_cast<std::size_t>(r)])};
            for (const auto& a : axis_names) row.push_back(param_cell(point.params[a]));
            row.emplace_back(out.lambda);
            row.emplace_back(out.rho);
            row.emplace_back(out.k_over_s);
            for (const auto& c : analytic_cols) row.emplace_back(out.analytic.count(c) ? out.analytic.at(c) : kNaN);
            const Values& rv = out.replications[static_cast<std::size_t>(r)];
            for (const auto& c : sim_cols) row.emplace_back(rv.count(c) ? rv.at(c) : kNaN);
            csv.row(row);
        }
        csv.close();
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

}  // namespace

SweepOutcome run_sweep(const ExperimentConfig& cfg, int threads) {
    ensure_directory(cfg.output_dir);
    const OutputMeta meta = make_meta(cfg, cfg.seed);
    const auto points = expand_grid(cfg);

    std::vector<std::string> axis_names;
    for (const auto& a : cfg.sweep.axes) axis_names.push_back(a.parameter);
    std::vector<std::string> analytic_cols, sim_cols;
    for (Metric m : cfg.sweep.metrics) {
        auto& dst = is_simulated(m) ? sim_cols : analytic_cols;
        for (const auto& c : metric_columns(m)) dst.push_back(c);
    }

    std::vector<PointOutcome> outcomes(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++)
            outcomes[i] = evaluate_point(cfg, points[i], axis_names, analytic_cols, sim_cols, meta);
    };
    int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(points.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // summary: analytic values once, simulated values as mean/min/max
    std::vector<std::string> cols{"point", "status"};
    cols.insert(cols.end(), axis_names.begin(), axis_names.end());
    cols.push_back("lambda");
    cols.push_back("rho");
    cols.push_back("k_over_s");
    cols.insert(cols.end(), analytic_cols.begin(), analytic_cols.end());
    for (const auto& c : sim_cols)
        for (const char* stat : {"_mean", "_min", "_max"}) cols.push_back(c + stat);
    cols.push_back("error");
    CsvWriter summary(join_path(cfg.output_dir, "summary.csv"), meta, cols);

    SweepOutcome result;
    json manifest_points = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& o = outcomes[i];
        (o.ok ? result.succeeded : result.failed) += 1;
        std::vector<CsvCell> row{static_cast<std::int64_t>(i), std::string(o.ok ? "success" : "failure")};
        for (const auto& a : axis_names) row.push_back(param_cell(points[i].params[a]));
        row.emplace_back(o.lambda);
        row.emplace_back(o.rho);
        row.emplace_back(o.k_over_s);
        for (const auto& c : analytic_cols) row.emplace_back(o.analytic.count(c) ? o.analytic.at(c) : kNaN);
        for (const auto& c : sim_cols) {
            double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
            int n = 0;
            for (const auto& rv : o.replications) {
                auto it = rv.find(c);
                if (it == rv.end() || std::isnan(it->second)) continue;
                sum += it->second;
                lo = std::min(lo, it->second);
                hi = std::max(hi, it->second);
                ++n;
            }
            row.emplace_back(n ? sum / n : kNaN);
            row.emplace_back(n ? lo : kNaN);
            row.emplace_back(n ? hi : kNaN);
        }
        row.emplace_back(o.error);
        summary.row(row);

        json entry{{"index", i},
                   {"params", points[i].params},
                   {"status", o.ok ? "success" : "failure"},
                   {"seeds", o.seeds},
                   {"file", o.ok ? json(o.file) : json(nullptr)}};
        if (!o.ok) entry["error"] = o.error;
        manifest_points.push_back(std::move(entry));
    }
    summary.close();

    json manifest{{"config", to_json(cfg)},
                  {"summary_csv", "summary.csv"},
                  {"points", manifest_points},
                  {"succeeded", result.succeeded},
                  {"failed", result.failed}};
    result.manifest_path = join_path(cfg.output_dir, "manifest.json");
    write_json(result.manifest_path, meta, manifest);
    return result;
}

}  // namespace barriersim
