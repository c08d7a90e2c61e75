#include "barriersim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace barriersim {

using nlohmann::json;

namespace {

/// Reads the keys of one JSON object, recording type errors and, on
/// finish(), every key that was never consumed.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& issues)
        : obj_(obj), path_(std::move(path)), issues_(issues) {
        if (!obj_.is_object()) {
            issues_.push_back(where() + "expected an object");
            valid_ = false;
        }
    }

    bool valid() const { return valid_; }

    const json* raw(const char* key) {
        if (!valid_) return nullptr;
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return nullptr;
        return &*it;
    }

    bool present(const char* key) const { return valid_ && obj_.contains(key) && !obj_.at(key).is_null(); }

    void read(const char* key, double& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_number())
                out = v->get<double>();
            else
                issue(key, "expected a number");
        }
    }
    void read(const char* key, std::optional<double>& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_number())
                out = v->get<double>();
            else
                issue(key, "expected a number or null");
        }
    }
    void read(const char* key, int& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_number_integer())
                out = v->get<int>();
            else
                issue(key, "expected an integer");
        }
    }
    void read(const char* key, std::uint64_t& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0))
                out = v->get<std::uint64_t>();
            else
                issue(key, "expected a nonnegative integer");
        }
    }
    void read(const char* key, std::optional<std::uint64_t>& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            std::uint64_t x = 0;
            read(key, x);
            out = x;
        }
    }
    void read(const char* key, bool& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_boolean())
                out = v->get<bool>();
            else
                issue(key, "expected true or false");
        }
    }
    void read(const char* key, std::string& out) {
        if (const json* v = raw(key); v && !v->is_null()) {
            if (v->is_string())
                out = v->get<std::string>();
            else
                issue(key, "expected a string");
        }
    }

    void issue(const char* key, const std::string& what) { issues_.push_back(where() + key + ": " + what); }

    std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() {
        if (!valid_) return;
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) issues_.push_back(where() + key + ": unknown key");
    }

private:
    std::string where() const { return path_.empty() ? "" : path_ + ": "; }

    const json& obj_;
    std::string path_;
    std::vector<std::string>& issues_;
    std::set<std::string> seen_;
    bool valid_ = true;
};

const char* service_kind_name(ServiceSpec::Kind k) {
    switch (k) {
        case ServiceSpec::Kind::Exponential: return "exponential";
        case ServiceSpec::Kind::HyperExponential: return "hyperexponential";
        case ServiceSpec::Kind::Deterministic: return "deterministic";
        case ServiceSpec::Kind::Bimodal: return "bimodal";
    }
    return "exponential";
}

ServiceSpec parse_service(const json& j, const std::string& path, std::vector<std::string>& issues) {
    ServiceSpec s;
    Reader r(j, path, issues);
    if (!r.valid()) return s;
    std::string dist = "exponential";
    r.read("dist", dist);
    if (dist == "exponential")
        s.kind = ServiceSpec::Kind::Exponential;
    else if (dist == "hyperexponential")
        s.kind = ServiceSpec::Kind::HyperExponential;
    else if (dist == "deterministic")
        s.kind = ServiceSpec::Kind::Deterministic;
    else if (dist == "bimodal")
        s.kind = ServiceSpec::Kind::Bimodal;
    else
        r.issue("dist", "unknown distribution '" + dist + "'");
    r.read("rate", s.rate);
    r.read("slow_prob", s.slow_prob);
    r.read("slow_factor", s.slow_factor);
    r.read("value", s.value);
    if (const json* b = r.raw("branches"); b && !b->is_null()) {
        if (!b->is_array()) {
            r.issue("branches", "expected an array");
        } else {
            for (std::size_t i = 0; i < b->size(); ++i) {
                Reader br((*b)[i], r.child("branches") + "[" + std::to_string(i) + "]", issues);
                HyperExponentialService::Branch branch{0.0, 1.0};
                br.read("p", branch.prob);
                br.read("rate", branch.rate);
                br.finish();
                s.branches.push_back(branch);
            }
        }
    }
    r.finish();
    return s;
}

ClassSpec parse_class(const json& j, const std::string& path, std::vector<std::string>& issues) {
    ClassSpec c;
    Reader r(j, path, issues);
    if (!r.valid()) return c;
    r.read("weight", c.weight);
    r.read("barrier", c.barrier);
    const bool has_k = r.present("k");
    const bool has_pmf = r.present("k_pmf");
    if (has_k && has_pmf) r.issue("k", "give either k or k_pmf, not both");
    int k = 1;
    r.read("k", k);
    if (has_k) c.k_pmf = {{k, 1.0}};
    if (const json* p = r.raw("k_pmf"); p && !p->is_null()) {
        if (!p->is_array()) {
            r.issue("k_pmf", "expected an array");
        } else {
            c.k_pmf.clear();
            for (std::size_t i = 0; i < p->size(); ++i) {
                Reader er((*p)[i], r.child("k_pmf") + "[" + std::to_string(i) + "]", issues);
                TaskCountPmf::Entry e{1, 0.0};
                er.read("k", e.k);
                er.read("p", e.prob);
                er.finish();
                c.k_pmf.push_back(e);
            }
        }
    }
    if (const json* s = r.raw("service"); s && !s->is_null()) c.service = parse_service(*s, r.child("service"), issues);
    r.finish();
    return c;
}

json service_to_json(const ServiceSpec& s) {
    json j{{"dist", service_kind_name(s.kind)}};
    switch (s.kind) {
        case ServiceSpec::Kind::Exponential: j["rate"] = s.rate; break;
        case ServiceSpec::Kind::Bimodal:
            j["rate"] = s.rate;
            j["slow_prob"] = s.slow_prob;
            j["slow_factor"] = s.slow_factor;
            break;
        case ServiceSpec::Kind::Deterministic: j["value"] = s.value; break;
        case ServiceSpec::Kind::HyperExponential: {
            json branches = json::array();
            for (const auto& b : s.branches) branches.push_back({{"p", b.prob}, {"rate", b.rate}});
            j["branches"] = branches;
            break;
        }
    }
    return j;
}

int class_k_max(const ClassSpec& c) {
    int k = 0;
    for (const auto& e : c.k_pmf)
        if (e.prob > 0.0) k = std::max(k, e.k);
    return k;
}

int class_k_min(const ClassSpec& c) {
    int k = std::numeric_limits<int>::max();
    for (const auto& e : c.k_pmf)
        if (e.prob > 0.0) k = std::min(k, e.k);
    return k;
}

}  // namespace

// --- enums ------------------------------------------------------------------

const char* to_string(Command c) noexcept {
    switch (c) {
        case Command::Simulate: return "simulate";
        case Command::Stability: return "stability";
        case Command::Ctmc: return "ctmc";
        case Command::Bounds: return "bounds";
        case Command::Overhead: return "overhead";
        case Command::Sweep: return "sweep";
        case Command::Figure: return "figure";
    }
    return "simulate";
}

std::optional<Command> parse_command(std::string_view name) {
    for (Command c : {Command::Simulate, Command::Stability, Command::Ctmc, Command::Bounds, Command::Overhead,
                      Command::Sweep, Command::Figure})
        if (name == to_string(c)) return c;
    return std::nullopt;
}

const char* to_string(Metric m) noexcept {
    switch (m) {
        case Metric::ClosedFormStability: return "closed_form_stability";
        case Metric::Ctmc: return "ctmc";
        case Metric::Bounds: return "bounds";
        case Metric::Simulation: return "simulation";
        case Metric::SimulatedStability: return "simulated_stability";
        case Metric::IdleGaps: return "idle_gaps";
    }
    return "simulation";
}

std::optional<Metric> parse_metric(std::string_view name) {
    for (Metric m : {Metric::ClosedFormStability, Metric::Ctmc, Metric::Bounds, Metric::Simulation,
                     Metric::SimulatedStability, Metric::IdleGaps})
        if (name == to_string(m)) return m;
    return std::nullopt;
}

bool is_simulated(Metric m) noexcept {
    return m == Metric::Simulation || m == Metric::SimulatedStability || m == Metric::IdleGaps;
}

const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names{
        "workers",     "k",        "l",          "utilization",  "arrival_rate",        "service_rate", "p_bem",
        "barrier_mode", "k_pair",  "p_large",    "slow_factor",  "overhead",            "overhead_interval",
        "overhead_injection", "epsilon", "jobs"};
    return names;
}

// --- building ---------------------------------------------------------------

TaskServiceDist ServiceSpec::build() const {
    switch (kind) {
        case Kind::Exponential: return TaskServiceDist::exponential(rate);
        case Kind::HyperExponential: return TaskServiceDist::hyper_exponential(branches);
        case Kind::Deterministic: return TaskServiceDist::deterministic(value);
        case Kind::Bimodal: return TaskServiceDist::bimodal(rate, slow_prob, slow_factor);
    }
    throw std::logic_error("unknown service kind");
}

JobClass ClassSpec::build() const {
    return JobClass{weight, barrier, TaskCountPmf::from_entries(k_pmf), service.build()};
}

WorkloadSpec ExperimentConfig::workload() const {
    WorkloadSpec spec;
    for (const auto& c : classes) {
        ClassSpec resolved = c;
        if (service_rate_rule == ServiceRateRule::KOverS)
            resolved.service.rate = static_cast<double>(class_k_max(c)) / system.workers;
        spec.classes.push_back(resolved.build());
    }
    if (utilization)
        spec.arrival = PoissonArrivals{arrival_rate_for_utilization(*utilization, spec.classes, system.workers)};
    else
        spec.arrival = arrival;
    return spec;
}

std::vector<std::string> validate_experiment(const ExperimentConfig& cfg) {
    std::vector<std::string> issues;
    if (cfg.replications < 1) issues.push_back("replications: must be >= 1");
    if (cfg.threads < 0) issues.push_back("threads: must be >= 0");
    if (cfg.output_dir.empty()) issues.push_back("output_dir: must not be empty");
    if (cfg.utilization && !(*cfg.utilization > 0.0)) issues.push_back("workload.arrival.utilization: must be > 0");

    if (cfg.command != Command::Sweep && cfg.command != Command::Figure) {
        try {
            const WorkloadSpec spec = cfg.workload();
            for (auto& s : validate(cfg.system, spec)) issues.push_back(std::move(s));
        } catch (const std::exception& e) {
            issues.push_back(std::string("workload: ") + e.what());
        }
    }

    const auto& sim = cfg.simulation;
    if (!sim.time && sim.jobs == 0) issues.push_back("simulation.jobs: must be > 0");
    if (sim.time && !(*sim.time > 0.0)) issues.push_back("simulation.time: must be > 0");
    if (!(sim.quantile > 0.0 && sim.quantile < 1.0)) issues.push_back("simulation.quantile: must lie in (0, 1)");
    if (sim.warmup && !sim.time && *sim.warmup >= sim.jobs)
        issues.push_back("simulation.warmup: must be smaller than simulation.jobs");

    const auto& st = cfg.stability.probe;
    if (!(st.tolerance > 0.0 && st.tolerance < 1.0)) issues.push_back("stability.tolerance: must lie in (0, 1)");
    if (st.probe_jobs < 4) issues.push_back("stability.probe_jobs: must be >= 4");
    if (!(st.probe_cap > 0.0 && st.probe_cap <= 1.0)) issues.push_back("stability.probe_cap: must lie in (0, 1]");

    if (cfg.ctmc.state_cap < 1) issues.push_back("ctmc.state_cap: must be >= 1");

    if (cfg.bounds.epsilons.empty()) issues.push_back("bounds.epsilons: at least one value is required");
    for (double e : cfg.bounds.epsilons)
        if (!(e > 0.0 && e <= 1.0)) issues.push_back("bounds.epsilons: every value must lie in (0, 1]");
    if (cfg.bounds.grid_points < 8) issues.push_back("bounds.grid_points: must be >= 8");
    if (cfg.bounds.curve_points < 0) issues.push_back("bounds.curve_points: must be >= 0");
    if (cfg.bounds.sigma_A < 0.0) issues.push_back("bounds.sigma_A: must be >= 0");

    if (cfg.overhead_curve.points < 2) issues.push_back("overhead_curve.points: must be >= 2");

    if (cfg.command == Command::Sweep) {
        if (cfg.sweep.axes.empty()) issues.push_back("sweep.axes: at least one axis is required");
        if (cfg.sweep.metrics.empty()) issues.push_back("sweep.metrics: at least one metric is required");
    }
    std::set<std::string> axis_names;
    const auto& known = sweep_parameters();
    for (const auto& axis : cfg.sweep.axes) {
        if (std::find(known.begin(), known.end(), axis.parameter) == known.end())
            issues.push_back("sweep.axes: unknown parameter '" + axis.parameter + "'");
        if (!axis_names.insert(axis.parameter).second)
            issues.push_back("sweep.axes: parameter '" + axis.parameter + "' appears twice");
        if (axis.values.empty()) issues.push_back("sweep.axes: parameter '" + axis.parameter + "' has no values");
    }
    if (cfg.command == Command::Figure) {
        if (!cfg.figure)
            issues.push_back("figure: required for the figure command");
        else if (std::find(figure_ids().begin(), figure_ids().end(), *cfg.figure) == figure_ids().end())
            issues.push_back("figure: unknown preset '" + *cfg.figure + "'");
    }
    return issues;
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    std::vector<std::string> issues;
    Reader top(doc, "", issues);
    if (!top.valid()) throw ConfigError(issues);

    std::string command = "simulate";
    top.read("command", command);
    if (auto c = parse_command(command))
        cfg.command = *c;
    else
        top.issue("command", "unknown command '" + command + "'");
    top.read("description", cfg.description);
    top.read("seed", cfg.seed);
    top.read("replications", cfg.replications);
    top.read("output_dir", cfg.output_dir);
    top.read("threads", cfg.threads);
    if (const json* f = top.raw("figure"); f && !f->is_null()) {
        if (f->is_string())
            cfg.figure = f->get<std::string>();
        else
            top.issue("figure", "expected a string");
    }

    if (const json* sys = top.raw("system"); sys && !sys->is_null()) {
        Reader r(*sys, "system", issues);
        r.read("workers", cfg.system.workers);
        std::string mode = "one";
        r.read("barrier_mode", mode);
        if (mode == "one")
            cfg.system.mode = BarrierMode::OneBarrier;
        else if (mode == "two")
            cfg.system.mode = BarrierMode::TwoBarrier;
        else
            r.issue("barrier_mode", "expected 'one' or 'two'");
        if (r.present("l")) {
            int l = 0;
            r.read("l", l);
            cfg.system.skl = SklPolicy{l};
        } else {
            r.raw("l");
        }
        if (const json* o = r.raw("overhead"); o && !o->is_null()) {
            Reader orr(*o, "system.overhead", issues);
            OverheadConfig oc;
            orr.read("interval", oc.interval);
            orr.read("arrival_rate", oc.arrival_rate);
            std::string inj = "per_task";
            orr.read("injection", inj);
            if (inj == "per_task")
                oc.injection = OverheadInjection::PerTask;
            else if (inj == "queued_start")
                oc.injection = OverheadInjection::QueuedStart;
            else
                orr.issue("injection", "expected 'per_task' or 'queued_start'");
            orr.finish();
            cfg.system.overhead = oc;
        }
        r.finish();
    }

    if (const json* wl = top.raw("workload"); wl && !wl->is_null()) {
        Reader r(*wl, "workload", issues);
        if (const json* a = r.raw("arrival"); a && !a->is_null()) {
            Reader ar(*a, "workload.arrival", issues);
            std::string process = "poisson";
            ar.read("process", process);
            if (process == "poisson") {
                const bool has_rate = ar.present("rate");
                const bool has_util = ar.present("utilization");
                if (has_rate == has_util) ar.issue("rate", "give exactly one of rate or utilization");
                double rate = 1.0;
                ar.read("rate", rate);
                ar.read("utilization", cfg.utilization);
                cfg.arrival = PoissonArrivals{rate};
            } else if (process == "deterministic") {
                double interval = 1.0;
                ar.read("interval", interval);
                cfg.arrival = DeterministicArrivals{interval};
            } else {
                ar.issue("process", "expected 'poisson' or 'deterministic'");
            }
            ar.finish();
        }
        std::string rule = "fixed";
        r.read("service_rate_rule", rule);
        if (rule == "fixed")
            cfg.service_rate_rule = ServiceRateRule::Fixed;
        else if (rule == "k_over_s")
            cfg.service_rate_rule = ServiceRateRule::KOverS;
        else
            r.issue("service_rate_rule", "expected 'fixed' or 'k_over_s'");
        if (const json* cl = r.raw("classes"); cl && !cl->is_null()) {
            if (!cl->is_array() || cl->empty()) {
                r.issue("classes", "expected a nonempty array");
            } else {
                cfg.classes.clear();
                for (std::size_t i = 0; i < cl->size(); ++i)
                    cfg.classes.push_back(parse_class((*cl)[i], "workload.classes[" + std::to_string(i) + "]", issues));
            }
        }
        r.finish();
    }

    if (const json* s = top.raw("simulation"); s && !s->is_null()) {
        Reader r(*s, "simulation", issues);
        r.read("jobs", cfg.simulation.jobs);
        r.read("time", cfg.simulation.time);
        r.read("warmup", cfg.simulation.warmup);
        r.read("quantile", cfg.simulation.quantile);
        r.read("write_jobs", cfg.simulation.write_jobs);
        r.finish();
    }

    if (const json* s = top.raw("stability"); s && !s->is_null()) {
        Reader r(*s, "stability", issues);
        auto& p = cfg.stability.probe;
        r.read("simulate", cfg.stability.simulate);
        r.read("tolerance", p.tolerance);
        r.read("probe_jobs", p.probe_jobs);
        r.read("probe_cap", p.probe_cap);
        r.read("verify_bracket", p.verify_bracket);
        r.read("slope_threshold", p.drift.slope_threshold);
        r.read("final_queue_threshold", p.drift.final_queue_threshold);
        r.finish();
    }

    if (const json* s = top.raw("ctmc"); s && !s->is_null()) {
        Reader r(*s, "ctmc", issues);
        std::string conv = "per_task";
        r.read("rate_convention", conv);
        if (conv == "per_task")
            cfg.ctmc.convention = ctmc::RateConvention::PerTask;
        else if (conv == "literal")
            cfg.ctmc.convention = ctmc::RateConvention::Literal;
        else
            r.issue("rate_convention", "expected 'per_task' or 'literal'");
        r.read("dump_pi", cfg.ctmc.dump_pi);
        std::uint64_t cap = cfg.ctmc.state_cap;
        r.read("state_cap", cap);
        cfg.ctmc.state_cap = static_cast<std::size_t>(cap);
        r.finish();
    }

    if (const json* s = top.raw("bounds"); s && !s->is_null()) {
        Reader r(*s, "bounds", issues);
        if (const json* e = r.raw("epsilons"); e && !e->is_null()) {
            if (!e->is_array()) {
                r.issue("epsilons", "expected an array of numbers");
            } else {
                cfg.bounds.epsilons.clear();
                for (const auto& v : *e) {
                    if (v.is_number())
                        cfg.bounds.epsilons.push_back(v.get<double>());
                    else
                        r.issue("epsilons", "expected an array of numbers");
                }
            }
        }
        std::string kind = "GI";
        r.read("case", kind);
        if (kind == "GI")
            cfg.bounds.kind = snc::BoundCase::GI;
        else if (kind == "G")
            cfg.bounds.kind = snc::BoundCase::G;
        else
            r.issue("case", "expected 'GI' or 'G'");
        r.read("sigma_A", cfg.bounds.sigma_A);
        r.read("grid_points", cfg.bounds.grid_points);
        r.read("curve_points", cfg.bounds.curve_points);
        r.finish();
    }

    if (const json* s = top.raw("overhead_curve"); s && !s->is_null()) {
        Reader r(*s, "overhead_curve", issues);
        r.read("points", cfg.overhead_curve.points);
        r.read("samples", cfg.overhead_curve.samples);
        r.finish();
    }

    if (const json* s = top.raw("sweep"); s && !s->is_null()) {
        Reader r(*s, "sweep", issues);
        if (const json* axes = r.raw("axes"); axes && !axes->is_null()) {
            if (!axes->is_array()) {
                r.issue("axes", "expected an array");
            } else {
                for (std::size_t i = 0; i < axes->size(); ++i) {
                    Reader ar((*axes)[i], "sweep.axes[" + std::to_string(i) + "]", issues);
                    SweepAxis axis;
                    ar.read("parameter", axis.parameter);
                    if (const json* v = ar.raw("values"); v && v->is_array())
                        axis.values.assign(v->begin(), v->end());
                    else
                        ar.issue("values", "expected an array");
                    ar.finish();
                    cfg.sweep.axes.push_back(std::move(axis));
                }
            }
        }
        if (const json* m = r.raw("metrics"); m && !m->is_null()) {
            if (!m->is_array()) {
                r.issue("metrics", "expected an array of metric names");
            } else {
                for (const auto& v : *m) {
                    const auto metric = v.is_string() ? parse_metric(v.get<std::string>()) : std::nullopt;
                    if (metric)
                        cfg.sweep.metrics.push_back(*metric);
                    else
                        r.issue("metrics", "unknown metric " + v.dump());
                }
            }
        }
        r.finish();
    }
    top.finish();

    // semantic checks still run after structural problems so that one pass reports everything
    for (auto& s : validate_experiment(cfg)) issues.push_back(std::move(s));
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file " + path});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path + ": " + e.what()});
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["command"] = to_string(cfg.command);
    j["description"] = cfg.description;
    j["seed"] = cfg.seed;
    j["replications"] = cfg.replications;
    j["output_dir"] = cfg.output_dir;
    j["threads"] = cfg.threads;
    j["figure"] = cfg.figure ? json(*cfg.figure) : json(nullptr);

    json sys{{"workers", cfg.system.workers},
             {"barrier_mode", to_string(cfg.system.mode)},
             {"l", cfg.system.skl ? json(cfg.system.skl->l) : json(nullptr)}};
    if (cfg.system.overhead) {
        const auto& o = *cfg.system.overhead;
        sys["overhead"] = {{"interval", o.interval},
                           {"arrival_rate", o.arrival_rate ? json(*o.arrival_rate) : json(nullptr)},
                           {"injection", to_string(o.injection)}};
    } else {
        sys["overhead"] = nullptr;
    }
    j["system"] = sys;

    json arrival;
    if (const auto* p = std::get_if<PoissonArrivals>(&cfg.arrival)) {
        arrival["process"] = "poisson";
        if (cfg.utilization)
            arrival["utilization"] = *cfg.utilization;
        else
            arrival["rate"] = p->rate;
    } else {
        arrival["process"] = "deterministic";
        arrival["interval"] = std::get<DeterministicArrivals>(cfg.arrival).interval;
    }
    json classes = json::array();
    for (const auto& c : cfg.classes) {
        json pmf = json::array();
        for (const auto& e : c.k_pmf) pmf.push_back({{"k", e.k}, {"p", e.prob}});
        classes.push_back({{"weight", c.weight}, {"barrier", c.barrier}, {"k_pmf", pmf}, {"service", service_to_json(c.service)}});
    }
    j["workload"] = {{"arrival", arrival},
                     {"service_rate_rule", cfg.service_rate_rule == ServiceRateRule::Fixed ? "fixed" : "k_over_s"},
                     {"classes", classes}};

    const auto& sim = cfg.simulation;
    j["simulation"] = {{"jobs", sim.jobs},
                       {"time", sim.time ? json(*sim.time) : json(nullptr)},
                       {"warmup", sim.warmup ? json(*sim.warmup) : json(nullptr)},
                       {"quantile", sim.quantile},
                       {"write_jobs", sim.write_jobs}};
    const auto& p = cfg.stability.probe;
    j["stability"] = {{"simulate", cfg.stability.simulate},
                      {"tolerance", p.tolerance},
                      {"probe_jobs", p.probe_jobs},
                      {"probe_cap", p.probe_cap},
                      {"verify_bracket", p.verify_bracket},
                      {"slope_threshold", p.drift.slope_threshold},
                      {"final_queue_threshold", p.drift.final_queue_threshold}};
    j["ctmc"] = {{"rate_convention", ctmc::to_string(cfg.ctmc.convention)},
                 {"dump_pi", cfg.ctmc.dump_pi},
                 {"state_cap", cfg.ctmc.state_cap}};
    j["bounds"] = {{"epsilons", cfg.bounds.epsilons},
                   {"case", snc::to_string(cfg.bounds.kind)},
                   {"sigma_A", cfg.bounds.sigma_A},
                   {"grid_points", cfg.bounds.grid_points},
                   {"curve_points", cfg.bounds.curve_points}};
    j["overhead_curve"] = {{"points", cfg.overhead_curve.points}, {"samples", cfg.overhead_curve.samples}};
    json axes = json::array();
    for (const auto& a : cfg.sweep.axes) axes.push_back({{"parameter", a.parameter}, {"values", a.values}});
    json metrics = json::array();
    for (Metric m : cfg.sweep.metrics) metrics.push_back(to_string(m));
    j["sweep"] = {{"axes", axes}, {"metrics", metrics}};
    return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json canonical = to_json(cfg);
    // Where files go and how many threads write them does not change results.
    canonical.erase("output_dir");
    canonical.erase("threads");
    const std::string text = canonical.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

OutputMeta make_meta(const ExperimentConfig& cfg, std::uint64_t seed) {
    return OutputMeta{to_string(cfg.command), config_hash(cfg), seed};
}

RngStream root_stream(std::uint64_t seed) { return RngStream(seed, 0); }

snc::ServiceProcessSpec service_process(const ExperimentConfig& cfg) {
    const WorkloadSpec spec = cfg.workload();
    const int s = cfg.system.workers;
    if (cfg.system.mode != BarrierMode::OneBarrier) throw std::invalid_argument("bounds apply to 1-barrier systems");
    if (cfg.system.skl) throw std::invalid_argument("bounds do not cover (s,k,l) preemption");
    double mu = 0.0;
    for (const auto& c : spec.classes) {
        if (!c.service.is_exponential()) throw std::invalid_argument("bounds require exponential task service");
        const double rate = c.service.exponential_rate();
        if (mu != 0.0 && rate != mu) throw std::invalid_argument("bounds require a common service rate");
        mu = rate;
    }
    const bool all_barrier =
        std::all_of(spec.classes.begin(), spec.classes.end(), [](const JobClass& c) { return c.has_start_barrier; });
    if (all_barrier) {
        if (spec.classes.size() == 1) return snc::ServiceProcessSpec::random_k(s, mu, spec.classes.front().k_dist);
        // Several barrier classes: merge their task-count pmfs.
        std::map<int, double> merged;
        for (const auto& c : spec.classes)
            for (const auto& e : c.k_dist.entries()) merged[e.k] += c.weight * e.prob;
        std::vector<TaskCountPmf::Entry> entries;
        for (const auto& [k, p] : merged) entries.push_back({k, p});
        return snc::ServiceProcessSpec::random_k(s, mu, TaskCountPmf::from_entries(entries));
    }
    int k = 0;
    double p_bem = 0.0;
    for (const auto& c : spec.classes) {
        if (!c.k_dist.is_fixed()) throw std::invalid_argument("hybrid bounds require a fixed task count");
        if (k != 0 && c.k_dist.max_k() != k) throw std::invalid_argument("hybrid bounds require a common task count");
        k = c.k_dist.max_k();
        if (c.has_start_barrier) p_bem += c.weight;
    }
    return snc::ServiceProcessSpec::hybrid(s, mu, k, std::min(p_bem, 1.0));
}

// --- sweeps -----------------------------------------------------------------

namespace {

double as_number(const json& v, const std::string& name) {
    if (!v.is_number()) throw std::invalid_argument("sweep parameter " + name + " expects a number, got " + v.dump());
    return v.get<double>();
}

int as_int(const json& v, const std::string& name) {
    if (!v.is_number_integer()) throw std::invalid_argument("sweep parameter " + name + " expects an integer, got " + v.dump());
    return v.get<int>();
}

}  // namespace

ExperimentConfig apply_point(const ExperimentConfig& base, const json& params) {
    ExperimentConfig cfg = base;
    auto get = [&](const char* name) -> const json* {
        auto it = params.find(name);
        return it == params.end() ? nullptr : &*it;
    };
    if (const json* v = get("workers")) cfg.system.workers = as_int(*v, "workers");
    if (const json* v = get("k"))
        for (auto& c : cfg.classes) c.k_pmf = {{as_int(*v, "k"), 1.0}};
    if (const json* v = get("k_pair")) {
        const json* p = get("p_large");
        if (!p) throw std::invalid_argument("sweep parameter k_pair requires p_large");
        if (!v->is_string()) throw std::invalid_argument("k_pair expects a string like \"2:8\"");
        const std::string pair = v->get<std::string>();
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("k_pair expects a string like \"2:8\"");
        const int small = std::stoi(pair.substr(0, colon));
        const int large = std::stoi(pair.substr(colon + 1));
        const double q = as_number(*p, "p_large");
        std::vector<TaskCountPmf::Entry> pmf;
        if (q < 1.0) pmf.push_back({small, 1.0 - q});
        if (q > 0.0) pmf.push_back({large, q});
        for (auto& c : cfg.classes) c.k_pmf = pmf;
    } else if (get("p_large")) {
        throw std::invalid_argument("sweep parameter p_large requires k_pair");
    }
    if (const json* v = get("p_bem")) {
        const double p = as_number(*v, "p_bem");
        ClassSpec bem = cfg.classes.front();
        ClassSpec non = bem;
        bem.barrier = true;
        bem.weight = p;
        non.barrier = false;
        non.weight = 1.0 - p;
        cfg.classes.clear();
        if (p > 0.0) cfg.classes.push_back(bem);
        if (p < 1.0) cfg.classes.push_back(non);
    }
    if (const json* v = get("slow_factor")) {
        const double f = as_number(*v, "slow_factor");
        for (auto& c : cfg.classes) {
            if (f <= 1.0) {
                c.service.kind = ServiceSpec::Kind::Exponential;
            } else {
                c.service.kind = ServiceSpec::Kind::Bimodal;
                c.service.slow_factor = f;
            }
        }
    }
    if (const json* v = get("service_rate"))
        for (auto& c : cfg.classes) c.service.rate = as_number(*v, "service_rate");
    if (const json* v = get("barrier_mode")) {
        const std::string mode = v->is_string() ? v->get<std::string>() : "";
        if (mode == "one")
            cfg.system.mode = BarrierMode::OneBarrier;
        else if (mode == "two")
            cfg.system.mode = BarrierMode::TwoBarrier;
        else
            throw std::invalid_argument("barrier_mode expects \"one\" or \"two\"");
    }
    if (const json* v = get("l")) {
        if (v->is_null())
            cfg.system.skl.reset();
        else
            cfg.system.skl = SklPolicy{as_int(*v, "l")};
    }
    if (const json* v = get("overhead")) {
        if (!v->is_boolean()) throw std::invalid_argument("overhead expects true or false");
        if (!v->get<bool>())
            cfg.system.overhead.reset();
        else if (!cfg.system.overhead)
            cfg.system.overhead = OverheadConfig{};
    }
    if (const json* v = get("overhead_interval")) {
        if (!cfg.system.overhead) cfg.system.overhead = OverheadConfig{};
        cfg.system.overhead->interval = as_number(*v, "overhead_interval");
    }
    if (const json* v = get("overhead_injection")) {
        if (!cfg.system.overhead) cfg.system.overhead = OverheadConfig{};
        const std::string inj = v->is_string() ? v->get<std::string>() : "";
        if (inj == "per_task")
            cfg.system.overhead->injection = OverheadInjection::PerTask;
        else if (inj == "queued_start")
            cfg.system.overhead->injection = OverheadInjection::QueuedStart;
        else
            throw std::invalid_argument("overhead_injection expects \"per_task\" or \"queued_start\"");
    }
    if (const json* v = get("epsilon")) cfg.bounds.epsilons = {as_number(*v, "epsilon")};
    if (const json* v = get("jobs")) {
        if (!v->is_number_unsigned()) throw std::invalid_argument("jobs expects a positive integer");
        cfg.simulation.jobs = v->get<std::uint64_t>();
    }
    if (const json* v = get("arrival_rate")) {
        cfg.utilization.reset();
        cfg.arrival = PoissonArrivals{as_number(*v, "arrival_rate")};
    }
    if (const json* v = get("utilization")) cfg.utilization = as_number(*v, "utilization");
    return cfg;
}

std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg) {
    std::vector<SweepPoint> points;
    const auto& axes = cfg.sweep.axes;
    if (axes.empty()) return points;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        json params = json::object();
        for (std::size_t a = 0; a < axes.size(); ++a) params[axes[a].parameter] = axes[a].values[idx[a]];
        bool keep = true;
        try {
            const ExperimentConfig applied = apply_point(cfg, params);
            int k_max = 0, k_min = std::numeric_limits<int>::max();
            for (const auto& c : applied.classes) {
                k_max = std::max(k_max, class_k_max(c));
                k_min = std::min(k_min, class_k_min(c));
            }
            if (k_max > applied.system.workers) keep = false;
            if (applied.system.skl && applied.system.skl->l > k_min) keep = false;
        } catch (const std::exception&) {
            // kept, so the failure shows up in the manifest
        }
        if (keep) points.push_back({points.size(), params});
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) return points;
        }
    }
}

}  // namespace barriersim
