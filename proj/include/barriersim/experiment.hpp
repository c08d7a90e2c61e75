#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "barriersim/ctmc.hpp"
#include "barriersim/model.hpp"
#include "barriersim/output.hpp"
#include "barriersim/simulator.hpp"
#include "barriersim/snc.hpp"

namespace barriersim {

enum class Command { Simulate, Stability, Ctmc, Bounds, Overhead, Sweep, Figure };

const char* to_string(Command c) noexcept;
std::optional<Command> parse_command(std::string_view name);

/// Task service description as written in a config file; kept in this form
/// so sweeps can rescale the rate before the distribution is built.
struct ServiceSpec {
    enum class Kind { Exponential, HyperExponential, Deterministic, Bimodal };
    Kind kind = Kind::Exponential;
    double rate = 1.0;         ///< exponential rate, or the fast rate of a bimodal mix
    double slow_prob = 0.1;    ///< bimodal only
    double slow_factor = 10.0; ///< bimodal only: slow rate = rate / slow_factor
    std::vector<HyperExponentialService::Branch> branches;
    double value = 1.0;        ///< deterministic only

    TaskServiceDist build() const;
};

struct ClassSpec {
    double weight = 1.0;
    bool barrier = true;
    std::vector<TaskCountPmf::Entry> k_pmf{{1, 1.0}};
    ServiceSpec service;

    JobClass build() const;
};

/// Optional coupling of the task service rate to the parallelism ratio,
/// mu = k / s with k the largest task count of the class.
enum class ServiceRateRule { Fixed, KOverS };

struct SimulationSettings {
    std::uint64_t jobs = 100000;
    std::optional<double> time;
    std::optional<std::uint64_t> warmup;
    double quantile = 0.99;
    bool write_jobs = true;
};

struct StabilitySettings {
    bool simulate = false;
    StabilityProbeOptions probe;
};

struct CtmcSettings {
    ctmc::RateConvention convention = ctmc::RateConvention::PerTask;
    bool dump_pi = false;
    std::size_t state_cap = ctmc::kDefaultStateCap;
};

struct BoundsSettings {
    std::vector<double> epsilons{1e-2};
    snc::BoundCase kind = snc::BoundCase::GI;
    double sigma_A = 0.0;
    int grid_points = 512;
    int curve_points = 0;
};

struct OverheadCurveSettings {
    int points = 201;
    std::uint64_t samples = 0;
};

/// Metric families a sweep evaluates at every grid point.
enum class Metric { ClosedFormStability, Ctmc, Bounds, Simulation, SimulatedStability, IdleGaps };

const char* to_string(Metric m) noexcept;
std::optional<Metric> parse_metric(std::string_view name);
/// Simulated metrics run once per replication, analytic ones once per point.
bool is_simulated(Metric m) noexcept;

struct SweepAxis {
    std::string parameter;
    std::vector<nlohmann::json> values;
};

struct SweepSettings {
    std::vector<SweepAxis> axes;
    std::vector<Metric> metrics;
};

/// Parameter names a sweep axis may reference.
const std::vector<std::string>& sweep_parameters();

struct ExperimentConfig {
    Command command = Command::Simulate;
    std::string description;
    std::uint64_t seed = 1;
    int replications = 5;
    std::string output_dir = "out";
    int threads = 0;  ///< 0: available parallelism

    SystemConfig system;
    ArrivalProcess arrival = PoissonArrivals{1.0};
    /// When set, the Poisson rate is derived from this utilization after all
    /// sweep parameters are applied.
    std::optional<double> utilization;
    ServiceRateRule service_rate_rule = ServiceRateRule::Fixed;
    std::vector<ClassSpec> classes{ClassSpec{}};

    SimulationSettings simulation;
    StabilitySettings stability;
    CtmcSettings ctmc;
    BoundsSettings bounds;
    OverheadCurveSettings overhead_curve;
    SweepSettings sweep;
    std::optional<std::string> figure;

    /// The workload with the service-rate rule and utilization resolved.
    WorkloadSpec workload() const;
};

/// Every issue in the config; empty when valid.
std::vector<std::string> validate_experiment(const ExperimentConfig& cfg);

/// Parses and validates; throws ConfigError listing every problem found,
/// including unknown keys.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical form with every default filled in.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// FNV-1a over the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

OutputMeta make_meta(const ExperimentConfig& cfg, std::uint64_t seed);

/// Seed of replication r.
inline std::uint64_t replication_seed(std::uint64_t base, int r) { return base + static_cast<std::uint64_t>(r); }

/// Root stream for a simulation seeded with `seed`.
RngStream root_stream(std::uint64_t seed);

/// Service process for the bound computations; requires exponential
/// service with a common rate and either all-barrier classes or a
/// barrier/non-barrier pair with the same fixed k.
snc::ServiceProcessSpec service_process(const ExperimentConfig& cfg);

// --- sweeps -----------------------------------------------------------------

struct SweepPoint {
    std::size_t index;
    nlohmann::json params;  ///< parameter name -> value
};

/// Cartesian product of the axes, in row-major axis order. Combinations
/// with k > workers or l > k are left out of the grid.
std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg);

/// Copy of cfg with the point's parameters applied.
ExperimentConfig apply_point(const ExperimentConfig& cfg, const nlohmann::json& params);

struct SweepOutcome {
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::string manifest_path;
};

/// Evaluates every grid point on a worker pool, writing one CSV per point,
/// a summary CSV and a manifest. Failures are recorded, not thrown.
SweepOutcome run_sweep(const ExperimentConfig& cfg, int threads);

// --- figure presets ---------------------------------------------------------

const std::vector<std::string>& figure_ids();
/// Sweep config reproducing a figure; throws std::invalid_argument for an unknown id.
ExperimentConfig figure_preset(std::string_view id);

// --- single commands --------------------------------------------------------

/// Each writes its files into cfg.output_dir and returns the JSON summary.
nlohmann::json run_simulate(const ExperimentConfig& cfg);
nlohmann::json run_stability(const ExperimentConfig& cfg);
nlohmann::json run_ctmc(const ExperimentConfig& cfg);
nlohmann::json run_bounds(const ExperimentConfig& cfg);
nlohmann::json run_overhead(const ExperimentConfig& cfg);

/// Text rendering of a stability summary, laid out like a Table I row set.
std::string stability_report(const nlohmann::json& summary);

/// One simulation run of cfg's workload seeded with `seed`.
SimResult simulate_replication(const ExperimentConfig& cfg, std::uint64_t seed, bool keep_records = false);

/// Summary statistics of one simulation replication, shared by `simulate`
/// and the sweep's simulation metric so both report identical numbers.
nlohmann::json simulation_summary(const SimResult& result, const SimulationSettings& settings);

}  // namespace barriersim
