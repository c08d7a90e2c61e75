#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "barriersim/experiment.hpp"

using namespace barriersim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
    return json::parse(R"({
        "command": "simulate",
        "system": {"workers": 1},
        "workload": {"arrival": {"process": "poisson", "rate": 0.5},
                     "classes": [{"k": 1, "service": {"dist": "exponential", "rate": 1.0}}]}
    })");
}

std::vector<std::string> issues_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> data_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("barriersim_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
    const auto cfg = parse_config(minimal());
    CHECK(cfg.command == Command::Simulate);
    CHECK(cfg.system.workers == 1);
    CHECK(cfg.replications == 5);
    CHECK(cfg.seed == 1);
    CHECK(cfg.simulation.jobs == 100000);
    CHECK_FALSE(cfg.system.skl);
    const auto spec = cfg.workload();
    CHECK(spec.arrival_rate() == 0.5);
    CHECK(spec.classes.size() == 1);
    CHECK(spec.classes[0].service.exponential_rate() == 1.0);

    const json canon = to_json(cfg);
    CHECK(canon["simulation"]["quantile"] == 0.99);
    const auto again = parse_config(canon);
    CHECK(to_json(again) == canon);
    CHECK(config_hash(again) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);
}

TEST_CASE("config errors are all reported") {
    json doc = minimal();
    doc["system"]["l"] = 3;
    doc["workload"]["classes"][0]["k"] = 2;
    doc["simulaton"] = json::object();
    doc["workload"]["classes"][0]["service"]["rat"] = 2.0;
    const auto issues = issues_of(doc);
    CHECK(any_contains(issues, "l <= k"));
    CHECK(any_contains(issues, "simulaton"));
    CHECK(any_contains(issues, "rat"));
    CHECK(issues.size() >= 3);

    json both = minimal();
    both["workload"]["arrival"]["utilization"] = 0.5;
    CHECK(any_contains(issues_of(both), "exactly one"));

    json badcmd = minimal();
    badcmd["command"] = "simulat";
    CHECK(any_contains(issues_of(badcmd), "simulat"));

    json badaxis = minimal();
    badaxis["command"] = "sweep";
    badaxis["sweep"] = {{"axes", {{{"parameter", "wokers"}, {"values", {1, 2}}}}}, {"metrics", {"simulation"}}};
    CHECK(any_contains(issues_of(badaxis), "wokers"));

    CHECK_THROWS_AS(parse_config_file("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("utilization and the k/s rate rule") {
    json doc = minimal();
    doc["system"]["workers"] = 32;
    doc["workload"]["arrival"] = {{"process", "poisson"}, {"utilization", 0.5}};
    doc["workload"]["service_rate_rule"] = "k_over_s";
    doc["workload"]["classes"][0]["k"] = 8;
    const auto spec = parse_config(doc).workload();
    CHECK(spec.classes[0].service.exponential_rate() == doctest::Approx(0.25));
    CHECK(utilization(spec, SystemConfig{32}) == doctest::Approx(0.5));
}

TEST_CASE("figure presets") {
    CHECK(figure_ids().size() == 8);
    for (const auto& id : figure_ids()) {
        const auto cfg = figure_preset(id);
        CHECK(cfg.command == Command::Sweep);
        CHECK(validate_experiment(cfg).empty());
        CHECK_FALSE(expand_grid(cfg).empty());
    }
    const auto fig7 = figure_preset("fig7");
    CHECK(fig7.system.workers == 32);
    REQUIRE(fig7.sweep.axes.size() == 2);
    CHECK(fig7.sweep.axes[0].parameter == "k");
    CHECK(fig7.sweep.axes[0].values.size() == 16);
    CHECK(fig7.sweep.axes[0].values.front() == 2);
    CHECK(fig7.sweep.axes[0].values.back() == 32);
    CHECK(fig7.sweep.axes[1].values == std::vector<json>{0.3, 0.5, 0.7});
    CHECK(expand_grid(fig7).size() == 48);

    const auto fig2 = figure_preset("fig2");
    // k > workers combinations are left out: (2,4), (2,8), (4,8) in both modes
    CHECK(expand_grid(fig2).size() == 6 * 3 * 2 - 6);
    CHECK_THROWS_AS(figure_preset("fig10"), std::invalid_argument);
}

TEST_CASE("sweep parameters rewrite the config") {
    const auto base = parse_config(minimal());
    auto cfg = apply_point(base, {{"workers", 32}, {"k", 16}, {"utilization", 0.7}, {"p_bem", 0.25}});
    const auto spec = cfg.workload();
    REQUIRE(spec.classes.size() == 2);
    CHECK(spec.classes[0].has_start_barrier);
    CHECK(spec.classes[0].weight == doctest::Approx(0.25));
    CHECK_FALSE(spec.classes[1].has_start_barrier);
    CHECK(utilization(spec, cfg.system) == doctest::Approx(0.7));
    const auto sp = service_process(cfg);
    CHECK(std::get<snc::HybridMix>(sp.mix).p_bem == doctest::Approx(0.25));

    auto mix = apply_point(base, {{"workers", 32}, {"k_pair", "2:8"}, {"p_large", 0.3}});
    const auto counts = service_process(mix).task_counts();
    REQUIRE(counts.size() == 2);
    CHECK(counts[1].k == 8);
    CHECK(counts[1].prob == doctest::Approx(0.3));

    auto slow = apply_point(base, {{"slow_factor", 10}});
    CHECK_FALSE(slow.workload().classes[0].service.is_exponential());

    CHECK_THROWS_AS(apply_point(base, {{"p_large", 0.3}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_point(base, {{"barrier_mode", "three"}}), std::invalid_argument);
}

TEST_CASE("sweep writes a complete manifest and records failures") {
    const auto dir = scratch("sweep");
    json doc = minimal();
    doc["command"] = "sweep";
    doc["output_dir"] = dir.string();
    doc["replications"] = 2;
    doc["system"]["workers"] = 8;
    doc["workload"]["arrival"] = {{"process", "poisson"}, {"utilization", 0.3}};
    doc["simulation"] = {{"jobs", 2000}};
    doc["sweep"] = {{"axes",
                     {{{"parameter", "k"}, {"values", {1, 2, 4}}}, {{"parameter", "barrier_mode"}, {"values", {"one", "two"}}}}},
                    {"metrics", {"closed_form_stability", "ctmc", "bounds", "simulation"}}};
    const auto cfg = parse_config(doc);
    const auto out = run_sweep(cfg, 2);
    // the Markov chain metric only covers the 1-barrier mode
    CHECK(out.succeeded == 3);
    CHECK(out.failed == 3);

    const json manifest = json::parse(slurp(out.manifest_path));
    REQUIRE(manifest["points"].size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& p = manifest["points"][i];
        CHECK(p["index"] == i);
        const bool ok = p["status"] == "success";
        CHECK(ok == (p["params"]["barrier_mode"] == "one"));
        if (ok) {
            CHECK(p["seeds"].size() == 2);
            CHECK(fs::exists(dir / p["file"].get<std::string>()));
            CHECK(data_lines(dir / p["file"].get<std::string>()).size() == 3);
        } else {
            CHECK(p["error"].get<std::string>().find("1-barrier") != std::string::npos);
        }
    }
    CHECK(manifest["meta"]["config_hash"] == config_hash(cfg));
    const auto summary = data_lines(dir / "summary.csv");
    CHECK(summary.size() == 7);
    CHECK(summary[0].find("sim_mean_waiting_mean") != std::string::npos);
    const std::string preamble = slurp(dir / "summary.csv");
    CHECK(preamble.rfind("# tool_version=", 0) == 0);
    CHECK(preamble.find("# seed=1") != std::string::npos);

    // identical re-run
    const std::string first = slurp(dir / "point_0000.csv");
    run_sweep(cfg, 1);
    CHECK(slurp(dir / "point_0000.csv") == first);
    fs::remove_all(dir);
}

TEST_CASE("a single-point sweep reproduces the simulate command") {
    const auto dir = scratch("single");
    json doc = minimal();
    doc["system"]["workers"] = 4;
    doc["workload"]["classes"][0]["k"] = 2;
    doc["replications"] = 1;
    doc["simulation"] = {{"jobs", 3000}};
    doc["output_dir"] = (dir / "sim").string();
    const json sim = run_simulate(parse_config(doc));

    doc["command"] = "sweep";
    doc["output_dir"] = (dir / "sweep").string();
    doc["sweep"] = {{"axes", {{{"parameter", "workers"}, {"values", {4}}}}}, {"metrics", {"simulation"}}};
    const auto out = run_sweep(parse_config(doc), 1);
    REQUIRE(out.succeeded == 1);
    const auto rows = data_lines(dir / "sweep" / "point_0000.csv");
    REQUIRE(rows.size() == 2);
    std::vector<std::string> header, row;
    for (auto* pair : {&header, &row}) {
        std::stringstream ss(pair == &header ? rows[0] : rows[1]);
        for (std::string cell; std::getline(ss, cell, ',');) pair->push_back(cell);
    }
    auto cell = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return std::stod(row[i]);
        FAIL("missing column " << name);
        return 0.0;
    };
    const json& rep = sim["replications"][0];
    CHECK(cell("sim_mean_waiting") == rep["mean_waiting"].get<double>());
    CHECK(cell("sim_q_sojourn") == rep["q_sojourn"].get<double>());
    CHECK(cell("sim_measured_jobs") == rep["measured_jobs"].get<double>());
    fs::remove_all(dir);
}

TEST_CASE("single commands write their outputs") {
    const auto dir = scratch("commands");
    json doc = minimal();
    doc["output_dir"] = dir.string();
    doc["system"] = {{"workers", 12}, {"l", 3}};
    doc["workload"]["classes"][0]["k"] = 4;
    doc["ctmc"] = {{"dump_pi", true}};

    doc["command"] = "ctmc";
    const json c = run_ctmc(parse_config(doc));
    CHECK(c["states"].get<int>() > 0);
    CHECK(fs::exists(dir / "ctmc.json"));
    CHECK(data_lines(dir / "ctmc_pi.csv").size() == c["states"].get<std::size_t>() + 1);

    doc["command"] = "stability";
    const json s = run_stability(parse_config(doc));
    CHECK(fs::exists(dir / "stability.json"));
    const std::string report = stability_report(s);
    CHECK(report.find("0.") != std::string::npos);

    doc["command"] = "bounds";
    doc["system"].erase("l");
    doc["bounds"] = {{"epsilons", {1e-2, 1e-3}}, {"curve_points", 20}};
    const json b = run_bounds(parse_config(doc));
    CHECK(fs::exists(dir / "bounds.json"));
    CHECK(data_lines(dir / "bounds_cdf.csv").size() == 21);

    doc["command"] = "overhead";
    doc["overhead_curve"] = {{"points", 11}, {"samples", 100}};
    run_overhead(parse_config(doc));
    CHECK(data_lines(dir / "overhead_curve.csv").size() == 12);
    CHECK(data_lines(dir / "overhead_samples.csv").size() == 101);
    fs::remove_all(dir);
}
