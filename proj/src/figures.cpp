#include <stdexcept>

#include "barriersim/experiment.hpp"

namespace barriersim {

using nlohmann::json;

namespace {

json range(double from, double to, double step) {
    json out = json::array();
    const int n = static_cast<int>((to - from) / step + 0.5);
    for (int i = 0; i <= n; ++i) out.push_back(from + i * step);
    return out;
}

json int_range(int from, int to, int step) {
    json out = json::array();
    for (int v = from; v <= to; v += step) out.push_back(v);
    return out;
}

json barrier_class(int k, double rate) {
    return json::array({{{"weight", 1.0}, {"barrier", true}, {"k", k}, {"service", {{"dist", "exponential"}, {"rate", rate}}}}});
}

json sweep(json axes, json metrics) {
    json a = json::array();
    for (auto& [name, values] : axes.items()) a.push_back({{"parameter", name}, {"values", values}});
    return {{"axes", a}, {"metrics", std::move(metrics)}};
}

json preset_doc(std::string_view id) {
    json doc{{"command", "sweep"}, {"figure", std::string(id)}, {"seed", 1}};
    if (id == "fig2") {
        doc["description"] = "maximum stable utilization of 1- and 2-barrier BEM versus the number of workers";
        doc["replications"] = 1;
        doc["system"] = {{"workers", 2}, {"barrier_mode", "one"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.5}}}, {"classes", barrier_class(2, 1.0)}};
        doc["stability"] = {{"probe_jobs", 200000}, {"tolerance", 0.01}};
        doc["sweep"] = sweep({{"workers", json::array({2, 4, 8, 16, 32, 64})},
                              {"k", json::array({2, 4, 8})},
                              {"barrier_mode", json::array({"one", "two"})}},
                             json::array({"closed_form_stability", "simulated_stability"}));
    } else if (id == "fig3") {
        doc["description"] = "total and useful utilization of (s,k,l) with s = k = 16 under exponential and bimodal tasks";
        doc["replications"] = 1;
        doc["system"] = {{"workers", 16}, {"barrier_mode", "two"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.5}}}, {"classes", barrier_class(16, 1.0)}};
        doc["stability"] = {{"probe_jobs", 100000}, {"tolerance", 0.01}};
        doc["sweep"] = sweep({{"l", int_range(1, 16, 1)}, {"slow_factor", json::array({1, 10, 100})}},
                             json::array({"closed_form_stability", "simulated_stability"}));
    } else if (id == "fig4") {
        doc["description"] = "1-barrier (s,k,l) utilization from the Markov chain versus the 2-barrier closed form, k = 16";
        doc["replications"] = 1;
        doc["system"] = {{"workers", 16}, {"barrier_mode", "one"}, {"l", 8}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.5}}}, {"classes", barrier_class(16, 1.0)}};
        doc["sweep"] = sweep({{"workers", json::array({16, 20, 24, 32, 40, 48, 64, 80, 96, 112, 128})},
                              {"l", json::array({4, 8, 12})}},
                             json::array({"ctmc", "closed_form_stability"}));
    } else if (id == "fig5") {
        doc["description"] = "sojourn quantile bound of the hybrid barrier/non-barrier mix versus the barrier share";
        doc["system"] = {{"workers", 32}, {"barrier_mode", "one"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.7}}},
                           {"service_rate_rule", "k_over_s"},
                           {"classes", barrier_class(16, 1.0)}};
        doc["bounds"] = {{"epsilons", json::array({1e-6})}};
        doc["sweep"] = sweep({{"p_bem", range(0.0, 1.0, 0.05)}}, json::array({"bounds"}));
    } else if (id == "fig6") {
        doc["description"] = "sojourn quantile bound for two task-count classes versus the share of the larger class";
        doc["system"] = {{"workers", 32}, {"barrier_mode", "one"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.4}}}, {"classes", barrier_class(2, 1.0)}};
        doc["bounds"] = {{"epsilons", json::array({1e-6})}};
        doc["sweep"] = sweep({{"k_pair", json::array({"2:8", "2:16", "4:16", "4:24"})}, {"p_large", range(0.0, 1.0, 0.05)}},
                             json::array({"bounds"}));
    } else if (id == "fig7") {
        doc["description"] = "waiting and sojourn quantiles versus the number of tasks per job, bounds and simulation";
        doc["system"] = {{"workers", 32}, {"barrier_mode", "one"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.5}}},
                           {"service_rate_rule", "k_over_s"},
                           {"classes", barrier_class(2, 1.0)}};
        doc["simulation"] = {{"jobs", 100000}, {"quantile", 0.99}};
        doc["bounds"] = {{"epsilons", json::array({1e-2})}};
        doc["sweep"] = sweep({{"k", int_range(2, 32, 2)}, {"utilization", json::array({0.3, 0.5, 0.7})}},
                             json::array({"bounds", "simulation"}));
    } else if (id == "fig8") {
        doc["description"] = "simulated sojourn quantiles versus tasks per job with and without scheduling overhead";
        doc["system"] = {{"workers", 32}, {"barrier_mode", "one"}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.5}}},
                           {"service_rate_rule", "k_over_s"},
                           {"classes", barrier_class(2, 1.0)}};
        doc["simulation"] = {{"jobs", 100000}, {"quantile", 0.99}};
        doc["sweep"] = sweep({{"k", int_range(2, 32, 2)},
                              {"utilization", json::array({0.5, 0.7})},
                              {"overhead", json::array({false, true})}},
                             json::array({"simulation"}));
    } else if (id == "fig9") {
        doc["description"] = "idle gaps between a job becoming startable and starting, against the polling overhead model";
        doc["system"] = {{"workers", 32},
                         {"barrier_mode", "one"},
                         {"overhead", {{"interval", 1.0}, {"injection", "queued_start"}}}};
        doc["workload"] = {{"arrival", {{"process", "poisson"}, {"utilization", 0.7}}},
                           {"service_rate_rule", "k_over_s"},
                           {"classes", barrier_class(6, 1.0)}};
        doc["simulation"] = {{"jobs", 200000}};
        doc["replications"] = 1;
        doc["sweep"] = sweep({{"k", json::array({6, 11})}}, json::array({"idle_gaps"}));
    } else {
        throw std::invalid_argument("unknown figure preset '" + std::string(id) + "'");
    }
    return doc;
}

}  // namespace

const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
    return ids;
}

ExperimentConfig figure_preset(std::string_view id) { return parse_config(preset_doc(id)); }

}  // namespace barriersim
