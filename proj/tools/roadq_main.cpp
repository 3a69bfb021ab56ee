// Copyright 2026 the roadq authors
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "roadq/baselines.hpp"
#include "roadq/bh.hpp"
#include "roadq/scenario_io.hpp"
#include "roadq/scenarios.hpp"
#include "roadq/sim.hpp"
#include "roadq/topology.hpp"
#include "roadq/travel_time.hpp"
#include "roadq/version.hpp"

namespace {

using roadq::json;

struct global_options {
    std::string scenario = "small";
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int jobs = 1;
    std::string format = "json";
};

struct loaded_scenario {
    std::string name;
    roadq::topology topo;
    std::string hash;
};

loaded_scenario resolve_scenario(const std::string& ref) {
    loaded_scenario out;
    if (ref == "small" || ref == "medium" || ref == "large") {
        roadq::scenario_bundle b = roadq::bundled_scenario(ref);
        out.name = b.name;
        out.topo = std::move(b.topo);
    } else {
        out.name = std::filesystem::path(ref).stem().string();
        out.topo = roadq::load_scenario_file(ref);
    }
    out.hash = roadq::scenario_hash(out.topo);
    return out;
}

json make_meta(const global_options& g, const loaded_scenario& sc) {
    return {{"tool_version", ROADQ_VERSION_STRING},
            {"scenario", sc.name},
            {"scenario_hash", sc.hash},
            {"seed", g.seed}};
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw roadq::validation_error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

std::ofstream open_csv(const std::filesystem::path& path, const global_options& g,
                       const loaded_scenario& sc) {
    std::ofstream out(path);
    if (!out) throw roadq::validation_error("cannot write '" + path.string() + "'");
    out << "# tool_version=" << ROADQ_VERSION_STRING << " scenario=" << sc.name
        << " scenario_hash=" << sc.hash << " seed=" << g.seed << "\n";
    return out;
}

roadq::policy resolve_policy(const std::string& spec, const loaded_scenario& sc,
                             const roadq::bh_config& bh_cfg, bool* distributed) {
    if (distributed) *distributed = false;
    if (spec == "uniform") return roadq::uniform_policy(sc.topo);
    if (spec == "bh")
        return roadq::bh_optimize(sc.topo, bh_cfg, roadq::uniform_policy(sc.topo)).final_policy;
    if (spec == "bipartite") return roadq::bipartite_matching_policy(sc.topo);
    if (spec == "gradient")
        return roadq::gradient_baseline(sc.topo, roadq::uniform_policy(sc.topo)).final_policy;
    if (spec == "distributed") {
        if (!distributed)
            throw roadq::validation_error("'distributed' is not a policy in this context");
        *distributed = true;
        return roadq::uniform_policy(sc.topo);
    }
    std::ifstream in(spec);
    if (!in) throw roadq::validation_error("cannot open policy file '" + spec + "'");
    json doc;
    in >> doc;
    return roadq::policy_from_json(sc.topo, doc);
}

json trace_to_json(const roadq::topology& t, const roadq::optimization_trace& trace) {
    json iters = json::array();
    for (const roadq::iteration_record& r : trace.log) {
        iters.push_back({{"phi", r.phi},
                         {"flow", r.flow >= 0 ? t.flows[r.flow].id : ""},
                         {"from_path", r.from_path >= 0 ? t.paths[r.from_path].id : ""},
                         {"to_path", r.to_path >= 0 ? t.paths[r.to_path].id : ""},
                         {"accepted", r.accepted},
                         {"objective", r.objective}});
    }
    return {{"evaluations", trace.evaluations},
            {"iterations", trace.iterations},
            {"objective_history", trace.objective_history},
            {"final_objective", trace.final_objective},
            {"truncated", trace.truncated},
            {"log", iters}};
}

void write_trace_csv(const std::filesystem::path& path, const global_options& g,
                     const loaded_scenario& sc, const roadq::optimization_trace& trace) {
    std::ofstream out = open_csv(path, g, sc);
    out << "iteration,phi,flow,from_path,to_path,accepted,objective\n";
    std::size_t i = 0;
    for (const roadq::iteration_record& r : trace.log) {
        out << i++ << "," << r.phi << ","
            << (r.flow >= 0 ? sc.topo.flows[r.flow].id : "") << ","
            << (r.from_path >= 0 ? sc.topo.paths[r.from_path].id : "") << ","
            << (r.to_path >= 0 ? sc.topo.paths[r.to_path].id : "") << ","
            << (r.accepted ? 1 : 0) << "," << r.objective << "\n";
    }
}

json report_to_json(const roadq::topology& t, const roadq::sim_report& r) {
    json occ = json::object();
    for (int q = 0; q < t.n_queues(); ++q)
        occ[t.queues[q].id] = r.per_queue_mean_occupancy[q];
    json exc = json::object();
    json counts = json::object();
    for (int f = 0; f < t.n_flows(); ++f) {
        exc[t.flows[f].id] = r.per_flow_exceedance[f];
        counts[t.flows[f].id] = r.per_flow_trip_times[f].size();
    }
    return {{"mean_trip_time", r.mean_trip_time},
            {"mean_occupancy", roadq::overall_mean_occupancy(r)},
            {"per_flow_exceedance", exc},
            {"per_flow_samples", counts},
            {"per_queue_mean_occupancy", occ},
            {"vehicle_count", r.vehicle_count},
            {"generated", r.generated},
            {"completed_total", r.completed_total},
            {"truncated", r.truncated},
            {"unstable_warned", r.unstable_warned}};
}

void write_empirical_cdf_csv(const std::filesystem::path& path, const global_options& g,
                             const loaded_scenario& sc, const roadq::sim_report& r) {
    const roadq::topology& t = sc.topo;
    double tmax = 0.0;
    for (const auto& samples : r.per_flow_trip_times)
        if (!samples.empty()) tmax = std::max(tmax, samples.back());
    if (tmax <= 0.0) tmax = 1.0;

    std::ofstream out = open_csv(path, g, sc);
    out << "t";
    for (const roadq::flow_spec& f : t.flows) out << ",F_" << f.id;
    out << "\n";
    const int rows = 400;
    for (int i = 0; i <= rows; ++i) {
        const double x = tmax * i / rows;
        out << x;
        for (int f = 0; f < t.n_flows(); ++f) {
            const auto& s = r.per_flow_trip_times[f];
            const auto n = static_cast<double>(s.size());
            const auto le = std::upper_bound(s.begin(), s.end(), x) - s.begin();
            out << "," << (n > 0 ? static_cast<double>(le) / n : 0.0);
        }
        out << "\n";
    }
}

int cmd_validate(const global_options& g) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    const roadq::policy uni = roadq::uniform_policy(t);
    const roadq::stability_report stab = roadq::check_stability(t, uni);

    json rep = make_meta(g, sc);
    rep["queues"] = t.n_queues();
    rep["flows"] = t.n_flows();
    rep["paths"] = t.n_paths();
    rep["junctions"] = t.junction_count;
    rep["uniform_policy_stable"] = stab.all_stable;
    if (!stab.all_stable) rep["unstable_queues"] = stab.violating;

    std::cout << rep.dump(2) << "\n";
    return 0;
}

int cmd_optimize(const global_options& g, const std::string& algorithm, double grid_step,
                 double phi0, double phi_min, long max_evals) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    std::filesystem::create_directories(g.out_dir);

    roadq::bh_config bh_cfg;
    bh_cfg.phi0 = phi0;
    bh_cfg.phi_min = phi_min;
    bh_cfg.max_evals = max_evals;

    const auto start = std::chrono::steady_clock::now();
    roadq::policy result;
    json extra;
    if (algorithm == "bh") {
        roadq::optimization_trace trace =
            roadq::bh_optimize(t, bh_cfg, roadq::uniform_policy(t));
        result = trace.final_policy;
        extra = trace_to_json(t, trace);
        write_trace_csv(std::filesystem::path(g.out_dir) / "trace_bh.csv", g, sc, trace);
    } else if (algorithm == "bruteforce") {
        roadq::brute_force_result bf = roadq::brute_force_optimize(t, grid_step);
        result = bf.best;
        extra = {{"evaluations", bf.evaluations}, {"final_objective", bf.objective}};
    } else if (algorithm == "gradient") {
        roadq::optimization_trace trace =
            roadq::gradient_baseline(t, roadq::uniform_policy(t));
        result = trace.final_policy;
        extra = trace_to_json(t, trace);
        write_trace_csv(std::filesystem::path(g.out_dir) / "trace_gradient.csv", g, sc, trace);
    } else if (algorithm == "bipartite") {
        result = roadq::bipartite_matching_policy(t);
        extra = json::object();
    } else {
        throw roadq::validation_error("unknown algorithm '" + algorithm +
                                      "' (expected bh|bruteforce|gradient|bipartite)");
    }
    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();

    const double objective = roadq::evaluate_objective(t, result).objective;

    json policy_doc = roadq::policy_to_json(t, result);
    policy_doc["meta"] = make_meta(g, sc);
    policy_doc["meta"]["algorithm"] = algorithm;
    write_json(std::filesystem::path(g.out_dir) / ("policy_" + algorithm + ".json"), policy_doc);

    json trace_doc = make_meta(g, sc);
    trace_doc["algorithm"] = algorithm;
    trace_doc["result"] = extra;
    trace_doc["objective"] = objective;
    trace_doc["wall_seconds"] = elapsed;
    write_json(std::filesystem::path(g.out_dir) / ("trace_" + algorithm + ".json"), trace_doc);

    std::cout << "algorithm: " << algorithm << "\nobjective: " << objective;
    if (extra.contains("evaluations"))
        std::cout << "\nevaluations: " << extra["evaluations"].get<long>();
    std::cout << "\nwall_seconds: " << elapsed << "\n";
    return 0;
}

int cmd_evaluate(const global_options& g, const std::string& policy_spec) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    std::filesystem::create_directories(g.out_dir);

    roadq::bh_config bh_cfg;
    roadq::policy pol = resolve_policy(policy_spec, sc, bh_cfg, nullptr);
    roadq::flow_exceedance fx = roadq::evaluate_objective(t, pol);

    json doc = make_meta(g, sc);
    doc["objective"] = fx.objective;
    json per_flow = json::object();
    json per_path = json::object();
    for (int f = 0; f < t.n_flows(); ++f) {
        per_flow[t.flows[f].id] = fx.per_flow_delta[f];
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s)
            per_path[t.paths[t.flow_paths[f][s]].id] = fx.per_path_delta[f][s];
    }
    doc["per_flow_delta"] = per_flow;
    doc["per_path_delta"] = per_path;
    doc["numeric_fallback"] = fx.used_numeric_fallback;
    write_json(std::filesystem::path(g.out_dir) / "exceedance.json", doc);

    // per-path CDF table
    std::vector<roadq::path_travel_time> cdfs = roadq::all_path_cdfs(t, pol);
    double horizon = 0.0;
    for (const roadq::path_travel_time& p : cdfs) {
        if (p.form == roadq::path_travel_time::kind::closed_form)
            horizon = std::max(horizon, roadq::detail::closed_form_horizon(p.terms));
        else
            horizon = std::max(horizon, p.tab.horizon());
    }
    std::ofstream out = open_csv(std::filesystem::path(g.out_dir) / "path_cdfs.csv", g, sc);
    out << "t";
    for (const roadq::route_path& p : t.paths) out << ",F_" << p.id;
    out << "\n";
    const int rows = 1000;
    for (int i = 0; i <= rows; ++i) {
        const double x = horizon * i / rows;
        out << x;
        for (const roadq::path_travel_time& p : cdfs) out << "," << p.cdf_at(x);
        out << "\n";
    }

    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const global_options& g, const std::string& flow_id, const std::string& path_id,
              double from, double to, double step) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    std::filesystem::create_directories(g.out_dir);

    auto fit = t.flow_index.find(flow_id);
    if (fit == t.flow_index.end())
        throw roadq::validation_error("sweep: unknown flow '" + flow_id + "'");
    const int f = fit->second;
    if (t.flow_paths[f].size() != 2)
        throw roadq::validation_error("sweep: flow '" + flow_id + "' has " +
                                      std::to_string(t.flow_paths[f].size()) +
                                      " paths; exactly one free probability dimension "
                                      "(two paths) is required");
    int slot = -1;
    for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s)
        if (t.paths[t.flow_paths[f][s]].id == path_id) slot = static_cast<int>(s);
    if (slot < 0)
        throw roadq::validation_error("sweep: flow '" + flow_id + "' has no path '" +
                                      path_id + "'");
    if (!(step > 0.0) || from < 0.0 || to > 1.0 || from > to)
        throw roadq::validation_error("sweep: need 0 <= from <= to <= 1 and step > 0");

    const roadq::topology md1 = roadq::with_service_model(t, roadq::queue_service::deterministic);

    std::ofstream out = open_csv(std::filesystem::path(g.out_dir) / "sweep.csv", g, sc);
    out << "p,objective_mm1,objective_md1\n";
    double best_p = from;
    double best_obj = 1e300;
    for (double p = from; p <= to + 1e-12; p += step) {
        roadq::policy pol = roadq::uniform_policy(t);
        pol.path_probs[f][slot] = p;
        pol.path_probs[f][1 - slot] = 1.0 - p;
        const double mm1 = roadq::evaluate_objective(t, pol).objective;
        const double md1_obj = roadq::evaluate_objective(md1, pol).objective;
        out << p << "," << mm1 << "," << md1_obj << "\n";
        if (mm1 < best_obj) {
            best_obj = mm1;
            best_p = p;
        }
    }
    std::cout << "sweep written; mm1 minimum " << best_obj << " at p=" << best_p << "\n";
    return 0;
}

int cmd_simulate(const global_options& g, const std::string& policy_spec, double horizon,
                 double warmup, int replications, double window) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    std::filesystem::create_directories(g.out_dir);

    roadq::bh_config bh_cfg;
    bool distributed = false;
    roadq::policy pol = resolve_policy(policy_spec, sc, bh_cfg, &distributed);

    roadq::sim_config cfg;
    cfg.horizon = horizon;
    cfg.warmup = warmup;
    cfg.seed = g.seed;
    cfg.replications = replications;
    cfg.jobs = g.jobs;
    cfg.distributed = distributed;
    cfg.pol = pol;
    if (window > 0.0) {
        cfg.window_batching = true;
        cfg.window_length = window;
    }

    roadq::sim_report rep = roadq::simulate(t, cfg);
    json doc = make_meta(g, sc);
    doc["policy"] = policy_spec;
    doc["report"] = report_to_json(t, rep);
    write_json(std::filesystem::path(g.out_dir) / "simreport.json", doc);
    write_empirical_cdf_csv(std::filesystem::path(g.out_dir) / "empirical_cdf.csv", g, sc, rep);

    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_compare(const global_options& g, const std::vector<std::string>& specs, double horizon,
                double warmup, int replications) {
    loaded_scenario sc = resolve_scenario(g.scenario);
    const roadq::topology& t = sc.topo;
    std::filesystem::create_directories(g.out_dir);

    roadq::bh_config bh_cfg;
    std::vector<roadq::named_policy> policies;
    for (const std::string& s : specs) {
        roadq::named_policy np;
        np.name = s;
        np.pol = resolve_policy(s, sc, bh_cfg, &np.distributed);
        policies.push_back(std::move(np));
    }

    roadq::sim_config cfg;
    cfg.horizon = horizon;
    cfg.warmup = warmup;
    cfg.seed = g.seed;
    cfg.replications = replications;
    cfg.jobs = g.jobs;

    std::vector<roadq::comparison_entry> entries = roadq::compare_policies(t, policies, cfg);

    json doc = make_meta(g, sc);
    doc["policies"] = json::array();
    std::ostringstream table;
    table << "policy,mean_trip_time,mean_occupancy,worst_exceedance,completed\n";
    for (const roadq::comparison_entry& e : entries) {
        json entry = {{"name", e.name}, {"report", report_to_json(t, e.report)}};
        doc["policies"].push_back(entry);
        double worst = 0.0;
        for (double x : e.report.per_flow_exceedance) worst = std::max(worst, x);
        table << e.name << "," << e.report.mean_trip_time << ","
              << roadq::overall_mean_occupancy(e.report) << "," << worst << ","
              << e.report.vehicle_count << "\n";
        std::string fname = "empirical_cdf_" + e.name + ".csv";
        for (char& c : fname)
            if (c == '/' || c == '\\') c = '_';
        write_empirical_cdf_csv(std::filesystem::path(g.out_dir) / fname, g, sc, e.report);
    }
    write_json(std::filesystem::path(g.out_dir) / "comparison.json", doc);
    {
        std::ofstream summary = open_csv(std::filesystem::path(g.out_dir) / "summary.csv", g, sc);
        summary << table.str();
    }

    if (g.format == "csv") std::cout << table.str();
    else std::cout << doc.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"roadq: queue-network travel-time analysis and flow-splitting optimization"};
    app.require_subcommand(1);

    global_options g;
    app.add_option("--scenario", g.scenario,
                   "bundled scenario name (small|medium|large) or scenario JSON path");
    app.add_option("--seed", g.seed, "random seed echoed into every artifact");
    app.add_option("--out-dir", g.out_dir, "directory for output artifacts");
    app.add_option("--jobs", g.jobs, "max parallel workers for simulation replications");
    app.add_option("--format", g.format, "stdout format: json|csv")
        ->check(CLI::IsMember({"json", "csv"}));
    app.fallthrough();

    auto* validate = app.add_subcommand("validate", "validate a scenario and print a summary");

    auto* optimize = app.add_subcommand("optimize", "run an optimizer and write the policy");
    std::string algorithm = "bh";
    double grid_step = 0.001, phi0 = 0.25, phi_min = 1.0 / 1024.0;
    long max_evals = 200000;
    optimize->add_option("--algorithm", algorithm, "bh|bruteforce|gradient|bipartite");
    optimize->add_option("--grid-step", grid_step, "grid step for bruteforce");
    optimize->add_option("--phi0", phi0, "initial transfer fraction (bh)");
    optimize->add_option("--phi-min", phi_min, "termination threshold (bh)");
    optimize->add_option("--max-evals", max_evals, "objective evaluation cap");

    auto* evaluate = app.add_subcommand("evaluate", "analytic exceedances and per-path CDFs");
    std::string eval_policy = "uniform";
    evaluate->add_option("--policy", eval_policy,
                         "uniform|bh|bipartite|gradient or a policy JSON path");

    auto* sweep = app.add_subcommand("sweep", "objective curve over one path probability");
    std::string sweep_flow = "f2", sweep_path = "f2#1";
    double sweep_from = 0.01, sweep_to = 0.99, sweep_step = 0.01;
    sweep->add_option("--flow", sweep_flow, "flow owning the swept path");
    sweep->add_option("--path", sweep_path, "path whose probability is swept");
    sweep->add_option("--from", sweep_from, "range start");
    sweep->add_option("--to", sweep_to, "range end");
    sweep->add_option("--step", sweep_step, "grid step");

    auto* simulate = app.add_subcommand("simulate", "discrete-event simulation of one policy");
    std::string sim_policy = "uniform";
    double horizon = 10000.0, warmup = 0.1, window = 0.0;
    int replications = 1;
    simulate->add_option("--policy", sim_policy,
                         "uniform|bh|bipartite|gradient|distributed or a policy JSON path");
    simulate->add_option("--horizon", horizon, "simulated time units");
    simulate->add_option("--warmup", warmup, "warmup fraction discarded");
    simulate->add_option("--replications", replications, "independent replications");
    simulate->add_option("--window", window,
                         "distributed decisions use occupancy snapshots of this window "
                         "length (0 = continuous)");

    auto* compare = app.add_subcommand("compare", "simulate several policies with common "
                                                  "random numbers");
    std::vector<std::string> compare_specs{"bh", "bipartite", "distributed"};
    double cmp_horizon = 10000.0, cmp_warmup = 0.1;
    int cmp_replications = 1;
    compare->add_option("--policies", compare_specs, "policies/algorithms to compare");
    compare->add_option("--horizon", cmp_horizon, "simulated time units");
    compare->add_option("--warmup", cmp_warmup, "warmup fraction discarded");
    compare->add_option("--replications", cmp_replications, "independent replications");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(g);
        if (optimize->parsed())
            return cmd_optimize(g, algorithm, grid_step, phi0, phi_min, max_evals);
        if (evaluate->parsed()) return cmd_evaluate(g, eval_policy);
        if (sweep->parsed())
            return cmd_sweep(g, sweep_flow, sweep_path, sweep_from, sweep_to, sweep_step);
        if (simulate->parsed())
            return cmd_simulate(g, sim_policy, horizon, warmup, replications, window);
        if (compare->parsed())
            return cmd_compare(g, compare_specs, cmp_horizon, cmp_warmup, cmp_replications);
    } catch (const roadq::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const roadq::instability_error& e) {
        std::cerr << "instability: " << e.what() << "\n";
        return 3;
    } catch (const roadq::infeasibility_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const roadq::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
