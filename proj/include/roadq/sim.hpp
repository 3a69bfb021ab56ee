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

#ifndef ROADQ_SIM_HPP
#define ROADQ_SIM_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <future>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "roadq/baselines.hpp"
#include "roadq/errors.hpp"
#include "roadq/rng.hpp"
#include "roadq/topology.hpp"

namespace roadq {

/// Mesoscopic discrete-event simulation parameters. Vehicles arrive in
/// per-flow Poisson processes (batched when the ingress queue carries a
/// batch pmf), either follow a pre-sampled path (policy mode) or pick
/// successors with the distributed occupancy rule, and are served FIFO by a
/// single exponential or deterministic server per queue.
struct sim_config {
    double horizon = 10000.0;
    double warmup = 0.1;  // fraction of the horizon whose arrivals are discarded
    std::uint64_t seed = 1;
    int replications = 1;
    int jobs = 1;  // replications run in parallel up to this many workers
    bool distributed = false;
    policy pol;  // ignored in distributed mode (service rates run at mu_max)
    std::size_t max_events = 80000000;
    // optional actualizer-style batching of distributed decisions: occupancy
    // snapshots refresh once per window instead of continuously (default off)
    bool window_batching = false;
    double window_length = 0.0;
};

struct sim_report {
    std::vector<std::vector<double>> per_flow_trip_times;  // sorted samples
    std::vector<double> per_flow_exceedance;               // P(trip > omega_k)
    double mean_trip_time = 0.0;
    std::vector<double> per_queue_mean_occupancy;          // time average
    long vehicle_count = 0;    // completed trips included in the samples
    long generated = 0;        // all arrivals, warmup included
    long completed_total = 0;  // all completions, warmup included
    bool truncated = false;
    bool unstable_warned = false;
};

namespace detail {

enum : std::uint64_t { kStreamArrival = 1, kStreamBatch = 2, kStreamChoice = 3, kStreamService = 4 };

struct sim_event {
    double time = 0.0;
    std::uint64_t seq = 0;
    int kind = 0;     // 0 arrival, 1 departure
    int subject = 0;  // flow index or queue index

    bool operator>(const sim_event& o) const {
        if (time != o.time) return time > o.time;
        return seq > o.seq;
    }
};

struct sim_vehicle {
    int flow = -1;
    int path = -1;  // -1 in distributed mode
    int pos = 0;
    double entry = 0.0;
    bool counted = false;  // arrived after warmup
};

/// Queues from which `target` is reachable.
inline std::vector<char> reachable_to(const topology& t, int target) {
    std::vector<char> ok(t.queues.size(), 0);
    ok[target] = 1;
    for (auto it = t.topo_order.rbegin(); it != t.topo_order.rend(); ++it)
        for (int v : t.successors[*it])
            if (ok[v]) { ok[*it] = 1; break; }
    return ok;
}

struct replication_result {
    std::vector<std::vector<double>> trips;  // per flow, arrival order
    std::vector<double> mean_occupancy;      // per queue
    long vehicle_count = 0;
    long generated = 0;
    long completed_total = 0;
    bool truncated = false;
};

inline replication_result simulate_replication(const topology& t, const sim_config& cfg,
                                               const policy& pol,
                                               const std::vector<std::vector<char>>& reach,
                                               int rep) {
    const double warmup_time = cfg.warmup * cfg.horizon;

    std::vector<splitmix64> arrival_rng, batch_rng, choice_rng;
    for (int f = 0; f < t.n_flows(); ++f) {
        arrival_rng.emplace_back(derive_seed(cfg.seed, rep, kStreamArrival, f));
        batch_rng.emplace_back(derive_seed(cfg.seed, rep, kStreamBatch, f));
        choice_rng.emplace_back(derive_seed(cfg.seed, rep, kStreamChoice, f));
    }
    std::vector<splitmix64> service_rng;
    for (int q = 0; q < t.n_queues(); ++q)
        service_rng.emplace_back(derive_seed(cfg.seed, rep, kStreamService, q));

    replication_result res;
    res.trips.assign(t.flows.size(), {});
    res.mean_occupancy.assign(t.queues.size(), 0.0);

    std::vector<sim_vehicle> vehicles;
    std::vector<std::deque<int>> fifo(t.queues.size());
    std::vector<double> occ_integral(t.queues.size(), 0.0);
    std::vector<double> occ_last_t(t.queues.size(), 0.0);
    std::vector<long> occ_snapshot(t.queues.size(), 0);
    double next_window = 0.0;

    std::priority_queue<sim_event, std::vector<sim_event>, std::greater<sim_event>> events;
    std::uint64_t seq = 0;
    std::size_t processed = 0;

    auto occupancy = [&](int q) { return static_cast<long>(fifo[q].size()); };
    auto track_occ = [&](int q, double now) {
        const double lo = std::max(occ_last_t[q], warmup_time);
        const double hi = std::min(now, cfg.horizon);
        if (hi > lo) occ_integral[q] += static_cast<double>(fifo[q].size()) * (hi - lo);
        occ_last_t[q] = now;
    };
    auto service_time = [&](int q) {
        const double mu = cfg.distributed ? t.queues[q].mu_max : pol.service_rates[q];
        if (t.queues[q].model == queue_service::deterministic) return 1.0 / mu;
        return service_rng[q].exponential(mu);
    };
    auto complete = [&](int v, double now) {
        res.completed_total++;
        sim_vehicle& veh = vehicles[v];
        if (veh.counted) {
            res.trips[veh.flow].push_back(now - veh.entry);
            res.vehicle_count++;
        }
    };
    auto enqueue = [&](int q, int v, double now) {
        if (t.queues[q].model == queue_service::sink) {
            complete(v, now);
            return;
        }
        track_occ(q, now);
        fifo[q].push_back(v);
        if (fifo[q].size() == 1)
            events.push({now + service_time(q), seq++, 1, q});
    };
    auto next_queue = [&](int v, int q, double now) -> int {
        sim_vehicle& veh = vehicles[v];
        if (veh.path >= 0) {
            const auto& qs = t.path_queues[veh.path];
            veh.pos++;
            return veh.pos < static_cast<int>(qs.size()) ? qs[veh.pos] : -1;
        }
        const int egress = t.queue_index.at(t.flows[veh.flow].egress);
        if (q == egress) return -1;
        if (cfg.window_batching && now >= next_window) {
            for (int qq = 0; qq < t.n_queues(); ++qq) occ_snapshot[qq] = occupancy(qq);
            next_window = (std::floor(now / cfg.window_length) + 1.0) * cfg.window_length;
        }
        std::vector<successor_candidate> cands;
        std::optional<int> stay;
        for (int s : t.successors[q]) {
            if (!reach[veh.flow][s]) continue;
            if (!stay) stay = s;  // first feasible successor in edge order
            cands.push_back({s, cfg.window_batching ? occ_snapshot[s] : occupancy(s)});
        }
        if (cands.empty()) return -1;  // cannot happen on a finalized topology
        return distributed_rule(cands, stay, occupancy(q));
    };

    for (int f = 0; f < t.n_flows(); ++f) {
        const double t0 = arrival_rng[f].exponential(t.flows[f].rate);
        if (t0 <= cfg.horizon) events.push({t0, seq++, 0, f});
    }

    while (!events.empty()) {
        if (++processed > cfg.max_events) {
            res.truncated = true;
            break;
        }
        const sim_event ev = events.top();
        events.pop();

        if (ev.kind == 0) {
            const int f = ev.subject;
            const double next = ev.time + arrival_rng[f].exponential(t.flows[f].rate);
            if (next <= cfg.horizon) events.push({next, seq++, 0, f});

            const int ingress = t.queue_index.at(t.flows[f].ingress);
            std::size_t batch = 1;
            if (t.queues[ingress].batch)
                batch = batch_rng[f].discrete(t.queues[ingress].batch->probs()) + 1;
            for (std::size_t i = 0; i < batch; ++i) {
                sim_vehicle veh;
                veh.flow = f;
                veh.entry = ev.time;
                veh.counted = ev.time > warmup_time;
                if (!cfg.distributed) {
                    const std::size_t pick = choice_rng[f].discrete(pol.path_probs[f]);
                    veh.path = t.flow_paths[f][pick];
                    veh.pos = 0;
                }
                res.generated++;
                vehicles.push_back(veh);
                enqueue(ingress, static_cast<int>(vehicles.size() - 1), ev.time);
            }
        } else {
            const int q = ev.subject;
            track_occ(q, ev.time);
            const int v = fifo[q].front();
            fifo[q].pop_front();
            if (!fifo[q].empty())
                events.push({ev.time + service_time(q), seq++, 1, q});

            const bool at_path_end = vehicles[v].path >= 0 &&
                vehicles[v].pos + 1 == static_cast<int>(t.path_queues[vehicles[v].path].size());
            if (at_path_end) {
                complete(v, ev.time);
            } else {
                const int nq = next_queue(v, q, ev.time);
                if (nq < 0) complete(v, ev.time);
                else enqueue(nq, v, ev.time);
            }
        }
    }

    const double window = cfg.horizon - warmup_time;
    for (int q = 0; q < t.n_queues(); ++q) {
        track_occ(q, cfg.horizon);
        res.mean_occupancy[q] = occ_integral[q] / window;
    }
    return res;
}

} // namespace detail

/// Runs the simulation. Deterministic: the event queue breaks time ties by
/// creation sequence number and every random stream derives from
/// (seed, replication, stream, entity), so identical configurations produce
/// bit-identical reports regardless of the worker count. Arrival streams do
/// not depend on the policy, which gives common random numbers across
/// policies compared at the same seed.
inline sim_report simulate(const topology& t, const sim_config& cfg) {
    if (!(cfg.horizon > 0.0)) throw validation_error("sim horizon must be > 0");
    if (cfg.warmup < 0.0 || cfg.warmup >= 1.0)
        throw validation_error("sim warmup must be in [0, 1)");
    if (cfg.replications < 1) throw validation_error("replications must be >= 1");
    if (cfg.window_batching && !(cfg.window_length > 0.0))
        throw validation_error("window batching needs a positive window length");

    policy pol = cfg.distributed ? uniform_policy(t) : cfg.pol;
    if (!cfg.distributed) validate_policy(t, pol);

    sim_report report;
    report.per_flow_trip_times.assign(t.flows.size(), {});
    report.per_queue_mean_occupancy.assign(t.queues.size(), 0.0);
    if (!cfg.distributed)
        report.unstable_warned = !check_stability(t, pol).all_stable;

    std::vector<std::vector<char>> reach(t.flows.size());
    if (cfg.distributed)
        for (int f = 0; f < t.n_flows(); ++f)
            reach[f] = detail::reachable_to(t, t.queue_index.at(t.flows[f].egress));

    std::vector<detail::replication_result> results(cfg.replications);
    const int jobs = std::max(1, cfg.jobs);
    for (int base = 0; base < cfg.replications; base += jobs) {
        std::vector<std::future<detail::replication_result>> running;
        const int hi = std::min(cfg.replications, base + jobs);
        for (int rep = base; rep < hi; ++rep)
            running.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                         [&, rep] {
                                             return detail::simulate_replication(t, cfg, pol,
                                                                                 reach, rep);
                                         }));
        for (int rep = base; rep < hi; ++rep)
            results[rep] = running[static_cast<std::size_t>(rep - base)].get();
    }

    for (const detail::replication_result& res : results) {
        for (int f = 0; f < t.n_flows(); ++f)
            report.per_flow_trip_times[f].insert(report.per_flow_trip_times[f].end(),
                                                 res.trips[f].begin(), res.trips[f].end());
        for (int q = 0; q < t.n_queues(); ++q)
            report.per_queue_mean_occupancy[q] += res.mean_occupancy[q];
        report.vehicle_count += res.vehicle_count;
        report.generated += res.generated;
        report.completed_total += res.completed_total;
        report.truncated |= res.truncated;
    }
    for (double& o : report.per_queue_mean_occupancy)
        o /= static_cast<double>(cfg.replications);

    report.per_flow_exceedance.assign(t.flows.size(), 0.0);
    double trip_sum = 0.0;
    long trip_n = 0;
    for (int f = 0; f < t.n_flows(); ++f) {
        auto& samples = report.per_flow_trip_times[f];
        std::sort(samples.begin(), samples.end());
        long over = 0;
        for (double s : samples) {
            trip_sum += s;
            if (s > t.flows[f].omega) over++;
        }
        trip_n += static_cast<long>(samples.size());
        report.per_flow_exceedance[f] = samples.empty()
            ? 0.0
            : static_cast<double>(over) / static_cast<double>(samples.size());
    }
    report.mean_trip_time = trip_n > 0 ? trip_sum / static_cast<double>(trip_n) : 0.0;
    return report;
}

/// A policy (or the distributed rule) with a display name, for comparisons.
struct named_policy {
    std::string name;
    bool distributed = false;
    policy pol;
};

struct comparison_entry {
    std::string name;
    sim_report report;
};

/// Runs one simulation per policy with common random numbers: the same seed
/// (hence identical arrival processes) is used for every policy in each
/// replication.
inline std::vector<comparison_entry> compare_policies(const topology& t,
                                                      const std::vector<named_policy>& policies,
                                                      const sim_config& base_cfg) {
    std::vector<comparison_entry> out;
    for (const named_policy& np : policies) {
        sim_config cfg = base_cfg;
        cfg.distributed = np.distributed;
        cfg.pol = np.pol;
        out.push_back({np.name, simulate(t, cfg)});
    }
    return out;
}

/// Mean occupancy across all queues (the headline occupancy statistic).
inline double overall_mean_occupancy(const sim_report& r) {
    double acc = 0.0;
    for (double o : r.per_queue_mean_occupancy) acc += o;
    return r.per_queue_mean_occupancy.empty()
        ? 0.0
        : acc / static_cast<double>(r.per_queue_mean_occupancy.size());
}

} // namespace roadq

#endif
