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

#ifndef ROADQ_BASELINES_HPP
#define ROADQ_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roadq/errors.hpp"
#include "roadq/topology.hpp"

namespace roadq {

/// Bipartite flow/path structure plus conflict edges between paths sharing
/// at least one queue. Vertices are implicit (flow indices and path indices).
struct conflict_graph {
    int n_flows = 0;
    int n_paths = 0;
    std::vector<std::pair<int, int>> flow_path_edges;  // (flow, path)
    std::vector<std::pair<int, int>> conflict_edges;   // (path, path), i < j
};

inline conflict_graph build_conflict_graph(const topology& t) {
    conflict_graph g;
    g.n_flows = t.n_flows();
    g.n_paths = t.n_paths();
    for (int w = 0; w < t.n_paths(); ++w)
        g.flow_path_edges.emplace_back(t.path_flow[w], w);
    for (int i = 0; i < t.n_paths(); ++i) {
        std::set<int> qi(t.path_queues[i].begin(), t.path_queues[i].end());
        for (int j = i + 1; j < t.n_paths(); ++j) {
            bool shared = false;
            for (int q : t.path_queues[j])
                if (qi.count(q)) { shared = true; break; }
            if (shared) g.conflict_edges.emplace_back(i, j);
        }
    }
    return g;
}

namespace detail {

/// Analytic mean sojourn at one queue under arrival rate lambda.
inline double mean_sojourn(const queue_spec& q, double mu, double lambda) {
    if (q.model == queue_service::sink) return 0.0;
    const double gbar = q.batch ? q.batch->mean() : 1.0;
    const double rho = lambda * gbar / mu;
    if (!(rho < 1.0)) return 1e300;
    if (q.model == queue_service::deterministic)
        return 1.0 / mu + rho / (2.0 * mu * (1.0 - rho));
    // Markovian service; batch arrivals add the wait behind same-batch
    // predecessors: E[T] = (1 + (g2 - gbar)/(2 gbar)) / (mu (1 - rho))
    if (q.batch) {
        double g2 = 0.0;
        for (std::size_t n = 0; n < q.batch->probs().size(); ++n)
            g2 += static_cast<double>((n + 1) * (n + 1)) * q.batch->probs()[n];
        return (1.0 + (g2 - gbar) / (2.0 * gbar)) / (mu * (1.0 - rho));
    }
    return 1.0 / (mu - lambda);
}

} // namespace detail

/// Whole-flow assignment in the spirit of conflict-aware bipartite matching:
/// flows are processed in decreasing rate order and each is assigned
/// entirely (p = 1) to the feasible path with the lowest cost, where cost is
/// the path's analytic mean travel time under the already-assigned load plus
/// a congestion penalty for every conflict edge to an already-used path (the
/// mean-sojourn increase inflicted on the shared queues). Deterministic;
/// throws when some flow cannot be placed without saturating a queue.
inline policy bipartite_matching_policy(const topology& t) {
    const conflict_graph graph = build_conflict_graph(t);

    policy pol = uniform_policy(t);
    for (auto& probs : pol.path_probs) std::fill(probs.begin(), probs.end(), 0.0);

    std::vector<double> lambda(t.queues.size(), 0.0);
    std::vector<char> used(t.paths.size(), 0);

    std::vector<int> order(t.flows.size());
    for (int f = 0; f < t.n_flows(); ++f) order[f] = f;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (t.flows[a].rate != t.flows[b].rate) return t.flows[a].rate > t.flows[b].rate;
        return t.flows[a].id < t.flows[b].id;
    });

    std::vector<std::vector<int>> conflicts(t.paths.size());
    for (auto [i, j] : graph.conflict_edges) {
        conflicts[i].push_back(j);
        conflicts[j].push_back(i);
    }

    for (int f : order) {
        const double rate = t.flows[f].rate;
        std::optional<std::size_t> best;
        double best_cost = 1e300;
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s) {
            const int w = t.flow_paths[f][s];

            bool feasible = true;
            for (int q : t.path_queues[w]) {
                if (t.queues[q].model == queue_service::sink) continue;
                const double gbar = t.queues[q].batch ? t.queues[q].batch->mean() : 1.0;
                if ((lambda[q] + rate) * gbar >= pol.service_rates[q]) { feasible = false; break; }
            }
            if (!feasible) continue;

            double cost = 0.0;
            for (int q : t.path_queues[w])
                cost += detail::mean_sojourn(t.queues[q], pol.service_rates[q], lambda[q] + rate);
            // congestion penalty: extra delay imposed on queues shared with
            // paths that already carry traffic
            for (int other : conflicts[w]) {
                if (!used[other]) continue;
                std::set<int> shared(t.path_queues[w].begin(), t.path_queues[w].end());
                for (int q : t.path_queues[other]) {
                    if (!shared.count(q)) continue;
                    cost += detail::mean_sojourn(t.queues[q], pol.service_rates[q], lambda[q] + rate) -
                            detail::mean_sojourn(t.queues[q], pol.service_rates[q], lambda[q]);
                }
            }
            if (cost < best_cost - 1e-15) {
                best_cost = cost;
                best = s;
            }
        }
        if (!best)
            throw infeasibility_error("no stable whole-flow assignment exists for flow '" +
                                      t.flows[f].id + "'");
        pol.path_probs[f][*best] = 1.0;
        used[t.flow_paths[f][*best]] = 1;
        for (int q : t.path_queues[t.flow_paths[f][*best]]) lambda[q] += rate;
    }
    return pol;
}

/// The local decision rule used by the distributed baseline: pick the
/// candidate successor queue with the fewest vehicles. Ties keep the current
/// lane when its successor is among the tied candidates, otherwise the
/// lowest queue index (== lowest id; queues are sorted) wins. When the
/// occupancy of the decision point's own queue is supplied, a lane change
/// happens only if some non-straight candidate is strictly emptier than the
/// current lane, mirroring CAM-based neighbor counting.
struct successor_candidate {
    int queue = -1;
    long occupancy = 0;
};

inline int distributed_rule(const std::vector<successor_candidate>& candidates,
                            std::optional<int> stay_hint = std::nullopt,
                            std::optional<long> current_occupancy = std::nullopt) {
    if (candidates.empty()) throw validation_error("distributed rule needs candidates");

    if (current_occupancy && stay_hint) {
        const successor_candidate* straight = nullptr;
        for (const auto& c : candidates)
            if (c.queue == *stay_hint) straight = &c;
        if (straight) {
            const successor_candidate* best = nullptr;
            for (const auto& c : candidates) {
                if (c.queue == *stay_hint) continue;
                if (c.occupancy < *current_occupancy &&
                    (!best || c.occupancy < best->occupancy ||
                     (c.occupancy == best->occupancy && c.queue < best->queue)))
                    best = &c;
            }
            return best ? best->queue : straight->queue;
        }
    }

    long min_occ = candidates.front().occupancy;
    for (const auto& c : candidates) min_occ = std::min(min_occ, c.occupancy);
    if (stay_hint)
        for (const auto& c : candidates)
            if (c.queue == *stay_hint && c.occupancy == min_occ) return c.queue;
    int best = -1;
    for (const auto& c : candidates)
        if (c.occupancy == min_occ && (best < 0 || c.queue < best)) best = c.queue;
    return best;
}

} // namespace roadq

#endif
