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

#ifndef ROADQ_TOPOLOGY_HPP
#define ROADQ_TOPOLOGY_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "roadq/errors.hpp"
#include "roadq/queue_models.hpp"

namespace roadq {

constexpr double kProbSumTolerance = 1e-9;
constexpr double kAlphaResidualTolerance = 1e-6;
constexpr std::size_t kMaxEnumeratedPaths = 200000;

enum class queue_service { markovian, deterministic, sink };

/// One road segment (a single lane on one stretch of road).
struct queue_spec {
    std::string id;
    double mu_max = 0.0;
    queue_service model = queue_service::markovian;
    std::optional<batch_pmf> batch;
};

/// Vehicles sharing an origin/destination pair within the topology.
struct flow_spec {
    std::string id;
    std::string ingress;
    std::string egress;
    double rate = 0.0;   // vehicles (or batches, with a batch pmf) per time unit
    double omega = 0.0;  // target travel time
};

/// An ordered queue sequence from a flow's ingress to its egress.
struct route_path {
    std::string id;
    std::string flow;
    std::vector<std::string> queues;
};

/// The queue network: queues, junction adjacency, flows, and the path set.
/// Call finalize() after filling the public fields (scenario loading does
/// this); the derived index members are rebuilt there.
struct topology {
    std::vector<queue_spec> queues;                              // sorted by id
    std::vector<std::pair<std::string, std::string>> junctions;  // edge list, file order kept
    std::vector<flow_spec> flows;                                // sorted by id
    std::vector<route_path> paths;                               // empty -> auto-enumerated
    std::map<std::pair<std::string, std::string>, double> fixed_alphas;

    // --- derived, rebuilt by finalize() ---
    std::map<std::string, int> queue_index;
    std::map<std::string, int> flow_index;
    std::vector<std::vector<int>> successors;     // per queue, edge-list order
    std::vector<std::vector<int>> path_queues;    // per path, queue indices
    std::vector<int> path_flow;                   // per path, flow index
    std::vector<std::vector<int>> flow_paths;     // per flow, path indices
    std::vector<std::vector<int>> queue_paths;    // per queue, path indices through it
    std::vector<int> topo_order;                  // queue indices, sources first
    int junction_count = 0;

    int n_queues() const { return static_cast<int>(queues.size()); }
    int n_flows() const { return static_cast<int>(flows.size()); }
    int n_paths() const { return static_cast<int>(paths.size()); }
};

/// Decision variables: per-flow path probabilities (aligned with
/// topology::flow_paths) and per-queue service rates.
struct policy {
    std::vector<std::vector<double>> path_probs;
    std::vector<double> service_rates;
};

struct arrival_rates {
    std::vector<double> lambda;  // per queue index
};

struct routing_matrix {
    std::map<std::pair<std::string, std::string>, double> alphas;
    double fit_residual = 0.0;
};

struct stability_report {
    std::vector<double> utilization;  // rho per queue (0 for sinks)
    bool all_stable = false;
    std::vector<std::string> violating;
};

namespace detail {

inline std::string join_ids(const std::vector<std::string>& ids, const char* sep = " -> ") {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += sep;
        out += ids[i];
    }
    return out;
}

/// DFS cycle check; returns a cycle as queue ids if one exists.
inline std::optional<std::vector<std::string>> find_cycle(const topology& t) {
    const int n = t.n_queues();
    std::vector<int> color(n, 0);  // 0 white, 1 gray, 2 black
    std::vector<int> parent(n, -1);
    for (int start = 0; start < n; ++start) {
        if (color[start] != 0) continue;
        std::vector<std::pair<int, std::size_t>> stack{{start, 0}};
        color[start] = 1;
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            if (next < t.successors[u].size()) {
                int v = t.successors[u][next++];
                if (color[v] == 0) {
                    color[v] = 1;
                    parent[v] = u;
                    stack.push_back({v, 0});
                } else if (color[v] == 1) {
                    std::vector<std::string> cycle{t.queues[v].id};
                    for (int w = u; w != v && w != -1; w = parent[w])
                        cycle.push_back(t.queues[w].id);
                    cycle.push_back(t.queues[v].id);
                    std::reverse(cycle.begin(), cycle.end());
                    return cycle;
                }
            } else {
                color[u] = 2;
                stack.pop_back();
            }
        }
    }
    return std::nullopt;
}

inline std::vector<int> topological_order(const topology& t) {
    const int n = t.n_queues();
    std::vector<int> indeg(n, 0);
    for (int u = 0; u < n; ++u)
        for (int v : t.successors[u]) indeg[v]++;
    std::vector<int> order;
    order.reserve(n);
    std::set<int> ready;
    for (int u = 0; u < n; ++u)
        if (indeg[u] == 0) ready.insert(u);
    while (!ready.empty()) {
        int u = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(u);
        for (int v : t.successors[u])
            if (--indeg[v] == 0) ready.insert(v);
    }
    return order;
}

} // namespace detail

/// Enumerates all simple ingress-to-egress queue sequences of every flow, in
/// deterministic order (by flow id, then lexicographic queue-id sequence).
/// Requires the index members of `t` to be built for queues/junctions/flows.
inline std::vector<route_path> enumerate_paths(const topology& t) {
    std::vector<route_path> out;
    for (const flow_spec& flow : t.flows) {
        const int ingress = t.queue_index.at(flow.ingress);
        const int egress = t.queue_index.at(flow.egress);
        std::size_t found = 0;

        std::vector<int> current{ingress};
        std::vector<char> on_path(t.queues.size(), 0);
        on_path[ingress] = 1;
        // DFS over successors; order does not matter, paths are sorted below.
        std::vector<std::pair<int, std::size_t>> stack{{ingress, 0}};
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            if (u == egress) {
                route_path p;
                p.flow = flow.id;
                for (int q : current) p.queues.push_back(t.queues[q].id);
                out.push_back(std::move(p));
                if (++found > kMaxEnumeratedPaths)
                    throw validation_error("path enumeration exceeded " +
                                           std::to_string(kMaxEnumeratedPaths) + " paths");
                on_path[u] = 0;
                current.pop_back();
                stack.pop_back();
                continue;
            }
            if (next < t.successors[u].size()) {
                int v = t.successors[u][next++];
                if (on_path[v]) continue;
                on_path[v] = 1;
                current.push_back(v);
                stack.push_back({v, 0});
            } else {
                on_path[u] = 0;
                current.pop_back();
                stack.pop_back();
            }
        }
        if (found == 0)
            throw validation_error("flow '" + flow.id + "' has no path from '" +
                                   flow.ingress + "' to '" + flow.egress + "'");
    }
    std::sort(out.begin(), out.end(), [](const route_path& a, const route_path& b) {
        if (a.flow != b.flow) return a.flow < b.flow;
        return a.queues < b.queues;
    });
    return out;
}

/// Validates the topology, sorts queues/flows by id, enumerates paths when
/// none are given, and rebuilds every derived index.
inline void finalize(topology& t) {
    std::sort(t.queues.begin(), t.queues.end(),
              [](const queue_spec& a, const queue_spec& b) { return a.id < b.id; });
    std::sort(t.flows.begin(), t.flows.end(),
              [](const flow_spec& a, const flow_spec& b) { return a.id < b.id; });

    t.queue_index.clear();
    for (int i = 0; i < t.n_queues(); ++i) {
        const queue_spec& q = t.queues[i];
        if (q.id.empty()) throw validation_error("queues[" + std::to_string(i) + "].id: empty");
        if (!(q.mu_max > 0.0))
            throw validation_error("queues." + q.id + ".mu_max: must be > 0");
        if (!t.queue_index.emplace(q.id, i).second)
            throw validation_error("queues." + q.id + ": duplicate id");
    }

    t.successors.assign(t.queues.size(), {});
    std::set<std::pair<int, int>> seen_edges;
    for (const auto& [from, to] : t.junctions) {
        auto fi = t.queue_index.find(from);
        auto ti = t.queue_index.find(to);
        if (fi == t.queue_index.end())
            throw validation_error("junctions." + from + "->" + to + ".from: unknown queue");
        if (ti == t.queue_index.end())
            throw validation_error("junctions." + from + "->" + to + ".to: unknown queue");
        if (fi->second == ti->second)
            throw validation_error("junctions." + from + "->" + to + ": self loop");
        if (seen_edges.emplace(fi->second, ti->second).second)
            t.successors[fi->second].push_back(ti->second);
    }

    for (const queue_spec& q : t.queues)
        if (q.model == queue_service::sink && !t.successors[t.queue_index.at(q.id)].empty())
            throw validation_error("queues." + q.id + ": sink queues must have no successors");

    t.flow_index.clear();
    for (int i = 0; i < t.n_flows(); ++i) {
        const flow_spec& f = t.flows[i];
        if (f.id.empty()) throw validation_error("flows[" + std::to_string(i) + "].id: empty");
        if (!(f.rate > 0.0)) throw validation_error("flows." + f.id + ".rate: must be > 0");
        if (!(f.omega > 0.0)) throw validation_error("flows." + f.id + ".omega: must be > 0");
        if (!t.queue_index.count(f.ingress))
            throw validation_error("flows." + f.id + ".ingress: unknown queue '" + f.ingress + "'");
        if (!t.queue_index.count(f.egress))
            throw validation_error("flows." + f.id + ".egress: unknown queue '" + f.egress + "'");
        if (!t.flow_index.emplace(f.id, i).second)
            throw validation_error("flows." + f.id + ": duplicate id");
    }

    if (auto cycle = detail::find_cycle(t))
        throw validation_error("junctions: cycle detected: " + detail::join_ids(*cycle));
    t.topo_order = detail::topological_order(t);

    if (t.paths.empty()) t.paths = enumerate_paths(t);

    std::sort(t.paths.begin(), t.paths.end(), [](const route_path& a, const route_path& b) {
        if (a.flow != b.flow) return a.flow < b.flow;
        return a.queues < b.queues;
    });

    t.path_queues.assign(t.paths.size(), {});
    t.path_flow.assign(t.paths.size(), -1);
    t.flow_paths.assign(t.flows.size(), {});
    t.queue_paths.assign(t.queues.size(), {});
    for (int p = 0; p < t.n_paths(); ++p) {
        route_path& path = t.paths[p];
        auto fit = t.flow_index.find(path.flow);
        if (fit == t.flow_index.end())
            throw validation_error("paths[" + std::to_string(p) + "].flow: unknown flow '" +
                                   path.flow + "'");
        const flow_spec& flow = t.flows[fit->second];
        if (path.queues.empty())
            throw validation_error("paths[" + std::to_string(p) + "].queues: empty");
        if (path.queues.front() != flow.ingress)
            throw validation_error("paths[" + std::to_string(p) +
                                   "]: first queue must be the flow ingress '" + flow.ingress + "'");
        if (path.queues.back() != flow.egress)
            throw validation_error("paths[" + std::to_string(p) +
                                   "]: last queue must be the flow egress '" + flow.egress + "'");
        std::set<std::string> dedup(path.queues.begin(), path.queues.end());
        if (dedup.size() != path.queues.size())
            throw validation_error("paths[" + std::to_string(p) + "]: repeated queue");
        for (std::size_t i = 0; i < path.queues.size(); ++i) {
            auto qi = t.queue_index.find(path.queues[i]);
            if (qi == t.queue_index.end())
                throw validation_error("paths[" + std::to_string(p) + "].queues[" +
                                       std::to_string(i) + "]: unknown queue '" +
                                       path.queues[i] + "'");
            if (i > 0) {
                const auto& succ = t.successors[t.queue_index.at(path.queues[i - 1])];
                if (std::find(succ.begin(), succ.end(), qi->second) == succ.end())
                    throw validation_error("paths[" + std::to_string(p) + "]: edge " +
                                           path.queues[i - 1] + "->" + path.queues[i] +
                                           " is not in the junction list");
            }
            t.path_queues[p].push_back(qi->second);
        }
        if (path.id.empty())
            path.id = path.flow + "#" + std::to_string(t.flow_paths[fit->second].size());
        t.path_flow[p] = fit->second;
        t.flow_paths[fit->second].push_back(p);
        for (int q : t.path_queues[p]) t.queue_paths[q].push_back(p);
    }

    for (int f = 0; f < t.n_flows(); ++f)
        if (t.flow_paths[f].empty())
            throw validation_error("flows." + t.flows[f].id + ": no path serves this flow");

    t.junction_count = 0;
    for (const auto& succ : t.successors)
        if (succ.size() >= 2) t.junction_count++;
}

/// Uniform split over each flow's paths, service rates at their maxima.
inline policy uniform_policy(const topology& t) {
    policy p;
    p.path_probs.resize(t.flows.size());
    for (int f = 0; f < t.n_flows(); ++f)
        p.path_probs[f].assign(t.flow_paths[f].size(),
                               1.0 / static_cast<double>(t.flow_paths[f].size()));
    for (const queue_spec& q : t.queues) p.service_rates.push_back(q.mu_max);
    return p;
}

inline void validate_policy(const topology& t, const policy& p) {
    if (p.path_probs.size() != t.flows.size() || p.service_rates.size() != t.queues.size())
        throw validation_error("policy shape does not match topology");
    for (int f = 0; f < t.n_flows(); ++f) {
        if (p.path_probs[f].size() != t.flow_paths[f].size())
            throw validation_error("policy.path_probs." + t.flows[f].id + ": wrong path count");
        double sum = 0.0;
        for (double v : p.path_probs[f]) {
            if (v < -1e-12 || v > 1.0 + 1e-12)
                throw validation_error("policy.path_probs." + t.flows[f].id +
                                       ": probability outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > kProbSumTolerance)
            throw validation_error("policy.path_probs." + t.flows[f].id +
                                   ": probabilities sum to " + std::to_string(sum));
    }
    for (int q = 0; q < t.n_queues(); ++q) {
        const double mu = p.service_rates[q];
        if (!(mu > 0.0) || mu > t.queues[q].mu_max + 1e-12)
            throw validation_error("policy.service_rates." + t.queues[q].id +
                                   ": must be in (0, mu_max]");
    }
}

/// Per-queue arrival rates: lambda_i = sum_k Lambda^k sum_{w through q_i} p_w^k.
inline arrival_rates compute_arrival_rates(const topology& t, const policy& p) {
    arrival_rates out;
    out.lambda.assign(t.queues.size(), 0.0);
    for (int f = 0; f < t.n_flows(); ++f) {
        const double rate = t.flows[f].rate;
        for (std::size_t slot = 0; slot < t.flow_paths[f].size(); ++slot) {
            const double w = rate * p.path_probs[f][slot];
            if (w == 0.0) continue;
            for (int q : t.path_queues[t.flow_paths[f][slot]]) out.lambda[q] += w;
        }
    }
    return out;
}

/// Per-queue utilization rho_i = lambda_i gbar_i / mu_i (gbar from the batch
/// pmf when present; sinks are always stable).
inline stability_report check_stability(const topology& t, const policy& p) {
    const arrival_rates rates = compute_arrival_rates(t, p);
    stability_report rep;
    rep.utilization.assign(t.queues.size(), 0.0);
    rep.all_stable = true;
    for (int q = 0; q < t.n_queues(); ++q) {
        if (t.queues[q].model == queue_service::sink) continue;
        const double gbar = t.queues[q].batch ? t.queues[q].batch->mean() : 1.0;
        rep.utilization[q] = rates.lambda[q] * gbar / p.service_rates[q];
        if (!(rep.utilization[q] < 1.0)) {
            rep.all_stable = false;
            rep.violating.push_back(t.queues[q].id);
        }
    }
    return rep;
}

/// Path probabilities implied by a routing matrix: the product of the alphas
/// along each path's edges (edges leaving single-successor queues count 1).
inline policy alphas_to_path_probs(const topology& t, const routing_matrix& rm) {
    policy p = uniform_policy(t);
    for (int f = 0; f < t.n_flows(); ++f) {
        for (std::size_t slot = 0; slot < t.flow_paths[f].size(); ++slot) {
            const auto& qs = t.paths[t.flow_paths[f][slot]].queues;
            double prod = 1.0;
            for (std::size_t i = 1; i < qs.size(); ++i) {
                const int from = t.queue_index.at(qs[i - 1]);
                if (t.successors[from].size() < 2) continue;
                auto it = rm.alphas.find({qs[i - 1], qs[i]});
                prod *= (it == rm.alphas.end()) ? 0.0 : it->second;
            }
            p.path_probs[f][slot] = prod;
        }
    }
    return p;
}

/// Recovers junction transition probabilities from per-flow path
/// probabilities. The multiplicative system (one equation per positive-
/// probability path) is linearized by taking logs and solved by least
/// squares; the per-junction scale freedom the log system cannot see is then
/// removed by normalizing each junction's outgoing mass to 1, propagating
/// the correction upstream so every path product is preserved. Edges used
/// only by zero-probability paths get alpha = 0. Throws when the normalized
/// fit misses any given p_w by more than kAlphaResidualTolerance.
inline routing_matrix reconstruct_alphas(const topology& t, const policy& p) {
    validate_policy(t, p);

    // Junction out-edges are the unknowns (unless pinned in fixed_alphas).
    std::map<std::pair<int, int>, int> var_of_edge;
    std::vector<std::pair<int, int>> edges;  // all junction edges
    for (int u = 0; u < t.n_queues(); ++u) {
        if (t.successors[u].size() < 2) continue;
        for (int v : t.successors[u]) edges.emplace_back(u, v);
    }

    // Which junction edges appear on some positive-probability path?
    auto path_prob = [&](int path_idx) {
        const int f = t.path_flow[path_idx];
        const auto& slots = t.flow_paths[f];
        for (std::size_t s = 0; s < slots.size(); ++s)
            if (slots[s] == path_idx) return p.path_probs[f][s];
        return 0.0;
    };

    std::set<std::pair<int, int>> used_positive;
    std::vector<int> positive_paths;
    for (int w = 0; w < t.n_paths(); ++w) {
        if (path_prob(w) <= 0.0) continue;
        positive_paths.push_back(w);
        const auto& qs = t.path_queues[w];
        for (std::size_t i = 1; i < qs.size(); ++i)
            if (t.successors[qs[i - 1]].size() >= 2)
                used_positive.insert({qs[i - 1], qs[i]});
    }

    auto fixed_value = [&](int u, int v) -> std::optional<double> {
        auto it = t.fixed_alphas.find({t.queues[u].id, t.queues[v].id});
        if (it == t.fixed_alphas.end()) return std::nullopt;
        return it->second;
    };

    int n_vars = 0;
    for (const auto& e : edges)
        if (used_positive.count(e) && !fixed_value(e.first, e.second))
            var_of_edge[e] = n_vars++;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<int>(positive_paths.size()),
                                              std::max(n_vars, 1));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<int>(positive_paths.size()));
    for (int row = 0; row < static_cast<int>(positive_paths.size()); ++row) {
        const int w = positive_paths[static_cast<std::size_t>(row)];
        double rhs = std::log(path_prob(w));
        const auto& qs = t.path_queues[w];
        for (std::size_t i = 1; i < qs.size(); ++i) {
            const int u = qs[i - 1], v = qs[i];
            if (t.successors[u].size() < 2) continue;
            if (auto fv = fixed_value(u, v)) {
                if (*fv <= 0.0)
                    throw validation_error("fixed alpha " + t.queues[u].id + "->" +
                                           t.queues[v].id + " is 0 on a positive path");
                rhs -= std::log(*fv);
            } else {
                a(row, var_of_edge.at({u, v})) += 1.0;
            }
        }
        b(row) = rhs;
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(std::max(n_vars, 1));
    if (n_vars > 0)
        x = a.completeOrthogonalDecomposition().solve(b);  // minimum-norm LS

    // Raw edge values before normalization.
    std::map<std::pair<int, int>, double> raw;
    for (const auto& e : edges) {
        if (auto fv = fixed_value(e.first, e.second)) raw[e] = *fv;
        else if (auto it = var_of_edge.find(e); it != var_of_edge.end())
            raw[e] = std::exp(x(it->second));
        else raw[e] = 0.0;  // only on zero-probability paths, or unused
    }

    // Normalize junction by junction from the sinks upward. gamma[q] carries
    // the scale that must be absorbed by edges entering q so that every path
    // product stays unchanged.
    std::vector<double> gamma(t.queues.size(), 1.0);
    routing_matrix rm;
    for (auto it = t.topo_order.rbegin(); it != t.topo_order.rend(); ++it) {
        const int u = *it;
        const auto& succ = t.successors[u];
        if (succ.empty()) continue;
        if (succ.size() == 1) {
            rm.alphas[{t.queues[u].id, t.queues[succ[0]].id}] = 1.0;
            gamma[u] = gamma[succ[0]];
            continue;
        }
        double total = 0.0;
        std::vector<double> vals(succ.size());
        for (std::size_t i = 0; i < succ.size(); ++i) {
            vals[i] = raw.at({u, succ[i]}) * gamma[succ[i]];
            total += vals[i];
        }
        if (total <= 0.0) {
            for (std::size_t i = 0; i < succ.size(); ++i)
                rm.alphas[{t.queues[u].id, t.queues[succ[i]].id}] = 0.0;
            gamma[u] = 1.0;
            continue;
        }
        for (std::size_t i = 0; i < succ.size(); ++i)
            rm.alphas[{t.queues[u].id, t.queues[succ[i]].id}] = vals[i] / total;
        gamma[u] = total;
    }

    // Fit quality in probability space.
    const policy forward = alphas_to_path_probs(t, rm);
    double residual = 0.0;
    for (int f = 0; f < t.n_flows(); ++f)
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s)
            if (p.path_probs[f][s] > 0.0)
                residual = std::max(residual,
                                    std::abs(forward.path_probs[f][s] - p.path_probs[f][s]));
    rm.fit_residual = residual;
    if (residual > kAlphaResidualTolerance)
        throw validation_error("path probabilities are inconsistent with any junction "
                               "routing (fit residual " + std::to_string(residual) + ")");
    return rm;
}

} // namespace roadq

#endif
