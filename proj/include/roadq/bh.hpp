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

#ifndef ROADQ_BH_HPP
#define ROADQ_BH_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roadq/errors.hpp"
#include "roadq/topology.hpp"
#include "roadq/travel_time.hpp"

namespace roadq {

constexpr double kImprovementEpsilon = 1e-12;

/// Bottleneck-hunting parameters. phi is the traffic fraction moved per
/// accepted step; it starts at phi0 and halves on every rejected step until
/// it drops below phi_min.
struct bh_config {
    double phi0 = 0.25;
    double phi_min = 1.0 / 1024.0;
    long max_evals = 200000;
    evaluate_options eval{};
};

struct iteration_record {
    double phi = 0.0;
    int flow = -1;
    int from_path = -1;  // path index in the topology
    int to_path = -1;
    bool accepted = false;
    bool fa_was_empty = false;   // line-6 fallback fired this iteration
    bool target_in_cp = false;   // transfer target was on a critical path
    double objective = 0.0;      // objective after the iteration
};

struct optimization_trace {
    long evaluations = 0;
    long iterations = 0;
    std::vector<double> objective_history;  // one entry per accepted step,
                                            // plus the initial value
    std::vector<iteration_record> log;
    policy final_policy;
    double final_objective = 0.0;
    bool truncated = false;  // max_evals hit
};

/// Critical queues at traffic fraction phi: queues on at least two paths
/// whose slack gap to the most loaded other queue of one of those paths
/// would be closed by a phi-fraction of the second path's flow. Paths with a
/// single queue carry no slack gap and never nominate critical queues.
inline std::vector<int> critical_queues(const topology& t, const policy& pol, double phi) {
    const arrival_rates rates = compute_arrival_rates(t, pol);
    auto slack = [&](int q) { return pol.service_rates[q] - rates.lambda[q]; };

    std::vector<int> out;
    for (int q = 0; q < t.n_queues(); ++q) {
        const auto& through = t.queue_paths[q];
        if (through.size() < 2) continue;
        bool critical = false;
        for (std::size_t i = 0; i < through.size() && !critical; ++i) {
            const int w1 = through[i];
            double min_other = 1e300;
            for (int qq : t.path_queues[w1])
                if (qq != q) min_other = std::min(min_other, slack(qq));
            if (min_other == 1e300) continue;  // |w1| == 1
            const double gap = slack(q) - min_other;
            for (std::size_t j = 0; j < through.size(); ++j) {
                if (j == i) continue;
                const int w2 = through[j];
                if (gap <= phi * t.flows[t.path_flow[w2]].rate + 1e-15) {
                    critical = true;
                    break;
                }
            }
        }
        if (critical) out.push_back(q);
    }
    return out;
}

namespace detail {

inline flow_exceedance guarded_eval(const topology& t, const policy& p,
                                    const evaluate_options& opts, long& evals) {
    ++evals;
    return evaluate_objective(t, p, opts);
}

/// Exceedance of a candidate policy, or nothing if the move destabilizes a
/// queue (treated as "does not improve").
inline std::optional<flow_exceedance> try_eval(const topology& t, const policy& p,
                                               const evaluate_options& opts, long& evals) {
    ++evals;
    try {
        return evaluate_objective(t, p, opts);
    } catch (const instability_error&) {
        return std::nullopt;
    }
}

} // namespace detail

/// The bottleneck-hunting optimizer. Each iteration recomputes the critical
/// queue/path sets at the current phi, picks the worst actionable flow
/// k* (highest flow exceedance among flows that own a path outside the
/// critical set, falling back to all flows), the heaviest term w* of k*
/// (largest p_w * delta_w), and the transfer target w' (largest bottleneck
/// slack among k*'s non-critical paths, ties broken toward the lightest
/// term). A phi-fraction (clamped at p_{w*}) moves from w* to w' when that
/// strictly improves the objective; when it does not, the reverse transfer
/// is probed before the step counts as rejected and phi halves. Terminates
/// when phi < phi_min.
inline optimization_trace bh_optimize(const topology& t, const bh_config& cfg,
                                      const policy& initial) {
    if (!(cfg.phi0 > 0.0) || !(cfg.phi_min > 0.0) || cfg.phi_min > cfg.phi0 || cfg.phi0 > 1.0)
        throw validation_error("bh_config requires 0 < phi_min <= phi0 <= 1");
    validate_policy(t, initial);

    optimization_trace trace;
    trace.final_policy = initial;
    policy current = initial;

    flow_exceedance fx = detail::guarded_eval(t, current, cfg.eval, trace.evaluations);
    double objective = fx.objective;
    trace.objective_history.push_back(objective);

    double phi = cfg.phi0;
    const arrival_rates* rates_ptr = nullptr;
    arrival_rates rates;

    for (;;) {
        if (trace.evaluations >= cfg.max_evals) {
            trace.truncated = true;
            break;
        }
        trace.iterations++;

        const std::vector<int> cq = critical_queues(t, current, phi);
        std::vector<char> is_cq(t.queues.size(), 0);
        for (int q : cq) is_cq[q] = 1;
        std::vector<char> in_cp(t.paths.size(), 0);
        for (int w = 0; w < t.n_paths(); ++w)
            for (int q : t.path_queues[w])
                if (is_cq[q]) { in_cp[w] = 1; break; }

        std::vector<int> fa;
        for (int f = 0; f < t.n_flows(); ++f)
            for (int w : t.flow_paths[f])
                if (!in_cp[w]) { fa.push_back(f); break; }
        const bool fa_was_empty = fa.empty();
        if (fa_was_empty) {
            fa.resize(t.flows.size());
            for (int f = 0; f < t.n_flows(); ++f) fa[f] = f;
        }

        // only flows with at least two paths can be acted upon
        std::vector<int> actionable;
        for (int f : fa)
            if (t.flow_paths[f].size() >= 2) actionable.push_back(f);
        if (actionable.empty())
            for (int f = 0; f < t.n_flows(); ++f)
                if (t.flow_paths[f].size() >= 2) actionable.push_back(f);
        if (actionable.empty()) break;  // every flow has a single path

        int kstar = actionable.front();
        for (int f : actionable)
            if (fx.per_flow_delta[f] > fx.per_flow_delta[kstar]) kstar = f;

        rates = compute_arrival_rates(t, current);
        rates_ptr = &rates;
        auto slack = [&](int q) { return current.service_rates[q] - rates_ptr->lambda[q]; };
        auto bottleneck_slack = [&](int w) {
            double m = 1e300;
            for (int q : t.path_queues[w])
                if (t.queues[q].model != queue_service::sink)
                    m = std::min(m, slack(q));
            return m;
        };

        const auto& slots = t.flow_paths[kstar];
        std::size_t from_slot = 0;
        double heaviest = -1.0;
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const double term = current.path_probs[kstar][s] * fx.per_path_delta[kstar][s];
            if (term > heaviest) { heaviest = term; from_slot = s; }
        }

        std::vector<std::size_t> candidates;
        for (std::size_t s = 0; s < slots.size(); ++s)
            if (!in_cp[slots[s]]) candidates.push_back(s);
        if (candidates.empty())
            for (std::size_t s = 0; s < slots.size(); ++s) candidates.push_back(s);
        {
            std::vector<std::size_t> sans_from;
            for (std::size_t s : candidates)
                if (s != from_slot) sans_from.push_back(s);
            if (!sans_from.empty()) candidates = std::move(sans_from);
        }
        std::size_t to_slot = candidates.front();
        for (std::size_t s : candidates) {
            const double a = bottleneck_slack(slots[s]);
            const double b = bottleneck_slack(slots[to_slot]);
            const double term_a = current.path_probs[kstar][s] * fx.per_path_delta[kstar][s];
            const double term_b = current.path_probs[kstar][to_slot] * fx.per_path_delta[kstar][to_slot];
            if (a > b + 1e-15 || (std::abs(a - b) <= 1e-15 && term_a < term_b))
                to_slot = s;
        }

        // candidate transfers: w* -> w', then the reverse when it does not
        // push traffic onto a critical path behind line 6's back
        std::vector<std::pair<std::size_t, std::size_t>> moves;
        if (to_slot != from_slot) {
            moves.push_back({from_slot, to_slot});
            if (fa_was_empty || !in_cp[slots[from_slot]])
                moves.push_back({to_slot, from_slot});
        }

        bool accepted = false;
        iteration_record rec;
        rec.phi = phi;
        rec.flow = kstar;
        rec.fa_was_empty = fa_was_empty;
        rec.from_path = slots[from_slot];
        rec.to_path = slots[to_slot];
        rec.target_in_cp = in_cp[slots[to_slot]] != 0;

        for (auto [a, b] : moves) {
            const double amount = std::min(phi, current.path_probs[kstar][a]);
            if (amount <= 0.0) continue;
            policy probe = current;
            probe.path_probs[kstar][a] -= amount;
            probe.path_probs[kstar][b] += amount;
            auto probe_fx = detail::try_eval(t, probe, cfg.eval, trace.evaluations);
            if (probe_fx && probe_fx->objective < objective - kImprovementEpsilon) {
                current = std::move(probe);
                fx = std::move(*probe_fx);
                objective = fx.objective;
                trace.objective_history.push_back(objective);
                accepted = true;
                rec.from_path = slots[a];
                rec.to_path = slots[b];
                rec.target_in_cp = in_cp[slots[b]] != 0;
                break;
            }
            if (trace.evaluations >= cfg.max_evals) break;
        }

        rec.accepted = accepted;
        rec.objective = objective;
        trace.log.push_back(rec);

        if (!accepted) {
            phi *= 0.5;
            if (phi < cfg.phi_min) break;
        }
    }

    trace.final_policy = current;
    trace.final_objective = objective;
    return trace;
}

/// Exhaustive grid minimizer over the product of per-flow probability
/// simplices. Only viable at desk scale; refuses when the total number of
/// free dimensions exceeds 4.
struct brute_force_result {
    policy best;
    double objective = 0.0;
    long evaluations = 0;
};

inline brute_force_result brute_force_optimize(const topology& t, double grid_step,
                                               const evaluate_options& opts = {}) {
    if (!(grid_step > 0.0) || grid_step > 1.0)
        throw validation_error("grid step must be in (0, 1]");
    int free_dims = 0;
    for (int f = 0; f < t.n_flows(); ++f)
        free_dims += static_cast<int>(t.flow_paths[f].size()) - 1;
    if (free_dims > 4)
        throw validation_error("brute force refused: " + std::to_string(free_dims) +
                               " free probability dimensions exceed the limit of 4 "
                               "(grid enumeration would not finish)");

    brute_force_result result;
    result.best = uniform_policy(t);
    result.objective = 1e300;

    policy work = result.best;
    const auto steps = static_cast<long>(std::llround(1.0 / grid_step));

    // enumerate compositions per flow, depth-first across flows
    std::function<void(int)> rec = [&](int f) {
        if (f == t.n_flows()) {
            result.evaluations++;
            try {
                const double obj = evaluate_objective(t, work, opts).objective;
                if (obj < result.objective) {
                    result.objective = obj;
                    result.best = work;
                }
            } catch (const instability_error&) {
            }
            return;
        }
        const auto m = t.flow_paths[f].size();
        if (m == 1) {
            work.path_probs[f][0] = 1.0;
            rec(f + 1);
            return;
        }
        std::function<void(std::size_t, long)> fill = [&](std::size_t slot, long left) {
            if (slot + 1 == m) {
                work.path_probs[f][slot] = static_cast<double>(left) / static_cast<double>(steps);
                rec(f + 1);
                return;
            }
            for (long k = 0; k <= left; ++k) {
                work.path_probs[f][slot] = static_cast<double>(k) / static_cast<double>(steps);
                fill(slot + 1, left - k);
            }
        };
        fill(0, steps);
    };
    rec(0);

    if (result.objective >= 1e300)
        throw instability_error("no stable policy found on the grid");
    return result;
}

/// Projected finite-difference gradient descent over the path probabilities,
/// the general-purpose comparison optimizer. Each flow's probabilities are
/// parametrized by their first m-1 entries (the last absorbs the rest);
/// gradients use central differences; steps backtrack until the objective
/// improves and the whole vector is re-projected onto the simplex product.
/// Objective evaluations are counted exactly like bh_optimize counts its
/// probes. Terminates when an iteration improves by less than tol.
struct gradient_config {
    double initial_step = 0.25;
    double shrink = 0.5;
    double fd_step = 1e-4;
    double tol = 1e-6;
    int max_backtracks = 30;
    long max_evals = 200000;
    evaluate_options eval{};
};

namespace detail {

/// Euclidean projection onto the probability simplex (Held et al.).
inline void project_simplex(std::vector<double>& v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = -1;
    for (std::size_t i = 0; i < u.size(); ++i) {
        css += u[i];
        const double test = u[i] - (css - 1.0) / static_cast<double>(i + 1);
        if (test > 0.0) {
            rho = static_cast<int>(i);
            theta = (css - 1.0) / static_cast<double>(i + 1);
        } else {
            css -= u[i];
        }
    }
    if (rho < 0) {  // degenerate; fall back to uniform
        for (double& x : v) x = 1.0 / static_cast<double>(v.size());
        return;
    }
    for (double& x : v) x = std::max(0.0, x - theta);
    double sum = 0.0;
    for (double x : v) sum += x;
    for (double& x : v) x /= sum;  // absorb rounding
}

} // namespace detail

inline optimization_trace gradient_baseline(const topology& t, const policy& initial,
                                            const gradient_config& cfg = {}) {
    validate_policy(t, initial);
    optimization_trace trace;
    policy current = initial;

    auto eval = [&](const policy& p) -> std::optional<double> {
        auto r = detail::try_eval(t, p, cfg.eval, trace.evaluations);
        if (!r) return std::nullopt;
        return r->objective;
    };

    auto first = eval(current);
    if (!first) throw instability_error("initial policy is unstable");
    double objective = *first;
    trace.objective_history.push_back(objective);

    for (;;) {
        if (trace.evaluations >= cfg.max_evals) {
            trace.truncated = true;
            break;
        }
        trace.iterations++;

        // central-difference gradient in free coordinates (last prob of each
        // flow is the dependent one)
        std::vector<std::vector<double>> grad(t.flows.size());
        for (int f = 0; f < t.n_flows(); ++f) {
            const auto m = t.flow_paths[f].size();
            grad[f].assign(m, 0.0);
            if (m < 2) continue;
            for (std::size_t s = 0; s + 1 < m; ++s) {
                policy up = current, down = current;
                const double h = cfg.fd_step;
                up.path_probs[f][s] += h;
                up.path_probs[f][m - 1] -= h;
                down.path_probs[f][s] -= h;
                down.path_probs[f][m - 1] += h;
                detail::project_simplex(up.path_probs[f]);
                detail::project_simplex(down.path_probs[f]);
                auto fu = eval(up);
                auto fd = eval(down);
                const double vu = fu ? *fu : objective + 1.0;
                const double vd = fd ? *fd : objective + 1.0;
                grad[f][s] = (vu - vd) / (2.0 * h);
            }
        }

        double gnorm = 0.0;
        for (const auto& g : grad)
            for (double x : g) gnorm += x * x;
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-14) break;

        double step = cfg.initial_step / std::max(gnorm, 1e-9);
        bool improved = false;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            policy probe = current;
            for (int f = 0; f < t.n_flows(); ++f) {
                const auto m = t.flow_paths[f].size();
                if (m < 2) continue;
                double moved = 0.0;
                for (std::size_t s = 0; s + 1 < m; ++s) {
                    probe.path_probs[f][s] -= step * grad[f][s];
                    moved += step * grad[f][s];
                }
                probe.path_probs[f][m - 1] += moved;
                detail::project_simplex(probe.path_probs[f]);
            }
            auto obj = eval(probe);
            if (obj && *obj < objective - kImprovementEpsilon) {
                const double gain = objective - *obj;
                current = std::move(probe);
                objective = *obj;
                trace.objective_history.push_back(objective);
                improved = true;
                if (gain < cfg.tol) {
                    trace.final_policy = current;
                    trace.final_objective = objective;
                    return trace;
                }
                break;
            }
            step *= cfg.shrink;
            if (trace.evaluations >= cfg.max_evals) break;
        }
        if (!improved) break;  // no step at any scale improved by more than eps
    }

    trace.final_policy = current;
    trace.final_objective = objective;
    return trace;
}

/// Worst-case evaluation bound of the bottleneck-hunting loop:
/// ceil(log2(phi0/phi_min)) * ceil(1/phi_min) * |K| * |W|.
inline double bh_evaluation_bound(const topology& t, const bh_config& cfg) {
    const double halvings = std::ceil(std::log2(cfg.phi0 / cfg.phi_min));
    const double transfers = std::ceil(1.0 / cfg.phi_min);
    return halvings * transfers * static_cast<double>(t.n_flows()) *
           static_cast<double>(t.n_paths());
}

} // namespace roadq

#endif
