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

#ifndef ROADQ_SCENARIO_IO_HPP
#define ROADQ_SCENARIO_IO_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "roadq/errors.hpp"
#include "roadq/topology.hpp"

namespace roadq {

using json = nlohmann::json;

namespace detail {

inline double require_number(const json& node, const std::string& path, const char* key) {
    if (!node.contains(key) || !node[key].is_number())
        throw validation_error(path + "." + key + ": missing or not a number");
    return node[key].get<double>();
}

inline std::string require_string(const json& node, const std::string& path, const char* key) {
    if (!node.contains(key) || !node[key].is_string())
        throw validation_error(path + "." + key + ": missing or not a string");
    return node[key].get<std::string>();
}

inline const json& require_array(const json& node, const std::string& path, const char* key) {
    if (!node.contains(key) || !node[key].is_array())
        throw validation_error(path + (path.empty() ? "" : ".") + key +
                               ": missing or not an array");
    return node[key];
}

} // namespace detail

/// Parses a scenario document. Validation failures carry the JSON key path of
/// the offending entry; structural failures (cycles, unreachable flows) come
/// from topology::finalize.
inline topology scenario_from_json(const json& doc) {
    if (!doc.is_object()) throw validation_error("scenario: top level must be an object");
    topology t;

    const json& queues = detail::require_array(doc, "", "queues");
    for (std::size_t i = 0; i < queues.size(); ++i) {
        const std::string path = "queues[" + std::to_string(i) + "]";
        const json& q = queues[i];
        if (!q.is_object()) throw validation_error(path + ": not an object");
        queue_spec spec;
        spec.id = detail::require_string(q, path, "id");
        spec.mu_max = detail::require_number(q, path, "mu_max");
        const std::string model = detail::require_string(q, path, "service_model");
        if (model == "mm1") spec.model = queue_service::markovian;
        else if (model == "md1") spec.model = queue_service::deterministic;
        else if (model == "sink") spec.model = queue_service::sink;
        else throw validation_error(path + ".service_model: expected mm1|md1|sink, got '" +
                                    model + "'");
        if (q.contains("batch_pmf")) {
            const json& pmf = q["batch_pmf"];
            if (!pmf.is_array()) throw validation_error(path + ".batch_pmf: not an array");
            std::size_t max_n = 0;
            for (const json& e : pmf) {
                if (!e.is_object() || !e.contains("n"))
                    throw validation_error(path + ".batch_pmf: entries need {n, prob}");
                max_n = std::max(max_n, e["n"].get<std::size_t>());
            }
            std::vector<double> probs(max_n, 0.0);
            for (std::size_t j = 0; j < pmf.size(); ++j) {
                const std::string epath = path + ".batch_pmf[" + std::to_string(j) + "]";
                const auto n = pmf[j]["n"].get<std::size_t>();
                if (n < 1) throw validation_error(epath + ".n: must be >= 1");
                probs[n - 1] = detail::require_number(pmf[j], epath, "prob");
            }
            try {
                spec.batch = batch_pmf(probs);
            } catch (const validation_error& e) {
                throw validation_error(path + ".batch_pmf: " + e.what());
            }
        }
        t.queues.push_back(std::move(spec));
    }

    const json& junctions = detail::require_array(doc, "", "junctions");
    for (std::size_t i = 0; i < junctions.size(); ++i) {
        const std::string path = "junctions[" + std::to_string(i) + "]";
        t.junctions.emplace_back(detail::require_string(junctions[i], path, "from"),
                                 detail::require_string(junctions[i], path, "to"));
    }

    const json& flows = detail::require_array(doc, "", "flows");
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const std::string path = "flows[" + std::to_string(i) + "]";
        flow_spec f;
        f.id = detail::require_string(flows[i], path, "id");
        f.ingress = detail::require_string(flows[i], path, "ingress");
        f.egress = detail::require_string(flows[i], path, "egress");
        f.rate = detail::require_number(flows[i], path, "rate");
        f.omega = detail::require_number(flows[i], path, "omega");
        t.flows.push_back(std::move(f));
    }

    if (doc.contains("paths")) {
        const json& paths = detail::require_array(doc, "", "paths");
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const std::string path = "paths[" + std::to_string(i) + "]";
            route_path p;
            if (paths[i].contains("id")) p.id = detail::require_string(paths[i], path, "id");
            p.flow = detail::require_string(paths[i], path, "flow");
            const json& qs = detail::require_array(paths[i], path, "queues");
            for (const json& q : qs) {
                if (!q.is_string()) throw validation_error(path + ".queues: entries must be strings");
                p.queues.push_back(q.get<std::string>());
            }
            t.paths.push_back(std::move(p));
        }
    }

    if (doc.contains("fixed_alphas")) {
        const json& fixed = detail::require_array(doc, "", "fixed_alphas");
        for (std::size_t i = 0; i < fixed.size(); ++i) {
            const std::string path = "fixed_alphas[" + std::to_string(i) + "]";
            t.fixed_alphas[{detail::require_string(fixed[i], path, "from"),
                            detail::require_string(fixed[i], path, "to")}] =
                detail::require_number(fixed[i], path, "alpha");
        }
    }

    finalize(t);
    return t;
}

inline json scenario_to_json(const topology& t) {
    json doc;
    doc["queues"] = json::array();
    for (const queue_spec& q : t.queues) {
        json e{{"id", q.id}, {"mu_max", q.mu_max}};
        switch (q.model) {
            case queue_service::markovian: e["service_model"] = "mm1"; break;
            case queue_service::deterministic: e["service_model"] = "md1"; break;
            case queue_service::sink: e["service_model"] = "sink"; break;
        }
        if (q.batch) {
            json pmf = json::array();
            for (std::size_t n = 0; n < q.batch->probs().size(); ++n)
                if (q.batch->probs()[n] > 0.0)
                    pmf.push_back({{"n", n + 1}, {"prob", q.batch->probs()[n]}});
            e["batch_pmf"] = pmf;
        }
        doc["queues"].push_back(std::move(e));
    }
    doc["junctions"] = json::array();
    for (const auto& [from, to] : t.junctions)
        doc["junctions"].push_back({{"from", from}, {"to", to}});
    doc["flows"] = json::array();
    for (const flow_spec& f : t.flows)
        doc["flows"].push_back({{"id", f.id}, {"ingress", f.ingress}, {"egress", f.egress},
                                {"rate", f.rate}, {"omega", f.omega}});
    doc["paths"] = json::array();
    for (const route_path& p : t.paths)
        doc["paths"].push_back({{"id", p.id}, {"flow", p.flow}, {"queues", p.queues}});
    if (!t.fixed_alphas.empty()) {
        doc["fixed_alphas"] = json::array();
        for (const auto& [edge, alpha] : t.fixed_alphas)
            doc["fixed_alphas"].push_back(
                {{"from", edge.first}, {"to", edge.second}, {"alpha", alpha}});
    }
    return doc;
}

inline topology load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open scenario file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw validation_error("scenario '" + path + "': " + e.what());
    }
    return scenario_from_json(doc);
}

inline json policy_to_json(const topology& t, const policy& p) {
    json probs = json::object();
    for (int f = 0; f < t.n_flows(); ++f) {
        json per = json::object();
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s)
            per[t.paths[t.flow_paths[f][s]].id] = p.path_probs[f][s];
        probs[t.flows[f].id] = std::move(per);
    }
    json rates = json::object();
    for (int q = 0; q < t.n_queues(); ++q) rates[t.queues[q].id] = p.service_rates[q];
    return {{"path_probs", probs}, {"service_rates", rates}};
}

inline policy policy_from_json(const topology& t, const json& doc) {
    policy p = uniform_policy(t);
    if (!doc.contains("path_probs") || !doc["path_probs"].is_object())
        throw validation_error("policy.path_probs: missing or not an object");
    for (int f = 0; f < t.n_flows(); ++f) {
        const std::string& fid = t.flows[f].id;
        if (!doc["path_probs"].contains(fid))
            throw validation_error("policy.path_probs." + fid + ": missing flow");
        const json& per = doc["path_probs"][fid];
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s) {
            const std::string& pid = t.paths[t.flow_paths[f][s]].id;
            if (!per.contains(pid))
                throw validation_error("policy.path_probs." + fid + "." + pid + ": missing path");
            p.path_probs[f][s] = per[pid].get<double>();
        }
    }
    if (doc.contains("service_rates")) {
        for (int q = 0; q < t.n_queues(); ++q) {
            const std::string& qid = t.queues[q].id;
            if (doc["service_rates"].contains(qid))
                p.service_rates[q] = doc["service_rates"][qid].get<double>();
        }
    }
    validate_policy(t, p);
    return p;
}

/// FNV-1a 64-bit hash, used to stamp output artifacts with the scenario
/// they were computed from.
inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string scenario_hash(const topology& t) {
    std::ostringstream hex;
    hex << std::hex << fnv1a64(scenario_to_json(t).dump());
    return hex.str();
}

} // namespace roadq

#endif
