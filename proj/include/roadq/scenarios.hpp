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

#ifndef ROADQ_SCENARIOS_HPP
#define ROADQ_SCENARIOS_HPP

#include <string>
#include <vector>

#include "roadq/errors.hpp"
#include "roadq/topology.hpp"

namespace roadq {

struct scenario_bundle {
    std::string name;
    topology topo;
    std::string description;
};

/// Two-lane lane-change scenario: the south lane (s1, s2) is blocked past
/// its second segment, so flow f2 must merge north either early (after s1)
/// or late (after s2, whose service is slowed to 1.5). Flow f1 rides the
/// north lane (n1, n2, n3) throughout. Normalized rates 1, omega 5.
inline scenario_bundle small_scenario() {
    topology t;
    t.queues = {
        {"n1", 3.0, queue_service::markovian, {}},
        {"s1", 3.0, queue_service::markovian, {}},
        {"n2", 3.0, queue_service::markovian, {}},
        {"s2", 1.5, queue_service::markovian, {}},
        {"n3", 3.0, queue_service::markovian, {}},
    };
    t.junctions = {
        {"n1", "n2"},
        {"s1", "s2"}, {"s1", "n2"},
        {"n2", "n3"},
        {"s2", "n3"},
    };
    t.flows = {
        {"f1", "n1", "n3", 1.0, 5.0},
        {"f2", "s1", "n3", 1.0, 5.0},
    };
    finalize(t);
    return {"small", std::move(t),
            "two-lane lane change: one blocked lane, early/late merge choice"};
}

/// Three parallel lanes of four segments each, cross edges at every segment
/// boundary except one (the merge from the center into the north lane at the
/// second boundary is closed), all draining into a fictitious zero-service
/// sink. This layout has exactly 35 paths. Rates 10/1/5, mu_max 15, omega 1.
inline scenario_bundle medium_scenario() {
    topology t;
    for (int lane = 1; lane <= 3; ++lane)
        for (int seg = 1; seg <= 4; ++seg)
            t.queues.push_back({"l" + std::to_string(lane) + "s" + std::to_string(seg),
                                15.0, queue_service::markovian, {}});
    t.queues.push_back({"zz", 1.0, queue_service::sink, {}});

    auto qid = [](int lane, int seg) {
        return "l" + std::to_string(lane) + "s" + std::to_string(seg);
    };
    for (int seg = 1; seg <= 3; ++seg) {
        for (int lane = 1; lane <= 3; ++lane) {
            t.junctions.emplace_back(qid(lane, seg), qid(lane, seg + 1));  // stay first
            for (int d : {-1, 1}) {
                const int other = lane + d;
                if (other < 1 || other > 3) continue;
                if (lane == 2 && seg == 2 && other == 1) continue;  // closed merge
                t.junctions.emplace_back(qid(lane, seg), qid(other, seg + 1));
            }
        }
    }
    for (int lane = 1; lane <= 3; ++lane) t.junctions.emplace_back(qid(lane, 4), "zz");

    t.flows = {
        {"f1", qid(1, 1), "zz", 10.0, 1.0},
        {"f2", qid(2, 1), "zz", 1.0, 1.0},
        {"f3", qid(3, 1), "zz", 5.0, 1.0},
    };
    finalize(t);
    return {"medium", std::move(t),
            "three-lane corridor with a closed merge, 35 paths, common sink"};
}

/// Navigation-scale synthetic network: a 7x6 block grid (diagonal forward
/// lattice) plus three side-street detour chains, 49 queues in total. Five
/// flows with published target times omega = (2, 4, 6, 2, 4); flows f1 and
/// f2 share the northern corridor, f3 crosses the center, f4 has a single
/// short path. The layout stands in for a trace-derived city topology and
/// reproduces its published statistics (49 segments, 5 flows, 15 paths),
/// not its geometry.
inline scenario_bundle large_scenario() {
    topology t;
    auto qid = [](int r, int c) { return "q" + std::to_string(r) + std::to_string(c); };
    for (int r = 0; r <= 6; ++r)
        for (int c = 0; c <= 5; ++c)
            t.queues.push_back({qid(r, c), 8.0, queue_service::markovian, {}});
    for (const char* d : {"d1a", "d1b", "d1c", "d2a", "d2b", "d3a", "d3b"})
        t.queues.push_back({d, 8.0, queue_service::markovian, {}});

    for (int r = 0; r <= 6; ++r)
        for (int c = 0; c <= 4; ++c) {
            t.junctions.emplace_back(qid(r, c), qid(r, c + 1));  // straight first
            if (r > 0) t.junctions.emplace_back(qid(r, c), qid(r - 1, c + 1));
            if (r < 6) t.junctions.emplace_back(qid(r, c), qid(r + 1, c + 1));
        }
    // side-street chains: longer alternatives bridging two columns
    t.junctions.insert(t.junctions.end(), {{"q01", "d1a"}, {"d1a", "d1b"}, {"d1b", "d1c"},
                                           {"d1c", "q03"}});
    t.junctions.insert(t.junctions.end(), {{"q31", "d2a"}, {"d2a", "d2b"}, {"d2b", "q33"}});
    t.junctions.insert(t.junctions.end(), {{"q51", "d3a"}, {"d3a", "d3b"}, {"d3b", "q53"}});

    t.flows = {
        {"f1", "q00", "q05", 4.0, 2.0},
        {"f2", "q10", "q05", 2.0, 4.0},
        {"f3", "q50", "q15", 5.0, 6.0},
        {"f4", "q61", "q65", 1.5, 2.0},
        {"f5", "q40", "q65", 2.5, 4.0},
    };

    auto add_path = [&](const char* flow, std::vector<std::string> queues) {
        route_path p;
        p.flow = flow;
        p.queues = std::move(queues);
        t.paths.push_back(std::move(p));
    };
    add_path("f1", {"q00", "q01", "q02", "q03", "q04", "q05"});
    add_path("f1", {"q00", "q11", "q12", "q13", "q14", "q05"});
    add_path("f1", {"q00", "q01", "q12", "q13", "q04", "q05"});
    add_path("f2", {"q10", "q11", "q12", "q13", "q14", "q05"});
    add_path("f2", {"q10", "q01", "q02", "q03", "q04", "q05"});
    add_path("f2", {"q10", "q21", "q22", "q23", "q14", "q05"});
    add_path("f3", {"q50", "q41", "q32", "q23", "q14", "q15"});
    add_path("f3", {"q50", "q41", "q32", "q33", "q24", "q15"});
    add_path("f3", {"q50", "q51", "q42", "q33", "q24", "q15"});
    add_path("f3", {"q50", "q41", "q42", "q33", "q24", "q15"});
    add_path("f4", {"q61", "q62", "q63", "q64", "q65"});
    add_path("f5", {"q40", "q51", "q62", "q63", "q64", "q65"});
    add_path("f5", {"q40", "q41", "q52", "q63", "q64", "q65"});
    add_path("f5", {"q40", "q51", "q52", "q63", "q64", "q65"});
    add_path("f5", {"q40", "q41", "q52", "q53", "q64", "q65"});

    finalize(t);
    return {"large", std::move(t),
            "7x6 block grid with side-street detours; synthetic stand-in for a "
            "city-scale trace"};
}

inline scenario_bundle bundled_scenario(const std::string& name) {
    if (name == "small") return small_scenario();
    if (name == "medium") return medium_scenario();
    if (name == "large") return large_scenario();
    throw validation_error("unknown bundled scenario '" + name +
                           "' (expected small, medium, or large)");
}

/// Copy of a topology with every non-sink queue switched to the given
/// service model (used by the sweep command to compare mm1 against md1).
inline topology with_service_model(const topology& t, queue_service model) {
    topology out = t;
    for (queue_spec& q : out.queues)
        if (q.model != queue_service::sink) q.model = model;
    finalize(out);
    return out;
}

} // namespace roadq

#endif
