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

#include <catch2/catch_amalgamated.hpp>

#include "roadq/scenario_io.hpp"
#include "roadq/scenarios.hpp"

using namespace roadq;

namespace {

json minimal_doc() {
    return json::parse(R"({
        "queues": [
            {"id": "a", "mu_max": 3.0, "service_model": "mm1"},
            {"id": "b", "mu_max": 3.0, "service_model": "mm1"}
        ],
        "junctions": [{"from": "a", "to": "b"}],
        "flows": [{"id": "f1", "ingress": "a", "egress": "b", "rate": 1.0, "omega": 5.0}]
    })");
}

} // namespace

TEST_CASE("minimal scenario parses and enumerates") {
    topology t = scenario_from_json(minimal_doc());
    CHECK(t.n_queues() == 2);
    CHECK(t.n_paths() == 1);
}

TEST_CASE("schema violations name the offending key path") {
    json doc = minimal_doc();
    doc["queues"][1].erase("mu_max");
    REQUIRE_THROWS_MATCHES(scenario_from_json(doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("queues[1].mu_max")));

    doc = minimal_doc();
    doc["flows"][0].erase("omega");
    REQUIRE_THROWS_MATCHES(scenario_from_json(doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("flows[0].omega")));

    doc = minimal_doc();
    doc["queues"][0]["service_model"] = "mg1";
    REQUIRE_THROWS_MATCHES(scenario_from_json(doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("queues[0].service_model")));
}

TEST_CASE("cycles in a scenario file are reported with the cycle") {
    json doc = minimal_doc();
    doc["junctions"].push_back({{"from", "b"}, {"to", "a"}});
    REQUIRE_THROWS_MATCHES(scenario_from_json(doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("cycle")));
}

TEST_CASE("batch pmf entries parse with their key paths") {
    json doc = minimal_doc();
    doc["queues"][0]["batch_pmf"] = json::array({{{"n", 1}, {"prob", 0.5}},
                                                 {{"n", 2}, {"prob", 0.5}}});
    topology t = scenario_from_json(doc);
    REQUIRE(t.queues[0].batch.has_value());
    CHECK(t.queues[0].batch->mean() == Catch::Approx(1.5));

    doc["queues"][0]["batch_pmf"] = json::array({{{"n", 1}, {"prob", 0.4}}});
    REQUIRE_THROWS_MATCHES(scenario_from_json(doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("batch_pmf")));
}

TEST_CASE("scenario roundtrips through json") {
    for (const char* name : {"small", "medium", "large"}) {
        topology t = bundled_scenario(name).topo;
        topology back = scenario_from_json(scenario_to_json(t));
        CHECK(back.n_queues() == t.n_queues());
        CHECK(back.n_flows() == t.n_flows());
        CHECK(back.n_paths() == t.n_paths());
        CHECK(scenario_hash(back) == scenario_hash(t));
    }
}

TEST_CASE("bundled small scenario pins the published constants") {
    topology t = small_scenario().topo;
    REQUIRE(t.n_queues() == 5);
    REQUIRE(t.n_flows() == 2);
    REQUIRE(t.n_paths() == 3);
    for (const flow_spec& f : t.flows) {
        CHECK(f.rate == 1.0);
        CHECK(f.omega == 5.0);
    }
    int slow = 0;
    for (const queue_spec& q : t.queues) {
        if (q.mu_max == 1.5) slow++;
        else CHECK(q.mu_max == 3.0);
    }
    CHECK(slow == 1);
}

TEST_CASE("bundled medium scenario pins the published constants") {
    topology t = medium_scenario().topo;
    REQUIRE(t.n_paths() == 35);
    CHECK(t.n_flows() == 3);
    CHECK(t.flows[t.flow_index.at("f1")].rate == 10.0);
    CHECK(t.flows[t.flow_index.at("f2")].rate == 1.0);
    CHECK(t.flows[t.flow_index.at("f3")].rate == 5.0);
    for (const flow_spec& f : t.flows) CHECK(f.omega == 1.0);
    int sinks = 0;
    for (const queue_spec& q : t.queues) {
        if (q.model == queue_service::sink) sinks++;
        else CHECK(q.mu_max == 15.0);
    }
    CHECK(sinks == 1);
}

TEST_CASE("bundled large scenario pins the published statistics") {
    topology t = large_scenario().topo;
    CHECK(t.n_queues() == 49);
    CHECK(t.n_flows() == 5);
    CHECK(t.n_paths() == 15);
    CHECK(t.flows[t.flow_index.at("f1")].omega == 2.0);
    CHECK(t.flows[t.flow_index.at("f2")].omega == 4.0);
    CHECK(t.flows[t.flow_index.at("f3")].omega == 6.0);
    CHECK(t.flows[t.flow_index.at("f4")].omega == 2.0);
    CHECK(t.flows[t.flow_index.at("f5")].omega == 4.0);
    CHECK(t.flow_paths[t.flow_index.at("f4")].size() == 1);
    CHECK(check_stability(t, uniform_policy(t)).all_stable);
}

TEST_CASE("policies roundtrip through json") {
    topology t = small_scenario().topo;
    policy p = uniform_policy(t);
    p.path_probs[t.flow_index.at("f2")] = {0.25, 0.75};
    policy back = policy_from_json(t, policy_to_json(t, p));
    CHECK(back.path_probs == p.path_probs);
    CHECK(back.service_rates == p.service_rates);
}

TEST_CASE("policy json with a missing path is rejected") {
    topology t = small_scenario().topo;
    json doc = policy_to_json(t, uniform_policy(t));
    doc["path_probs"]["f2"].erase("f2#1");
    REQUIRE_THROWS_MATCHES(policy_from_json(t, doc), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("f2#1")));
}

TEST_CASE("explicit paths must use junction edges") {
    json doc = minimal_doc();
    doc["queues"].push_back({{"id", "c"}, {"mu_max", 3.0}, {"service_model", "mm1"}});
    doc["paths"] = json::array({{{"flow", "f1"}, {"queues", json::array({"a", "c"})}}});
    REQUIRE_THROWS_AS(scenario_from_json(doc), validation_error);
}
