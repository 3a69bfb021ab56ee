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

#include <cmath>

#include "roadq/scenarios.hpp"
#include "roadq/travel_time.hpp"
#include "test_util.hpp"

using namespace roadq;

TEST_CASE("closed form for distinct slacks matches the hand expansion") {
    // slacks 2 and 1: F(t) = 1 + e^{-2t} - 2 e^{-t}
    path_travel_time f = path_cdf_mm1_slacks({2.0, 1.0});
    for (double t : {0.0, 0.3, 1.0, 2.5, 6.0}) {
        const double expected = t <= 0.0 ? 0.0 : 1.0 + std::exp(-2.0 * t) - 2.0 * std::exp(-t);
        CHECK(f.cdf_at(t) == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("closed-form coefficients of distinct poles sum to -1") {
    path_travel_time f = path_cdf_mm1_slacks({0.7, 1.9, 3.1, 5.2});
    double sum = 0.0;
    for (const exp_term& e : f.terms) {
        CHECK(e.power == 0);
        sum += e.coeff;
    }
    CHECK(sum == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("equal slacks merge into the double-pole form") {
    // F(t) = 1 - e^{-dt}(dt + 1); at d = 1, t = 5: 1 - 6 e^{-5}
    path_travel_time f = path_cdf_mm1_slacks({1.0, 1.0});
    CHECK(f.cdf_at(5.0) == Catch::Approx(1.0 - 6.0 * std::exp(-5.0)).margin(1e-12));
    CHECK(delta_w(f, 5.0) == Catch::Approx(6.0 * std::exp(-5.0)).margin(1e-12));
}

TEST_CASE("single queue path is one exponential") {
    path_travel_time f = path_cdf_mm1_slacks({2.5});
    CHECK(f.cdf_at(1.0) == Catch::Approx(1.0 - std::exp(-2.5)).margin(1e-12));
}

TEST_CASE("triple pole merges into an Erlang tail") {
    // three equal slacks: F(t) = 1 - e^{-dt}(1 + dt + (dt)^2/2)
    const double d = 1.7, t = 2.3;
    path_travel_time f = path_cdf_mm1_slacks({d, d, d});
    const double dt = d * t;
    CHECK(f.cdf_at(t) ==
          Catch::Approx(1.0 - std::exp(-dt) * (1.0 + dt + dt * dt / 2.0)).margin(1e-10));
}

TEST_CASE("unstable paths are rejected") {
    CHECK_THROWS_AS(path_cdf_mm1_slacks({1.0, -0.5}), instability_error);
    CHECK_THROWS_AS(path_cdf_mm1_slacks(std::vector<double>{}), validation_error);
}

TEST_CASE("numeric convolution of a single sojourn is that sojourn") {
    sojourn_distribution s = mm1_sojourn(1.0, 3.0);
    path_travel_time f = path_cdf_numeric({&s}, {0.001, 0.0});
    for (double t : {0.25, 0.5, 1.0, 3.0})
        CHECK(f.cdf_at(t) == Catch::Approx(s.cdf_at(t)).margin(1e-6));
}

TEST_CASE("two exponentials convolve to the Erlang-2 cdf") {
    sojourn_distribution a = mm1_sojourn(0.0, 1.0);
    sojourn_distribution b = mm1_sojourn(0.0, 1.0);
    path_travel_time f = path_cdf_numeric({&a, &b}, {0.0005, 0.0});
    CHECK(f.cdf_at(2.0) == Catch::Approx(1.0 - std::exp(-2.0) * 3.0).margin(1e-6));
}

TEST_CASE("numeric route matches the closed form on a three-queue path") {
    const std::vector<double> slacks{2.0, 0.9, 3.7};
    path_travel_time closed = path_cdf_mm1_slacks(slacks);
    sojourn_distribution s0 = mm1_sojourn(0.0, slacks[0]);
    sojourn_distribution s1 = mm1_sojourn(0.0, slacks[1]);
    sojourn_distribution s2 = mm1_sojourn(0.0, slacks[2]);
    path_travel_time numeric = path_cdf_numeric({&s0, &s1, &s2}, {0.0002, 0.0});
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.tab.cdf.size(); i += 7) {
        const double t = numeric.tab.step * static_cast<double>(i);
        worst = std::max(worst, std::abs(numeric.tab.cdf[i] - closed.cdf_at(t)));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("delta_w boundary behaviour") {
    path_travel_time f = path_cdf_mm1_slacks({1.0, 2.0});
    CHECK(delta_w(f, 0.0) == Catch::Approx(1.0));
    const double horizon = detail::closed_form_horizon(f.terms);
    CHECK(delta_w(f, horizon) <= 1e-4);
    CHECK_THROWS_AS(delta_w(f, -1.0), validation_error);
}

TEST_CASE("flow exceedance combines per-path deltas") {
    topology t = testing::diamond_topology(3.0, 1.0, 5.0);
    policy p = uniform_policy(t);
    p.path_probs[0] = {0.3, 0.7};
    flow_exceedance fx = combine_exceedance(t, p, {{0.2, 0.1}});
    CHECK(fx.per_flow_delta[0] == Catch::Approx(0.3 * 0.2 + 0.7 * 0.1));
    CHECK(fx.objective == Catch::Approx(0.13));
}

TEST_CASE("single-flow single-path exceedance equals the path delta") {
    topology t;
    t.queues = {{"a", 3.0, queue_service::markovian, {}},
                {"b", 3.0, queue_service::markovian, {}}};
    t.junctions = {{"a", "b"}};
    t.flows = {{"f1", "a", "b", 1.0, 5.0}};
    finalize(t);
    flow_exceedance fx = evaluate_objective(t, uniform_policy(t));
    CHECK(fx.objective == Catch::Approx(fx.per_path_delta[0][0]));
}

TEST_CASE("small-scenario objective is worse at the sweep extremes") {
    topology t = small_scenario().topo;
    const int f2 = t.flow_index.at("f2");
    auto objective_at = [&](double p_late) {
        policy p = uniform_policy(t);
        p.path_probs[f2] = {1.0 - p_late, p_late};
        return evaluate_objective(t, p).objective;
    };
    const double at_01 = objective_at(0.1);
    const double at_09 = objective_at(0.9);
    const double near_opt = objective_at(0.33);
    CHECK(near_opt < at_01);
    CHECK(near_opt < at_09);
}

TEST_CASE("unstable policy propagates the offending queues") {
    topology t = small_scenario().topo;
    const int f2 = t.flow_index.at("f2");
    policy p = uniform_policy(t);
    p.path_probs[f2] = {0.0, 1.0};  // s2 gets lambda 1.0 > ... mu 1.5, still stable
    p.service_rates[t.queue_index.at("s2")] = 0.9;
    try {
        evaluate_objective(t, p);
        FAIL("expected instability_error");
    } catch (const instability_error& e) {
        REQUIRE(e.unstable_queues == std::vector<std::string>{"s2"});
    }
}

TEST_CASE("exceedance is monotone in the arrival rate") {
    // raising lambda at any queue (mu fixed) never lowers the exceedance
    splitmix64 rng(5150);
    for (int round = 0; round < 40; ++round) {
        std::vector<double> slacks(2 + rng.next() % 4);
        for (double& d : slacks) d = 0.2 + 4.0 * rng.uniform01();
        const double t_hat = 0.2 + 5.0 * rng.uniform01();
        const std::size_t bump = rng.next() % slacks.size();
        const double eps = 0.05 * slacks[bump];

        path_travel_time before = path_cdf_mm1_slacks(slacks);
        std::vector<double> loaded = slacks;
        loaded[bump] -= eps;  // more arrivals = less slack
        path_travel_time after = path_cdf_mm1_slacks(loaded);
        CHECK(delta_w(after, t_hat) >= delta_w(before, t_hat) - 1e-12);
    }
}

TEST_CASE("splitting equal slacks strictly raises the exceedance") {
    splitmix64 rng(7211);
    for (int round = 0; round < 60; ++round) {
        const double d = 0.4 + 3.0 * rng.uniform01();
        const double eps = d * (0.1 + 0.8 * rng.uniform01());
        const double t = (0.2 + 3.0 * rng.uniform01()) / d;
        path_travel_time balanced = path_cdf_mm1_slacks({d, d});
        path_travel_time split = path_cdf_mm1_slacks({d + eps, d - eps});
        CHECK(delta_w(split, t) - delta_w(balanced, t) > 1e-12);
    }
}

TEST_CASE("even split over two identical disjoint branches is optimal") {
    // ingress -> {mid_a | mid_b} -> egress with identical service
    topology t;
    t.queues = {{"in", 4.0, queue_service::markovian, {}},
                {"ma", 4.0, queue_service::markovian, {}},
                {"mb", 4.0, queue_service::markovian, {}},
                {"out", 4.0, queue_service::markovian, {}}};
    t.junctions = {{"in", "ma"}, {"in", "mb"}, {"ma", "out"}, {"mb", "out"}};
    t.flows = {{"f1", "in", "out", 2.0, 3.0}};
    finalize(t);

    auto objective_at = [&](double p) {
        policy pol = uniform_policy(t);
        pol.path_probs[0] = {p, 1.0 - p};
        return evaluate_objective(t, pol).objective;
    };
    const double at_half = objective_at(0.5);
    for (double p = 0.0; p <= 1.0 + 1e-12; p += 0.01)
        CHECK(at_half <= objective_at(p) + 1e-15);
}

TEST_CASE("ill-conditioned coefficients trigger the numeric fallback") {
    // six nearly-coincident slacks: the partial-fraction coefficients blow
    // up past the guard and the path must switch to the numeric route
    topology t;
    std::vector<std::string> ids;
    for (int i = 0; i < 6; ++i) {
        std::string id = "c" + std::to_string(i);
        t.queues.push_back({id, 10.0, queue_service::markovian, {}});
        if (i > 0) t.junctions.emplace_back(ids.back(), id);
        ids.push_back(id);
    }
    t.flows = {{"f1", ids.front(), ids.back(), 0.001, 5.0}};
    finalize(t);
    policy p = uniform_policy(t);
    for (int i = 0; i < 6; ++i)
        p.service_rates[t.queue_index.at(ids[static_cast<std::size_t>(i)])] =
            1.0 + 1e-3 * i + 0.001;
    flow_exceedance fx = evaluate_objective(t, p);
    CHECK(fx.used_numeric_fallback);
    CHECK(fx.objective >= 0.0);
    CHECK(fx.objective <= 1.0);
}

TEST_CASE("batch path cdf with unit batches matches the closed form") {
    const std::vector<double> lambdas{1.0, 0.5};
    const std::vector<double> mus{3.0, 2.0};
    path_travel_time batch = path_cdf_batch_rates(lambdas, mus, batch_pmf({1.0}), {0.001, 0.0});
    path_travel_time closed = path_cdf_mm1_slacks({2.0, 1.5});
    double worst = 0.0;
    for (std::size_t i = 0; i < batch.tab.cdf.size(); i += 5) {
        const double t = batch.tab.step * static_cast<double>(i);
        worst = std::max(worst, std::abs(batch.tab.cdf[i] - closed.cdf_at(t)));
    }
    CHECK(worst <= 1e-6);
    CHECK_FALSE(batch.numeric_fallback);
}

TEST_CASE("batch cdf satisfies the boundary conditions") {
    splitmix64 rng(31);
    for (int round = 0; round < 10; ++round) {
        batch_pmf g({0.3, 0.5, 0.2});
        const double mu = 3.0 + 4.0 * rng.uniform01();
        const double lambda = (0.2 + 0.5 * rng.uniform01()) * mu / g.mean();
        path_travel_time f = path_cdf_batch_rates({lambda}, {mu}, g);
        CHECK(f.cdf_at(0.0) == 0.0);
        CHECK(f.tab.cdf.back() >= 1.0 - 1e-4);
        double prev = 0.0;
        for (double v : f.tab.cdf) {
            CHECK(v >= prev - 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("identical batch queues fall back to the Talbot contour") {
    batch_pmf g({0.5, 0.5});
    path_travel_time f = path_cdf_batch_rates({1.0, 1.0}, {4.0, 4.0}, g);
    CHECK(f.numeric_fallback);  // coincident per-queue poles
    CHECK(f.tab.cdf.back() >= 1.0 - 1e-4);
}
