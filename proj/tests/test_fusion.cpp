#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "mcalf/certificates.hpp"
#include "mcalf/fusion.hpp"
#include "oracles.hpp"

using namespace mcalf;

namespace {

std::shared_ptr<const Critic> constant_critic(double v) { return std::make_shared<ConstantCritic>(v); }

FusionSetup scalar_setup(std::shared_ptr<const Schedule> schedule, bool gate = false) {
    FusionSetup setup;
    setup.base = std::make_shared<ConstantPolicy>(Action{0.5});
    setup.alternative = std::make_shared<LinearPolicy>(std::exp(-1.0));
    setup.base_critic = make_gaussian_bump_critic({0.5}, 2.0);
    setup.alt_critic = make_gaussian_bump_critic({0.0}, 2.0);
    setup.schedule = std::move(schedule);
    setup.config.superlevel_gate = gate;
    return setup;
}

}  // namespace

TEST_CASE("init_references") {
    const auto refs = init_references(ConstantCritic(1.0), ConstantCritic(2.0), {3.7}, 1e-3);
    CHECK(refs.v_base_ref == 1.0);
    CHECK(refs.v_alt_ref == 2.0);
    CHECK(refs.nu == 1e-3);

    const GaussianBumpCritic bump({0.0}, 1.0);
    CHECK(init_references(bump, ConstantCritic(0.0), {0.0}, 1e-3).v_base_ref == 1.0);
    CHECK_THROWS_AS(init_references(bump, bump, {0.0}, 0.0), ContractError);

    const FunctionCritic bad([](const State&) { return std::numeric_limits<double>::quiet_NaN(); },
                             "broken_critic");
    CHECK_THROWS_WITH_AS(init_references(bad, bump, {0.0}, 1e-3), doctest::Contains("broken_critic"),
                         ContractError);
}

TEST_CASE("init_references with a tabular critic equals the value-iteration fixed point") {
    std::vector<double> p(5 * 2 * 5, 0.0);
    for (std::size_t s = 0; s < 5; ++s) {
        p[(s * 2 + 0) * 5 + (s == 0 ? 0 : s - 1)] = 1.0;
        p[(s * 2 + 1) * 5 + std::min<std::size_t>(s + 1, 4)] += 0.5;
        p[(s * 2 + 1) * 5 + s] += 0.5;
    }
    const FiniteChainEnv env(5, 2, p, {1, 0, 0, 0.5, 0, 0.2, 0, 0.1, 0, 2.0}, {0}, {});
    const TabularPolicy policy({{0.5, 0.5}, {0.2, 0.8}, {0.6, 0.4}, {0.0, 1.0}, {1.0, 0.0}});
    const auto critic = make_tabular_critic(env, policy, 0.9);
    const auto oracle_v = oracle::policy_value_iteration(env, policy, 0.9);
    const auto refs = init_references(*critic, ConstantCritic(1.0), {2.0}, 1e-3);
    CHECK(std::abs(refs.v_base_ref - oracle_v[2]) <= 1e-10);
}

TEST_CASE("improvements") {
    const ValueReference refs{1.0, 2.0, 1e-3};
    const ConstantCritic one(1.0);
    const ConstantCritic two(2.0);
    const auto zero = improvements(refs, one, two, {0.0});
    CHECK(zero.delta_base == 0.0);
    CHECK(zero.delta_alt == 0.0);
    const auto up = improvements(refs, ConstantCritic(1.5), ConstantCritic(2.5), {0.0});
    CHECK(up.delta_base == 0.5);
    CHECK(up.delta_alt == 0.5);
    const auto mixed = improvements(refs, ConstantCritic(0.5), ConstantCritic(3.0), {0.0});
    CHECK(mixed.delta_base == -0.5);
    CHECK(mixed.delta_alt == 1.0);
}

TEST_CASE("indicator") {
    CHECK(indicator({0.0, 0.0}, {1.0, 2.0, 1e-3}, 1e-8) == 0);
    CHECK(indicator({0.5, 0.5}, {1.0, 2.0, 1e-3}, 1e-8) == 1);
    CHECK(indicator({0.5, 0.5}, {1e-12, 2.0, 1e-3}, 1e-8) == 0);
    CHECK(indicator({0.5, 0.5}, {1.0, -1e-12, 1e-3}, 1e-8) == 0);
    CHECK(indicator({0.25, 0.5}, {1.0, 2.0, 1e-3}, 1e-8) == 0);  // equal ratios
}

TEST_CASE("t = 0 always selects the alternative: deltas vanish at the initial state") {
    const FusionSetup setup = scalar_setup(std::make_shared<GeometricSchedule>(0.5, 1.0));
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        auto streams = RolloutStreams::derive(seed, 0);
        const FusedTrace tr = fused_rollout(ContractiveScalarEnv({}), setup, 1, streams);
        REQUIRE(tr.records.size() == 1);
        CHECK(tr.records[0].delta_base == 0.0);
        CHECK(tr.records[0].indicator == 0);
        CHECK(tr.records[0].accept_prob == 1.0);
        CHECK(tr.records[0].source == PolicySource::Alternative);
    }
}

TEST_CASE("zero schedule reproduces the alternative policy's traces exactly") {
    const ContractiveScalarEnv env({});
    const FusionSetup setup = scalar_setup(std::make_shared<ConstantSchedule>(0.0));
    for (std::uint64_t i = 0; i < 500; ++i) {
        auto fused_streams = RolloutStreams::derive(11, i);
        auto alt_streams = RolloutStreams::derive(11, i);
        const FusedTrace fused = fused_rollout(env, setup, 50, fused_streams);
        const RolloutTrace alt = rollout(env, *setup.alternative, 50, alt_streams);
        CHECK(fused.rollout.states == alt.states);
        CHECK(fused.rollout.actions == alt.actions);
        CHECK(fused.rollout.rewards == alt.rewards);
        std::size_t base = 0;
        for (const auto& r : fused.records) base += r.source == PolicySource::Base;
        CHECK(base == 0);
    }
}

TEST_CASE("forced indicator with geometric(0.5, 1) selects the base policy in every rollout") {
    FusionSetup setup = scalar_setup(std::make_shared<GeometricSchedule>(0.5, 1.0));
    setup.config.force_indicator = true;
    const ContractiveScalarEnv env({});
    // Probability of no base selection at all is the tail product from t = 0.
    const double predicted = 1.0 - tail_product(*setup.schedule, 0);
    CHECK(predicted == 1.0);
    const std::size_t n = 100000;
    std::size_t with_base = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto streams = RolloutStreams::derive(3, i);
        const FusedTrace tr = fused_rollout(env, setup, 5, streams);
        bool any = false;
        for (const auto& r : tr.records) any = any || r.source == PolicySource::Base;
        with_base += any;
    }
    const double frac = static_cast<double>(with_base) / n;
    CHECK(frac == 1.0);
    CHECK(std::abs(frac - predicted) <= oracle::three_sigma(predicted, n));
}

TEST_CASE("property: step records satisfy the switching invariants") {
    const ContractiveScalarEnv env({});
    for (bool gate : {false, true}) {
        const FusionSetup setup = scalar_setup(std::make_shared<GeometricSchedule>(0.99, 0.8), gate);
        std::size_t failures = 0;
        std::size_t base_steps = 0;
        for (std::uint64_t i = 0; i < 2000; ++i) {
            auto streams = RolloutStreams::derive(17, i);
            const FusedTrace tr = fused_rollout(env, setup, 60, streams);
            double base_ref = setup.base_critic->value(tr.rollout.states[0]);
            double alt_ref = setup.alt_critic->value(tr.rollout.states[0]);
            for (const auto& r : tr.records) {
                const State& s = tr.rollout.states[r.time];
                failures += r.accept_prob > r.majorant;
                failures += r.majorant != 0.8 * std::pow(0.99, static_cast<double>(r.time));
                failures += r.delta_base != setup.base_critic->value(s) - base_ref;
                failures += r.delta_alt != setup.alt_critic->value(s) - alt_ref;
                const bool guarded = std::abs(base_ref) >= 1e-8 && std::abs(alt_ref) >= 1e-8;
                const bool expect_indicator = guarded && r.delta_base / base_ref > r.delta_alt / alt_ref;
                failures += r.indicator != static_cast<int>(expect_indicator);
                const bool expect_base = r.uniform_draw < r.accept_prob * r.indicator;
                failures += (r.source == PolicySource::Base) != expect_base;
                if (gate && setup.base_critic->value(s) < setup.base_critic->value(tr.rollout.states[0])) {
                    failures += r.accept_prob != 0.0;
                }
                failures += r.base_ref_updated != (r.delta_base >= 1e-3);
                failures += r.alt_ref_updated != (r.delta_alt >= 1e-3);
                if (r.base_ref_updated) base_ref = setup.base_critic->value(s);
                if (r.alt_ref_updated) alt_ref = setup.alt_critic->value(s);
                failures += r.base_ref != base_ref || r.alt_ref != alt_ref;
                base_steps += r.source == PolicySource::Base;
            }
        }
        CHECK(failures == 0);
        CHECK(base_steps > 0);
    }
}

TEST_CASE("fused rollouts are a pure function of the seed") {
    const ContractiveScalarEnv env({});
    const FusionSetup setup = scalar_setup(std::make_shared<GeometricSchedule>(0.99, 0.8), true);
    auto a = RolloutStreams::derive(42, 9);
    auto b = RolloutStreams::derive(42, 9);
    const FusedTrace ta = fused_rollout(env, setup, 100, a);
    const FusedTrace tb = fused_rollout(env, setup, 100, b);
    CHECK(ta.rollout.states == tb.rollout.states);
    std::ostringstream csv_a;
    std::ostringstream csv_b;
    write_trace_csv(csv_a, ta.records);
    write_trace_csv(csv_b, tb.records);
    CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("trace serialization") {
    std::ostringstream header;
    write_trace_csv_header(header);
    CHECK(header.str() == "t,delta_base,delta_alt,indicator,accept_prob,u,source,base_ref,alt_ref\n");

    FusionStepRecord r;
    r.time = 3;
    r.delta_base = 0.5;
    r.delta_alt = -0.25;
    r.indicator = 1;
    r.accept_prob = 0.1;
    r.uniform_draw = 0.05;
    r.source = PolicySource::Base;
    r.base_ref = 1.5;
    r.alt_ref = 2.0;
    std::ostringstream csv;
    write_trace_csv(csv, {r});
    CHECK(csv.str() == "3,0.5,-0.25,1,0.1,0.05,base,1.5,2\n");
    std::ostringstream jsonl;
    write_trace_jsonl(jsonl, {r});
    CHECK(jsonl.str() ==
          "{\"t\":3,\"delta_base\":0.5,\"delta_alt\":-0.25,\"indicator\":1,\"accept_prob\":0.1,"
          "\"u\":0.05,\"source\":\"base\",\"base_ref\":1.5,\"alt_ref\":2}\n");
    CHECK(format_real(0.1 + 0.2) == "0.30000000000000004");
}

TEST_CASE("non-finite critic output aborts the rollout naming the critic and step") {
    FusionSetup setup = scalar_setup(std::make_shared<GeometricSchedule>(0.5, 0.5));
    setup.alt_critic = std::make_shared<FunctionCritic>(
        [](const State& s) { return std::abs(s[0]) < 2.0 ? std::numeric_limits<double>::infinity() : 1.0; },
        "exploding_critic");
    auto streams = RolloutStreams::derive(1, 0);
    try {
        fused_rollout(ContractiveScalarEnv({}), setup, 10, streams, State{5.0});
        FAIL("expected a rollout error");
    } catch (const RolloutError& e) {
        CHECK(e.step() == 1);
        CHECK(std::string(e.what()).find("exploding_critic") != std::string::npos);
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("fused policy rejects out-of-sequence steps") {
    FusedPolicy policy(scalar_setup(std::make_shared<GeometricSchedule>(0.5, 0.5)));
    auto streams = RolloutStreams::derive(1, 0);
    CHECK_THROWS_AS(policy.step({0.0}, 0, streams), ContractError);
    policy.reset({0.0});
    CHECK_THROWS_AS(policy.step({0.0}, 1, streams), ContractError);
    CHECK_NOTHROW(policy.step({0.0}, 0, streams));
    CHECK(policy.time() == 1);
    FusionSetup missing;
    CHECK_THROWS_AS(FusedPolicy{missing}, ContractError);
}
