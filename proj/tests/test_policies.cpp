#include "doctest.h"

#include <cmath>
#include <random>

#include "mcalf/policies.hpp"
#include "oracles.hpp"

using namespace mcalf;

namespace {

FiniteChainEnv random_reward_chain(std::uint64_t seed) {
    const std::size_t n = 5;
    const std::size_t m = 2;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n * m * n);
    std::vector<double> r(n * m);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < m; ++a) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) total += p[(s * m + a) * n + j] = u(gen) + 0.05;
            for (std::size_t j = 0; j < n; ++j) p[(s * m + a) * n + j] /= total;
            // Renormalize the last entry so every row sums to one at rounding level.
            double head = 0.0;
            for (std::size_t j = 0; j + 1 < n; ++j) head += p[(s * m + a) * n + j];
            p[(s * m + a) * n + n - 1] = 1.0 - head;
            r[s * m + a] = 2.0 * u(gen) - 1.0;
        }
    }
    return FiniteChainEnv(n, m, p, r, {0}, {});
}

}  // namespace

TEST_CASE("beta evaluates kappa(d) xi(e^-t)") {
    const KLCertificate id{ClassKInf::linear(), ClassKInf::linear(), 0.0};
    CHECK(beta(id, 0.0, 0.0) == 0.0);
    CHECK(beta(id, 0.0, 7.0) == 0.0);
    CHECK(beta(id, 10.0, 0.0) == 10.0);
    CHECK(beta(id, 10.0, 3.0) == doctest::Approx(0.49787068367863944).epsilon(1e-14));
    // The scalar env with c = e^-1 contracts 10 to 10 c^3 in three noiseless steps.
    const double c = std::exp(-1.0);
    CHECK(beta(id, 10.0, 3.0) == doctest::Approx(10.0 * c * c * c).epsilon(1e-14));
    CHECK_THROWS_AS(beta(id, -1.0, 0.0), ContractError);
}

TEST_CASE("certified scalar policy admissibility") {
    ContractiveScalarEnv::Params p;
    p.w_max = 0.1;
    p.goal_radius = 0.2;
    const ContractiveScalarEnv ok_env(p);
    const double c = std::exp(-1.0);
    CHECK(p.w_max / (1.0 - c) == doctest::Approx(0.15819767068693265).epsilon(1e-12));
    const CertifiedPolicy cert = make_scalar_certified_policy(c, ok_env);
    for (double t : {0.0, 0.5, 1.0, 2.0, 7.5}) {
        CHECK(beta(cert.certificate, 10.0, t) == doctest::Approx(10.0 * std::exp(-t)).epsilon(1e-14));
    }
    CHECK(cert.certificate.eps == 0.0);

    p.goal_radius = 0.5;
    const ContractiveScalarEnv bad_env(p);
    CHECK(bad_env.params().w_max / (1.0 - 0.9) == doctest::Approx(1.0));
    CHECK_THROWS_WITH_AS(make_scalar_certified_policy(0.9, bad_env),
                         doctest::Contains("g > w_max/(1-c)"), ContractError);
    CHECK_FALSE(scalar_certificate_admissible(0.9, 0.1, 0.5));
    CHECK(scalar_certificate_admissible(c, 0.1, 0.2));
}

TEST_CASE("certificate with c != e^-1 uses xi(r) = r^ln(1/c)") {
    const ContractiveScalarEnv env(ContractiveScalarEnv::Params{});
    const CertifiedPolicy cert = make_scalar_certified_policy(0.3, env);
    for (int t = 0; t < 10; ++t) {
        CHECK(beta(cert.certificate, 4.0, t) == doctest::Approx(4.0 * std::pow(0.3, t)).epsilon(1e-12));
    }
}

TEST_CASE("Gaussian bump critic") {
    const GaussianBumpCritic bump({0.5, -1.0}, 1.0);
    CHECK(bump.value({0.5, -1.0}) == 1.0);
    CHECK(bump.superlevel_radius(std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    const GaussianBumpCritic wide({0.0}, 3.0);
    for (double a : {0.9, 0.5, 1e-3, 1e-100, 1e-300}) {
        const double r = wide.superlevel_radius(a);
        CHECK(std::isfinite(r));
        CHECK(r == doctest::Approx(std::sqrt(-9.0 * std::log(a))).epsilon(1e-14));
        CHECK(wide.value({r}) == doctest::Approx(a).epsilon(1e-10));
    }
    CHECK(wide.superlevel_radius(1e-300) > wide.superlevel_radius(1e-100));
    CHECK_THROWS_AS(wide.superlevel_radius(0.0), ContractError);
    CHECK_THROWS_AS(GaussianBumpCritic({0.0}, 0.0), ContractError);
}

TEST_CASE("property: Gaussian bump superlevel set is the ball of the closed-form radius") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::uniform_real_distribution<double> level(1e-6, 1.0);
    const GaussianBumpCritic bump({0.2, -0.3}, 1.7);
    std::size_t mismatches = 0;
    double worst_slope = 0.0;
    for (int i = 0; i < 50000; ++i) {
        const State s{u(gen), u(gen)};
        const double a = level(gen);
        const double r = distance(s, bump.center(), Norm::Euclidean);
        const double radius = bump.superlevel_radius(a);
        if (std::abs(r - radius) > 1e-9) mismatches += (bump.value(s) >= a) != (r <= radius);
        const State t{u(gen), u(gen)};
        const double d = distance(s, t, Norm::Euclidean);
        if (d > 1e-9) worst_slope = std::max(worst_slope, std::abs(bump.value(s) - bump.value(t)) / d);
    }
    CHECK(mismatches == 0);
    CHECK(worst_slope <= *bump.lipschitz() + 1e-12);
}

TEST_CASE("tabular critic: closed forms") {
    // Two states, zero rewards.
    const FiniteChainEnv zero(2, 1, {0.5, 0.5, 0.5, 0.5}, {0.0, 0.0}, {0}, {});
    const auto v0 = make_tabular_critic(zero, TabularPolicy::deterministic({0, 0}, 1), 0.9);
    CHECK(v0->values() == std::vector<double>{0.0, 0.0});

    // Absorbing state with reward 1 and gamma = 0.5.
    const FiniteChainEnv absorbing(1, 1, {1.0}, {1.0}, {0}, {});
    const auto v1 = make_tabular_critic(absorbing, TabularPolicy::deterministic({0}, 1), 0.5);
    CHECK(v1->values()[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(v1->value({0.0}) == v1->values()[0]);
    CHECK_THROWS_AS(v1->value({0.5}), ContractError);
    CHECK_THROWS_AS(make_tabular_critic(absorbing, TabularPolicy::deterministic({0}, 1), 1.0),
                    ContractError);
}

TEST_CASE("tabular critic matches value iteration on a random 5-state chain") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FiniteChainEnv env = random_reward_chain(seed);
        const TabularPolicy policy({{0.3, 0.7}, {1.0, 0.0}, {0.5, 0.5}, {0.0, 1.0}, {0.9, 0.1}});
        for (double gamma : {0.0, 0.5, 0.9, 0.99}) {
            const auto critic = make_tabular_critic(env, policy, gamma);
            const auto oracle_v = oracle::policy_value_iteration(env, policy, gamma);
            for (std::size_t s = 0; s < env.n_states(); ++s) {
                CHECK(std::abs(critic->values()[s] - oracle_v[s]) <= 1e-10);
            }
        }
    }
}

TEST_CASE("tabular critic matches a 10^6-sample Monte Carlo estimate within 3 sigma") {
    const FiniteChainEnv env = random_reward_chain(77);
    const TabularPolicy policy({{0.3, 0.7}, {1.0, 0.0}, {0.5, 0.5}, {0.0, 1.0}, {0.9, 0.1}});
    const double gamma = 0.8;
    const auto critic = make_tabular_critic(env, policy, gamma);

    // Self-contained sampler: cumulative tables and a plain engine.
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](auto&& weight, std::size_t count) {
        const double x = u(gen);
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            acc += weight(i);
            if (x < acc) return i;
        }
        return count - 1;
    };
    const std::size_t n = 1000000;
    const std::size_t horizon = 130;  // 0.8^130 / 0.2 < 1e-12
    for (std::size_t start : {2u}) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t s = start;
            double g = 0.0;
            double w = 1.0;
            for (std::size_t t = 0; t < horizon; ++t) {
                const std::size_t a = draw([&](std::size_t k) { return policy.prob(s, k); }, 2);
                g += w * env.reward_of(s, a);
                w *= gamma;
                s = draw([&](std::size_t k) { return env.transition_prob(s, a, k); }, 5);
            }
            sum += g;
            sum_sq += g * g;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum_sq / n - mean * mean) / n);
        CHECK(std::abs(mean - critic->values()[start]) <= 3.0 * se);
    }
}

TEST_CASE("property: class-K-infinity families are increasing, zero at zero and invertible") {
    const std::vector<ClassKInf> fns{ClassKInf::linear(), ClassKInf::linear(2.5),
                                     ClassKInf::power(0.3), ClassKInf::power(2.0, 0.5),
                                     ClassKInf::power(1.0 / 11.0)};
    for (const auto& k : fns) {
        CHECK(k(0.0) == 0.0);
        double prev = 0.0;
        for (int i = 1; i <= 2000; ++i) {
            const double x = 0.01 * i;
            const double y = k(x);
            CHECK(y > prev);
            CHECK(k.inverse(y) == doctest::Approx(x).epsilon(1e-12));
            prev = y;
        }
        CHECK(k(1e300) > 1e20);
    }
    CHECK_THROWS_AS(ClassKInf::linear(0.0), ContractError);
    CHECK_THROWS_AS(ClassKInf::power(-1.0), ContractError);
}

TEST_CASE("property: beta is non-increasing in t and vanishes") {
    const KLCertificate cert{ClassKInf::power(1.5), ClassKInf::power(0.4, 3.0), 0.0};
    for (double d : {0.0, 0.1, 1.0, 10.0, 100.0}) {
        double prev = beta(cert, d, 0.0);
        for (int i = 1; i <= 400; ++i) {
            const double b = beta(cert, d, 0.25 * i);
            CHECK(b <= prev);
            prev = b;
        }
        CHECK(beta(cert, d, 200.0) < 1e-30);
    }
}

TEST_CASE("tabular policy validation and sampling") {
    CHECK_THROWS_AS(TabularPolicy({{0.5, 0.4}}), ContractError);
    CHECK_THROWS_AS(TabularPolicy({{0.5, 0.5}, {1.0}}), ContractError);
    CHECK_THROWS_AS(TabularPolicy::deterministic({2}, 2), ContractError);
    const TabularPolicy p({{0.25, 0.75}});
    CHECK(*p.density({1.0}, {0.0}) == 0.75);
    CHECK(*p.density({0.5}, {0.0}) == 0.0);
    Rng rng(1);
    std::size_t ones = 0;
    const std::size_t n = 200000;
    for (std::size_t i = 0; i < n; ++i) ones += p.sample({0.0}, rng)[0] == 1.0;
    CHECK(std::abs(static_cast<double>(ones) / n - 0.75) <= oracle::three_sigma(0.75, n));
}
