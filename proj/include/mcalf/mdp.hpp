#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mcalf/types.hpp"

namespace mcalf {

// ---------------------------------------------------------------------------
// Goal sets
// ---------------------------------------------------------------------------

class GoalSet {
public:
    virtual ~GoalSet() = default;
    virtual bool contains(const State& s) const { return goal_dist(s) == 0.0; }
    // inf over goal points g of ||s - g|| in the environment's state norm.
    virtual double goal_dist(const State& s) const = 0;
    virtual std::string describe() const = 0;
};

// Axis-aligned box [lo, hi]; exact distance by projection under either norm.
class BoxGoal final : public GoalSet {
public:
    BoxGoal(std::vector<double> lo, std::vector<double> hi, Norm norm);
    // Centered ball of the sup norm, which is the box [-radius, radius]^dim.
    static BoxGoal sup_ball(std::size_t dim, double radius);

    double goal_dist(const State& s) const override;
    std::string describe() const override;

    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
    Norm norm_;
};

class EuclideanBallGoal final : public GoalSet {
public:
    EuclideanBallGoal(State center, double radius);
    double goal_dist(const State& s) const override;
    std::string describe() const override;

private:
    State center_;
    double radius_;
};

// Goal made of designated integer-embedded states of a finite chain.
class IndexSetGoal final : public GoalSet {
public:
    explicit IndexSetGoal(std::vector<std::size_t> members);
    bool contains(const State& s) const override;
    double goal_dist(const State& s) const override;
    std::string describe() const override;
    const std::vector<std::size_t>& members() const noexcept { return members_; }

private:
    std::vector<std::size_t> members_;
};

// ---------------------------------------------------------------------------
// Regions used for extremization over state and action sets
// ---------------------------------------------------------------------------

struct BoxRegion {
    std::vector<double> lo;
    std::vector<double> hi;
};
using FiniteRegion = std::vector<State>;
using Region = std::variant<BoxRegion, FiniteRegion>;

// ---------------------------------------------------------------------------
// MDP interface
// ---------------------------------------------------------------------------

class Mdp {
public:
    virtual ~Mdp() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t state_dim() const = 0;
    virtual Norm state_norm() const = 0;
    virtual const GoalSet& goal() const = 0;

    virtual State sample_initial(Rng& rng) const = 0;
    // Initial state drawn from {s : goal_dist(s) <= d}.
    virtual State sample_initial_within(double d, Rng& rng) const = 0;
    virtual State sample_transition(const State& s, const Action& a, Rng& rng) const = 0;
    virtual double reward(const State& s, const Action& a) const = 0;
    // Almost-sure bound on ||S'|| given (s, a).
    virtual double envelope(const State& s, const Action& a) const = 0;

    // Bounding region of {s : goal_dist(s) <= d}. Finite environments
    // enumerate the region exactly.
    virtual Region goal_neighborhood(double d) const = 0;
    // Box environments return an axis-aligned box that doubles on request;
    // finite environments return every state.
    virtual Region state_search_region(double half_width) const = 0;
    virtual Region action_set() const = 0;
    // Lipschitz constants of the envelope in s and in a (Euclidean norms), when
    // continuous. Used to bound the grid-supremum error.
    virtual std::optional<std::pair<double, double>> envelope_lipschitz() const = 0;

    double goal_dist(const State& s) const { return goal().goal_dist(s); }
};

// S' = clamp(a, +-a_max) + W, W ~ Uniform[-w_max, w_max]; goal |s| <= g.
class ContractiveScalarEnv final : public Mdp {
public:
    struct Params {
        double w_max = 0.1;
        double goal_radius = 0.2;
        double a_max = 1.0;
        double initial_half_width = 10.0;  // p0 = Uniform[-h, h]
    };

    explicit ContractiveScalarEnv(Params params);

    std::string kind() const override { return "scalar"; }
    std::size_t state_dim() const override { return 1; }
    Norm state_norm() const override { return Norm::Sup; }
    const GoalSet& goal() const override { return goal_; }

    State sample_initial(Rng& rng) const override;
    State sample_initial_within(double d, Rng& rng) const override;
    State sample_transition(const State& s, const Action& a, Rng& rng) const override;
    double reward(const State& s, const Action& a) const override;
    double envelope(const State& s, const Action& a) const override;

    Region goal_neighborhood(double d) const override;
    Region state_search_region(double half_width) const override;
    Region action_set() const override;
    std::optional<std::pair<double, double>> envelope_lipschitz() const override;

    const Params& params() const noexcept { return params_; }

private:
    Params params_;
    BoxGoal goal_;
};

// x' = x + dt v, v' = v + dt clamp(a, +-a_max) + W; goal is a sup-norm ball.
class NoisyDoubleIntegratorEnv final : public Mdp {
public:
    struct Params {
        double dt = 0.1;
        double w_max = 0.01;
        double a_max = 1.0;
        double goal_radius = 0.1;
        double initial_half_width = 1.0;
    };

    explicit NoisyDoubleIntegratorEnv(Params params);

    std::string kind() const override { return "double_integrator"; }
    std::size_t state_dim() const override { return 2; }
    Norm state_norm() const override { return Norm::Sup; }
    const GoalSet& goal() const override { return goal_; }

    State sample_initial(Rng& rng) const override;
    State sample_initial_within(double d, Rng& rng) const override;
    State sample_transition(const State& s, const Action& a, Rng& rng) const override;
    double reward(const State& s, const Action& a) const override;
    double envelope(const State& s, const Action& a) const override;

    Region goal_neighborhood(double d) const override;
    Region state_search_region(double half_width) const override;
    Region action_set() const override;
    std::optional<std::pair<double, double>> envelope_lipschitz() const override;

    const Params& params() const noexcept { return params_; }

private:
    Params params_;
    BoxGoal goal_;
};

// Finite MDP with explicit transition tensor P[s][a][s'] and reward r[s][a].
// State i is embedded at the scalar coordinate i.
class FiniteChainEnv final : public Mdp {
public:
    static constexpr std::size_t kMaxStates = 32;

    FiniteChainEnv(std::size_t n_states, std::size_t n_actions, std::vector<double> transitions,
                   std::vector<double> rewards, std::vector<std::size_t> goal_states,
                   std::vector<double> initial_distribution);

    // Loads {"n_states", "n_actions", "transitions", "rewards", "goal", "initial"}
    // where transitions is row-major [s][a][s'] (flat or nested) and rewards is
    // [s][a] (flat or nested).
    static FiniteChainEnv from_json_text(const std::string& text);
    static FiniteChainEnv from_json_file(const std::string& path);

    std::string kind() const override { return "chain"; }
    std::size_t state_dim() const override { return 1; }
    Norm state_norm() const override { return Norm::Euclidean; }
    const GoalSet& goal() const override { return goal_; }

    State sample_initial(Rng& rng) const override;
    State sample_initial_within(double d, Rng& rng) const override;
    State sample_transition(const State& s, const Action& a, Rng& rng) const override;
    double reward(const State& s, const Action& a) const override;
    double envelope(const State& s, const Action& a) const override;

    Region goal_neighborhood(double d) const override;
    Region state_search_region(double half_width) const override;
    Region action_set() const override;
    std::optional<std::pair<double, double>> envelope_lipschitz() const override {
        return std::nullopt;
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double transition_prob(std::size_t s, std::size_t a, std::size_t next) const {
        return transitions_[(s * n_actions_ + a) * n_states_ + next];
    }
    double reward_of(std::size_t s, std::size_t a) const { return rewards_[s * n_actions_ + a]; }

    std::size_t state_index(const State& s) const;
    std::size_t action_index(const Action& a) const;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<double> transitions_;
    std::vector<double> rewards_;
    IndexSetGoal goal_;
    std::vector<double> initial_;
};

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

struct RolloutTrace {
    std::vector<State> states;        // horizon + 1 entries, states[0] = S_0
    std::vector<Action> actions;      // horizon entries
    std::vector<double> rewards;      // horizon entries
    std::vector<double> goal_dists;   // horizon + 1 entries

    std::size_t horizon() const noexcept { return actions.size(); }
};

// Rolls out a stationary policy. Actions are drawn from streams.alternative,
// the same stream the fused policy uses for its alternative branch, so that a
// fused rollout that never selects the base policy replays this trace exactly.
RolloutTrace rollout(const Mdp& env, const StationaryPolicy& policy, std::size_t horizon,
                     RolloutStreams& streams, const std::optional<State>& initial = std::nullopt);

// sum_t gamma^t r_t over the recorded horizon.
double discounted_return(const RolloutTrace& trace, double gamma);
double discounted_return(std::span<const double> rewards, double gamma);

}  // namespace mcalf
