#include "mcalf/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mcalf {

namespace {

double clamp_abs(double v, double bound) { return std::clamp(v, -bound, bound); }

void require(bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
}

}  // namespace

double norm(std::span<const double> x, Norm kind) {
    double acc = 0.0;
    for (double v : x) {
        if (kind == Norm::Sup) {
            acc = std::max(acc, std::abs(v));
        } else {
            acc += v * v;
        }
    }
    return kind == Norm::Sup ? acc : std::sqrt(acc);
}

double distance(std::span<const double> x, std::span<const double> y, Norm kind) {
    require(x.size() == y.size(), "distance: dimension mismatch");
    std::vector<double> diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
    return norm(diff, kind);
}

const char* to_string(Norm kind) { return kind == Norm::Sup ? "sup" : "euclidean"; }

// ---------------------------------------------------------------------------

BoxGoal::BoxGoal(std::vector<double> lo, std::vector<double> hi, Norm norm)
    : lo_(std::move(lo)), hi_(std::move(hi)), norm_(norm) {
    require(!lo_.empty() && lo_.size() == hi_.size(), "box goal: bounds must have equal dimension");
    for (std::size_t i = 0; i < lo_.size(); ++i) {
        require(lo_[i] <= hi_[i], "box goal: lo must not exceed hi");
    }
}

BoxGoal BoxGoal::sup_ball(std::size_t dim, double radius) {
    require(radius >= 0.0, "box goal: radius must be non-negative");
    return BoxGoal(std::vector<double>(dim, -radius), std::vector<double>(dim, radius), Norm::Sup);
}

double BoxGoal::goal_dist(const State& s) const {
    require(s.size() == lo_.size(), "box goal: state dimension mismatch");
    std::vector<double> excess(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        excess[i] = s[i] - std::clamp(s[i], lo_[i], hi_[i]);
    }
    return norm(excess, norm_);
}

std::string BoxGoal::describe() const {
    std::ostringstream os;
    os << "box(" << to_string(norm_) << ", dim=" << lo_.size() << ")";
    return os.str();
}

EuclideanBallGoal::EuclideanBallGoal(State center, double radius)
    : center_(std::move(center)), radius_(radius) {
    require(!center_.empty(), "ball goal: empty center");
    require(radius >= 0.0, "ball goal: radius must be non-negative");
}

double EuclideanBallGoal::goal_dist(const State& s) const {
    return std::max(0.0, distance(s, center_, Norm::Euclidean) - radius_);
}

std::string EuclideanBallGoal::describe() const {
    std::ostringstream os;
    os << "euclidean_ball(radius=" << radius_ << ")";
    return os.str();
}

IndexSetGoal::IndexSetGoal(std::vector<std::size_t> members) : members_(std::move(members)) {
    require(!members_.empty(), "index goal: at least one goal state is required");
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

bool IndexSetGoal::contains(const State& s) const { return goal_dist(s) == 0.0; }

double IndexSetGoal::goal_dist(const State& s) const {
    require(s.size() == 1, "index goal: chain states are one-dimensional");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : members_) best = std::min(best, std::abs(s[0] - static_cast<double>(m)));
    return best;
}

std::string IndexSetGoal::describe() const {
    std::ostringstream os;
    os << "states{";
    for (std::size_t i = 0; i < members_.size(); ++i) os << (i ? "," : "") << members_[i];
    os << "}";
    return os.str();
}

// ---------------------------------------------------------------------------

ContractiveScalarEnv::ContractiveScalarEnv(Params params)
    : params_(params), goal_(BoxGoal::sup_ball(1, params.goal_radius)) {
    require(params_.w_max >= 0.0, "scalar env: w_max must be non-negative");
    require(params_.goal_radius > params_.w_max, "scalar env: goal_radius must exceed w_max");
    require(params_.a_max > 0.0, "scalar env: a_max must be positive");
    require(params_.initial_half_width >= 0.0, "scalar env: initial_half_width must be >= 0");
}

State ContractiveScalarEnv::sample_initial(Rng& rng) const {
    const double h = params_.initial_half_width;
    return {rng.uniform(-h, h)};
}

State ContractiveScalarEnv::sample_initial_within(double d, Rng& rng) const {
    require(d >= 0.0, "scalar env: initial goal distance must be >= 0");
    const double h = params_.goal_radius + d;
    return {rng.uniform(-h, h)};
}

State ContractiveScalarEnv::sample_transition(const State& s, const Action& a, Rng& rng) const {
    require(s.size() == 1 && a.size() == 1, "scalar env: state and action are scalars");
    const double w = rng.uniform(-params_.w_max, params_.w_max);
    return {clamp_abs(a[0], params_.a_max) + w};
}

double ContractiveScalarEnv::reward(const State& s, const Action& a) const {
    return -std::abs(s[0]) - 0.01 * a[0] * a[0];
}

double ContractiveScalarEnv::envelope(const State&, const Action& a) const {
    return std::abs(clamp_abs(a[0], params_.a_max)) + params_.w_max;
}

Region ContractiveScalarEnv::goal_neighborhood(double d) const {
    const double h = params_.goal_radius + d;
    return BoxRegion{{-h}, {h}};
}

Region ContractiveScalarEnv::state_search_region(double half_width) const {
    return BoxRegion{{-half_width}, {half_width}};
}

Region ContractiveScalarEnv::action_set() const {
    return BoxRegion{{-params_.a_max}, {params_.a_max}};
}

std::optional<std::pair<double, double>> ContractiveScalarEnv::envelope_lipschitz() const {
    return std::pair{0.0, 1.0};
}

// ---------------------------------------------------------------------------

NoisyDoubleIntegratorEnv::NoisyDoubleIntegratorEnv(Params params)
    : params_(params), goal_(BoxGoal::sup_ball(2, params.goal_radius)) {
    require(params_.dt > 0.0, "double integrator: dt must be positive");
    require(params_.w_max > 0.0, "double integrator: w_max must be positive");
    require(params_.a_max > 0.0, "double integrator: a_max must be positive");
    require(params_.goal_radius > 0.0, "double integrator: goal_radius must be positive");
}

State NoisyDoubleIntegratorEnv::sample_initial(Rng& rng) const {
    const double h = params_.initial_half_width;
    const double x = rng.uniform(-h, h);
    const double v = rng.uniform(-h, h);
    return {x, v};
}

State NoisyDoubleIntegratorEnv::sample_initial_within(double d, Rng& rng) const {
    require(d >= 0.0, "double integrator: initial goal distance must be >= 0");
    const double h = params_.goal_radius + d;
    const double x = rng.uniform(-h, h);
    const double v = rng.uniform(-h, h);
    return {x, v};
}

State NoisyDoubleIntegratorEnv::sample_transition(const State& s, const Action& a,
                                                  Rng& rng) const {
    require(s.size() == 2 && a.size() == 1, "double integrator: state is (x, v), action scalar");
    const double w = rng.uniform(-params_.w_max, params_.w_max);
    const double x = s[0] + params_.dt * s[1];
    const double v = s[1] + params_.dt * clamp_abs(a[0], params_.a_max) + w;
    return {x, v};
}

double NoisyDoubleIntegratorEnv::reward(const State& s, const Action& a) const {
    return -(s[0] * s[0] + s[1] * s[1]) - 0.01 * a[0] * a[0];
}

// |x'| = |x + dt v| and |v'| <= |v| + dt |a| + w_max; the sup norm of the
// deterministic part plus w_max bounds ||S'|| surely.
double NoisyDoubleIntegratorEnv::envelope(const State& s, const Action& a) const {
    const double x = s[0] + params_.dt * s[1];
    const double v = std::abs(s[1]) + params_.dt * std::abs(clamp_abs(a[0], params_.a_max));
    return std::max(std::abs(x), v) + params_.w_max;
}

Region NoisyDoubleIntegratorEnv::goal_neighborhood(double d) const {
    const double h = params_.goal_radius + d;
    return BoxRegion{{-h, -h}, {h, h}};
}

Region NoisyDoubleIntegratorEnv::state_search_region(double half_width) const {
    return BoxRegion{{-half_width, -half_width}, {half_width, half_width}};
}

Region NoisyDoubleIntegratorEnv::action_set() const {
    return BoxRegion{{-params_.a_max}, {params_.a_max}};
}

std::optional<std::pair<double, double>> NoisyDoubleIntegratorEnv::envelope_lipschitz() const {
    return std::pair{std::sqrt(1.0 + params_.dt * params_.dt), params_.dt};
}

// ---------------------------------------------------------------------------

FiniteChainEnv::FiniteChainEnv(std::size_t n_states, std::size_t n_actions,
                               std::vector<double> transitions, std::vector<double> rewards,
                               std::vector<std::size_t> goal_states,
                               std::vector<double> initial_distribution)
    : n_states_(n_states),
      n_actions_(n_actions),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      goal_(std::move(goal_states)),
      initial_(std::move(initial_distribution)) {
    require(n_states_ >= 1 && n_states_ <= kMaxStates, "chain env: n_states must lie in [1, 32]");
    require(n_actions_ >= 1, "chain env: at least one action is required");
    require(transitions_.size() == n_states_ * n_actions_ * n_states_,
            "chain env: transition tensor must have n_states*n_actions*n_states entries");
    require(rewards_.size() == n_states_ * n_actions_,
            "chain env: reward table must have n_states*n_actions entries");
    for (std::size_t s = 0; s < n_states_; ++s) {
        for (std::size_t a = 0; a < n_actions_; ++a) {
            double row = 0.0;
            for (std::size_t n = 0; n < n_states_; ++n) {
                const double p = transition_prob(s, a, n);
                require(p >= 0.0 && p <= 1.0, "chain env: probabilities must lie in [0,1]");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-12) {
                throw ContractError("chain env: row (s=" + std::to_string(s) +
                                    ", a=" + std::to_string(a) + ") does not sum to 1");
            }
        }
    }
    for (std::size_t m : goal_.members()) {
        require(m < n_states_, "chain env: goal state out of range");
    }
    if (initial_.empty()) initial_.assign(n_states_, 1.0 / static_cast<double>(n_states_));
    require(initial_.size() == n_states_, "chain env: initial distribution has wrong length");
    const double total = std::accumulate(initial_.begin(), initial_.end(), 0.0);
    require(std::abs(total - 1.0) <= 1e-12, "chain env: initial distribution must sum to 1");
}

namespace {

std::vector<double> flatten_numbers(const nlohmann::json& j) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
        return out;
    }
    if (!j.is_array()) throw ContractError("chain env: expected a number or nested array");
    for (const auto& e : j) {
        auto part = flatten_numbers(e);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace

FiniteChainEnv FiniteChainEnv::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError(std::string("chain env: malformed JSON: ") + e.what());
    }
    auto field = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw ContractError(std::string("chain env: missing key '") + key + "'");
        return j.at(key);
    };
    const auto n_states = field("n_states").get<std::size_t>();
    const auto n_actions = field("n_actions").get<std::size_t>();
    auto transitions = flatten_numbers(field("transitions"));
    auto rewards = flatten_numbers(field("rewards"));
    auto goal = field("goal").get<std::vector<std::size_t>>();
    std::vector<double> initial;
    if (j.contains("initial")) initial = flatten_numbers(j.at("initial"));
    return FiniteChainEnv(n_states, n_actions, std::move(transitions), std::move(rewards),
                          std::move(goal), std::move(initial));
}

FiniteChainEnv FiniteChainEnv::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("chain env: cannot open transition file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::size_t FiniteChainEnv::state_index(const State& s) const {
    require(s.size() == 1, "chain env: states are one-dimensional");
    const double r = std::round(s[0]);
    require(r >= 0.0 && r < static_cast<double>(n_states_) && r == s[0],
            "chain env: state is not an embedded chain state");
    return static_cast<std::size_t>(r);
}

std::size_t FiniteChainEnv::action_index(const Action& a) const {
    require(a.size() == 1, "chain env: actions are one-dimensional");
    const double r = std::round(a[0]);
    require(r >= 0.0 && r < static_cast<double>(n_actions_) && r == a[0],
            "chain env: action is not an embedded chain action");
    return static_cast<std::size_t>(r);
}

State FiniteChainEnv::sample_initial(Rng& rng) const {
    return {static_cast<double>(rng.categorical(initial_))};
}

State FiniteChainEnv::sample_initial_within(double d, Rng& rng) const {
    std::vector<double> weights(n_states_, 0.0);
    for (std::size_t i = 0; i < n_states_; ++i) {
        if (goal_.goal_dist({static_cast<double>(i)}) <= d) weights[i] = 1.0;
    }
    return {static_cast<double>(rng.categorical(weights))};
}

State FiniteChainEnv::sample_transition(const State& s, const Action& a, Rng& rng) const {
    const std::size_t si = state_index(s);
    const std::size_t ai = action_index(a);
    const std::span<const double> row(&transitions_[(si * n_actions_ + ai) * n_states_], n_states_);
    return {static_cast<double>(rng.categorical(row))};
}

double FiniteChainEnv::reward(const State& s, const Action& a) const {
    return reward_of(state_index(s), action_index(a));
}

double FiniteChainEnv::envelope(const State& s, const Action& a) const {
    const std::size_t si = state_index(s);
    const std::size_t ai = action_index(a);
    double bound = 0.0;
    for (std::size_t n = 0; n < n_states_; ++n) {
        if (transition_prob(si, ai, n) > 0.0) bound = std::max(bound, static_cast<double>(n));
    }
    return bound;
}

Region FiniteChainEnv::goal_neighborhood(double d) const {
    FiniteRegion out;
    for (std::size_t i = 0; i < n_states_; ++i) {
        State s{static_cast<double>(i)};
        if (goal_.goal_dist(s) <= d) out.push_back(std::move(s));
    }
    return out;
}

Region FiniteChainEnv::state_search_region(double) const {
    FiniteRegion out;
    for (std::size_t i = 0; i < n_states_; ++i) out.push_back({static_cast<double>(i)});
    return out;
}

Region FiniteChainEnv::action_set() const {
    FiniteRegion out;
    for (std::size_t a = 0; a < n_actions_; ++a) out.push_back({static_cast<double>(a)});
    return out;
}

// ---------------------------------------------------------------------------

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ContractError("categorical: weights must have positive sum");
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

RolloutTrace rollout(const Mdp& env, const StationaryPolicy& policy, std::size_t horizon,
                     RolloutStreams& streams, const std::optional<State>& initial) {
    if (horizon < 1) throw ContractError("rollout: horizon must be >= 1");
    RolloutTrace trace;
    trace.states.reserve(horizon + 1);
    trace.actions.reserve(horizon);
    trace.rewards.reserve(horizon);
    trace.goal_dists.reserve(horizon + 1);

    State s = initial ? *initial : env.sample_initial(streams.initial);
    trace.states.push_back(s);
    trace.goal_dists.push_back(env.goal_dist(s));
    for (std::size_t t = 0; t < horizon; ++t) {
        try {
            Action a = policy.sample(s, streams.alternative);
            trace.rewards.push_back(env.reward(s, a));
            s = env.sample_transition(s, a, streams.environment);
            trace.actions.push_back(std::move(a));
        } catch (const std::exception& e) {
            throw RolloutError(t, e.what());
        }
        trace.states.push_back(s);
        trace.goal_dists.push_back(env.goal_dist(s));
    }
    return trace;
}

double discounted_return(std::span<const double> rewards, double gamma) {
    if (rewards.empty()) throw ContractError("discounted_return: empty trace");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("discounted_return: gamma in [0,1)");
    double total = 0.0;
    double weight = 1.0;
    for (double r : rewards) {
        total += weight * r;
        weight *= gamma;
    }
    return total;
}

double discounted_return(const RolloutTrace& trace, double gamma) {
    return discounted_return(trace.rewards, gamma);
}

}  // namespace mcalf
