#include "mcalf/fusion.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace mcalf {

namespace {

double checked_value(const Critic& critic, const State& s, const char* role) {
    const double v = critic.value(s);
    if (!std::isfinite(v)) {
        throw ContractError(std::string(role) + " critic '" + critic.name() +
                            "' returned a non-finite value");
    }
    return v;
}

}  // namespace

const char* to_string(PolicySource source) {
    return source == PolicySource::Base ? "base" : "alternative";
}

std::string format_real(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

ValueReference init_references(const Critic& base_critic, const Critic& alt_critic,
                               const State& s0, double nu) {
    if (!(nu > 0.0)) throw ContractError("init_references: nu must be positive");
    return ValueReference{checked_value(base_critic, s0, "base"),
                          checked_value(alt_critic, s0, "alternative"), nu};
}

Improvements improvements(const ValueReference& refs, const Critic& base_critic,
                          const Critic& alt_critic, const State& s) {
    return Improvements{checked_value(base_critic, s, "base") - refs.v_base_ref,
                        checked_value(alt_critic, s, "alternative") - refs.v_alt_ref};
}

int indicator(const Improvements& deltas, const ValueReference& refs, double epsilon_norm) {
    if (std::abs(refs.v_base_ref) < epsilon_norm || std::abs(refs.v_alt_ref) < epsilon_norm) {
        return 0;
    }
    return deltas.delta_base / refs.v_base_ref > deltas.delta_alt / refs.v_alt_ref ? 1 : 0;
}

// ---------------------------------------------------------------------------

FusedPolicy::FusedPolicy(FusionSetup setup) : setup_(std::move(setup)) {
    if (!setup_.base || !setup_.alternative || !setup_.base_critic || !setup_.alt_critic ||
        !setup_.schedule) {
        throw ContractError("fused policy: policies, critics and schedule are all required");
    }
    if (!(setup_.config.nu > 0.0)) throw ContractError("fused policy: nu must be positive");
    if (!(setup_.config.epsilon_norm > 0.0)) {
        throw ContractError("fused policy: epsilon_norm must be positive");
    }
}

void FusedPolicy::reset(const State& s0) {
    refs_ = init_references(*setup_.base_critic, *setup_.alt_critic, s0, setup_.config.nu);
    active_schedule_ = setup_.config.superlevel_gate
                           ? std::make_shared<const GatedSchedule>(setup_.schedule,
                                                                   setup_.base_critic,
                                                                   refs_.v_base_ref)
                           : setup_.schedule;
    time_ = 0;
    initialized_ = true;
}

const Schedule& FusedPolicy::active_schedule() const {
    if (!initialized_) throw ContractError("fused policy: reset() must be called first");
    return *active_schedule_;
}

FusedAction FusedPolicy::step(const State& s, std::size_t t, RolloutStreams& streams) {
    if (!initialized_) throw ContractError("fused policy: reset() must be called first");
    if (t != time_) throw ContractError("fused policy: time index out of sequence");

    const double v_base = checked_value(*setup_.base_critic, s, "base");
    const double v_alt = checked_value(*setup_.alt_critic, s, "alternative");

    FusionStepRecord rec;
    rec.time = t;
    rec.delta_base = v_base - refs_.v_base_ref;
    rec.delta_alt = v_alt - refs_.v_alt_ref;
    rec.indicator = setup_.config.force_indicator
                        ? 1
                        : indicator({rec.delta_base, rec.delta_alt}, refs_,
                                    setup_.config.epsilon_norm);
    rec.uniform_draw = streams.acceptance.uniform();
    rec.accept_prob = active_schedule_->accept_prob(t, s);
    rec.majorant = active_schedule_->majorant(t);
    rec.source = rec.uniform_draw < rec.accept_prob * rec.indicator ? PolicySource::Base
                                                                     : PolicySource::Alternative;

    Action action = rec.source == PolicySource::Base ? setup_.base->sample(s, streams.base)
                                                     : setup_.alternative->sample(s, streams.alternative);

    // Reference updates follow action selection and use the pre-update deltas.
    if (rec.delta_base >= refs_.nu) {
        refs_.v_base_ref = v_base;
        rec.base_ref_updated = true;
    }
    if (rec.delta_alt >= refs_.nu) {
        refs_.v_alt_ref = v_alt;
        rec.alt_ref_updated = true;
    }
    rec.base_ref = refs_.v_base_ref;
    rec.alt_ref = refs_.v_alt_ref;
    ++time_;
    return FusedAction{std::move(action), rec};
}

FusedTrace fused_rollout(const Mdp& env, const FusionSetup& setup, std::size_t horizon,
                         RolloutStreams& streams, const std::optional<State>& initial) {
    if (horizon < 1) throw ContractError("fused rollout: horizon must be >= 1");
    FusedTrace out;
    auto& tr = out.rollout;
    tr.states.reserve(horizon + 1);
    tr.actions.reserve(horizon);
    tr.rewards.reserve(horizon);
    tr.goal_dists.reserve(horizon + 1);
    out.records.reserve(horizon);

    State s = initial ? *initial : env.sample_initial(streams.initial);
    FusedPolicy policy(setup);
    try {
        policy.reset(s);
    } catch (const std::exception& e) {
        throw RolloutError(0, e.what());
    }
    tr.states.push_back(s);
    tr.goal_dists.push_back(env.goal_dist(s));
    for (std::size_t t = 0; t < horizon; ++t) {
        try {
            FusedAction step = policy.step(s, t, streams);
            tr.rewards.push_back(env.reward(s, step.action));
            s = env.sample_transition(s, step.action, streams.environment);
            tr.actions.push_back(std::move(step.action));
            out.records.push_back(step.record);
        } catch (const RolloutError&) {
            throw;
        } catch (const std::exception& e) {
            throw RolloutError(t, e.what());
        }
        tr.states.push_back(s);
        tr.goal_dists.push_back(env.goal_dist(s));
    }
    return out;
}

// ---------------------------------------------------------------------------

void write_trace_csv_header(std::ostream& os) {
    os << "t,delta_base,delta_alt,indicator,accept_prob,u,source,base_ref,alt_ref\n";
}

void write_trace_csv(std::ostream& os, const std::vector<FusionStepRecord>& records) {
    for (const auto& r : records) {
        os << r.time << ',' << format_real(r.delta_base) << ',' << format_real(r.delta_alt) << ','
           << r.indicator << ',' << format_real(r.accept_prob) << ',' << format_real(r.uniform_draw)
           << ',' << to_string(r.source) << ',' << format_real(r.base_ref) << ','
           << format_real(r.alt_ref) << '\n';
    }
}

void write_trace_jsonl(std::ostream& os, const std::vector<FusionStepRecord>& records) {
    for (const auto& r : records) {
        os << "{\"t\":" << r.time << ",\"delta_base\":" << format_real(r.delta_base)
           << ",\"delta_alt\":" << format_real(r.delta_alt) << ",\"indicator\":" << r.indicator
           << ",\"accept_prob\":" << format_real(r.accept_prob)
           << ",\"u\":" << format_real(r.uniform_draw) << ",\"source\":\"" << to_string(r.source)
           << "\",\"base_ref\":" << format_real(r.base_ref)
           << ",\"alt_ref\":" << format_real(r.alt_ref) << "}\n";
    }
}

}  // namespace mcalf
