#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcalf/mdp.hpp"
#include "mcalf/schedules.hpp"
#include "mcalf/types.hpp"

namespace mcalf {

struct ValueReference {
    double v_base_ref = 0.0;
    double v_alt_ref = 0.0;
    double nu = 1e-3;
};

struct Improvements {
    double delta_base = 0.0;
    double delta_alt = 0.0;
};

enum class PolicySource { Base, Alternative };
const char* to_string(PolicySource source);

struct FusionStepRecord {
    std::size_t time = 0;
    double delta_base = 0.0;
    double delta_alt = 0.0;
    int indicator = 0;
    double accept_prob = 0.0;  // rho_t(S_t), before multiplication by the indicator
    double majorant = 0.0;     // rho_bar_t
    double uniform_draw = 0.0;
    PolicySource source = PolicySource::Alternative;
    bool base_ref_updated = false;
    bool alt_ref_updated = false;
    double base_ref = 0.0;  // references after this step's updates
    double alt_ref = 0.0;
};

struct FusionConfig {
    double nu = 1e-3;
    double epsilon_norm = 1e-8;
    // Gate the schedule with the base critic's value at S_0 (rho_t(s) = 0
    // whenever V_base(s) < V_base(S_0)).
    bool superlevel_gate = false;
    // Diagnostic mode: the indicator is 1 at every step, so the base policy is
    // selected exactly when U_t < rho_t(S_t).
    bool force_indicator = false;
};

// Everything needed to build one fused policy per rollout. Immutable and
// shareable across threads.
struct FusionSetup {
    std::shared_ptr<const StationaryPolicy> base;
    std::shared_ptr<const StationaryPolicy> alternative;
    std::shared_ptr<const Critic> base_critic;
    std::shared_ptr<const Critic> alt_critic;
    std::shared_ptr<const Schedule> schedule;
    FusionConfig config;
};

ValueReference init_references(const Critic& base_critic, const Critic& alt_critic,
                               const State& s0, double nu);

Improvements improvements(const ValueReference& refs, const Critic& base_critic,
                          const Critic& alt_critic, const State& s);

// 1 iff delta_base / v_base_ref > delta_alt / v_alt_ref strictly and both
// |references| >= epsilon_norm.
int indicator(const Improvements& deltas, const ValueReference& refs, double epsilon_norm);

struct FusedAction {
    Action action;
    FusionStepRecord record;
};

// The fused non-stationary policy. Holds the value references and the time
// index of one rollout; single-threaded.
class FusedPolicy {
public:
    explicit FusedPolicy(FusionSetup setup);

    // Initializes references at S_0 and resets time to 0. With the superlevel
    // gate enabled, this also fixes the gate level to V_base(S_0).
    void reset(const State& s0);

    // One step of the switching rule at state s; t must equal time().
    FusedAction step(const State& s, std::size_t t, RolloutStreams& streams);

    std::size_t time() const noexcept { return time_; }
    const ValueReference& references() const noexcept { return refs_; }
    const Schedule& active_schedule() const;

private:
    FusionSetup setup_;
    std::shared_ptr<const Schedule> active_schedule_;
    ValueReference refs_;
    std::size_t time_ = 0;
    bool initialized_ = false;
};

struct FusedTrace {
    RolloutTrace rollout;
    std::vector<FusionStepRecord> records;
};

FusedTrace fused_rollout(const Mdp& env, const FusionSetup& setup, std::size_t horizon,
                         RolloutStreams& streams, const std::optional<State>& initial = std::nullopt);

// Columnar CSV: t,delta_base,delta_alt,indicator,accept_prob,u,source,base_ref,alt_ref
void write_trace_csv_header(std::ostream& os);
void write_trace_csv(std::ostream& os, const std::vector<FusionStepRecord>& records);
// One JSON object per line with the same fields in the same order.
void write_trace_jsonl(std::ostream& os, const std::vector<FusionStepRecord>& records);

// Shortest round-trip decimal representation used by every serializer.
std::string format_real(double v);

}  // namespace mcalf
