#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mcalf/certificates.hpp"
#include "mcalf/fusion.hpp"
#include "mcalf/mdp.hpp"
#include "mcalf/policies.hpp"

namespace mcalf {

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Binomial statistics
// ---------------------------------------------------------------------------

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

// Wilson score interval for `successes` out of `trials` at normal quantile z.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

// Binomial standard error sqrt(p (1 - p) / n) evaluated at the predicted p.
double binomial_sigma(double p, std::size_t n);

enum class Verdict { Pass, Fail, Inconclusive };
const char* to_string(Verdict v);

enum class ClaimKind {
    LowerBound,  // theory: P >= predicted
    Equality,    // theory: P == predicted
};

struct EstimationReport {
    std::string claim;
    std::size_t n_rollouts = 0;
    std::size_t horizon = 0;
    std::size_t successes = 0;
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    std::optional<double> predicted;
    ClaimKind kind = ClaimKind::LowerBound;
    double slack = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    std::string explanation;
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Fills estimate and the Wilson interval, then the verdict: for equality
// claims pass iff predicted lies in [ci_low - slack, ci_high + slack]; for
// lower-bound claims pass iff predicted <= ci_high + slack.
EstimationReport make_report(std::string claim, std::size_t successes, std::size_t trials,
                             std::size_t horizon, std::optional<double> predicted, ClaimKind kind,
                             double slack = 0.0);

nlohmann::json to_json(const EstimationReport& report);

// ---------------------------------------------------------------------------
// Batched rollouts
// ---------------------------------------------------------------------------

using PolicyUnderTest = std::variant<std::shared_ptr<const StationaryPolicy>, FusionSetup>;

struct BatchSpec {
    std::size_t n_rollouts = 1000;
    std::size_t horizon = 100;
    std::uint64_t seed = 0;
    // When set, S_0 is drawn from {goal_dist <= initial_goal_dist}; otherwise
    // from the environment's p0.
    std::optional<double> initial_goal_dist;
    double gamma = 0.99;
    // Threshold d* for the empirical reaching time.
    std::optional<double> d_star;
    std::size_t workers = 1;
    // Number of leading rollouts whose full traces are kept.
    std::size_t keep_traces = 0;
};

// Per-rollout statistics. Deterministic function of (env, policy, spec, index).
struct RolloutSummary {
    std::size_t index = 0;
    State s0;
    double s0_goal_dist = 0.0;
    double final_goal_dist = 0.0;
    double max_goal_dist = 0.0;
    double discounted_return = 0.0;
    std::size_t n_base = 0;          // N_pi_b over the horizon
    std::size_t n_rho = 0;           // N_rho: replay of U_t < rho_bar_t
    std::size_t n_indicator_on = 0;
    std::size_t majorant_violations = 0;  // steps with accept_prob > rho_bar_t
    std::optional<std::size_t> last_base_time;
    // 1 + last k with U_k < rho_bar_k (0 if none): the time from which the
    // majorant-only rule never accepts again within the horizon.
    std::size_t majorant_settle_time = 0;
    std::vector<std::size_t> base_times;
    // First t with goal_dist(S_k) <= d* for all t <= k <= horizon.
    std::optional<std::size_t> reaching_time;
};

struct BatchResult {
    std::vector<RolloutSummary> rollouts;
    std::vector<FusedTrace> traces;  // leading rollouts, when requested
};

// Raised when a rollout fails; names the rollout and step.
class BatchError : public std::runtime_error {
public:
    BatchError(std::size_t rollout, std::size_t step, const std::string& what)
        : std::runtime_error("rollout " + std::to_string(rollout) + ", step " +
                             std::to_string(step) + ": " + what),
          rollout_(rollout),
          step_(step) {}
    std::size_t rollout() const noexcept { return rollout_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t rollout_;
    std::size_t step_;
};

// Runs spec.n_rollouts rollouts on up to spec.workers threads. Rollout i uses
// RolloutStreams::derive(spec.seed, i), so results do not depend on the
// worker count.
BatchResult simulate_batch(const Mdp& env, const PolicyUnderTest& policy, const BatchSpec& spec);

RolloutSummary summarize(std::size_t index, const RolloutTrace& trace,
                         const std::vector<FusionStepRecord>& records, double gamma,
                         std::optional<double> d_star);

// ---------------------------------------------------------------------------
// Claims
// ---------------------------------------------------------------------------

// Fraction of rollouts with goal_dist(S_horizon) <= d_threshold versus 1 - eps.
// With a certificate, the precondition beta(d_max, horizon) < d_threshold is
// checked first; failing it yields an inconclusive verdict.
EstimationReport estimate_goal_reaching(const Mdp& env, const PolicyUnderTest& policy,
                                        const KLCertificate* certificate, double d_max,
                                        double d_threshold, const BatchSpec& spec);
EstimationReport goal_reaching_from(const std::vector<RolloutSummary>& rollouts,
                                    std::size_t horizon, double eps, double d_threshold);

struct SwitchReport {
    std::size_t n_rollouts = 0;
    std::size_t horizon = 0;
    std::vector<std::size_t> n_base;  // per rollout
    std::vector<std::optional<std::size_t>> last_base_time;
    double indicator_on_fraction = 0.0;
    double mean_base_selections = 0.0;
    std::size_t domination_violations = 0;  // rollouts with N_pi_b > N_rho
    std::size_t majorant_violations = 0;    // steps with accept_prob > rho_bar
    std::size_t selection_inconsistencies = 0;
    // P(no base selection at any k >= t) versus prod_{k>=t}(1 - rho_bar_k).
    std::vector<std::size_t> t_grid;
    std::vector<EstimationReport> no_base_after;
    // Mean number of base selections at k >= t versus sum_{k=t}^{H-1} rho_bar_k.
    std::vector<double> mean_base_after;
    std::vector<double> majorant_mass_after;
};

// In diagnostic mode (force_indicator, ungated) the tail-product comparison is
// an equality; otherwise a one-sided lower bound.
SwitchReport estimate_switch_statistics(const Mdp& env, const FusionSetup& setup,
                                        const BatchSpec& spec, const std::vector<std::size_t>& t_grid);
SwitchReport switch_statistics_from(const BatchResult& batch, const FusionSetup& setup,
                                    std::size_t horizon, const std::vector<std::size_t>& t_grid);

// Fraction with max_t goal_dist(S_t) <= delta versus 1 - eps; the initial
// state is drawn with goal_dist(S_0) <= d_circ.
EstimationReport estimate_overshoot(const Mdp& env, const PolicyUnderTest& policy, double delta,
                                    double eps, double d_circ, BatchSpec spec);
EstimationReport overshoot_from(const std::vector<RolloutSummary>& rollouts, std::size_t horizon,
                                double delta, double eps);

struct ReachingTimeReport {
    std::size_t tau_f = 1;
    std::size_t unsettled = 0;  // goal_dist(S_H) > d*
    // Unsettled rollouts whose last base selection left fewer than tau_f steps
    // before the horizon; a finite-horizon artifact, not a certificate failure.
    std::size_t truncated = 0;
    std::vector<std::size_t> t_grid;
    // P(T_hat <= max(t tau_f, t + tau_f)) vs prod_{k>=t}(1 - rho_bar_k)
    std::vector<EstimationReport> reports;
};

ReachingTimeReport estimate_reaching_time(const Mdp& env, const PolicyUnderTest& policy,
                                          const Schedule& majorant_schedule, std::size_t tau_f,
                                          double d_circ, double d_star, BatchSpec spec,
                                          const std::vector<std::size_t>& t_grid);
ReachingTimeReport reaching_time_from(const std::vector<RolloutSummary>& rollouts,
                                      std::size_t horizon, const Schedule& majorant_schedule,
                                      std::size_t tau_f, const std::vector<std::size_t>& t_grid);

struct CertificateCheck {
    std::size_t n_rollouts = 0;
    std::size_t horizon = 0;
    std::size_t violations = 0;       // rollouts with any step above the envelope
    std::size_t violating_steps = 0;
    double max_excess = -std::numeric_limits<double>::infinity();
    EstimationReport report;
};

// Checks goal_dist(S_t) <= beta(goal_dist(S_0), t) + tolerance for every step
// of every rollout of the certified policy.
CertificateCheck verify_certificate(const Mdp& env, const CertifiedPolicy& certified,
                                    const BatchSpec& spec, double tolerance = 1e-12);

}  // namespace mcalf
