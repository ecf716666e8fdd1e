#include "mcalf/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace mcalf {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure (by
// rollout index) is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    std::mutex mu;
    std::optional<std::size_t> failed_index;
    std::exception_ptr failure;
    auto run_range = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < n; i += stride) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failed_index || i < *failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
                return;
            }
        }
    };
    if (workers == 1) {
        run_range(0, 1);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
    }
    if (failure) std::rethrow_exception(failure);
}

State initial_state(const Mdp& env, const BatchSpec& spec, RolloutStreams& streams) {
    return spec.initial_goal_dist ? env.sample_initial_within(*spec.initial_goal_dist, streams.initial)
                                  : env.sample_initial(streams.initial);
}

}  // namespace

// ---------------------------------------------------------------------------

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // The endpoints are clamped onto the estimate so that ci_low <= p <= ci_high
    // holds exactly at p = 0 and p = 1.
    return {std::min(p, std::max(0.0, center - half)), std::max(p, std::min(1.0, center + half))};
}

double binomial_sigma(double p, std::size_t n) {
    if (n == 0) return 0.0;
    p = std::clamp(p, 0.0, 1.0);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

EstimationReport make_report(std::string claim, std::size_t successes, std::size_t trials,
                             std::size_t horizon, std::optional<double> predicted, ClaimKind kind,
                             double slack) {
    EstimationReport r;
    r.claim = std::move(claim);
    r.n_rollouts = trials;
    r.horizon = horizon;
    r.successes = successes;
    r.estimate = trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
    const Interval ci = wilson_interval(successes, trials);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
    r.predicted = predicted;
    r.kind = kind;
    r.slack = slack;
    if (!predicted || trials == 0) {
        r.verdict = Verdict::Inconclusive;
        r.explanation = trials == 0 ? "no rollouts" : "no prediction";
        return r;
    }
    const bool ok = kind == ClaimKind::Equality
                        ? (*predicted >= r.ci_low - slack && *predicted <= r.ci_high + slack)
                        : (*predicted <= r.ci_high + slack);
    r.verdict = ok ? Verdict::Pass : Verdict::Fail;
    return r;
}

nlohmann::json to_json(const EstimationReport& r) {
    nlohmann::json j;
    j["claim"] = r.claim;
    j["n_rollouts"] = r.n_rollouts;
    j["horizon"] = r.horizon;
    j["successes"] = r.successes;
    j["estimate"] = r.estimate;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["predicted"] = r.predicted ? nlohmann::json(*r.predicted) : nlohmann::json(nullptr);
    j["kind"] = r.kind == ClaimKind::Equality ? "equality" : "lower_bound";
    j["slack"] = r.slack;
    j["verdict"] = to_string(r.verdict);
    j["explanation"] = r.explanation;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    return j;
}

// ---------------------------------------------------------------------------

RolloutSummary summarize(std::size_t index, const RolloutTrace& trace,
                         const std::vector<FusionStepRecord>& records, double gamma,
                         std::optional<double> d_star) {
    RolloutSummary s;
    s.index = index;
    s.s0 = trace.states.front();
    s.s0_goal_dist = trace.goal_dists.front();
    s.final_goal_dist = trace.goal_dists.back();
    s.max_goal_dist = *std::max_element(trace.goal_dists.begin(), trace.goal_dists.end());
    s.discounted_return = discounted_return(trace, gamma);
    for (const auto& r : records) {
        if (r.indicator) ++s.n_indicator_on;
        if (r.accept_prob > r.majorant) ++s.majorant_violations;
        if (r.uniform_draw < r.majorant) {
            ++s.n_rho;
            s.majorant_settle_time = r.time + 1;
        }
        if (r.source == PolicySource::Base) {
            ++s.n_base;
            s.last_base_time = r.time;
            s.base_times.push_back(r.time);
        }
    }
    if (d_star) {
        const std::size_t n = trace.goal_dists.size();
        std::size_t first = n;
        while (first > 0 && trace.goal_dists[first - 1] <= *d_star) --first;
        if (first < n) s.reaching_time = first;
    }
    return s;
}

BatchResult simulate_batch(const Mdp& env, const PolicyUnderTest& policy, const BatchSpec& spec) {
    if (spec.n_rollouts == 0) throw ContractError("simulate_batch: n_rollouts must be >= 1");
    if (spec.horizon == 0) throw ContractError("simulate_batch: horizon must be >= 1");
    BatchResult out;
    out.rollouts.resize(spec.n_rollouts);
    out.traces.resize(std::min(spec.keep_traces, spec.n_rollouts));

    parallel_for(spec.n_rollouts, spec.workers, [&](std::size_t i) {
        RolloutStreams streams = RolloutStreams::derive(spec.seed, i);
        try {
            const State s0 = initial_state(env, spec, streams);
            FusedTrace trace;
            if (const auto* stationary = std::get_if<std::shared_ptr<const StationaryPolicy>>(&policy)) {
                trace.rollout = rollout(env, **stationary, spec.horizon, streams, s0);
            } else {
                trace = fused_rollout(env, std::get<FusionSetup>(policy), spec.horizon, streams, s0);
            }
            out.rollouts[i] = summarize(i, trace.rollout, trace.records, spec.gamma, spec.d_star);
            if (i < out.traces.size()) out.traces[i] = std::move(trace);
        } catch (const RolloutError& e) {
            throw BatchError(i, e.step(), e.what());
        } catch (const BatchError&) {
            throw;
        } catch (const std::exception& e) {
            throw BatchError(i, 0, e.what());
        }
    });
    return out;
}

// ---------------------------------------------------------------------------

EstimationReport goal_reaching_from(const std::vector<RolloutSummary>& rollouts,
                                    std::size_t horizon, double eps, double d_threshold) {
    std::size_t hits = 0;
    for (const auto& r : rollouts) hits += r.final_goal_dist <= d_threshold ? 1 : 0;
    auto report = make_report("goal_reaching", hits, rollouts.size(), horizon, 1.0 - eps,
                              ClaimKind::LowerBound);
    report.explanation = "fraction with goal_dist(S_horizon) <= " + format_real(d_threshold) +
                         " versus 1 - eps";
    return report;
}

EstimationReport estimate_goal_reaching(const Mdp& env, const PolicyUnderTest& policy,
                                        const KLCertificate* certificate, double d_max,
                                        double d_threshold, const BatchSpec& spec) {
    if (certificate) {
        const double envelope = beta(*certificate, d_max, static_cast<double>(spec.horizon));
        if (!(envelope < d_threshold)) {
            EstimationReport r = make_report("goal_reaching", 0, 0, spec.horizon, std::nullopt,
                                             ClaimKind::LowerBound);
            r.n_rollouts = spec.n_rollouts;
            r.seed = spec.seed;
            r.explanation = "horizon too short: beta(d_max, horizon) = " + format_real(envelope) +
                            " is not below d_threshold = " + format_real(d_threshold);
            return r;
        }
    }
    const double eps = certificate ? certificate->eps : 0.0;
    const BatchResult batch = simulate_batch(env, policy, spec);
    auto report = goal_reaching_from(batch.rollouts, spec.horizon, eps, d_threshold);
    report.seed = spec.seed;
    return report;
}

// ---------------------------------------------------------------------------

SwitchReport switch_statistics_from(const BatchResult& batch, const FusionSetup& setup,
                                    std::size_t horizon, const std::vector<std::size_t>& t_grid) {
    SwitchReport out;
    out.n_rollouts = batch.rollouts.size();
    out.horizon = horizon;
    out.t_grid = t_grid;
    std::size_t indicator_steps = 0;
    std::size_t base_total = 0;
    for (const auto& r : batch.rollouts) {
        out.n_base.push_back(r.n_base);
        out.last_base_time.push_back(r.last_base_time);
        indicator_steps += r.n_indicator_on;
        base_total += r.n_base;
        if (r.n_base > r.n_rho) ++out.domination_violations;
        if (r.n_base > r.n_indicator_on) ++out.selection_inconsistencies;
        out.majorant_violations += r.majorant_violations;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, out.n_rollouts));
    out.indicator_on_fraction =
        static_cast<double>(indicator_steps) / (n * static_cast<double>(horizon));
    out.mean_base_selections = static_cast<double>(base_total) / n;

    const bool diagnostic = setup.config.force_indicator && !setup.config.superlevel_gate;
    for (std::size_t t : t_grid) {
        std::size_t clean = 0;
        std::size_t after = 0;
        for (const auto& r : batch.rollouts) {
            if (!r.last_base_time || *r.last_base_time < t) ++clean;
            after += static_cast<std::size_t>(
                std::count_if(r.base_times.begin(), r.base_times.end(),
                              [t](std::size_t k) { return k >= t; }));
        }
        const double predicted = tail_product(*setup.schedule, t);
        auto report = make_report("no_base_selection_after_" + std::to_string(t), clean,
                                  out.n_rollouts, horizon, predicted,
                                  diagnostic ? ClaimKind::Equality : ClaimKind::LowerBound);
        report.explanation = diagnostic
                                 ? "diagnostic mode: P(no acceptance at k >= t) equals the tail product"
                                 : "P(no base selection at k >= t) dominates the tail product";
        out.no_base_after.push_back(std::move(report));

        double mass = 0.0;
        for (std::size_t k = t; k < horizon; ++k) mass += setup.schedule->majorant(k);
        out.mean_base_after.push_back(static_cast<double>(after) / n);
        out.majorant_mass_after.push_back(mass);
    }
    return out;
}

SwitchReport estimate_switch_statistics(const Mdp& env, const FusionSetup& setup,
                                        const BatchSpec& spec, const std::vector<std::size_t>& t_grid) {
    const BatchResult batch = simulate_batch(env, setup, spec);
    SwitchReport out = switch_statistics_from(batch, setup, spec.horizon, t_grid);
    for (auto& r : out.no_base_after) r.seed = spec.seed;
    return out;
}

// ---------------------------------------------------------------------------

EstimationReport overshoot_from(const std::vector<RolloutSummary>& rollouts, std::size_t horizon,
                                double delta, double eps) {
    constexpr double kTolerance = 1e-12;
    std::size_t within = 0;
    for (const auto& r : rollouts) within += r.max_goal_dist <= delta + kTolerance ? 1 : 0;
    auto report = make_report("overshoot", within, rollouts.size(), horizon, 1.0 - eps,
                              ClaimKind::LowerBound);
    report.explanation = "fraction with max_t goal_dist(S_t) <= delta = " + format_real(delta);
    return report;
}

EstimationReport estimate_overshoot(const Mdp& env, const PolicyUnderTest& policy, double delta,
                                    double eps, double d_circ, BatchSpec spec) {
    spec.initial_goal_dist = d_circ;
    const BatchResult batch = simulate_batch(env, policy, spec);
    auto report = overshoot_from(batch.rollouts, spec.horizon, delta, eps);
    report.seed = spec.seed;
    return report;
}

// ---------------------------------------------------------------------------

ReachingTimeReport reaching_time_from(const std::vector<RolloutSummary>& rollouts,
                                      std::size_t horizon, const Schedule& majorant_schedule,
                                      std::size_t tau_f, const std::vector<std::size_t>& t_grid) {
    ReachingTimeReport out;
    out.tau_f = tau_f;
    out.t_grid = t_grid;
    for (const auto& r : rollouts) {
        if (r.reaching_time) continue;
        ++out.unsettled;
        const std::size_t last_switch = r.last_base_time ? *r.last_base_time + 1 : 0;
        if (last_switch + tau_f > horizon) ++out.truncated;
    }
    for (std::size_t t : t_grid) {
        // After the last majorant acceptance the alternative needs at most tau_f
        // steps, so T_hat <= t + tau_f on {no acceptance at k >= t}.
        const std::size_t bound = std::max(t * tau_f, t + tau_f);
        std::size_t hits = 0;
        for (const auto& r : rollouts) hits += (r.reaching_time && *r.reaching_time <= bound) ? 1 : 0;
        auto report = make_report("reaching_time_le_" + std::to_string(t) + "_tau_f", hits,
                                  rollouts.size(), horizon, tail_product(majorant_schedule, t),
                                  ClaimKind::LowerBound);
        report.explanation = "P(T_hat <= max(t tau_f, t + tau_f) = " + std::to_string(bound) +
                             ") versus prod_{k>=t}(1 - rho_bar_k); unsettled rollouts count as failures";
        out.reports.push_back(std::move(report));
    }
    return out;
}

ReachingTimeReport estimate_reaching_time(const Mdp& env, const PolicyUnderTest& policy,
                                          const Schedule& majorant_schedule, std::size_t tau_f,
                                          double d_circ, double d_star, BatchSpec spec,
                                          const std::vector<std::size_t>& t_grid) {
    spec.initial_goal_dist = d_circ;
    spec.d_star = d_star;
    const BatchResult batch = simulate_batch(env, policy, spec);
    auto out = reaching_time_from(batch.rollouts, spec.horizon, majorant_schedule, tau_f, t_grid);
    for (auto& r : out.reports) r.seed = spec.seed;
    return out;
}

// ---------------------------------------------------------------------------

CertificateCheck verify_certificate(const Mdp& env, const CertifiedPolicy& certified,
                                    const BatchSpec& spec, double tolerance) {
    if (spec.n_rollouts == 0 || spec.horizon == 0) {
        throw ContractError("verify_certificate: n_rollouts and horizon must be >= 1");
    }
    struct PerRollout {
        std::size_t violating_steps = 0;
        double max_excess = -std::numeric_limits<double>::infinity();
    };
    std::vector<PerRollout> results(spec.n_rollouts);
    parallel_for(spec.n_rollouts, spec.workers, [&](std::size_t i) {
        RolloutStreams streams = RolloutStreams::derive(spec.seed, i);
        const State s0 = initial_state(env, spec, streams);
        const RolloutTrace trace = rollout(env, *certified.policy, spec.horizon, streams, s0);
        const double d0 = trace.goal_dists.front();
        auto& res = results[i];
        for (std::size_t t = 0; t < trace.goal_dists.size(); ++t) {
            const double excess =
                trace.goal_dists[t] - beta(certified.certificate, d0, static_cast<double>(t));
            res.max_excess = std::max(res.max_excess, excess);
            if (excess > tolerance) ++res.violating_steps;
        }
    });
    CertificateCheck out;
    out.n_rollouts = spec.n_rollouts;
    out.horizon = spec.horizon;
    for (const auto& r : results) {
        out.violations += r.violating_steps > 0 ? 1 : 0;
        out.violating_steps += r.violating_steps;
        out.max_excess = std::max(out.max_excess, r.max_excess);
    }
    out.report = make_report("certificate_validity", spec.n_rollouts - out.violations,
                             spec.n_rollouts, spec.horizon, 1.0 - certified.certificate.eps,
                             ClaimKind::LowerBound);
    out.report.seed = spec.seed;
    out.report.explanation = "fraction of rollouts with goal_dist(S_t) <= beta(goal_dist(S_0), t) + " +
                             format_real(tolerance) + " for all t";
    return out;
}

}  // namespace mcalf
