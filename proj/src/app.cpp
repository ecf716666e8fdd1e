#include "mcalf/app.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include "mcalf/certificates.hpp"
#include "mcalf/montecarlo.hpp"

namespace mcalf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct ReturnStats {
    double mean = 0.0;
    double stddev = 0.0;
    double stderr_mean = 0.0;
};

ReturnStats return_stats(const std::vector<RolloutSummary>& rollouts) {
    ReturnStats out;
    const double n = static_cast<double>(rollouts.size());
    for (const auto& r : rollouts) out.mean += r.discounted_return;
    out.mean /= n;
    double ss = 0.0;
    for (const auto& r : rollouts) ss += (r.discounted_return - out.mean) * (r.discounted_return - out.mean);
    out.stddev = rollouts.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out.stderr_mean = out.stddev / std::sqrt(n);
    return out;
}

json returns_json(const std::vector<RolloutSummary>& rollouts, double d_threshold) {
    const ReturnStats s = return_stats(rollouts);
    std::size_t hits = 0;
    for (const auto& r : rollouts) hits += r.final_goal_dist <= d_threshold ? 1 : 0;
    return json{{"mean", s.mean},
                {"stddev", s.stddev},
                {"stderr", s.stderr_mean},
                {"goal_fraction", static_cast<double>(hits) / static_cast<double>(rollouts.size())}};
}

json tagged(const EstimationReport& report, const ExperimentConfig& cfg) {
    json j = to_json(report);
    j["seed"] = cfg.run.seed;
    j["config_hash"] = cfg.hash;
    return j;
}

std::string join_state(const State& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ";" : "") + format_real(s[i]);
    return out;
}

void write_rollouts_csv(const fs::path& path, const std::vector<RolloutSummary>& rollouts) {
    std::ofstream os(path);
    os << "index,s0,s0_goal_dist,final_goal_dist,max_goal_dist,discounted_return,n_base,n_rho,"
          "n_indicator_on,last_base_time,majorant_settle_time,reaching_time\n";
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& r : rollouts) {
        os << r.index << ',' << join_state(r.s0) << ',' << format_real(r.s0_goal_dist) << ','
           << format_real(r.final_goal_dist) << ',' << format_real(r.max_goal_dist) << ','
           << format_real(r.discounted_return) << ',' << r.n_base << ',' << r.n_rho << ','
           << r.n_indicator_on << ',' << opt(r.last_base_time) << ',' << r.majorant_settle_time << ','
           << opt(r.reaching_time) << '\n';
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

BatchSpec base_spec(const ExperimentConfig& cfg) {
    BatchSpec spec;
    spec.n_rollouts = cfg.run.n_rollouts;
    spec.horizon = cfg.run.horizon;
    spec.seed = cfg.run.seed;
    spec.gamma = cfg.run.gamma;
    spec.workers = cfg.run.workers;
    spec.d_star = cfg.run.d_star;
    return spec;
}

json quantities_json(const SpatialBounds& q) {
    return json{{"d_circ", q.d_circ},   {"d_star", q.d_star},           {"v_min", q.v_min},
                {"v_min_error", q.v_min_error}, {"d_pbar", q.d_pbar}, {"d_pbar_error", q.d_pbar_error},
                {"d_max", q.d_max},     {"delta", q.delta},             {"tau_f", q.tau_f}};
}

std::optional<SpatialBounds> spatial_bounds(const ExperimentConfig& cfg) {
    if (!cfg.certificate || !cfg.run.d_circ || !cfg.run.d_star) return std::nullopt;
    return compute_spatial_bounds(*cfg.env, *cfg.fusion.base_critic, *cfg.certificate,
                                      *cfg.run.d_circ, *cfg.run.d_star);
}

std::string unavailable_reason(const ExperimentConfig& cfg) {
    if (!cfg.certificate) return "the alternative policy carries no certificate";
    return "run.d_circ and run.d_star are required";
}

template <typename Fn>
int guarded_command(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const BatchError& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides) {
    if (overrides.seed) cfg.run.seed = *overrides.seed;
    if (overrides.output) cfg.output.directory = *overrides.output;
    if (overrides.workers) {
        if (*overrides.workers < 1) throw ConfigError("--workers", "workers", 0, "must be >= 1");
        cfg.run.workers = *overrides.workers;
    }
}

json execute_run(const ExperimentConfig& cfg, const std::optional<fs::path>& output_dir) {
    const BatchSpec spec = [&] {
        BatchSpec s = base_spec(cfg);
        s.keep_traces = output_dir ? cfg.output.traces : 0;
        return s;
    }();
    const double d_threshold = cfg.run.d_threshold.value_or(cfg.run.d_star.value_or(0.0));
    const double eps = cfg.certificate ? cfg.certificate->eps : 0.0;

    json summary;
    summary["schema_version"] = kReportSchemaVersion;
    summary["config_hash"] = cfg.hash;
    summary["master_seed"] = cfg.run.seed;
    summary["generated_at"] = utc_timestamp();
    summary["setup"] = json{{"env", cfg.env->kind()},
                            {"schedule", cfg.fusion.schedule->describe()},
                            {"superlevel_gate", cfg.fusion.config.superlevel_gate},
                            {"force_indicator", cfg.fusion.config.force_indicator},
                            {"base", cfg.fusion.base->name()},
                            {"alternative", cfg.fusion.alternative->name()},
                            {"base_critic", cfg.fusion.base_critic->name()},
                            {"alt_critic", cfg.fusion.alt_critic->name()},
                            {"horizon", cfg.run.horizon},
                            {"n_rollouts", cfg.run.n_rollouts},
                            {"gamma", cfg.run.gamma},
                            {"d_threshold", d_threshold}};

    const std::optional<SpatialBounds> q = spatial_bounds(cfg);
    summary["spatial_bounds"] = q ? quantities_json(*q) : json{{"unavailable", unavailable_reason(cfg)}};

    const BatchResult main = simulate_batch(*cfg.env, cfg.fusion, spec);

    EstimationReport reaching = goal_reaching_from(main.rollouts, spec.horizon, eps, d_threshold);
    if (cfg.certificate && q) {
        const double envelope = beta(*cfg.certificate, q->d_max, static_cast<double>(spec.horizon));
        if (!(envelope < d_threshold)) {
            reaching.verdict = Verdict::Inconclusive;
            reaching.explanation += "; precondition failed: beta(d_max, horizon) = " + format_real(envelope) +
                                    " is not below d_threshold";
        }
    } else {
        reaching.explanation += "; precondition beta(d_max, horizon) < d_threshold not checked";
    }
    summary["goal_reaching"] = tagged(reaching, cfg);

    BatchSpec baseline_spec = spec;
    baseline_spec.keep_traces = 0;
    const BatchResult alt_batch =
        simulate_batch(*cfg.env, PolicyUnderTest(cfg.fusion.alternative), baseline_spec);
    const BatchResult base_batch = simulate_batch(*cfg.env, PolicyUnderTest(cfg.fusion.base), baseline_spec);
    {
        json returns;
        returns["fused"] = returns_json(main.rollouts, d_threshold);
        returns["alternative"] = returns_json(alt_batch.rollouts, d_threshold);
        returns["base"] = returns_json(base_batch.rollouts, d_threshold);
        const ReturnStats f = return_stats(main.rollouts);
        const ReturnStats a = return_stats(alt_batch.rollouts);
        returns["fused_minus_alternative"] = f.mean - a.mean;
        returns["difference_sigma"] = std::hypot(f.stderr_mean, a.stderr_mean);
        summary["returns"] = returns;
    }

    {
        const SwitchReport sw = switch_statistics_from(main, cfg.fusion, spec.horizon, cfg.run.switch_grid);
        json j;
        j["indicator_on_fraction"] = sw.indicator_on_fraction;
        j["mean_base_selections"] = sw.mean_base_selections;
        j["domination_violations"] = sw.domination_violations;
        j["majorant_violations"] = sw.majorant_violations;
        j["selection_inconsistencies"] = sw.selection_inconsistencies;
        j["no_base_after"] = json::array();
        for (std::size_t i = 0; i < sw.t_grid.size(); ++i) {
            json r = tagged(sw.no_base_after[i], cfg);
            r["t"] = sw.t_grid[i];
            r["mean_base_after"] = sw.mean_base_after[i];
            r["majorant_mass_after"] = sw.majorant_mass_after[i];
            j["no_base_after"].push_back(r);
        }
        summary["switching"] = j;
    }

    if (q) {
        BatchSpec local = spec;
        local.keep_traces = 0;
        local.initial_goal_dist = q->d_circ;
        local.d_star = q->d_star;
        const BatchResult near = simulate_batch(*cfg.env, cfg.fusion, local);
        summary["overshoot"] = tagged(overshoot_from(near.rollouts, spec.horizon, q->delta, eps), cfg);
        const ReachingTimeReport rt =
            reaching_time_from(near.rollouts, spec.horizon, *cfg.fusion.schedule, q->tau_f, cfg.run.reaching_grid);
        json j;
        j["tau_f"] = rt.tau_f;
        j["unsettled"] = rt.unsettled;
        j["truncated"] = rt.truncated;
        j["reports"] = json::array();
        for (std::size_t i = 0; i < rt.t_grid.size(); ++i) {
            json r = tagged(rt.reports[i], cfg);
            r["t"] = rt.t_grid[i];
            r["time_bound"] = std::max(rt.t_grid[i] * rt.tau_f, rt.t_grid[i] + rt.tau_f);
            r["sigma"] = binomial_sigma(*rt.reports[i].predicted, rt.reports[i].n_rollouts);
            j["reports"].push_back(r);
        }
        summary["reaching_time"] = j;
    } else {
        summary["overshoot"] = json{{"unavailable", unavailable_reason(cfg)}};
        summary["reaching_time"] = json{{"unavailable", unavailable_reason(cfg)}};
    }

    if (output_dir) {
        fs::create_directories(*output_dir);
        write_json(*output_dir / "summary.json", summary);
        write_rollouts_csv(*output_dir / "rollouts.csv", main.rollouts);
        if (!main.traces.empty()) {
            const fs::path traces = *output_dir / "traces";
            fs::create_directories(traces);
            for (std::size_t i = 0; i < main.traces.size(); ++i) {
                char stem[32];
                std::snprintf(stem, sizeof(stem), "rollout_%04zu", i);
                if (cfg.output.csv) {
                    std::ofstream os(traces / (std::string(stem) + ".csv"));
                    write_trace_csv_header(os);
                    write_trace_csv(os, main.traces[i].records);
                }
                if (cfg.output.jsonl) {
                    std::ofstream os(traces / (std::string(stem) + ".jsonl"));
                    write_trace_jsonl(os, main.traces[i].records);
                }
            }
        }
        if (!cfg.tabular_critics.empty()) {
            json critics;
            critics["schema_version"] = kReportSchemaVersion;
            critics["config_hash"] = cfg.hash;
            critics["master_seed"] = cfg.run.seed;
            for (const auto& [role, critic] : cfg.tabular_critics) critics[role] = critic->values();
            write_json(*output_dir / "critics.json", critics);
        }
    }
    return summary;
}

json bounds_report(const ExperimentConfig& cfg) {
    constexpr double kDominanceSlack = 1e-12;
    const double lambda = *cfg.lambda;
    const double p = *cfg.p_relax;
    const GeometricSchedule schedule(lambda, p);

    json report;
    report["schema_version"] = kReportSchemaVersion;
    report["config_hash"] = cfg.hash;
    report["master_seed"] = cfg.run.seed;
    report["inputs"] = json{{"schedule", cfg.schedule_kind},
                            {"lambda", lambda},
                            {"p_relax", p},
                            {"d_circ", nullable(cfg.run.d_circ)},
                            {"d_star", nullable(cfg.run.d_star)}};

    const SummabilityResult sum = summability_check(schedule, 1e-12);
    report["summability"] = json{{"sum", sum.sum}, {"pass", sum.pass}, {"explanation", sum.explanation}};

    std::set<std::size_t> grid{0, 1, 2, 3, 4, 5, 10, 20, 50, 100};
    grid.insert(cfg.run.reaching_grid.begin(), cfg.run.reaching_grid.end());
    report["tail_products"] = json::array();
    for (std::size_t t : grid) {
        const TailProduct tp = tail_product_detailed(schedule, t);
        report["tail_products"].push_back(json{{"t", t},
                                               {"value", tp.value},
                                               {"log_value", tp.log_value},
                                               {"truncation_bound", tp.truncation_bound},
                                               {"terms", tp.terms}});
    }

    // Dense check over t = 1..100; the grid entries are listed.
    bool dominance = true;
    std::size_t checked = 0;
    report["corollary_bounds"] = json::array();
    for (std::size_t t = 1; t <= 100; ++t) {
        if (std::pow(lambda, static_cast<double>(t)) * p >= 1.0) continue;
        const double bound = corollary_lower_bound(lambda, p, t);
        const double product = tail_product(schedule, t);
        const bool ok = bound <= product + kDominanceSlack;
        dominance = dominance && ok;
        ++checked;
        if (grid.count(t)) {
            report["corollary_bounds"].push_back(
                json{{"t", t}, {"bound", bound}, {"tail_product", product}, {"pass", ok}});
        }
    }
    report["dominance"] = dominance ? "pass" : "fail";
    report["dominance_checked"] = checked;
    report["dominance_slack"] = kDominanceSlack;

    if (const auto q = spatial_bounds(cfg)) {
        report["v_min"] = q->v_min;
        report["v_min_error"] = q->v_min_error;
        report["d_pbar"] = q->d_pbar;
        report["d_pbar_error"] = q->d_pbar_error;
        report["d_max"] = q->d_max;
        report["delta"] = q->delta;
        report["tau_f"] = q->tau_f;
    } else {
        for (const char* key : {"v_min", "d_pbar", "d_max", "delta", "tau_f"}) report[key] = nullptr;
        report["spatial_unavailable"] = unavailable_reason(cfg);
    }
    return report;
}

int cmd_run(const std::string& config_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err) {
    return guarded_command(err, [&] {
        ExperimentConfig cfg = load_config(config_path);
        apply_overrides(cfg, overrides);
        const fs::path dir = cfg.output.directory;
        const json summary = execute_run(cfg, dir);
        const auto& gr = summary["goal_reaching"];
        out << "wrote " << (dir / "summary.json").string() << " (goal_reaching estimate "
            << gr["estimate"].dump() << ", verdict " << gr["verdict"].get<std::string>() << ")\n";
        return static_cast<int>(kExitOk);
    });
}

int cmd_verify_bounds(const std::string& config_path, const Overrides& overrides,
                      std::ostream& out, std::ostream& err) {
    return guarded_command(err, [&] {
        ExperimentConfig cfg = load_config(config_path);
        apply_overrides(cfg, overrides);
        const json report = bounds_report(cfg);
        out << report.dump(2) << '\n';
        if (overrides.output) {
            fs::create_directories(*overrides.output);
            write_json(fs::path(*overrides.output) / "bounds.json", report);
        }
        return report["dominance"] == "pass" ? static_cast<int>(kExitOk) : static_cast<int>(kExitFailure);
    });
}

}  // namespace mcalf
