#include "mcalf/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "mcalf/app.hpp"
#include "mcalf/certificates.hpp"
#include "mcalf/config.hpp"
#include "mcalf/montecarlo.hpp"

namespace mcalf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Parameter view over one criterion document. Unknown keys are rejected so a
// misspelled override cannot silently fall back to the default.
class Params {
public:
    Params(const json& j, int id, std::initializer_list<const char*> allowed) : j_(j), id_(id) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const char* common : {"criterion", "name", "description"}) ok.insert(common);
        for (const auto& [k, v] : j_.items()) {
            if (!ok.count(k)) fail(k, "unknown parameter");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key) const { return j_.at(key); }

    template <typename T>
    T get(const char* key, T fallback) const {
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(key, std::string("wrong type: ") + e.what());
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& message) const {
        throw ConfigError("criterion " + std::to_string(id_), key, 0, message);
    }

private:
    const json& j_;
    int id_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// Loads the experiment for a criterion: inline "experiment", then
// "experiment_file", then the built-in default. Run-size overrides follow.
ExperimentConfig load_experiment(const Params& p, const AcceptanceContext& ctx, const json& fallback,
                                 std::size_t n_rollouts, std::size_t horizon) {
    ExperimentConfig cfg;
    if (p.has("experiment")) {
        cfg = parse_config(p.raw("experiment").dump(2), "criterion experiment", ctx.base_dir.string());
    } else if (p.has("experiment_file")) {
        fs::path file = p.get<std::string>("experiment_file", "");
        if (file.is_relative()) file = ctx.base_dir / file;
        cfg = load_config(file.string());
    } else {
        cfg = parse_config(fallback.dump(2), "built-in experiment", ctx.base_dir.string());
    }
    cfg.run.n_rollouts = p.get<std::size_t>("n_rollouts", n_rollouts);
    cfg.run.horizon = p.get<std::size_t>("horizon", horizon);
    if (p.has("seed")) cfg.run.seed = p.get<std::uint64_t>("seed", 0);
    cfg.run.workers = ctx.workers;
    if (cfg.run.n_rollouts < 1 || cfg.run.horizon < 1) p.fail("n_rollouts", "n_rollouts and horizon must be >= 1");
    return cfg;
}

BatchSpec spec_of(const ExperimentConfig& cfg) {
    BatchSpec spec;
    spec.n_rollouts = cfg.run.n_rollouts;
    spec.horizon = cfg.run.horizon;
    spec.seed = cfg.run.seed;
    spec.gamma = cfg.run.gamma;
    spec.workers = cfg.run.workers;
    spec.d_star = cfg.run.d_star;
    return spec;
}

ContractiveScalarEnv scalar_env(const Params& p) {
    ContractiveScalarEnv::Params e;
    e.w_max = p.get<double>("w_max", 0.1);
    e.goal_radius = p.get<double>("goal_radius", 0.2);
    e.a_max = p.get<double>("a_max", 1.0);
    e.initial_half_width = p.get<double>("initial_half_width", 10.0);
    try {
        return ContractiveScalarEnv(e);
    } catch (const std::exception& ex) {
        p.fail("w_max", ex.what());
    }
}

CertifiedPolicy scalar_certified(const Params& p, const ContractiveScalarEnv& env) {
    try {
        return make_scalar_certified_policy(p.get<double>("c", std::exp(-1.0)), env);
    } catch (const std::exception& ex) {
        p.fail("c", ex.what());
    }
}

SpatialBounds quantities_for(const Params& p, const ExperimentConfig& cfg) {
    if (!cfg.certificate) p.fail("experiment", "the alternative policy must carry a certificate");
    if (!cfg.run.d_circ || !cfg.run.d_star) p.fail("experiment", "run.d_circ and run.d_star are required");
    return compute_spatial_bounds(*cfg.env, *cfg.fusion.base_critic, *cfg.certificate,
                                      *cfg.run.d_circ, *cfg.run.d_star);
}

struct Mean {
    double mean = 0.0;
    double stderr_mean = 0.0;
};

Mean mean_return(const std::vector<RolloutSummary>& rollouts) {
    const double n = static_cast<double>(rollouts.size());
    Mean m;
    for (const auto& r : rollouts) m.mean += r.discounted_return;
    m.mean /= n;
    double ss = 0.0;
    for (const auto& r : rollouts) ss += (r.discounted_return - m.mean) * (r.discounted_return - m.mean);
    m.stderr_mean = rollouts.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return m;
}

// ---------------------------------------------------------------------------

CriterionResult corollary_dominance(const json& j, const AcceptanceContext&) {
    const Params p(j, 1, {"lambdas", "p_values", "t_max", "slack", "budget_seconds"});
    const auto lambdas =
        p.get<std::vector<double>>("lambdas", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99});
    const auto ps = p.get<std::vector<double>>("p_values", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    const auto t_max = p.get<std::size_t>("t_max", 50);
    const double slack = p.get<double>("slack", 1e-12);
    const double budget = p.get<double>("budget_seconds", 1.0);

    const auto start = Clock::now();
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (double lambda : lambdas) {
        for (double pr : ps) {
            const GeometricSchedule s(lambda, pr);
            for (std::size_t t = 1; t <= t_max; ++t) {
                if (std::pow(lambda, static_cast<double>(t)) * pr >= 1.0) continue;
                const double margin = corollary_lower_bound(lambda, pr, t) - tail_product(s, t);
                worst = std::max(worst, margin);
                ++checked;
                if (margin > slack) ++violations;
            }
        }
    }
    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = violations == 0 && checked > 0 && r.seconds <= budget;
    r.detail = std::to_string(checked) + " grid points, " + std::to_string(violations) +
               " violations, max(bound - product) = " + fmt(worst, 3) + ", budget " + fmt(budget) + " s";
    return r;
}

json diagnostic_experiment() {
    json e = default_scalar_experiment();
    e["schedule"] = json{{"kind", "geometric"}, {"lambda", 0.5}, {"p_relax", 0.5}, {"gate", "none"}};
    e["fusion"] = json{{"force_indicator", true}};
    return e;
}

CriterionResult claim_c3_distribution(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 2, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed", "t", "predicted",
                          "predicted_tolerance", "sigmas", "budget_seconds"});
    const auto start = Clock::now();
    const ExperimentConfig cfg = load_experiment(p, ctx, diagnostic_experiment(), 100000, 60);
    if (!cfg.fusion.config.force_indicator || cfg.fusion.config.superlevel_gate) {
        p.fail("experiment", "diagnostic mode requires fusion.force_indicator = true and no gate");
    }
    const auto t = p.get<std::size_t>("t", 1);
    const double sigmas = p.get<double>("sigmas", 3.0);
    const double tolerance = p.get<double>("predicted_tolerance", 1e-4);
    const double budget = p.get<double>("budget_seconds", 30.0);

    const double theory = tail_product(*cfg.fusion.schedule, t);
    const double predicted = p.get<double>("predicted", theory);
    const BatchResult batch = simulate_batch(*cfg.env, cfg.fusion, spec_of(cfg));
    std::size_t hits = 0;
    std::size_t mismatched = 0;
    for (const auto& r : batch.rollouts) {
        hits += r.majorant_settle_time <= t ? 1 : 0;
        mismatched += r.n_base != r.n_rho ? 1 : 0;
    }
    const double n = static_cast<double>(batch.rollouts.size());
    const double estimate = static_cast<double>(hits) / n;
    const double sigma = binomial_sigma(predicted, batch.rollouts.size());

    CriterionResult r;
    r.seconds = seconds_since(start);
    const bool within = std::abs(estimate - predicted) <= sigmas * sigma;
    const bool consistent = std::abs(predicted - theory) <= tolerance;
    r.pass = within && consistent && mismatched == 0 && r.seconds <= budget;
    r.detail = "P(T <= " + std::to_string(t) + ") estimate " + fmt(estimate) + " vs predicted " + fmt(predicted) +
               " (tail product " + fmt(theory) + "), |diff| " + fmt(std::abs(estimate - predicted), 3) + " <= " +
               fmt(sigmas) + " sigma = " + fmt(sigmas * sigma, 3) + (consistent ? "" : "; predicted value disagrees with the tail product") +
               (mismatched ? "; " + std::to_string(mismatched) + " rollouts with N_base != N_rho" : "");
    return r;
}

CriterionResult per_trace_domination(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 3, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed"});
    const auto start = Clock::now();
    const ExperimentConfig cfg = load_experiment(p, ctx, default_scalar_experiment(), 100000, 100);
    const BatchResult batch = simulate_batch(*cfg.env, cfg.fusion, spec_of(cfg));
    const SwitchReport sw = switch_statistics_from(batch, cfg.fusion, cfg.run.horizon, {});
    double mean_rho = 0.0;
    for (const auto& r : batch.rollouts) mean_rho += static_cast<double>(r.n_rho);
    mean_rho /= static_cast<double>(batch.rollouts.size());

    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = sw.domination_violations == 0 && sw.majorant_violations == 0 && sw.selection_inconsistencies == 0;
    r.detail = std::to_string(sw.n_rollouts) + " rollouts, " + std::to_string(sw.domination_violations) +
               " with N_base > N_rho, " + std::to_string(sw.majorant_violations) +
               " steps with rho > rho_bar; mean N_base " + fmt(sw.mean_base_selections, 4) + ", mean N_rho " +
               fmt(mean_rho, 4);
    return r;
}

CriterionResult certificate_validity(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 4, {"c", "w_max", "goal_radius", "a_max", "initial_half_width", "n_rollouts", "horizon",
                          "seed", "tolerance"});
    const auto start = Clock::now();
    const ContractiveScalarEnv env = scalar_env(p);
    const CertifiedPolicy certified = scalar_certified(p, env);
    BatchSpec spec;
    spec.n_rollouts = p.get<std::size_t>("n_rollouts", 10000);
    spec.horizon = p.get<std::size_t>("horizon", 100);
    spec.seed = p.get<std::uint64_t>("seed", 4);
    spec.workers = ctx.workers;
    const CertificateCheck check = verify_certificate(env, certified, spec, p.get<double>("tolerance", 1e-12));

    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = check.violations == 0;
    r.detail = std::to_string(check.n_rollouts) + " rollouts x " + std::to_string(check.horizon) + " steps, " +
               std::to_string(check.violations) + " violating rollouts, max excess over beta " +
               fmt(check.max_excess, 3);
    return r;
}

CriterionResult tau_f_soundness(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 5, {"c", "w_max", "goal_radius", "a_max", "initial_half_width", "d_max", "d_star",
                          "expected_tau_f", "n_rollouts", "seed"});
    const auto start = Clock::now();
    const ContractiveScalarEnv env = scalar_env(p);
    const CertifiedPolicy certified = scalar_certified(p, env);
    const double d_max = p.get<double>("d_max", 10.0);
    const double d_star = p.get<double>("d_star", 1.0);
    const auto expected = p.get<std::size_t>("expected_tau_f", 3);
    const std::size_t tau_f = compute_tau_f(certified.certificate, d_max, d_star);

    BatchSpec spec;
    spec.n_rollouts = p.get<std::size_t>("n_rollouts", 10000);
    spec.horizon = tau_f;
    spec.seed = p.get<std::uint64_t>("seed", 5);
    spec.workers = ctx.workers;
    spec.initial_goal_dist = d_max;
    const BatchResult batch = simulate_batch(env, PolicyUnderTest(certified.policy), spec);
    std::size_t violations = 0;
    double worst = 0.0;
    for (const auto& r : batch.rollouts) {
        violations += r.final_goal_dist > d_star ? 1 : 0;
        worst = std::max(worst, r.final_goal_dist);
    }

    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = tau_f == expected && violations == 0;
    r.detail = "tau_f = " + std::to_string(tau_f) + " (expected " + std::to_string(expected) + "), " +
               std::to_string(violations) + " of " + std::to_string(spec.n_rollouts) +
               " rollouts above d_star at tau_f, max goal_dist " + fmt(worst, 4);
    return r;
}

CriterionResult claim_c1_overshoot(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 6, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed", "expected_delta",
                          "delta_tolerance", "sigmas"});
    const auto start = Clock::now();
    const ExperimentConfig cfg = load_experiment(p, ctx, default_scalar_experiment(), 10000, 200);
    if (!cfg.fusion.config.superlevel_gate) p.fail("experiment", "the gated schedule is required");
    const SpatialBounds q = quantities_for(p, cfg);
    const double eps = cfg.certificate->eps;
    const double sigmas = p.get<double>("sigmas", 3.0);

    BatchSpec spec = spec_of(cfg);
    spec.initial_goal_dist = q.d_circ;
    const BatchResult batch = simulate_batch(*cfg.env, cfg.fusion, spec);
    const EstimationReport rep = overshoot_from(batch.rollouts, spec.horizon, q.delta, eps);
    const double floor = (1.0 - eps) - sigmas * binomial_sigma(1.0 - eps, rep.n_rollouts);

    bool delta_ok = true;
    std::string delta_note;
    if (p.has("expected_delta")) {
        const double expected = p.get<double>("expected_delta", 0.0);
        delta_ok = std::abs(q.delta - expected) <= p.get<double>("delta_tolerance", 1e-9);
        delta_note = " (expected " + fmt(expected) + ")";
    }

    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = delta_ok && rep.estimate >= floor;
    r.detail = "delta = " + fmt(q.delta, 10) + delta_note + ", d_max = " + fmt(q.d_max) + "; fraction within delta " +
               fmt(rep.estimate) + " (" + std::to_string(rep.n_rollouts - rep.successes) +
               " violations), required >= " + fmt(floor);
    return r;
}

CriterionResult claim_c2_reaching_time(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 7, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed", "t_grid", "sigmas"});
    const auto start = Clock::now();
    const ExperimentConfig cfg = load_experiment(p, ctx, default_scalar_experiment(), 10000, 200);
    const SpatialBounds q = quantities_for(p, cfg);
    const auto grid = p.get<std::vector<std::size_t>>("t_grid", {0, 1, 2, 5, 10});
    const double sigmas = p.get<double>("sigmas", 3.0);

    BatchSpec spec = spec_of(cfg);
    spec.initial_goal_dist = q.d_circ;
    spec.d_star = q.d_star;
    const BatchResult batch = simulate_batch(*cfg.env, cfg.fusion, spec);
    const ReachingTimeReport rt = reaching_time_from(batch.rollouts, spec.horizon, *cfg.fusion.schedule, q.tau_f, grid);

    bool ok = true;
    std::string rows;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& rep = rt.reports[i];
        const double need = *rep.predicted - sigmas * binomial_sigma(*rep.predicted, rep.n_rollouts);
        ok = ok && rep.estimate >= need;
        rows += (i ? ", " : "") + std::string("t=") + std::to_string(grid[i]) + ": " + fmt(rep.estimate, 4) +
                " >= " + fmt(*rep.predicted, 3);
    }
    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = ok;
    r.detail = "tau_f = " + std::to_string(q.tau_f) + ", unsettled " + std::to_string(rt.unsettled) + " (" +
               std::to_string(rt.truncated) + " truncated); " + rows;
    return r;
}

CriterionResult fused_benefit(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 8, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed", "sigmas"});
    const auto start = Clock::now();
    const ExperimentConfig cfg = load_experiment(p, ctx, default_chain_experiment(), 10000, 100);
    if (!cfg.certificate) p.fail("experiment", "the alternative policy must carry a certificate");
    const double sigmas = p.get<double>("sigmas", 3.0);
    const double d_threshold = cfg.run.d_threshold.value_or(0.0);
    const double eps = cfg.certificate->eps;

    const BatchSpec spec = spec_of(cfg);
    const BatchResult fused = simulate_batch(*cfg.env, cfg.fusion, spec);
    const BatchResult alt = simulate_batch(*cfg.env, PolicyUnderTest(cfg.fusion.alternative), spec);
    const BatchResult base = simulate_batch(*cfg.env, PolicyUnderTest(cfg.fusion.base), spec);
    const Mean f = mean_return(fused.rollouts);
    const Mean a = mean_return(alt.rollouts);
    const Mean b = mean_return(base.rollouts);
    const double diff_sigma = std::hypot(f.stderr_mean, a.stderr_mean);

    std::size_t hits = 0;
    for (const auto& r : fused.rollouts) hits += r.final_goal_dist <= d_threshold ? 1 : 0;
    const double n = static_cast<double>(fused.rollouts.size());
    const double reach = static_cast<double>(hits) / n;
    const double reach_floor = (1.0 - eps) - sigmas * binomial_sigma(1.0 - eps, fused.rollouts.size());

    const CertificateCheck check =
        verify_certificate(*cfg.env, CertifiedPolicy{cfg.fusion.alternative, *cfg.certificate}, spec);

    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = f.mean >= a.mean - sigmas * diff_sigma && reach >= reach_floor && check.violations == 0;
    r.detail = "mean return fused " + fmt(f.mean, 5) + ", alternative " + fmt(a.mean, 5) + ", base " + fmt(b.mean, 5) +
               " (3 sigma of difference " + fmt(sigmas * diff_sigma, 3) + "); goal reached " + fmt(reach) +
               " >= " + fmt(reach_floor) + "; alternative certificate violations " + std::to_string(check.violations);
    return r;
}

std::vector<fs::path> relative_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Empty string when identical (summary.json compared without generated_at).
std::string compare_outputs(const fs::path& a, const fs::path& b) {
    const auto files_a = relative_files(a);
    const auto files_b = relative_files(b);
    if (files_a != files_b) return "different file sets";
    for (const auto& rel : files_a) {
        std::string x = slurp(a / rel);
        std::string y = slurp(b / rel);
        if (rel == "summary.json") {
            json jx = json::parse(x);
            json jy = json::parse(y);
            jx.erase("generated_at");
            jy.erase("generated_at");
            x = jx.dump();
            y = jy.dump();
        }
        if (x != y) return rel.string() + " differs";
    }
    return "";
}

CriterionResult determinism(const json& j, const AcceptanceContext& ctx) {
    const Params p(j, 9, {"experiment", "experiment_file", "n_rollouts", "horizon", "seed", "traces", "workers"});
    const auto start = Clock::now();
    ExperimentConfig cfg = load_experiment(p, ctx, default_scalar_experiment(), 500, 100);
    cfg.output.traces = p.get<std::size_t>("traces", 3);
    const auto workers = p.get<std::vector<std::size_t>>("workers", {1, 1, 4});
    if (workers.size() < 2) p.fail("workers", "at least two runs are required");

    const fs::path root = ctx.scratch_dir.empty() ? fs::temp_directory_path() / "mcalf-determinism" : ctx.scratch_dir;
    std::vector<fs::path> dirs;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        if (workers[i] < 1) p.fail("workers", "worker counts must be >= 1");
        const fs::path dir = root / ("run_" + std::to_string(i));
        fs::remove_all(dir);
        cfg.run.workers = workers[i];
        execute_run(cfg, dir);
        dirs.push_back(dir);
    }
    std::string mismatch;
    for (std::size_t i = 1; i < dirs.size() && mismatch.empty(); ++i) {
        mismatch = compare_outputs(dirs[0], dirs[i]);
        if (!mismatch.empty()) mismatch = "run 0 vs run " + std::to_string(i) + ": " + mismatch;
    }
    const std::size_t files = relative_files(dirs[0]).size();
    CriterionResult r;
    r.seconds = seconds_since(start);
    r.pass = mismatch.empty() && files > 0;
    std::string list;
    for (std::size_t w : workers) list += (list.empty() ? "" : ",") + std::to_string(w);
    r.detail = std::to_string(workers.size()) + " runs (workers " + list + "), " + std::to_string(files) +
               " files each, " + (mismatch.empty() ? "byte-identical except generated_at" : mismatch);
    return r;
}

}  // namespace

std::string criterion_name(int id) {
    switch (id) {
        case 1: return "corollary_dominance";
        case 2: return "reaching_time_distribution";
        case 3: return "per_trace_domination";
        case 4: return "certificate_validity";
        case 5: return "tau_f_soundness";
        case 6: return "overshoot";
        case 7: return "reaching_time_bound";
        case 8: return "fused_policy_benefit";
        case 9: return "determinism";
        default: return "unknown";
    }
}

CriterionResult run_criterion(int id, const json& params, const AcceptanceContext& ctx) {
    if (!params.is_object()) throw ConfigError("criterion " + std::to_string(id), "<root>", 0, "expected an object");
    CriterionResult r;
    try {
        switch (id) {
            case 1: r = corollary_dominance(params, ctx); break;
            case 2: r = claim_c3_distribution(params, ctx); break;
            case 3: r = per_trace_domination(params, ctx); break;
            case 4: r = certificate_validity(params, ctx); break;
            case 5: r = tau_f_soundness(params, ctx); break;
            case 6: r = claim_c1_overshoot(params, ctx); break;
            case 7: r = claim_c2_reaching_time(params, ctx); break;
            case 8: r = fused_benefit(params, ctx); break;
            case 9: r = determinism(params, ctx); break;
            default:
                throw ConfigError("criterion " + std::to_string(id), "criterion", 0,
                                  "unknown criterion (expected 1.." + std::to_string(kCriterionCount) + ")");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("runtime error: ") + e.what();
    }
    r.id = id;
    r.name = criterion_name(id);
    return r;
}

std::string format_result_line(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << "  C" << r.id << "  " << std::left << std::setw(28) << r.name << r.detail
       << "  (" << std::fixed << std::setprecision(2) << r.seconds << " s)";
    return os.str();
}

json default_scalar_experiment() {
    return json::parse(R"({
  "env": {"kind": "scalar", "w_max": 0.1, "goal_radius": 0.2, "a_max": 1.0, "initial_half_width": 10.0},
  "policies": {
    "base": {"kind": "constant", "action": [0.5]},
    "alternative": {"kind": "scalar_certified", "c": 0.36787944117144233},
    "base_critic": {"kind": "gaussian_bump", "center": [0.5], "scale": 2.0},
    "alt_critic": {"kind": "gaussian_bump", "center": [0.0], "scale": 2.0}
  },
  "schedule": {"kind": "gated", "lambda": 0.99, "p_relax": 0.8, "gate": "superlevel"},
  "fusion": {"nu": 0.001, "epsilon_norm": 1e-8},
  "run": {"horizon": 200, "n_rollouts": 10000, "seed": 7, "d_circ": 10.0, "d_star": 1.0, "gamma": 0.99}
})");
}

json default_chain_experiment() {
    // Twelve states, goal {0} absorbing with reward 1. "left" moves one step
    // surely; "jump" moves two left w.p. 0.8 and one right w.p. 0.2. The base
    // critic is evaluated at a shorter discount than the alternative critic.
    constexpr std::size_t n = 12;
    constexpr double slip = 0.2;
    json transitions = json::array();
    json rewards = json::array();
    json initial = json::array();
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> left(n, 0.0);
        std::vector<double> jump(n, 0.0);
        if (s == 0) {
            left[0] = jump[0] = 1.0;
        } else {
            left[s - 1] = 1.0;
            jump[s >= 2 ? s - 2 : 0] += 1.0 - slip;
            jump[std::min(s + 1, n - 1)] += slip;
        }
        transitions.push_back(json::array({left, jump}));
        rewards.push_back(s == 0 ? json::array({1.0, 1.0}) : json::array({0.0, 0.0}));
        initial.push_back(s >= 6 ? 1.0 / 6.0 : 0.0);
    }
    json e;
    e["env"] = json{{"kind", "chain"}, {"n_states", n}, {"n_actions", 2}, {"transitions", transitions},
                    {"rewards", rewards}, {"goal", {0}}, {"initial", initial}};
    e["policies"] = json{
        {"base", {{"kind", "tabular"}, {"actions", {0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}}}},
        {"alternative",
         {{"kind", "tabular"},
          {"actions", std::vector<int>(n, 0)},
          {"certificate",
           {{"kappa", {{"kind", "linear"}, {"scale", 1.0}}},
            {"xi", {{"kind", "power"}, {"exponent", 1.0 / 11.0}}},
            {"eps", 0.0}}}}},
        {"base_critic", {{"kind", "tabular"}, {"policy", "base"}, {"gamma", 0.8}}},
        {"alt_critic", {{"kind", "tabular"}, {"policy", "alternative"}, {"gamma", 0.9}}}};
    e["schedule"] = json{{"kind", "geometric"}, {"lambda", 0.9}, {"p_relax", 0.8}, {"gate", "none"}};
    e["run"] = json{{"horizon", 100}, {"n_rollouts", 10000}, {"seed", 8}, {"gamma", 0.9}, {"d_threshold", 0.5}};
    return e;
}

int cmd_acceptance(const std::string& config_dir, const Overrides& overrides, std::ostream& out,
                   std::ostream& err) {
    const fs::path dir = config_dir;
    if (!fs::is_directory(dir)) {
        err << "configuration error: acceptance directory '" << config_dir << "' does not exist\n";
        return kExitConfig;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        err << "configuration error: no criterion files (*.json) in '" << config_dir << "'\n";
        return kExitConfig;
    }

    // Parse everything up front so a malformed file fails before any run.
    std::vector<std::pair<fs::path, json>> docs;
    for (const auto& f : files) {
        try {
            std::ifstream in(f);
            json doc = json::parse(in);
            if (!doc.is_object() || !doc.contains("criterion") || !doc.at("criterion").is_number_integer()) {
                err << "configuration error: " << f.string() << ": missing integer key 'criterion'\n";
                return kExitConfig;
            }
            docs.emplace_back(f, std::move(doc));
        } catch (const json::exception& e) {
            err << "configuration error: " << f.string() << ": " << e.what() << '\n';
            return kExitConfig;
        }
    }

    AcceptanceContext ctx;
    ctx.workers = overrides.workers.value_or(1);
    ctx.base_dir = dir;
    ctx.scratch_dir = overrides.output ? fs::path(*overrides.output) / "determinism"
                                       : fs::temp_directory_path() / "mcalf-acceptance";
    bool all = true;
    for (const auto& [file, doc] : docs) {
        try {
            json params = doc;
            if (overrides.seed && !params.contains("seed") && doc.at("criterion").get<int>() != 1) {
                params["seed"] = *overrides.seed;
            }
            const CriterionResult r = run_criterion(doc.at("criterion").get<int>(), params, ctx);
            out << format_result_line(r) << "  [" << file.filename().string() << "]\n" << std::flush;
            all = all && r.pass;
        } catch (const ConfigError& e) {
            err << "configuration error: " << file.string() << ": " << e.what() << '\n';
            return kExitConfig;
        }
    }
    out << (all ? "all criteria passed" : "some criteria failed") << '\n';
    return all ? kExitOk : kExitFailure;
}

}  // namespace mcalf
