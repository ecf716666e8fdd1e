#include "mcalf/config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace mcalf {

namespace {

using nlohmann::json;

std::string join_path(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
    return out.empty() ? "<root>" : out;
}

// Finds the line of the last key in `path` by scanning for each quoted key in
// turn. Returns 0 when the key cannot be located.
int locate_line(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    std::size_t found = std::string::npos;
    for (const auto& key : path) {
        if (!key.empty() && key.front() == '[') continue;
        const std::size_t at = text.find("\"" + key + "\"", pos);
        if (at == std::string::npos) break;
        found = at;
        pos = at + key.size() + 2;
    }
    if (found == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(found), '\n'));
}

struct Context {
    std::string text;
    std::string origin;
    std::string base_dir;
};

class Node {
public:
    Node(const json& j, std::vector<std::string> path, const Context& ctx)
        : j_(&j), path_(std::move(path)), ctx_(&ctx) {}

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError(ctx_->origin, join_path(path_), locate_line(ctx_->text, path_), message);
    }
    [[noreturn]] void fail_at(const std::string& key, const std::string& message) const {
        auto p = path_;
        p.push_back(key);
        throw ConfigError(ctx_->origin, join_path(p), locate_line(ctx_->text, p), message);
    }

    bool has(const std::string& key) const { return j_->contains(key); }
    const json& raw() const { return *j_; }

    void allow_only(std::initializer_list<const char*> keys) const {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, v] : j_->items()) {
            if (!allowed.count(k)) fail_at(k, "unknown key");
        }
    }

    Node child(const std::string& key) const {
        if (!has(key)) fail_at(key, "missing required section");
        const json& c = j_->at(key);
        if (!c.is_object()) fail_at(key, "expected an object");
        auto p = path_;
        p.push_back(key);
        return Node(c, std::move(p), *ctx_);
    }

    std::optional<Node> optional_child(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return child(key);
    }

    double number(const std::string& key) const {
        if (!has(key)) fail_at(key, "missing required number");
        const json& v = j_->at(key);
        if (!v.is_number()) fail_at(key, "expected a number");
        return v.get<double>();
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    std::optional<double> optional_number(const std::string& key) const {
        if (!has(key) || j_->at(key).is_null()) return std::nullopt;
        return number(key);
    }

    std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_->at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            fail_at(key, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool bool_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = j_->at(key);
        if (!v.is_boolean()) fail_at(key, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) const {
        if (!has(key)) fail_at(key, "missing required string");
        const json& v = j_->at(key);
        if (!v.is_string()) fail_at(key, "expected a string");
        return v.get<std::string>();
    }
    std::string string_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) const {
        if (!has(key)) fail_at(key, "missing required array");
        const json& v = j_->at(key);
        if (!v.is_array()) fail_at(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail_at(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::size_t> indices(const std::string& key) const {
        if (!has(key)) fail_at(key, "missing required array");
        const json& v = j_->at(key);
        if (!v.is_array()) fail_at(key, "expected an array of non-negative integers");
        std::vector<std::size_t> out;
        for (const auto& e : v) {
            if (!e.is_number_integer() || e.get<long long>() < 0) {
                fail_at(key, "expected an array of non-negative integers");
            }
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    const Context& ctx() const { return *ctx_; }

private:
    const json* j_;
    std::vector<std::string> path_;
    const Context* ctx_;
};

template <typename Fn>
auto guarded(const Node& node, const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        node.fail_at(key, e.what());
    }
}

std::shared_ptr<const Mdp> build_env(const Node& env) {
    const std::string kind = env.string("kind");
    if (kind == "scalar") {
        env.allow_only({"kind", "w_max", "goal_radius", "a_max", "initial_half_width"});
        ContractiveScalarEnv::Params p;
        p.w_max = env.number_or("w_max", p.w_max);
        p.goal_radius = env.number_or("goal_radius", p.goal_radius);
        p.a_max = env.number_or("a_max", p.a_max);
        p.initial_half_width = env.number_or("initial_half_width", p.initial_half_width);
        return guarded(env, "kind", [&] { return std::make_shared<const ContractiveScalarEnv>(p); });
    }
    if (kind == "double_integrator") {
        env.allow_only({"kind", "dt", "w_max", "a_max", "goal_radius", "initial_half_width"});
        NoisyDoubleIntegratorEnv::Params p;
        p.dt = env.number_or("dt", p.dt);
        p.w_max = env.number_or("w_max", p.w_max);
        p.a_max = env.number_or("a_max", p.a_max);
        p.goal_radius = env.number_or("goal_radius", p.goal_radius);
        p.initial_half_width = env.number_or("initial_half_width", p.initial_half_width);
        return guarded(env, "kind",
                       [&] { return std::make_shared<const NoisyDoubleIntegratorEnv>(p); });
    }
    if (kind == "chain") {
        if (env.has("file")) {
            env.allow_only({"kind", "file"});
            std::filesystem::path file = env.string("file");
            if (file.is_relative()) file = std::filesystem::path(env.ctx().base_dir) / file;
            return guarded(env, "file", [&] {
                return std::make_shared<const FiniteChainEnv>(FiniteChainEnv::from_json_file(file.string()));
            });
        }
        env.allow_only({"kind", "n_states", "n_actions", "transitions", "rewards", "goal", "initial"});
        json inline_env = env.raw();
        inline_env.erase("kind");
        return guarded(env, "transitions", [&] {
            return std::make_shared<const FiniteChainEnv>(FiniteChainEnv::from_json_text(inline_env.dump()));
        });
    }
    env.fail_at("kind", "unknown environment kind '" + kind + "' (expected scalar, double_integrator or chain)");
}

ClassKInf build_kinf(const Node& node) {
    node.allow_only({"kind", "scale", "exponent"});
    const std::string kind = node.string("kind");
    return guarded(node, "kind", [&] {
        if (kind == "linear") return ClassKInf::linear(node.number_or("scale", 1.0));
        if (kind == "power") return ClassKInf::power(node.number("exponent"), node.number_or("scale", 1.0));
        node.fail_at("kind", "unknown class-K-infinity kind '" + kind + "' (expected linear or power)");
    });
}

KLCertificate build_certificate(const Node& node) {
    node.allow_only({"kappa", "xi", "eps"});
    KLCertificate cert{build_kinf(node.child("kappa")), build_kinf(node.child("xi")),
                       node.number_or("eps", 0.0)};
    if (!(cert.eps >= 0.0 && cert.eps < 1.0)) node.fail_at("eps", "eps must lie in [0, 1)");
    return cert;
}

struct BuiltPolicy {
    std::shared_ptr<const StationaryPolicy> policy;
    std::shared_ptr<const TabularPolicy> tabular;  // set for tabular policies
    std::optional<KLCertificate> certificate;
};

BuiltPolicy build_policy(const Node& node, const Mdp& env) {
    const std::string kind = node.string("kind");
    BuiltPolicy out;
    if (kind == "scalar_certified") {
        node.allow_only({"kind", "c"});
        const auto* scalar = dynamic_cast<const ContractiveScalarEnv*>(&env);
        if (!scalar) node.fail_at("kind", "scalar_certified policies require env.kind = scalar");
        const double c = node.number("c");
        auto certified = guarded(node, "c", [&] { return make_scalar_certified_policy(c, *scalar); });
        out.policy = certified.policy;
        out.certificate = certified.certificate;
        return out;
    }
    if (kind == "linear") {
        node.allow_only({"kind", "gain", "certificate"});
        out.policy = std::make_shared<const LinearPolicy>(node.number("gain"));
    } else if (kind == "constant") {
        node.allow_only({"kind", "action", "certificate"});
        out.policy = std::make_shared<const ConstantPolicy>(node.numbers("action"));
    } else if (kind == "linear_feedback") {
        node.allow_only({"kind", "gains", "certificate"});
        out.policy = guarded(node, "gains", [&] {
            return std::make_shared<const LinearFeedbackPolicy>(node.numbers("gains"));
        });
    } else if (kind == "tabular") {
        node.allow_only({"kind", "actions", "probabilities", "certificate"});
        const auto* chain = dynamic_cast<const FiniteChainEnv*>(&env);
        if (!chain) node.fail_at("kind", "tabular policies require env.kind = chain");
        std::shared_ptr<const TabularPolicy> table;
        if (node.has("actions")) {
            const auto actions = node.indices("actions");
            table = guarded(node, "actions", [&] {
                return std::make_shared<const TabularPolicy>(
                    TabularPolicy::deterministic(actions, chain->n_actions()));
            });
        } else {
            const json& probs = node.raw().contains("probabilities") ? node.raw().at("probabilities")
                                                                     : json();
            if (!probs.is_array()) node.fail_at("probabilities", "expected actions or probabilities");
            table = guarded(node, "probabilities", [&] {
                return std::make_shared<const TabularPolicy>(
                    probs.get<std::vector<std::vector<double>>>());
            });
        }
        if (table->n_states() != chain->n_states() || table->n_actions() != chain->n_actions()) {
            node.fail_at(node.has("actions") ? "actions" : "probabilities",
                         "policy table shape does not match the chain environment");
        }
        out.policy = table;
        out.tabular = table;
    } else {
        node.fail_at("kind", "unknown policy kind '" + kind +
                                 "' (expected scalar_certified, linear, constant, linear_feedback or tabular)");
    }
    if (auto cert = node.optional_child("certificate")) out.certificate = build_certificate(*cert);
    return out;
}

std::shared_ptr<const Critic> build_critic(const Node& node, const Mdp& env, const BuiltPolicy& base,
                                           const BuiltPolicy& alt, const std::string& role,
                                           ExperimentConfig& cfg) {
    const std::string kind = node.string("kind");
    if (kind == "constant") {
        node.allow_only({"kind", "value"});
        return std::make_shared<const ConstantCritic>(node.number("value"));
    }
    if (kind == "gaussian_bump") {
        node.allow_only({"kind", "center", "scale"});
        const auto center = node.numbers("center");
        if (center.size() != env.state_dim()) node.fail_at("center", "center dimension must match the state");
        return guarded(node, "scale", [&] { return make_gaussian_bump_critic(center, node.number("scale")); });
    }
    if (kind == "tabular") {
        node.allow_only({"kind", "policy", "gamma", "values"});
        std::shared_ptr<const TabularCritic> critic;
        if (node.has("values")) {
            critic = guarded(node, "values", [&] {
                return std::make_shared<const TabularCritic>(node.numbers("values"), role);
            });
        } else {
            const auto* chain = dynamic_cast<const FiniteChainEnv*>(&env);
            if (!chain) node.fail_at("kind", "tabular critics require env.kind = chain");
            const std::string which = node.string_or("policy", role == "base_critic" ? "base" : "alternative");
            const BuiltPolicy& source = which == "base" ? base : alt;
            if (which != "base" && which != "alternative") {
                node.fail_at("policy", "expected 'base' or 'alternative'");
            }
            if (!source.tabular) node.fail_at("policy", "exact evaluation requires a tabular policy");
            const double gamma = node.number_or("gamma", 0.9);
            critic = guarded(node, "gamma", [&] { return make_tabular_critic(*chain, *source.tabular, gamma); });
        }
        cfg.tabular_critics.emplace_back(role, critic);
        return critic;
    }
    node.fail_at("kind", "unknown critic kind '" + kind + "' (expected constant, gaussian_bump or tabular)");
}

}  // namespace

ConfigError::ConfigError(std::string origin, std::string key_path, int line, const std::string& message)
    : std::runtime_error(origin + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         key_path + ": " + message),
      key_path_(std::move(key_path)),
      line_(line) {}

std::string config_hash(const nlohmann::json& j) {
    const std::string canonical = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              const std::string& base_dir) {
    ExperimentConfig cfg;
    cfg.origin = origin;
    const Context ctx{text, origin, base_dir};
    try {
        cfg.raw = json::parse(text);
    } catch (const json::parse_error& e) {
        // Byte offset -> line number.
        const std::size_t at = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n'));
        throw ConfigError(origin, "<root>", line, std::string("malformed JSON: ") + e.what());
    }
    if (!cfg.raw.is_object()) throw ConfigError(origin, "<root>", 1, "expected a JSON object");
    cfg.hash = config_hash(cfg.raw);

    const Node root(cfg.raw, {}, ctx);
    root.allow_only({"schema_version", "description", "env", "policies", "schedule", "fusion", "run", "output"});
    if (root.has("schema_version") && root.unsigned_or("schema_version", 0) != kConfigSchemaVersion) {
        root.fail_at("schema_version", "unsupported schema version");
    }

    cfg.env = build_env(root.child("env"));

    const Node policies = root.child("policies");
    policies.allow_only({"base", "alternative", "base_critic", "alt_critic"});
    const BuiltPolicy base = build_policy(policies.child("base"), *cfg.env);
    const BuiltPolicy alt = build_policy(policies.child("alternative"), *cfg.env);
    cfg.certificate = alt.certificate;
    cfg.fusion.base = base.policy;
    cfg.fusion.alternative = alt.policy;
    cfg.fusion.base_critic = build_critic(policies.child("base_critic"), *cfg.env, base, alt, "base_critic", cfg);
    cfg.fusion.alt_critic = build_critic(policies.child("alt_critic"), *cfg.env, base, alt, "alt_critic", cfg);

    const Node schedule = root.child("schedule");
    schedule.allow_only({"kind", "lambda", "p_relax", "gate"});
    cfg.schedule_kind = schedule.string("kind");
    if (cfg.schedule_kind != "geometric" && cfg.schedule_kind != "gated") {
        schedule.fail_at("kind", "unknown schedule kind '" + cfg.schedule_kind + "' (expected geometric or gated)");
    }
    cfg.lambda = schedule.number("lambda");
    cfg.p_relax = schedule.number("p_relax");
    cfg.fusion.schedule = guarded(schedule, "lambda", [&] {
        return std::make_shared<const GeometricSchedule>(*cfg.lambda, *cfg.p_relax);
    });
    const std::string gate = schedule.string_or("gate", cfg.schedule_kind == "gated" ? "superlevel" : "none");
    if (gate != "none" && gate != "superlevel") schedule.fail_at("gate", "expected 'none' or 'superlevel'");
    if (cfg.schedule_kind == "gated" && gate == "none") {
        schedule.fail_at("gate", "a gated schedule requires gate = superlevel");
    }
    cfg.fusion.config.superlevel_gate = gate == "superlevel";

    if (auto fusion = root.optional_child("fusion")) {
        fusion->allow_only({"nu", "epsilon_norm", "force_indicator"});
        cfg.fusion.config.nu = fusion->number_or("nu", cfg.fusion.config.nu);
        cfg.fusion.config.epsilon_norm = fusion->number_or("epsilon_norm", cfg.fusion.config.epsilon_norm);
        cfg.fusion.config.force_indicator = fusion->bool_or("force_indicator", false);
        if (!(cfg.fusion.config.nu > 0.0)) fusion->fail_at("nu", "nu must be positive");
        if (!(cfg.fusion.config.epsilon_norm > 0.0)) fusion->fail_at("epsilon_norm", "epsilon_norm must be positive");
    }

    const Node run = root.child("run");
    run.allow_only({"horizon", "n_rollouts", "seed", "workers", "d_circ", "d_star", "d_threshold", "gamma",
                    "reaching_grid", "switch_grid"});
    cfg.run.horizon = run.unsigned_or("horizon", cfg.run.horizon);
    cfg.run.n_rollouts = run.unsigned_or("n_rollouts", cfg.run.n_rollouts);
    cfg.run.seed = run.unsigned_or("seed", cfg.run.seed);
    cfg.run.workers = run.unsigned_or("workers", cfg.run.workers);
    cfg.run.d_circ = run.optional_number("d_circ");
    cfg.run.d_star = run.optional_number("d_star");
    cfg.run.d_threshold = run.optional_number("d_threshold");
    cfg.run.gamma = run.number_or("gamma", cfg.run.gamma);
    if (run.has("reaching_grid")) cfg.run.reaching_grid = run.indices("reaching_grid");
    if (run.has("switch_grid")) cfg.run.switch_grid = run.indices("switch_grid");
    if (cfg.run.horizon < 1) run.fail_at("horizon", "horizon must be >= 1");
    if (cfg.run.n_rollouts < 1) run.fail_at("n_rollouts", "n_rollouts must be >= 1");
    if (cfg.run.workers < 1) run.fail_at("workers", "workers must be >= 1");
    if (!(cfg.run.gamma >= 0.0 && cfg.run.gamma < 1.0)) run.fail_at("gamma", "gamma must lie in [0, 1)");
    if (cfg.run.d_circ && !(*cfg.run.d_circ > 0.0)) run.fail_at("d_circ", "d_circ must be positive");
    if (cfg.run.d_star && !(*cfg.run.d_star > 0.0)) run.fail_at("d_star", "d_star must be positive");
    if (cfg.run.d_star && cfg.run.d_circ && !(*cfg.run.d_star < *cfg.run.d_circ)) {
        run.fail_at("d_star", "d_star must lie in (0, d_circ)");
    }

    if (auto output = root.optional_child("output")) {
        output->allow_only({"directory", "traces", "formats"});
        cfg.output.directory = output->string_or("directory", cfg.output.directory);
        cfg.output.traces = output->unsigned_or("traces", 0);
        if (output->has("formats")) {
            const json& f = output->raw().at("formats");
            if (!f.is_array()) output->fail_at("formats", "expected an array of format names");
            cfg.output.csv = cfg.output.jsonl = false;
            for (const auto& e : f) {
                const std::string name = e.is_string() ? e.get<std::string>() : "";
                if (name == "csv") {
                    cfg.output.csv = true;
                } else if (name == "jsonl") {
                    cfg.output.jsonl = true;
                } else {
                    output->fail_at("formats", "unknown format (expected csv or jsonl)");
                }
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "<root>", 0, "cannot open configuration file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config(buffer.str(), path, dir.empty() ? "." : dir.string());
}

}  // namespace mcalf
