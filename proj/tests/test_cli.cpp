#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcalf/acceptance.hpp"
#include "mcalf/app.hpp"

using namespace mcalf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kConfigs = MCALF_SOURCE_DIR "/configs";

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mcalf-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Small scalar run derived from the shipped config.
fs::path small_scalar_config(const fs::path& dir, const std::function<void(json&)>& edit = {}) {
    json j = json::parse(slurp(kConfigs + "/scalar_fused.json"));
    j["run"]["n_rollouts"] = 200;
    j["run"]["horizon"] = 60;
    j["output"]["traces"] = 2;
    if (edit) edit(j);
    const fs::path path = dir / "config.json";
    write(path, j.dump(2));
    return path;
}

json summary_without_timestamp(const fs::path& dir) {
    json j = json::parse(slurp(dir / "summary.json"));
    j.erase("generated_at");
    return j;
}

}  // namespace

TEST_CASE("run writes a summary with a goal-reaching estimate") {
    const fs::path dir = scratch("run");
    const fs::path cfg = small_scalar_config(dir);
    std::ostringstream out;
    std::ostringstream err;
    Overrides o;
    o.output = (dir / "out").string();
    CHECK(cmd_run(cfg.string(), o, out, err) == kExitOk);
    const json s = json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(s.contains("goal_reaching"));
    CHECK(s["goal_reaching"].contains("estimate"));
    CHECK(s["spatial_bounds"]["tau_f"] == 3);
    CHECK(s["switching"]["domination_violations"] == 0);
    CHECK(fs::exists(dir / "out" / "rollouts.csv"));
    CHECK(fs::exists(dir / "out" / "traces" / "rollout_0001.csv"));
    CHECK(fs::exists(dir / "out" / "traces" / "rollout_0001.jsonl"));
    CHECK_FALSE(fs::exists(dir / "out" / "traces" / "rollout_0002.csv"));
}

TEST_CASE("run is deterministic and independent of the worker count") {
    const fs::path dir = scratch("determinism");
    const fs::path cfg = small_scalar_config(dir);
    std::ostringstream sink;
    Overrides o;
    o.output = (dir / "a").string();
    o.workers = 1;
    REQUIRE(cmd_run(cfg.string(), o, sink, sink) == kExitOk);
    o.output = (dir / "b").string();
    o.workers = 3;
    REQUIRE(cmd_run(cfg.string(), o, sink, sink) == kExitOk);
    CHECK(summary_without_timestamp(dir / "a") == summary_without_timestamp(dir / "b"));
    CHECK(slurp(dir / "a" / "rollouts.csv") == slurp(dir / "b" / "rollouts.csv"));
    CHECK(slurp(dir / "a" / "traces" / "rollout_0000.csv") == slurp(dir / "b" / "traces" / "rollout_0000.csv"));

    o.output = (dir / "c").string();
    o.seed = 99;
    REQUIRE(cmd_run(cfg.string(), o, sink, sink) == kExitOk);
    const json c = summary_without_timestamp(dir / "c");
    CHECK(c["master_seed"] == 99);
    CHECK(c != summary_without_timestamp(dir / "a"));
}

TEST_CASE("run exit codes") {
    const fs::path dir = scratch("exit");
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_run((dir / "missing.json").string(), {}, out, err) == kExitConfig);

    const fs::path bad = small_scalar_config(dir, [](json& j) { j["run"]["horizon"] = "long"; });
    err.str("");
    CHECK(cmd_run(bad.string(), {}, out, err) == kExitConfig);
    CHECK(err.str().find("run.horizon") != std::string::npos);

    const fs::path inadmissible = small_scalar_config(dir, [](json& j) {
        j["env"]["goal_radius"] = 0.5;
        j["policies"]["alternative"]["c"] = 0.9;
    });
    err.str("");
    CHECK(cmd_run(inadmissible.string(), {}, out, err) == kExitConfig);
    CHECK(err.str().find("g > w_max/(1-c)") != std::string::npos);

    // A feedback gain of the wrong dimension fails inside the first rollout.
    json di = {{"env", {{"kind", "double_integrator"}}},
               {"policies",
                {{"base", {{"kind", "linear_feedback"}, {"gains", {1.0}}}},
                 {"alternative", {{"kind", "linear_feedback"}, {"gains", {1.0, 1.0}}}},
                 {"base_critic", {{"kind", "constant"}, {"value", 1.0}}},
                 {"alt_critic", {{"kind", "constant"}, {"value", 1.0}}}}},
               {"schedule", {{"kind", "geometric"}, {"lambda", 0.5}, {"p_relax", 1.0}}},
               {"fusion", {{"force_indicator", true}}},
               {"run", {{"horizon", 5}, {"n_rollouts", 3}}},
               {"output", {{"directory", (dir / "rt").string()}}}};
    write(dir / "runtime.json", di.dump());
    err.str("");
    CHECK(cmd_run((dir / "runtime.json").string(), {}, out, err) == kExitFailure);
    CHECK(err.str().find("rollout 0") != std::string::npos);
}

TEST_CASE("verify-bounds reports the documented values") {
    const fs::path dir = scratch("bounds");
    std::ostringstream out;
    std::ostringstream err;
    Overrides o;
    o.output = (dir / "b").string();
    REQUIRE(cmd_verify_bounds(kConfigs + "/bounds_half.json", o, out, err) == kExitOk);
    const json r = json::parse(out.str());
    CHECK(r["dominance"] == "pass");
    bool seen = false;
    for (const auto& e : r["tail_products"]) {
        if (e["t"] == 1) {
            CHECK(e["value"].get<double>() == doctest::Approx(0.5776).epsilon(1e-4));
            seen = true;
        }
    }
    CHECK(seen);
    seen = false;
    for (const auto& e : r["corollary_bounds"]) {
        if (e["t"] == 1) {
            CHECK(e["bound"].get<double>() == doctest::Approx(0.5134).epsilon(1e-4));
            seen = true;
        }
    }
    CHECK(seen);
    CHECK(fs::exists(dir / "b" / "bounds.json"));

    // p = 0: every product and bound is exactly one.
    json j = json::parse(slurp(kConfigs + "/bounds_half.json"));
    j["schedule"]["p_relax"] = 0.0;
    write(dir / "p0.json", j.dump());
    out.str("");
    REQUIRE(cmd_verify_bounds((dir / "p0.json").string(), {}, out, err) == kExitOk);
    const json r0 = json::parse(out.str());
    CHECK(r0["dominance"] == "pass");
    for (const auto& e : r0["tail_products"]) CHECK(e["value"] == 1.0);
    for (const auto& e : r0["corollary_bounds"]) CHECK(e["bound"] == 1.0);

    // Reported experiment setting (0.99, 0.8) also passes.
    j["schedule"]["lambda"] = 0.99;
    j["schedule"]["p_relax"] = 0.8;
    write(dir / "reported.json", j.dump());
    out.str("");
    CHECK(cmd_verify_bounds((dir / "reported.json").string(), {}, out, err) == kExitOk);
    CHECK(json::parse(out.str())["summability"]["sum"].get<double>() == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("acceptance command exit codes") {
    std::ostringstream out;
    std::ostringstream err;
    const fs::path empty = scratch("acc-empty");
    CHECK(cmd_acceptance(empty.string(), {}, out, err) == kExitConfig);
    CHECK(cmd_acceptance((empty / "nope").string(), {}, out, err) == kExitConfig);

    const fs::path broken = scratch("acc-broken");
    write(broken / "c.json", "{\"criterion\": ");
    CHECK(cmd_acceptance(broken.string(), {}, out, err) == kExitConfig);
    write(broken / "c.json", "{\"criterion\": 1, \"lambda_gird\": [0.5]}");
    CHECK(cmd_acceptance(broken.string(), {}, out, err) == kExitConfig);

    // Negative control: a prediction shifted far outside the statistical band fails.
    const fs::path negative = scratch("acc-negative");
    json c2 = json::parse(slurp(MCALF_SOURCE_DIR "/acceptance/c2_reaching_time_distribution.json"));
    c2.erase("experiment_file");
    c2["n_rollouts"] = 20000;
    c2["predicted"] = 0.5776 + 10.0 * std::sqrt(0.5776 * 0.4224 / 20000.0);
    write(negative / "c2.json", c2.dump());
    out.str("");
    CHECK(cmd_acceptance(negative.string(), {}, out, err) == kExitFailure);
    CHECK(out.str().find("FAIL  C2") != std::string::npos);
    CHECK(out.str().find("some criteria failed") != std::string::npos);

    // The same criterion with the true prediction passes.
    c2["predicted"] = 0.5776;
    write(negative / "c2.json", c2.dump());
    out.str("");
    CHECK(cmd_acceptance(negative.string(), {}, out, err) == kExitOk);
    CHECK(out.str().find("PASS  C2") != std::string::npos);
}

TEST_CASE("criterion result lines") {
    CriterionResult r{4, criterion_name(4), true, "violations=0", 1.5};
    const std::string line = format_result_line(r);
    CHECK(line.rfind("PASS  C4  ", 0) == 0);
    CHECK(line.find("violations=0") != std::string::npos);
    CHECK_THROWS(run_criterion(10, json::object(), AcceptanceContext{}));
}
