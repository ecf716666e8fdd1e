#include "doctest.h"

#include <string>

#include "mcalf/config.hpp"

using namespace mcalf;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "env": {"kind": "scalar", "w_max": 0.1, "goal_radius": 0.2},
  "policies": {
    "base": {"kind": "constant", "action": [0.5]},
    "alternative": {"kind": "scalar_certified", "c": 0.3},
    "base_critic": {"kind": "gaussian_bump", "center": [0.5], "scale": 2.0},
    "alt_critic": {"kind": "gaussian_bump", "center": [0.0], "scale": 2.0}
  },
  "schedule": {"kind": "geometric", "lambda": 0.9, "p_relax": 0.5},
  "run": {"horizon": 20, "n_rollouts": 10, "seed": 1}
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
}

ConfigError expect_error(const std::string& text) {
    try {
        parse_config(text, "test.json");
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected a config error");
    return ConfigError("", "", 0, "");
}

}  // namespace

TEST_CASE("minimal config parses") {
    const ExperimentConfig cfg = parse_config(kMinimal, "test.json");
    CHECK(cfg.env->kind() == "scalar");
    CHECK(cfg.certificate.has_value());
    CHECK(cfg.lambda == std::optional<double>(0.9));
    CHECK(cfg.run.horizon == 20);
    CHECK(cfg.fusion.config.nu == 1e-3);
    CHECK(cfg.fusion.config.epsilon_norm == 1e-8);
    CHECK_FALSE(cfg.fusion.config.superlevel_gate);
}

TEST_CASE("config errors carry the key path and line") {
    const ConfigError bad_lambda = expect_error(replace(kMinimal, "\"lambda\": 0.9", "\"lambda\": 1.5"));
    CHECK(bad_lambda.key_path() == "schedule.lambda");
    CHECK(bad_lambda.line() == 10);
    CHECK(std::string(bad_lambda.what()).rfind("test.json:10: schedule.lambda:", 0) == 0);

    const ConfigError unknown = expect_error(replace(kMinimal, "\"seed\": 1", "\"seed\": 1, \"sede\": 2"));
    CHECK(unknown.key_path() == "run.sede");
    CHECK(unknown.line() == 11);
    CHECK(std::string(unknown.what()).find("unknown key") != std::string::npos);

    const ConfigError type = expect_error(replace(kMinimal, "\"horizon\": 20", "\"horizon\": \"long\""));
    CHECK(type.key_path() == "run.horizon");

    const ConfigError missing = expect_error(replace(kMinimal, "\"schedule\"", "\"scheduler\""));
    CHECK(missing.key_path().find("schedule") != std::string::npos);

    const ConfigError malformed = expect_error("{\n  \"env\": [1,\n");
    CHECK(malformed.key_path() == "<root>");
    CHECK(std::string(malformed.what()).find("malformed JSON") != std::string::npos);
}

TEST_CASE("inadmissible certificate is a config error citing the inequality") {
    std::string text = replace(kMinimal, "\"c\": 0.3", "\"c\": 0.9");
    text = replace(text, "\"goal_radius\": 0.2", "\"goal_radius\": 0.5");
    const ConfigError e = expect_error(text);
    CHECK(e.key_path() == "policies.alternative.c");
    CHECK(std::string(e.what()).find("g > w_max/(1-c)") != std::string::npos);
}

TEST_CASE("config hash is stable under key order and whitespace") {
    const auto a = nlohmann::json::parse(R"({"b": 1, "a": [1, 2, {"y": 0, "x": 1}]})");
    const auto b = nlohmann::json::parse("{\"a\":[1,2,{\"x\":1,\"y\":0}],\n  \"b\":1}");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash(nlohmann::json::parse(R"({"b": 2, "a": [1, 2, {"y": 0, "x": 1}]})")));
    CHECK(parse_config(kMinimal, "x").hash == parse_config(kMinimal, "y").hash);
}

TEST_CASE("validated run section") {
    CHECK(expect_error(replace(kMinimal, "\"seed\": 1", "\"seed\": 1, \"d_circ\": 1.0, \"d_star\": 2.0"))
              .key_path() == "run.d_star");
    CHECK(expect_error(replace(kMinimal, "\"horizon\": 20", "\"horizon\": 0")).key_path() == "run.horizon");
    CHECK(expect_error(replace(kMinimal, "\"n_rollouts\": 10", "\"n_rollouts\": -3")).key_path() ==
          "run.n_rollouts");
}

TEST_CASE("gated schedules use the superlevel gate") {
    const std::string gated = replace(kMinimal, "\"kind\": \"geometric\"", "\"kind\": \"gated\"");
    CHECK(expect_error(replace(gated, "\"p_relax\": 0.5", "\"p_relax\": 0.5, \"gate\": \"none\""))
              .key_path() == "schedule.gate");
    const ExperimentConfig cfg = parse_config(gated, "t");
    CHECK(cfg.fusion.config.superlevel_gate);
    CHECK(cfg.schedule_kind == "gated");
}

TEST_CASE("chain environments load from a file relative to the config") {
    const std::string dir = MCALF_SOURCE_DIR "/configs";
    const ExperimentConfig cfg = load_config(dir + "/chain_fused.json");
    CHECK(cfg.env->kind() == "chain");
    CHECK(cfg.tabular_critics.size() == 2);
    CHECK(cfg.certificate.has_value());
    CHECK_THROWS_AS(load_config(dir + "/does_not_exist.json"), ConfigError);
}

TEST_CASE("shipped configs all parse") {
    for (const char* name : {"scalar_fused.json", "scalar_diagnostic.json", "chain_fused.json", "bounds_half.json"}) {
        CAPTURE(name);
        CHECK_NOTHROW(load_config(std::string(MCALF_SOURCE_DIR "/configs/") + name));
    }
}
