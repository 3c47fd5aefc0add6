#include "doctest.h"

#include "shipcc/config.hpp"
#include "shipcc/errors.hpp"

using namespace shipcc;

TEST_CASE("defaults and round trip") {
    const RunConfig d = parse_config("{}");
    CHECK(d.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(d.training.batch_size == 200);
    CHECK(d.training.epochs == 300);
    CHECK(d.control.loop.ce.samples == 400);
    CHECK(d.control.loop.ce.iterations == 20);
    CHECK(d.integrator.substeps == 10);

    const RunConfig c = parse_config(R"(
seed: 9
data:
  scenario: case2
  n_samples: 5000
training: {epochs: 12, learning_rate: 0.001}
control:
  ce: {samples: 50, elites: 5}
  tracking: {Q: [1, 2]}
)");
    CHECK(c.seed == 9);
    CHECK(c.data.scenario.name == "case2");
    CHECK(c.data.scenario.test_only_conditions == std::vector<int>{2, 3});
    CHECK(c.training.epochs == 12);
    CHECK(c.control.Q[1] == 2.0);
    const RunConfig again = parse_config(dump_config(c));
    CHECK(dump_config(again) == dump_config(c));
    CHECK(config_hash(again) == config_hash(c));
}

TEST_CASE("runtime fields do not change the hash") {
    RunConfig a = parse_config("seed: 3");
    RunConfig b = a;
    b.workers = 8;
    b.output_dir = "/elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 4;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(parse_config("unknown_key: 1"), ConfigError);
    CHECK_THROWS_AS(parse_config("training: {epoch: 3}"), ConfigError);
    CHECK_THROWS_AS(parse_config("training: {batch_size: 0}"), ConfigError);
    CHECK_THROWS_AS(parse_config("control: {ce: {elites: 500}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("control: {ce: {lambda: 2}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("data: {mix: [{condition: 1, fraction: 0.5}]}"), ConfigError);
    CHECK_THROWS_AS(parse_config("param_set: nominal"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed: [1"), ConfigError);
    try {
        load_config("/nonexistent/run.yaml");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/run.yaml") != std::string::npos);
    }
}
