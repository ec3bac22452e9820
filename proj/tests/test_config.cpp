#include "doctest.h"

#include "iplan/config.hpp"

using namespace iplan;

TEST_CASE("config: defaults carry the documented constants") {
    RunConfig cfg;
    CHECK(cfg.lr_ppo == 5e-4);
    CHECK(cfg.lr_behavior == 1e-4);
    CHECK(cfg.lr_instant == 2e-5);
    CHECK(cfg.rollout_size == 256);
    CHECK(cfg.dropout == 0.1);
    CHECK(cfg.beta_dim == 8);
    CHECK(cfg.behavior_enc_hidden == 32);
    CHECK(cfg.behavior_dec_hidden == 64);
    CHECK(cfg.gat_hidden == 32);
    CHECK(cfg.zeta_dim == 32);
    CHECK(cfg.horizon_resolved() == 50);
    CHECK(cfg.t_h_resolved() == 5);
    CHECK(cfg.t_p_resolved() == 2);
    RunConfig hw;
    hw.env = "highway";
    hw.scenario = "mild";
    CHECK(hw.horizon_resolved() == 90);
    CHECK(hw.t_h_resolved() == 10);
    CHECK(hw.t_p_resolved() == 5);
    CHECK(hw.hw_lanes == 8);
    CHECK(hw.hw_n_controlled == 5);
    CHECK(hw.hw_n_behavior == 50);
    CHECK(hw.hw_density == 1.0);
}

TEST_CASE("config: parse, serialise, hash round trip") {
    std::string text =
        "env = highway\n"
        "scenario = chaotic   # composition 40/30/30\n"
        "seed = 99\n"
        "total_steps = 1000\n";
    RunConfig cfg = RunConfig::from_keyvalues(parse_keyvalues(text));
    CHECK(cfg.env == "highway");
    CHECK(cfg.scenario == "chaotic");
    CHECK(cfg.seed == 99);
    RunConfig again = RunConfig::from_keyvalues(parse_keyvalues(cfg.serialize()));
    CHECK(again.hash() == cfg.hash());
    CHECK(again.serialize() == cfg.serialize());
}

TEST_CASE("config: unknown keys and bad values rejected") {
    CHECK_THROWS_AS(RunConfig::from_keyvalues(parse_keyvalues("not_a_key = 3\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_keyvalues(parse_keyvalues("seed = banana\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_keyvalues(parse_keyvalues("env = moon\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_keyvalues(parse_keyvalues("eta = 1.5\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_keyvalues(parse_keyvalues("garbled line\n")), ConfigError);
}

TEST_CASE("config: algo switches select the inference modules") {
    RunConfig cfg;
    cfg.algo = "iplan";
    CHECK(cfg.use_behavior_module());
    CHECK(cfg.use_instant_module());
    cfg.algo = "iplan-bm";
    CHECK(cfg.use_behavior_module());
    CHECK(!cfg.use_instant_module());
    cfg.algo = "iplan-gat";
    CHECK(!cfg.use_behavior_module());
    CHECK(cfg.use_instant_module());
    cfg.algo = "ippo";
    CHECK(!cfg.use_behavior_module());
    CHECK(!cfg.use_instant_module());
}

TEST_CASE("text encoding round trip") {
    std::string original = "line one = x\nline two 100%\n\ttabbed\n";
    CHECK(decode_text(encode_text(original)) == original);
    CHECK(encode_text(original).find(' ') == std::string::npos);
    CHECK(encode_text(original).find('\n') == std::string::npos);
}
