#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dvao/io.hpp"

using namespace dvao;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, ParsesEveryKey) {
  const auto cfg = parse_config(R"(
    # comment
    combiner = gdpo
    weights = 0.25, 0.75
    group_size = 8
    clip_epsilon = 0.1
    learning_rate = 3.5
    steps = 7
    queries = 0, 2, 5
    seed = 11
    epochs = 2
    vocab_size = 6
    max_length = 3
    init_token_logit = -0.5
    wall_clock = true
    env = correlated
    target_symbol = 2
    length_target = 1
    noise_scale = 0.25
    noise_seed = 3
    constant_rewards = 0.1, 0.2, 0.3
    verify_seed = 5
    cases = 12
    sensitivity_cases = 4
    fd_step = 1e-5
    sensitivity_min_std = 0.1
    sweep_grid = 0.2, 0.8
    sweep_combiners = rc, dvao
    group_file = g.json
  )");
  EXPECT_EQ(cfg.train.combiner, Method::GDPO);
  EXPECT_EQ(cfg.train.weights, (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(cfg.train.group_size, 8u);
  EXPECT_EQ(cfg.train.queries, (std::vector<std::size_t>{0, 2, 5}));
  EXPECT_EQ(cfg.train.num_query_rows(), 6u);
  EXPECT_EQ(cfg.train.init_token_logit, -0.5);
  EXPECT_TRUE(cfg.train.wall_clock);
  EXPECT_EQ(cfg.env.family, EnvFamily::Correlated);
  EXPECT_EQ(cfg.env.constant_rewards.size(), 3u);
  EXPECT_EQ(cfg.verify.fd_step, 1e-5);
  EXPECT_EQ(cfg.sweep_combiners, (std::vector<Method>{Method::RewardCombination, Method::DVAO}));
  EXPECT_EQ(cfg.group_file, "g.json");
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(error_key("colour = red"), "colour");
  EXPECT_EQ(error_key("steps = -1"), "steps");
  EXPECT_EQ(error_key("steps = 1.5"), "steps");
  EXPECT_EQ(error_key("clip_epsilon = abc"), "clip_epsilon");
  EXPECT_EQ(error_key("combiner = grpo"), "combiner");
  EXPECT_EQ(error_key("env = maze"), "env");
  EXPECT_EQ(error_key("wall_clock = maybe"), "wall_clock");
  EXPECT_EQ(error_key("weights ="), "weights");
  EXPECT_EQ(error_key("seed = 1\nseed = 2"), "seed");
  EXPECT_EQ(error_key("no equals sign"), "no equals sign");
}

TEST(Config, CanonicalRoundTrip) {
  auto cfg = parse_config("weights = 0.1, 0.9\nlearning_rate = 0.3\nqueries = 1,4\nsweep_grid = 0.25");
  const auto text = canonical_config(cfg);
  const auto again = parse_config(text);
  EXPECT_EQ(canonical_config(again), text);
  EXPECT_EQ(again.train.learning_rate, 0.3);
  EXPECT_EQ(again.train.weights, cfg.train.weights);
  EXPECT_EQ(canonical_config(ToolkitConfig{}), canonical_config(parse_config("")));
}

TEST(Config, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-6), "1e-06");
  EXPECT_EQ(format_double(1024), "1024");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Hash, FnvVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Csv, Headers) {
  EXPECT_EQ(records_csv_header(2),
            "step,reward1_mean,reward1_std,reward1_expected,reward2_mean,reward2_std,"
            "reward2_expected,mean_abs_advantage,paired_abs_rc,paired_abs_dvao,mean_length,"
            "surrogate,millis");
  std::ostringstream out;
  write_sweep_csv(out, {{Method::AdvantageCombination, 0.3, 0.5, 0.25, 4}});
  EXPECT_EQ(out.str(), "combiner,w1,exp_reward_1,exp_reward_2,seed\nac,0.3,0.5,0.25,4\n");
}

TEST(Csv, RecordRows) {
  RunRecord r;
  r.step = 3;
  r.reward_mean = {0.5};
  r.reward_std = {0.25};
  r.expected_reward = {0.75};
  r.mean_abs_advantage = 1;
  std::ostringstream out;
  write_records_csv(out, {r}, 1);
  EXPECT_EQ(out.str(),
            records_csv_header(1) + "\n3,0.5,0.25,0.75,1,0,0,0,0,0\n");
}

TEST(Fixture, ParsesAndValidates) {
  const auto fx = parse_group_fixture(nlohmann::json::parse(
      R"({"query_id": "x", "rewards": [[0.1, 0.2], [0.3, 0.4]], "weights": [0.5, 0.5]})"));
  EXPECT_EQ(fx.group.query_id(), "x");
  EXPECT_EQ(fx.group.at(1, 0), 0.3);
  const auto dflt = parse_group_fixture(nlohmann::json::parse(R"({"rewards": [[0.1], [0.3]]})"));
  EXPECT_EQ(dflt.weights[0], 1.0);
  EXPECT_THROW(parse_group_fixture(nlohmann::json::parse(R"({"rows": []})")), std::invalid_argument);
  EXPECT_THROW(parse_group_fixture(nlohmann::json::parse(
                   R"({"rewards": [[0.1, 0.2], [0.3, 0.4]], "weights": [1.0]})")),
               DimensionError);
  EXPECT_THROW(parse_group_fixture(nlohmann::json::parse(R"({"rewards": [[0.1], [1.3]]})")),
               std::invalid_argument);
}
