#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ggan/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace ggan;

TEST_CASE("print_config round-trips through parse_config") {
  ExperimentConfig c;
  c.dataset = "data/my file.csv";
  c.csv_header = true;
  c.train_size = 123;
  c.generator_architecture = {3, 17};
  c.output_bound = 2.5;
  c.input_map_cap = 0.75;
  c.method = Method::baseline;
  c.regularization = CriticRegularization::gradient_penalty;
  c.learning_rate = 1.0 / 3.0;
  c.lambda3 = 1.2345678901234567e-7;
  c.truncation = TruncationPolicy::final_only;
  c.lambda2_grid = {0.1, 0.2};
  c.sweep_configs = {{2, {1, 8}}, {7, {3, 9}}};
  c.kernel_bandwidths = {0.5};
  c.seed = 18446744073709551615ull;
  c.jobs = 3;
  const std::string text = print_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(print_config(back) == text);
  CHECK(back.learning_rate == c.learning_rate);
  CHECK(back.lambda3 == c.lambda3);
  CHECK(back.seed == c.seed);
  CHECK(back.dataset == c.dataset);
  CHECK(back.sweep_configs == c.sweep_configs);
  CHECK(back.output_bound == c.output_bound);

  const std::string defaults = print_config(ExperimentConfig{});
  CHECK(print_config(parse_config(defaults)) == defaults);
}

TEST_CASE("every registered key prints once and reads back") {
  std::set<std::string> seen;
  const ExperimentConfig c;
  for (const auto& key : config_keys()) {
    CHECK(seen.insert(std::string(key.name)).second);
    CHECK_FALSE(key.help.empty());
    ExperimentConfig copy = c;
    set_config_value(copy, key.name, get_config_value(c, key.name));
    CHECK(get_config_value(copy, key.name) == get_config_value(c, key.name));
  }
  CHECK(config_pairs(c).size() == config_keys().size());
  // the published hyperparameter names are keys verbatim
  for (const char* k : {"learning_rate", "critical_step", "training_batch_size",
                        "weight_of_gradient_penalty", "number_of_updates", "expansion_factor",
                        "shrinkage_factor", "interval_step", "initial_input_dimension",
                        "generator_architecture", "discriminator_architecture"}) {
    CHECK(seen.count(k) == 1);
  }
}

TEST_CASE("parse_config handles comments, blanks and overrides") {
  const auto c = parse_config("# a comment\n\n  lambda1 = 0.004  # trailing\nseed=9\nseed = 11\n");
  CHECK(c.lambda1 == 0.004);
  CHECK(c.seed == 11);
  ExperimentConfig base;
  base.jobs = 2;
  CHECK(parse_config("seed = 1", base).jobs == 2);
}

TEST_CASE("bad configuration text is a ConfigError naming the line") {
  auto fails_with = [](const std::string& text, const std::string& fragment) {
    try {
      parse_config(text);
      return false;
    } catch (const ConfigError& e) {
      return std::string(e.what()).find(fragment) != std::string::npos;
    }
  };
  CHECK(fails_with("seed = 1\nnot_a_key = 3\n", "line 2"));
  CHECK(fails_with("not_a_key = 3\n", "not_a_key"));
  CHECK(fails_with("lambda1 0.1\n", "key = value"));
  CHECK(fails_with("lambda1 = abc\n", "lambda1"));
  CHECK(fails_with("critical_step = 2.5\n", "critical_step"));
  CHECK(fails_with("select_tau1 = maybe\n", "select_tau1"));
  CHECK(fails_with("method = wgan\n", "method"));
  CHECK(fails_with("generator_architecture = 4by90\n", "generator_architecture"));
  CHECK(fails_with("lambda1 = -1\n", "penalty"));
  CHECK(fails_with("replications = 0\n", "replications"));
  CHECK(fails_with("kernel_bandwidths = 1,0\n", "bandwidth"));
  CHECK(fails_with("truncation = sometimes\n", "truncation"));
  CHECK_THROWS_AS(load_config("/nonexistent/ggan.cfg"), ConfigError);
}

TEST_CASE("architectures and sweep points") {
  CHECK(parse_architecture("4x90") == Architecture{4, 90});
  CHECK(parse_architecture(" 6x150 ") == Architecture{6, 150});
  CHECK_THROWS_AS(parse_architecture("0x10"), ConfigError);
  CHECK_THROWS_AS(parse_architecture("4x"), ConfigError);
  CHECK_THROWS_AS(parse_architecture("90"), ConfigError);
  CHECK(parse_sweep_point("10-4x90") == SweepPoint{10, {4, 90}});
  CHECK(parse_sweep_point("1-2x30") == SweepPoint{1, {2, 30}});
  CHECK_THROWS_AS(parse_sweep_point("4x90"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_point("0-4x90"), ConfigError);
}

TEST_CASE("grids") {
  const auto range = parse_grid("0.002:0.0005:0.004");
  REQUIRE(range.size() == 5);
  CHECK(range.front() == 0.002);
  CHECK(range[2] == 0.003);
  CHECK(range.back() == 0.004);
  CHECK(parse_grid("0.01:0.005:0.03").size() == 5);
  CHECK(parse_grid("1e-8, 1e-7,1e-6") == std::vector<double>{1e-8, 1e-7, 1e-6});
  CHECK(parse_grid("").empty());
  CHECK_THROWS_AS(parse_grid("1:0:2"), ConfigError);
  CHECK_THROWS_AS(parse_grid("2:1:1"), ConfigError);
  CHECK_THROWS_AS(parse_grid("1:2"), ConfigError);
  CHECK_THROWS_AS(parse_grid("1,,2"), ConfigError);
}

TEST_CASE("load_config reads a file") {
  const auto p = std::filesystem::temp_directory_path() / "ggan_test_config.cfg";
  std::ofstream(p) << "dataset = M3\nnumber_of_updates = 10\n";
  const auto c = load_config(p);
  CHECK(c.dataset == "M3");
  CHECK(c.number_of_updates == 10);
}
