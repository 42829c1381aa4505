#pragma once

#include "ggan/nets.hpp"
#include "ggan/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ggan {

/// Malformed configuration text or an unknown key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// "depth x width", written as e.g. 4x90.
struct Architecture {
  Index depth = 4;
  Index width = 90;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// One generator configuration of a dimension sweep, written d-depthxwidth (e.g. 10-4x90).
struct SweepPoint {
  Index input_dim = 10;
  Architecture arch;
  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

Architecture parse_architecture(std::string_view text);
SweepPoint parse_sweep_point(std::string_view text);
/// Comma list, or lo:step:hi for an inclusive arithmetic range.
std::vector<double> parse_grid(std::string_view text);

enum class Method { ggan, baseline };

/// Every setting of an experiment. Serialized as flat `key = value` lines.
struct ExperimentConfig {
  // data
  std::string dataset = "M1";  // M1..M4, or a CSV path
  bool csv_header = false;
  bool csv_minmax = false;
  Index train_size = 5000;
  Index test_size = 1000;
  Index eval_samples = 1000;

  // models
  Index initial_input_dimension = 50;
  Architecture generator_architecture{4, 90};
  Architecture discriminator_architecture{4, 64};
  double init_std = 0.06324555320336759;
  std::optional<double> output_bound;
  std::optional<double> input_map_cap;

  // training
  Method method = Method::ggan;
  CriticRegularization regularization = CriticRegularization::spectral_norm;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.9;
  int critical_step = 5;
  int training_batch_size = 512;
  double weight_of_gradient_penalty = 10.0;
  long number_of_updates = 5000;
  double expansion_factor = 1.1;
  double shrinkage_factor = 0.9;
  long interval_step = 100;
  long log_interval = 100;

  // penalties and truncation
  double lambda1 = 0.003;
  double lambda2 = 0.02;
  double lambda3 = 1e-6;
  double tau1 = 0.01;
  double tau2 = 0.01;
  bool select_tau1 = true;
  double tau1_tolerance = 0.1;
  TruncationPolicy truncation = TruncationPolicy::second_half;

  // search, replication, sweep
  std::vector<double> lambda1_grid{0.002, 0.0025, 0.003, 0.0035, 0.004};
  std::vector<double> lambda2_grid{0.01, 0.015, 0.02, 0.025, 0.03};
  std::vector<double> lambda3_grid{1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  int replications = 3;
  bool with_baseline = true;
  std::vector<double> kernel_bandwidths{1.0, 5.0, 10.0};
  std::vector<SweepPoint> sweep_configs{{1, {2, 30}}, {10, {4, 90}}, {50, {6, 150}}};

  std::uint64_t seed = 0;
  int jobs = 1;
  bool verbose = false;

  void validate() const;
};

/// Registered keys, in print order.
struct ConfigKey {
  std::string_view name;
  std::string_view help;
};
const std::vector<ConfigKey>& config_keys();

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& cfg, std::string_view key);

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// One `key = value` line per registered key; parse_config() inverts it exactly.
std::string print_config(const ExperimentConfig& cfg);
std::vector<std::pair<std::string, std::string>> config_pairs(const ExperimentConfig& cfg);

}  // namespace ggan
