#pragma once

#include "ggan/checkpoint.hpp"
#include "ggan/config.hpp"
#include "ggan/data.hpp"
#include "ggan/metrics.hpp"
#include "ggan/trainer.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ggan {

/// Deterministically derives an independent seed for a named purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Train and held-out splits for one seed.
struct RunData {
  Matrix train;
  Matrix test;
  double output_bound = 1.0;
};

RunData load_run_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Training settings for a run of `method` seeded by `seed`.
TrainConfig make_train_config(const ExperimentConfig& cfg, Method method, std::uint64_t seed);

/// Initial generator and critic for a run. The baseline uses B = I held fixed.
std::pair<GeneratorModel, DiscriminatorModel> make_initial_models(const ExperimentConfig& cfg,
                                                                  Method method, Index input_dim,
                                                                  Architecture generator_arch,
                                                                  double output_bound,
                                                                  Index data_dim,
                                                                  std::uint64_t seed);

/// Metrics of a generator against a held-out reference set, on a fixed noise draw.
MetricsReport evaluate_generator(const GeneratorModel& g, const MmdReference& reference,
                                 Index samples, std::uint64_t eval_seed, double depth_eps);

/// Sweeps tau1 over the distinct nonzero row norms of B and returns the
/// largest threshold whose truncated MMD stays within (1 + tolerance) times
/// the untruncated MMD, or 0 when none does.
double select_tau1(const GeneratorModel& g, const MmdReference& reference, Index samples,
                   std::uint64_t eval_seed, double tolerance);

struct RunResult {
  Method method = Method::ggan;
  std::uint64_t seed = 0;
  TrainedModel model;
  MetricsReport metrics;
  double tau1 = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

/// Trains and evaluates one run of `method` on `data`.
RunResult run_single(const ExperimentConfig& cfg, const RunData& data, Method method,
                     std::uint64_t seed, const LogFn& log = {});

/// Per-run outcome as written to runs.csv.
struct RunRow {
  std::string method;
  int replication = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  MetricsReport metrics;
  double tau1 = 0.0;
};

struct AggregateRow {
  std::string method;
  int completed = 0;
  double mmd_mean = 0.0, mmd_sd = 0.0;  // in units of 1e-4
  double dim_mean = 0.0, dim_sd = 0.0;
  double prop0_mean = 0.0, prop0_sd = 0.0;  // percent
};

struct ExperimentSummary {
  std::vector<RunRow> runs;
  std::vector<AggregateRow> aggregate;
};

std::string method_label(Method method, CriticRegularization mode);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_sd(const std::vector<double>& xs);
std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs);

/// R seeded replications (plus the baseline when configured); writes
/// runs.csv and results.csv under out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                 const LogFn& log = {});

struct TuneRow {
  int stage = 1;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
  double mmd2 = 0.0;
};

struct LambdaChoice {
  std::array<double, 3> lambdas{};
  std::vector<TuneRow> trials;
};

/// Picks lambda1, then lambda2, then lambda3 by held-out MMD, one grid at a
/// time with later weights at 0. Ties go to the larger value.
LambdaChoice sequential_lambda_search(const ExperimentConfig& cfg, const LogFn& log = {});

struct SweepRow {
  SweepPoint point;
  double mmd_mean = 0.0;
  double mmd_sd = 0.0;
  std::vector<double> mmd_runs;
};

/// Unpenalized runs per generator configuration, R replications each.
std::vector<SweepRow> run_dim_sweep(const ExperimentConfig& cfg, const LogFn& log = {});

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
/// Line chart of mean and mean +/- SD against configuration index.
void write_sweep_svg(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& history);
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& m);
void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRow>& runs);
void write_results_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

/// Evaluates a checkpoint the same way training evaluated it.
MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const ExperimentConfig& cfg);

}  // namespace ggan
