#include "ggan/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>

namespace ggan {

namespace {

constexpr std::uint64_t kGeneratorInitTag = 1;
constexpr std::uint64_t kCriticInitTag = 2;
constexpr std::uint64_t kEvalTag = 3;
constexpr std::uint64_t kTrainTag = 4;
constexpr std::uint64_t kSplitTag = 5;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

bool is_synthetic(const std::string& name) {
  return name == "M1" || name == "M2" || name == "M3" || name == "M4" || name == "m1" ||
         name == "m2" || name == "m3" || name == "m4";
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

KernelMix kernel_of(const ExperimentConfig& cfg) { return KernelMix{cfg.kernel_bandwidths}; }

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the combined input
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RunData load_run_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunData out;
  if (is_synthetic(cfg.dataset)) {
    SyntheticSpec spec{synthetic_model_from(cfg.dataset), 10, 100, seed};
    out.train = sample_synthetic(spec, cfg.train_size, Split::train).samples;
    out.test = sample_synthetic(spec, cfg.test_size, Split::test).samples;
  } else {
    const Dataset all = load_csv(cfg.dataset, CsvOptions{cfg.csv_header, cfg.csv_minmax});
    const Index n = all.samples.rows();
    if (n <= cfg.test_size) {
      throw ContractError("dataset '" + cfg.dataset + "' has " + std::to_string(n) +
                          " rows, not enough for a held-out split of " +
                          std::to_string(cfg.test_size));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(derive_seed(seed, kSplitTag));
    std::shuffle(order.begin(), order.end(), rng);
    const Index train_n = std::min(cfg.train_size, n - cfg.test_size);
    out.train.resize(train_n, all.samples.cols());
    out.test.resize(cfg.test_size, all.samples.cols());
    for (Index i = 0; i < cfg.test_size; ++i) out.test.row(i) = all.samples.row(order[i]);
    for (Index i = 0; i < train_n; ++i) {
      out.train.row(i) = all.samples.row(order[cfg.test_size + i]);
    }
  }
  out.output_bound = cfg.output_bound ? *cfg.output_bound : out.train.cwiseAbs().maxCoeff();
  if (!(out.output_bound > 0.0)) out.output_bound = 1.0;
  return out;
}

TrainConfig make_train_config(const ExperimentConfig& cfg, Method method, std::uint64_t seed) {
  TrainConfig tc;
  tc.critic_steps = cfg.critical_step;
  tc.batch_size = cfg.training_batch_size;
  tc.updates = cfg.number_of_updates;
  tc.gp_weight = cfg.weight_of_gradient_penalty;
  tc.delta1 = cfg.expansion_factor;
  tc.delta2 = cfg.shrinkage_factor;
  tc.interval = cfg.interval_step;
  tc.learning_rate = cfg.learning_rate;
  tc.beta1 = cfg.adam_beta1;
  tc.beta2 = cfg.adam_beta2;
  tc.seed = derive_seed(seed, kTrainTag);
  tc.log_interval = cfg.log_interval;
  if (method == Method::ggan) {
    tc.penalty = PenaltyConfig{cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.tau1, cfg.tau2};
    tc.truncation = cfg.truncation;
    tc.train_input_map = true;
  } else {
    tc.penalty = PenaltyConfig{};
    tc.truncation = TruncationPolicy::never;
    tc.train_input_map = false;
  }
  return tc;
}

std::pair<GeneratorModel, DiscriminatorModel> make_initial_models(const ExperimentConfig& cfg,
                                                                  Method method, Index input_dim,
                                                                  Architecture generator_arch,
                                                                  double output_bound,
                                                                  Index data_dim,
                                                                  std::uint64_t seed) {
  GeneratorModel g = init_generator(input_dim, generator_arch.width, generator_arch.depth, data_dim,
                                    InitSpec{cfg.init_std, 0.0, derive_seed(seed, kGeneratorInitTag)});
  g.output_bound = output_bound;
  if (method == Method::baseline) {
    g.input_map = Matrix::Identity(input_dim, input_dim);
  } else {
    g.input_map_cap = cfg.input_map_cap;
  }
  DiscriminatorModel d = init_discriminator(
      data_dim, cfg.discriminator_architecture.width, cfg.discriminator_architecture.depth,
      cfg.regularization, InitSpec{cfg.init_std, 0.0, derive_seed(seed, kCriticInitTag)});
  return {std::move(g), std::move(d)};
}

MetricsReport evaluate_generator(const GeneratorModel& g, const MmdReference& reference,
                                 Index samples, std::uint64_t eval_seed, double depth_eps) {
  std::mt19937_64 rng(eval_seed);
  const Matrix noise = sample_noise(rng, samples, g.input_dim());
  MetricsReport m;
  m.mmd2 = reference(generator_forward(g, noise));
  m.mmd_scaled = m.mmd2 * 1e4;
  m.dim = estimated_dim(g.input_map);
  m.prop0 = prop_zero(g.layers);
  m.effective_depth = effective_depth(g, depth_eps);
  return m;
}

double select_tau1(const GeneratorModel& g, const MmdReference& reference, Index samples,
                   std::uint64_t eval_seed, double tolerance) {
  if (tolerance < 0) throw ContractError("select_tau1: tolerance must be >= 0");
  std::mt19937_64 rng(eval_seed);
  const Matrix noise = sample_noise(rng, samples, g.input_dim());
  const double base = reference(generator_forward(g, noise));
  const Vector norms = g.input_map.rowwise().norm();
  std::vector<double> candidates;
  for (Index i = 0; i < norms.size(); ++i) {
    if (norms(i) > 0.0) candidates.push_back(norms(i));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best = 0.0;
  GeneratorModel trial = g;
  for (double tau : candidates) {
    trial.input_map = truncate_rows(g.input_map, tau);
    const double mmd = reference(generator_forward(trial, noise));
    if (mmd <= base * (1.0 + tolerance)) best = tau;
  }
  return best;
}

RunResult run_single(const ExperimentConfig& cfg, const RunData& data, Method method,
                     std::uint64_t seed, const LogFn& log) {
  auto [g, d] = make_initial_models(cfg, method, cfg.initial_input_dimension,
                                    cfg.generator_architecture, data.output_bound,
                                    data.train.cols(), seed);
  const TrainConfig tc = make_train_config(cfg, method, seed);
  const std::string label = method_label(method, cfg.regularization);
  ProgressFn progress;
  if (cfg.verbose && log) {
    progress = [&](const LogRow& row) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "[%s seed %llu] it %ld critic %.5g gen %.5g M %.4g P %.4g Q %.4g rows %ld",
                    label.c_str(), static_cast<unsigned long long>(seed), row.iteration,
                    row.critic_loss, row.generator_loss, row.group_row, row.depth, row.sparsity,
                    row.nonzero_rows);
      log(buf);
    };
  }
  RunResult out;
  out.method = method;
  out.seed = seed;
  out.model = train(data.train, tc, std::move(g), std::move(d), progress);

  const MmdReference reference(data.test, kernel_of(cfg));
  const std::uint64_t eval_seed = derive_seed(seed, kEvalTag);
  if (method == Method::ggan) {
    out.tau1 = cfg.tau1;
    if (cfg.select_tau1) {
      const double tau = select_tau1(out.model.generator, reference, cfg.eval_samples, eval_seed,
                                     cfg.tau1_tolerance);
      if (tau > out.tau1) {
        out.tau1 = tau;
        out.model.generator.input_map = truncate_rows(out.model.generator.input_map, tau);
      }
    }
  }
  out.metrics = evaluate_generator(out.model.generator, reference, cfg.eval_samples, eval_seed,
                                   cfg.tau2);
  say(log, label + " seed " + std::to_string(seed) + ": mmd2 " + fmt(out.metrics.mmd2) + ", dim " +
               std::to_string(out.metrics.dim) + ", prop0 " + fmt(100.0 * out.metrics.prop0) +
               "%, depth " + std::to_string(out.metrics.effective_depth));
  return out;
}

std::string method_label(Method method, CriticRegularization mode) {
  const bool sn = mode == CriticRegularization::spectral_norm;
  if (method == Method::ggan) return sn ? "G-GAN-SN" : "G-GAN-W";
  return sn ? "SNGAN" : "WGAN-GP";
}

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRow>& runs) {
  std::vector<std::string> methods;
  for (const auto& r : runs) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& method : methods) {
    std::vector<double> mmd, dim, prop0;
    for (const auto& r : runs) {
      if (r.method != method || r.status != "ok") continue;
      mmd.push_back(r.metrics.mmd_scaled);
      dim.push_back(static_cast<double>(r.metrics.dim));
      prop0.push_back(100.0 * r.metrics.prop0);
    }
    AggregateRow row;
    row.method = method;
    row.completed = static_cast<int>(mmd.size());
    std::tie(row.mmd_mean, row.mmd_sd) = mean_sd(mmd);
    std::tie(row.dim_mean, row.dim_sd) = mean_sd(dim);
    std::tie(row.prop0_mean, row.prop0_sd) = mean_sd(prop0);
    out.push_back(row);
  }
  return out;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                 const LogFn& log) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<Method> methods{cfg.method};
  if (cfg.method == Method::ggan && cfg.with_baseline) methods.push_back(Method::baseline);

  struct Task {
    int replication;
    Method method;
  };
  std::vector<Task> tasks;
  for (int r = 0; r < cfg.replications; ++r) {
    for (Method m : methods) tasks.push_back({r, m});
  }

  auto run_task = [&](const Task& task) {
    RunRow row;
    row.method = method_label(task.method, cfg.regularization);
    row.replication = task.replication;
    row.seed = cfg.seed + static_cast<std::uint64_t>(task.replication);
    try {
      const RunData data = load_run_data(cfg, row.seed);
      RunResult result = run_single(cfg, data, task.method, row.seed, log);
      row.metrics = result.metrics;
      row.tau1 = result.tau1;
      write_training_log(out_dir / ("train_log_" + row.method + "_r" +
                                    std::to_string(task.replication) + ".csv"),
                         result.model.history);
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      say(log, "warning: " + row.method + " replication " + std::to_string(task.replication) +
                   " aborted: " + e.what());
    }
    return row;
  };

  ExperimentSummary summary;
  summary.runs.resize(tasks.size());
  for (std::size_t start = 0; start < tasks.size(); start += static_cast<std::size_t>(cfg.jobs)) {
    const std::size_t stop = std::min(tasks.size(), start + static_cast<std::size_t>(cfg.jobs));
    std::vector<std::future<RunRow>> pending;
    for (std::size_t i = start; i < stop; ++i) {
      pending.push_back(std::async(cfg.jobs > 1 ? std::launch::async : std::launch::deferred,
                                   run_task, tasks[i]));
    }
    for (std::size_t i = start; i < stop; ++i) summary.runs[i] = pending[i - start].get();
  }
  summary.aggregate = aggregate_runs(summary.runs);
  for (const auto& agg : summary.aggregate) {
    if (agg.completed < cfg.replications) {
      say(log, "warning: " + agg.method + " aggregated over " + std::to_string(agg.completed) +
                   " of " + std::to_string(cfg.replications) + " replications");
    }
  }
  write_runs_csv(out_dir / "runs.csv", summary.runs);
  write_results_csv(out_dir / "results.csv", summary.aggregate);
  return summary;
}

LambdaChoice sequential_lambda_search(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  if (cfg.lambda1_grid.empty() || cfg.lambda2_grid.empty() || cfg.lambda3_grid.empty()) {
    throw ConfigError("lambda search needs nonempty lambda1_grid, lambda2_grid and lambda3_grid");
  }
  const RunData data = load_run_data(cfg, cfg.seed);
  LambdaChoice choice;
  const std::array<const std::vector<double>*, 3> grids{&cfg.lambda1_grid, &cfg.lambda2_grid,
                                                        &cfg.lambda3_grid};
  for (int stage = 0; stage < 3; ++stage) {
    double best_value = 0.0;
    double best_mmd = 0.0;
    bool have = false;
    for (double value : *grids[static_cast<std::size_t>(stage)]) {
      ExperimentConfig trial = cfg;
      std::array<double, 3> lambdas = choice.lambdas;
      lambdas[static_cast<std::size_t>(stage)] = value;
      for (int later = stage + 1; later < 3; ++later) lambdas[static_cast<std::size_t>(later)] = 0.0;
      trial.lambda1 = lambdas[0];
      trial.lambda2 = lambdas[1];
      trial.lambda3 = lambdas[2];
      const RunResult result = run_single(trial, data, Method::ggan, cfg.seed, log);
      choice.trials.push_back({stage + 1, lambdas[0], lambdas[1], lambdas[2], result.metrics.mmd2});
      const double mmd = result.metrics.mmd2;
      if (!have || mmd < best_mmd || (mmd == best_mmd && value > best_value)) {
        best_value = value;
        best_mmd = mmd;
        have = true;
      }
    }
    choice.lambdas[static_cast<std::size_t>(stage)] = best_value;
    say(log, "stage " + std::to_string(stage + 1) + ": lambda" + std::to_string(stage + 1) + " = " +
                 fmt(best_value) + " (mmd2 " + fmt(best_mmd) + ")");
  }
  return choice;
}

std::vector<SweepRow> run_dim_sweep(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  if (cfg.sweep_configs.empty()) throw ConfigError("sweep_configs must be nonempty");
  std::vector<SweepRow> rows;
  for (const auto& point : cfg.sweep_configs) {
    SweepRow row;
    row.point = point;
    for (int r = 0; r < cfg.replications; ++r) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
      const RunData data = load_run_data(cfg, seed);
      auto [g, d] = make_initial_models(cfg, Method::baseline, point.input_dim, point.arch,
                                        data.output_bound, data.train.cols(), seed);
      const TrainedModel trained =
          train(data.train, make_train_config(cfg, Method::baseline, seed), std::move(g), std::move(d));
      const MmdReference reference(data.test, kernel_of(cfg));
      const MetricsReport m = evaluate_generator(trained.generator, reference, cfg.eval_samples,
                                                 derive_seed(seed, kEvalTag), cfg.tau2);
      row.mmd_runs.push_back(m.mmd2);
      say(log, std::to_string(point.input_dim) + "-" + std::to_string(point.arch.depth) + "x" +
                   std::to_string(point.arch.width) + " seed " + std::to_string(seed) + ": mmd2 " +
                   fmt(m.mmd2));
    }
    std::tie(row.mmd_mean, row.mmd_sd) = mean_sd(row.mmd_runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "d,l,w,mmd_mean,mmd_sd\n";
  for (const auto& r : rows) {
    out << r.point.input_dim << ',' << r.point.arch.depth << ',' << r.point.arch.width << ','
        << r.mmd_mean << ',' << r.mmd_sd << '\n';
  }
}

void write_sweep_svg(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  constexpr double width = 640, height = 400, margin = 60;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double a = rows[i].mmd_mean - rows[i].mmd_sd;
    const double b = rows[i].mmd_mean + rows[i].mmd_sd;
    lo = i == 0 ? a : std::min(lo, a);
    hi = i == 0 ? b : std::max(hi, b);
  }
  if (hi - lo < 1e-300) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double span_x = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;
  auto px = [&](std::size_t i) {
    return margin + (width - 2 * margin) * (rows.size() > 1 ? static_cast<double>(i) / span_x : 0.5);
  };
  auto py = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };
  auto polyline = [&](const char* cls, const char* colour, const char* dash, double sign) {
    std::ostringstream s;
    s << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << colour
      << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) s << ' ';
      s << px(i) << ',' << py(rows[i].mmd_mean + sign * rows[i].mmd_sd);
    }
    s << "\"/>\n";
    return s.str();
  };
  auto out = open_out(path);
  out.precision(6);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << "MMD^2 by generator configuration</text>\n"
      << "  <text x=\"" << margin << "\" y=\"" << margin - 8 << "\" font-size=\"11\">" << hi
      << "</text>\n"
      << "  <text x=\"" << margin << "\" y=\"" << height - margin + 36 << "\" font-size=\"11\">" << lo
      << "</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << "  <text x=\"" << px(i) << "\" y=\"" << height - margin + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << rows[i].point.input_dim << '-'
        << rows[i].point.arch.depth << 'x' << rows[i].point.arch.width << "</text>\n";
  }
  out << polyline("mean", "#1f77b4", "", 0.0)
      << polyline("mean-plus-sd", "#ff7f0e", " stroke-dasharray=\"4 3\"", 1.0)
      << polyline("mean-minus-sd", "#ff7f0e", " stroke-dasharray=\"4 3\"", -1.0) << "</svg>\n";
}

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& history) {
  auto out = open_out(path);
  out << "iteration,critic_loss,generator_loss,M_B,P_theta,Q_theta,lambda1,lambda2,lambda3,"
         "nonzero_rows\n";
  for (const auto& r : history) {
    out << r.iteration << ',' << r.critic_loss << ',' << r.generator_loss << ',' << r.group_row
        << ',' << r.depth << ',' << r.sparsity << ',' << r.lambda1 << ',' << r.lambda2 << ','
        << r.lambda3 << ',' << r.nonzero_rows << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& m) {
  auto out = open_out(path);
  out << "mmd_x1e4,dim,prop0_pct,eff_depth\n";
  out << m.mmd_scaled << ',' << m.dim << ',' << 100.0 * m.prop0 << ',' << m.effective_depth << '\n';
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRow>& runs) {
  auto out = open_out(path);
  out << "method,replication,seed,status,mmd2,mmd_x1e4,dim,prop0_pct,eff_depth,tau1\n";
  for (const auto& r : runs) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.method << ',' << r.replication << ',' << r.seed << ',' << status << ','
        << r.metrics.mmd2 << ',' << r.metrics.mmd_scaled << ',' << r.metrics.dim << ','
        << 100.0 * r.metrics.prop0 << ',' << r.metrics.effective_depth << ',' << r.tau1 << '\n';
  }
}

void write_results_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  auto out = open_out(path);
  out << "method,mmd_x1e4_mean,mmd_x1e4_sd,dim_mean,dim_sd,prop0_mean,prop0_sd\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.mmd_mean << ',' << r.mmd_sd << ',' << r.dim_mean << ',' << r.dim_sd
        << ',' << r.prop0_mean << ',' << r.prop0_sd << '\n';
  }
}

MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const ExperimentConfig& cfg) {
  const RunData data = load_run_data(cfg, ckpt.seed);
  const MmdReference reference(data.test, kernel_of(cfg));
  return evaluate_generator(ckpt.generator, reference, cfg.eval_samples,
                            derive_seed(ckpt.seed, kEvalTag), cfg.tau2);
}

}  // namespace ggan
