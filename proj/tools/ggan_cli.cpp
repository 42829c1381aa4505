// Command-line front end. Talks to the library only through ggan_c.h.
#include "ggan/ggan_c.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
  void operator()(ggan_config* c) const { ggan_config_destroy(c); }
};
struct ModelDeleter {
  void operator()(ggan_model* m) const { ggan_model_destroy(m); }
};
using ConfigPtr = std::unique_ptr<ggan_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<ggan_model, ModelDeleter>;

constexpr int kUsageError = 2;
constexpr int kRunError = 1;

// Thrown for problems the user can fix on the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(ggan_status st, bool usage = false) {
  if (st == GGAN_OK) return;
  std::string msg = std::string(ggan_status_name(st)) + ": " + ggan_last_error();
  if (usage) throw UsageError(msg);
  throw RunError(msg);
}

void log_stderr(const char* msg, void*) { std::fprintf(stderr, "%s\n", msg); }

std::string config_text(const ggan_config* cfg) {
  size_t needed = 0;
  check(ggan_config_to_string(cfg, nullptr, 0, &needed));
  std::string text(needed, '\0');
  check(ggan_config_to_string(cfg, text.data(), text.size(), &needed));
  text.resize(needed - 1);
  return text;
}

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out_dir = "out";
  bool print_config = false;
  std::map<std::string, std::string> overrides;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "configuration file (key = value lines)")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", common.out_dir, "output directory")->capture_default_str();
  sub->add_flag("--print-config", common.print_config,
                "print the resolved configuration and exit");
  auto* group = sub->add_option_group("Configuration keys", "override any configuration key");
  for (size_t i = 0; i < ggan_config_key_count(); ++i) {
    const std::string key = ggan_config_key_name(i);
    auto* opt = group->add_option("--" + key, common.overrides[key], ggan_config_key_help(i));
    common.key_options.emplace_back(key, opt);
  }
}

// Base configuration, then the --config file, then explicit flags.
ConfigPtr resolve(const Common& common, ConfigPtr base = nullptr) {
  ggan_config* raw = nullptr;
  if (!base) {
    check(ggan_config_create(&raw));
    base.reset(raw);
  }
  if (!common.config_path.empty()) {
    std::ifstream in(common.config_path);
    std::stringstream text;
    text << in.rdbuf();
    if (!in) throw UsageError("cannot read '" + common.config_path + "'");
    // file keys land on top of the base, so checkpoint-derived values survive
    check(ggan_config_parse(base.get(), text.str().c_str()), true);
  }
  for (const auto& [key, opt] : common.key_options) {
    if (opt->count() == 0) continue;
    check(ggan_config_set(base.get(), key.c_str(), common.overrides.at(key).c_str()), true);
  }
  return base;
}

void print_metrics(const ggan_metrics& m) {
  std::printf("mmd_x1e4=%.6g dim=%lld prop0_pct=%.4g eff_depth=%lld\n", m.mmd_x1e4,
              static_cast<long long>(m.dim), 100.0 * m.prop0,
              static_cast<long long>(m.effective_depth));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized GAN training with input-dimension and architecture selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ggan_version()));

  Common common;
  auto* train = app.add_subcommand("train", "train and evaluate a single model");
  auto* experiment = app.add_subcommand("experiment", "replicated runs with aggregate results");
  auto* sweep = app.add_subcommand("sweep", "baseline MMD across generator configurations");
  auto* tune = app.add_subcommand("tune", "sequential search of the initial penalty weights");
  auto* eval = app.add_subcommand("eval", "recompute metrics of a saved model");
  auto* gen = app.add_subcommand("gen", "sample from a saved model to CSV");
  for (auto* sub : {train, experiment, sweep, tune, eval, gen}) add_common(sub, common);

  std::string checkpoint;
  long long count = 1000;
  for (auto* sub : {eval, gen}) {
    sub->add_option("--checkpoint", checkpoint, "model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
  }
  gen->add_option("-n,--samples", count, "number of samples")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    ModelPtr model;
    ConfigPtr cfg;
    if (eval->parsed() || gen->parsed()) {
      ggan_model* raw = nullptr;
      check(ggan_model_load(checkpoint.c_str(), &raw));
      model.reset(raw);
      ggan_config* stored = nullptr;
      check(ggan_model_config(model.get(), &stored));
      cfg = resolve(common, ConfigPtr(stored));
    } else {
      cfg = resolve(common);
    }
    if (common.print_config) {
      std::fputs(config_text(cfg.get()).c_str(), stdout);
      return 0;
    }
    const char* out = common.out_dir.c_str();

    if (train->parsed()) {
      ggan_metrics m{};
      check(ggan_train(cfg.get(), out, log_stderr, nullptr, nullptr, &m));
      print_metrics(m);
    } else if (experiment->parsed()) {
      check(ggan_experiment(cfg.get(), out, log_stderr, nullptr));
      std::printf("wrote %s/results.csv and %s/runs.csv\n", out, out);
    } else if (sweep->parsed()) {
      check(ggan_sweep(cfg.get(), out, log_stderr, nullptr));
      std::printf("wrote %s/sweep.csv and %s/sweep.svg\n", out, out);
    } else if (tune->parsed()) {
      double lambdas[3] = {0, 0, 0};
      check(ggan_tune(cfg.get(), out, log_stderr, nullptr, lambdas));
      std::printf("lambda1=%.10g lambda2=%.10g lambda3=%.10g\n", lambdas[0], lambdas[1], lambdas[2]);
    } else if (eval->parsed()) {
      ggan_metrics m{};
      check(ggan_model_evaluate(model.get(), cfg.get(), &m));
      print_metrics(m);
    } else if (gen->parsed()) {
      if (count < 0) throw UsageError("-n must be >= 0");
      char seed_text[32] = {0};
      size_t needed = 0;
      check(ggan_config_get(cfg.get(), "seed", seed_text, sizeof seed_text, &needed));
      std::filesystem::create_directories(common.out_dir);
      const std::string path = common.out_dir + "/samples.csv";
      check(ggan_model_generate_csv(model.get(), count, std::stoull(seed_text), path.c_str()));
      std::printf("wrote %lld samples to %s\n", count, path.c_str());
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\nRun with --help for usage.\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRunError;
  }
  return 0;
}
