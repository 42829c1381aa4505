#include "ggan/ggan_c.h"

#include "ggan/checkpoint.hpp"
#include "ggan/config.hpp"
#include "ggan/experiment.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

struct ggan_config {
  ggan::ExperimentConfig cfg;
};

struct ggan_model {
  ggan::Checkpoint ckpt;
};

namespace {

thread_local std::string last_error;

ggan_status fail(ggan_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps the library's exception types onto status codes.
template <class F>
ggan_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return GGAN_OK;
  } catch (const ggan::ConfigError& e) {
    return fail(GGAN_ERR_PARSE, e.what());
  } catch (const ggan::CheckpointError& e) {
    return fail(GGAN_ERR_PARSE, e.what());
  } catch (const ggan::IngestionError& e) {
    return fail(GGAN_ERR_PARSE, e.what());
  } catch (const ggan::ShapeError& e) {
    return fail(GGAN_ERR_SHAPE, e.what());
  } catch (const ggan::ContractError& e) {
    return fail(GGAN_ERR_CONTRACT, e.what());
  } catch (const ggan::NumericError& e) {
    return fail(GGAN_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(GGAN_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(GGAN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GGAN_ERR_INTERNAL, "out of memory");
  } catch (const std::runtime_error& e) {
    return fail(GGAN_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(GGAN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GGAN_ERR_INTERNAL, "unknown exception");
  }
}

ggan_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  if (buf && cap < s.size() + 1) return fail(GGAN_ERR_INVALID_ARGUMENT, "buffer too small");
  return GGAN_OK;
}

ggan::LogFn wrap_log(ggan_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

void fill(ggan_metrics* out, const ggan::MetricsReport& m) {
  out->mmd2 = m.mmd2;
  out->mmd_x1e4 = m.mmd_scaled;
  out->dim = m.dim;
  out->prop0 = m.prop0;
  out->effective_depth = m.effective_depth;
}

ggan::ExperimentConfig stored_config(const ggan::Checkpoint& ckpt) {
  ggan::ExperimentConfig cfg;
  for (const auto& [key, value] : ckpt.config) ggan::set_config_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

#define GGAN_REQUIRE(cond, msg) \
  if (!(cond)) return fail(GGAN_ERR_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* ggan_version(void) { return "1.0.0"; }

const char* ggan_last_error(void) { return last_error.c_str(); }

const char* ggan_status_name(ggan_status status) {
  switch (status) {
    case GGAN_OK: return "ok";
    case GGAN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GGAN_ERR_SHAPE: return "shape error";
    case GGAN_ERR_CONTRACT: return "contract violation";
    case GGAN_ERR_PARSE: return "parse error";
    case GGAN_ERR_IO: return "i/o error";
    case GGAN_ERR_NUMERIC: return "numeric error";
    case GGAN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

ggan_status ggan_config_create(ggan_config** out) {
  GGAN_REQUIRE(out, "ggan_config_create: out is NULL");
  return guarded([&] { *out = new ggan_config{}; });
}

ggan_status ggan_config_load(const char* path, ggan_config** out) {
  GGAN_REQUIRE(path && out, "ggan_config_load: NULL argument");
  return guarded([&] { *out = new ggan_config{ggan::load_config(path)}; });
}

ggan_status ggan_config_parse(ggan_config* cfg, const char* text) {
  GGAN_REQUIRE(cfg && text, "ggan_config_parse: NULL argument");
  return guarded([&] { cfg->cfg = ggan::parse_config(text, cfg->cfg); });
}

ggan_status ggan_config_clone(const ggan_config* cfg, ggan_config** out) {
  GGAN_REQUIRE(cfg && out, "ggan_config_clone: NULL argument");
  return guarded([&] { *out = new ggan_config{cfg->cfg}; });
}

void ggan_config_destroy(ggan_config* cfg) { delete cfg; }

ggan_status ggan_config_set(ggan_config* cfg, const char* key, const char* value) {
  GGAN_REQUIRE(cfg && key && value, "ggan_config_set: NULL argument");
  return guarded([&] {
    ggan::ExperimentConfig next = cfg->cfg;
    ggan::set_config_value(next, key, value);
    cfg->cfg = std::move(next);
  });
}

ggan_status ggan_config_get(const ggan_config* cfg, const char* key, char* buf, size_t cap,
                            size_t* needed) {
  GGAN_REQUIRE(cfg && key, "ggan_config_get: NULL argument");
  std::string value;
  const ggan_status st = guarded([&] { value = ggan::get_config_value(cfg->cfg, key); });
  return st == GGAN_OK ? copy_out(value, buf, cap, needed) : st;
}

ggan_status ggan_config_to_string(const ggan_config* cfg, char* buf, size_t cap, size_t* needed) {
  GGAN_REQUIRE(cfg, "ggan_config_to_string: cfg is NULL");
  std::string text;
  const ggan_status st = guarded([&] { text = ggan::print_config(cfg->cfg); });
  return st == GGAN_OK ? copy_out(text, buf, cap, needed) : st;
}

size_t ggan_config_key_count(void) { return ggan::config_keys().size(); }

const char* ggan_config_key_name(size_t index) {
  const auto& keys = ggan::config_keys();
  return index < keys.size() ? keys[index].name.data() : nullptr;
}

const char* ggan_config_key_help(size_t index) {
  const auto& keys = ggan::config_keys();
  return index < keys.size() ? keys[index].help.data() : nullptr;
}

ggan_status ggan_train(const ggan_config* cfg, const char* out_dir, ggan_log_fn log, void* user,
                       ggan_model** out_model, ggan_metrics* out_metrics) {
  GGAN_REQUIRE(cfg && out_dir, "ggan_train: NULL argument");
  return guarded([&] {
    const auto& c = cfg->cfg;
    c.validate();
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const ggan::RunData data = ggan::load_run_data(c, c.seed);
    ggan::RunResult result = ggan::run_single(c, data, c.method, c.seed, wrap_log(log, user));
    ggan::write_training_log(dir / "train_log.csv", result.model.history);
    ggan::write_metrics_csv(dir / "metrics.csv", result.metrics);
    write_text(dir / "config.cfg", ggan::print_config(c));
    ggan::Checkpoint ckpt{std::move(result.model.generator), std::move(result.model.discriminator),
                          c.seed, ggan::config_pairs(c)};
    ggan::save_checkpoint(dir / "model.ckpt", ckpt);
    if (out_metrics) fill(out_metrics, result.metrics);
    if (out_model) *out_model = new ggan_model{std::move(ckpt)};
  });
}

ggan_status ggan_experiment(const ggan_config* cfg, const char* out_dir, ggan_log_fn log,
                            void* user) {
  GGAN_REQUIRE(cfg && out_dir, "ggan_experiment: NULL argument");
  return guarded([&] {
    ggan::run_experiment(cfg->cfg, out_dir, wrap_log(log, user));
    write_text(std::filesystem::path(out_dir) / "config.cfg", ggan::print_config(cfg->cfg));
  });
}

ggan_status ggan_sweep(const ggan_config* cfg, const char* out_dir, ggan_log_fn log, void* user) {
  GGAN_REQUIRE(cfg && out_dir, "ggan_sweep: NULL argument");
  return guarded([&] {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const auto rows = ggan::run_dim_sweep(cfg->cfg, wrap_log(log, user));
    ggan::write_sweep_csv(dir / "sweep.csv", rows);
    ggan::write_sweep_svg(dir / "sweep.svg", rows);
    write_text(dir / "config.cfg", ggan::print_config(cfg->cfg));
  });
}

ggan_status ggan_tune(const ggan_config* cfg, const char* out_dir, ggan_log_fn log, void* user,
                      double out_lambdas[3]) {
  GGAN_REQUIRE(cfg && out_dir, "ggan_tune: NULL argument");
  return guarded([&] {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const auto choice = ggan::sequential_lambda_search(cfg->cfg, wrap_log(log, user));
    std::ofstream out(dir / "tune.csv");
    if (!out) throw std::runtime_error("cannot write '" + (dir / "tune.csv").string() + "'");
    out.precision(17);
    out << "stage,lambda1,lambda2,lambda3,mmd2\n";
    for (const auto& t : choice.trials) {
      out << t.stage << ',' << t.lambda1 << ',' << t.lambda2 << ',' << t.lambda3 << ',' << t.mmd2
          << '\n';
    }
    ggan::ExperimentConfig tuned = cfg->cfg;
    tuned.lambda1 = choice.lambdas[0];
    tuned.lambda2 = choice.lambdas[1];
    tuned.lambda3 = choice.lambdas[2];
    write_text(dir / "tuned.cfg", ggan::print_config(tuned));
    if (out_lambdas) {
      for (int i = 0; i < 3; ++i) out_lambdas[i] = choice.lambdas[static_cast<std::size_t>(i)];
    }
  });
}

ggan_status ggan_model_load(const char* path, ggan_model** out) {
  GGAN_REQUIRE(path && out, "ggan_model_load: NULL argument");
  return guarded([&] { *out = new ggan_model{ggan::load_checkpoint(path)}; });
}

ggan_status ggan_model_save(const ggan_model* model, const char* path) {
  GGAN_REQUIRE(model && path, "ggan_model_save: NULL argument");
  return guarded([&] { ggan::save_checkpoint(path, model->ckpt); });
}

void ggan_model_destroy(ggan_model* model) { delete model; }

ggan_status ggan_model_info(const ggan_model* model, int64_t* input_dim, int64_t* output_dim,
                            int64_t* depth, int64_t* width) {
  GGAN_REQUIRE(model, "ggan_model_info: model is NULL");
  const auto& g = model->ckpt.generator;
  if (input_dim) *input_dim = g.input_dim();
  if (output_dim) *output_dim = g.output_dim();
  if (depth) *depth = g.depth();
  if (width) *width = g.width();
  return GGAN_OK;
}

ggan_status ggan_model_config(const ggan_model* model, ggan_config** out) {
  GGAN_REQUIRE(model && out, "ggan_model_config: NULL argument");
  return guarded([&] { *out = new ggan_config{stored_config(model->ckpt)}; });
}

ggan_status ggan_model_generate(const ggan_model* model, int64_t n, uint64_t seed, double* out) {
  GGAN_REQUIRE(model && out, "ggan_model_generate: NULL argument");
  GGAN_REQUIRE(n >= 0, "ggan_model_generate: n must be >= 0");
  return guarded([&] {
    const auto& g = model->ckpt.generator;
    std::mt19937_64 rng(seed);
    const ggan::Matrix samples = ggan::generator_forward(g, ggan::sample_noise(rng, n, g.input_dim()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out, samples.rows(), samples.cols()) = samples;
  });
}

ggan_status ggan_model_generate_csv(const ggan_model* model, int64_t n, uint64_t seed,
                                    const char* path) {
  GGAN_REQUIRE(model && path, "ggan_model_generate_csv: NULL argument");
  GGAN_REQUIRE(n >= 0, "ggan_model_generate_csv: n must be >= 0");
  return guarded([&] {
    const auto& g = model->ckpt.generator;
    std::mt19937_64 rng(seed);
    ggan::write_csv(path, ggan::generator_forward(g, ggan::sample_noise(rng, n, g.input_dim())));
  });
}

ggan_status ggan_model_evaluate(const ggan_model* model, const ggan_config* cfg,
                                ggan_metrics* out) {
  GGAN_REQUIRE(model && out, "ggan_model_evaluate: NULL argument");
  return guarded([&] {
    const ggan::ExperimentConfig c = cfg ? cfg->cfg : stored_config(model->ckpt);
    fill(out, ggan::evaluate_checkpoint(model->ckpt, c));
  });
}

ggan_status ggan_mmd2(const double* a, int64_t na, const double* b, int64_t nb, int64_t dim,
                      const double* bandwidths, size_t n_bandwidths, double* out) {
  GGAN_REQUIRE(a && b && out, "ggan_mmd2: NULL argument");
  GGAN_REQUIRE(na > 0 && nb > 0 && dim > 0, "ggan_mmd2: sizes must be positive");
  return guarded([&] {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const ggan::Matrix ma = Eigen::Map<const RowMajor>(a, na, dim);
    const ggan::Matrix mb = Eigen::Map<const RowMajor>(b, nb, dim);
    ggan::KernelMix k;
    if (bandwidths && n_bandwidths > 0) k.bandwidths.assign(bandwidths, bandwidths + n_bandwidths);
    k.validate();
    *out = ggan::mmd_squared(ma, mb, k);
  });
}

ggan_status ggan_frechet(const double* mean1, const double* cov1, const double* mean2,
                         const double* cov2, int64_t dim, double* out) {
  GGAN_REQUIRE(mean1 && cov1 && mean2 && cov2 && out, "ggan_frechet: NULL argument");
  GGAN_REQUIRE(dim > 0, "ggan_frechet: dim must be positive");
  return guarded([&] {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const ggan::Vector m1 = Eigen::Map<const ggan::Vector>(mean1, dim);
    const ggan::Vector m2 = Eigen::Map<const ggan::Vector>(mean2, dim);
    const ggan::Matrix c1 = Eigen::Map<const RowMajor>(cov1, dim, dim);
    const ggan::Matrix c2 = Eigen::Map<const RowMajor>(cov2, dim, dim);
    *out = ggan::frechet_gaussian(m1, c1, m2, c2);
  });
}

}  // extern "C"
