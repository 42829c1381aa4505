#include "ggan/config.hpp"

#include <cctype>
#include <charconv>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace ggan {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

double to_double(std::string_view s) {
  s = trim(s);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("'" + std::string(s) + "' is not a number");
  }
  return v;
}

template <typename T>
T to_integer(std::string_view s) {
  s = trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + std::string(s) + "' is not an integer");
  }
  return v;
}

bool to_bool(std::string_view s) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("'" + std::string(s) + "' is not a boolean");
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  // Prefer the shortest spelling that still reads back identically.
  for (int digits = 1; digits <= 17; ++digits) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", digits, x);
    double back = 0;
    std::from_chars(shorter, shorter + std::strlen(shorter), back);
    if (back == x) return shorter;
  }
  return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

std::string fmt_arch(const Architecture& a) {
  return std::to_string(a.depth) + "x" + std::to_string(a.width);
}

std::string fmt_optional(const std::optional<double>& v, std::string_view none) {
  return v ? fmt(*v) : std::string(none);
}

struct Entry {
  ConfigKey key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Entry integer_entry(std::string_view name, std::string_view help, T ExperimentConfig::*field) {
  return {{name, help},
          [field](ExperimentConfig& c, std::string_view v) { c.*field = to_integer<T>(v); },
          [field](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

Entry real_entry(std::string_view name, std::string_view help, double ExperimentConfig::*field) {
  return {{name, help},
          [field](ExperimentConfig& c, std::string_view v) { c.*field = to_double(v); },
          [field](const ExperimentConfig& c) { return fmt(c.*field); }};
}

Entry bool_entry(std::string_view name, std::string_view help, bool ExperimentConfig::*field) {
  return {{name, help},
          [field](ExperimentConfig& c, std::string_view v) { c.*field = to_bool(v); },
          [field](const ExperimentConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

Entry grid_entry(std::string_view name, std::string_view help,
                 std::vector<double> ExperimentConfig::*field) {
  return {{name, help},
          [field](ExperimentConfig& c, std::string_view v) { c.*field = parse_grid(v); },
          [field](const ExperimentConfig& c) { return fmt_list(c.*field); }};
}

Entry arch_entry(std::string_view name, std::string_view help, Architecture ExperimentConfig::*field) {
  return {{name, help},
          [field](ExperimentConfig& c, std::string_view v) { c.*field = parse_architecture(v); },
          [field](const ExperimentConfig& c) { return fmt_arch(c.*field); }};
}

Entry optional_entry(std::string_view name, std::string_view help, std::string_view none,
                     std::optional<double> ExperimentConfig::*field) {
  return {{name, help},
          [field, none](ExperimentConfig& c, std::string_view v) {
            v = trim(v);
            if (v == none) {
              c.*field = std::nullopt;
            } else {
              c.*field = to_double(v);
            }
          },
          [field, none](const ExperimentConfig& c) { return fmt_optional(c.*field, none); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    using C = ExperimentConfig;
    std::vector<Entry> t;
    t.push_back({{"dataset", "M1, M2, M3, M4, or a path to a numeric CSV file"},
                 [](C& c, std::string_view v) { c.dataset = std::string(trim(v)); },
                 [](const C& c) { return c.dataset; }});
    t.push_back(bool_entry("csv_header", "CSV input starts with a header line", &C::csv_header));
    t.push_back(bool_entry("csv_minmax", "rescale CSV columns to [0, 1]", &C::csv_minmax));
    t.push_back(integer_entry("train_size", "training samples n", &C::train_size));
    t.push_back(integer_entry("test_size", "held-out samples M", &C::test_size));
    t.push_back(integer_entry("eval_samples", "generated samples N used for MMD", &C::eval_samples));
    t.push_back(integer_entry("initial_input_dimension", "noise dimension d (B is d x d)",
                              &C::initial_input_dimension));
    t.push_back(arch_entry("generator_architecture", "generator depth x width",
                           &C::generator_architecture));
    t.push_back(arch_entry("discriminator_architecture", "discriminator depth x width",
                           &C::discriminator_architecture));
    t.push_back(real_entry("init_std", "standard deviation of initial weights", &C::init_std));
    t.push_back(optional_entry("output_bound", "generator output clamp; auto = max |x| of data",
                               "auto", &C::output_bound));
    t.push_back(optional_entry("input_map_cap", "elementwise bound on |B|", "none",
                               &C::input_map_cap));
    t.push_back({{"method", "ggan (learnable B, penalties) or baseline (B = I fixed, no penalties)"},
                 [](C& c, std::string_view v) {
                   v = trim(v);
                   if (v == "ggan") {
                     c.method = Method::ggan;
                   } else if (v == "baseline") {
                     c.method = Method::baseline;
                   } else {
                     throw ConfigError("method must be ggan or baseline");
                   }
                 },
                 [](const C& c) { return std::string(c.method == Method::ggan ? "ggan" : "baseline"); }});
    t.push_back({{"regularization", "critic regularization: spectral_norm or gradient_penalty"},
                 [](C& c, std::string_view v) { c.regularization = critic_regularization_from(trim(v)); },
                 [](const C& c) { return std::string(to_string(c.regularization)); }});
    t.push_back(real_entry("learning_rate", "Adam learning rate", &C::learning_rate));
    t.push_back(real_entry("adam_beta1", "Adam first-moment decay", &C::adam_beta1));
    t.push_back(real_entry("adam_beta2", "Adam second-moment decay", &C::adam_beta2));
    t.push_back(integer_entry("critical_step", "critic updates per generator update", &C::critical_step));
    t.push_back(integer_entry("training_batch_size", "minibatch size", &C::training_batch_size));
    t.push_back(real_entry("weight_of_gradient_penalty", "gradient-penalty weight",
                           &C::weight_of_gradient_penalty));
    t.push_back(integer_entry("number_of_updates", "generator updates T", &C::number_of_updates));
    t.push_back(real_entry("expansion_factor", "penalty growth factor (first half)",
                           &C::expansion_factor));
    t.push_back(real_entry("shrinkage_factor", "penalty decay factor (second half)",
                           &C::shrinkage_factor));
    t.push_back(integer_entry("interval_step", "iterations between penalty updates", &C::interval_step));
    t.push_back(integer_entry("log_interval", "iterations between log rows", &C::log_interval));
    t.push_back(real_entry("lambda1", "initial group row penalty weight", &C::lambda1));
    t.push_back(real_entry("lambda2", "initial depth penalty weight", &C::lambda2));
    t.push_back(real_entry("lambda3", "initial sparsity penalty weight", &C::lambda3));
    t.push_back(real_entry("tau1", "row-norm truncation threshold for B during training", &C::tau1));
    t.push_back(real_entry("tau2", "entry truncation threshold for theta", &C::tau2));
    t.push_back(bool_entry("select_tau1", "pick the final tau1 by MMD after training", &C::select_tau1));
    t.push_back(real_entry("tau1_tolerance", "relative MMD increase allowed by tau1 selection",
                           &C::tau1_tolerance));
    t.push_back({{"truncation", "second_half, final or never"},
                 [](C& c, std::string_view v) { c.truncation = truncation_policy_from(trim(v)); },
                 [](const C& c) { return std::string(to_string(c.truncation)); }});
    t.push_back(grid_entry("lambda1_grid", "search grid for lambda1", &C::lambda1_grid));
    t.push_back(grid_entry("lambda2_grid", "search grid for lambda2", &C::lambda2_grid));
    t.push_back(grid_entry("lambda3_grid", "search grid for lambda3", &C::lambda3_grid));
    t.push_back(integer_entry("replications", "independent seeded runs R", &C::replications));
    t.push_back(bool_entry("with_baseline", "experiment also runs the unpenalized baseline",
                           &C::with_baseline));
    t.push_back(grid_entry("kernel_bandwidths", "MMD kernel bandwidths", &C::kernel_bandwidths));
    t.push_back({{"sweep_configs", "comma list of d-depthxwidth generator configurations"},
                 [](C& c, std::string_view v) {
                   c.sweep_configs.clear();
                   for (auto item : split(v, ',')) c.sweep_configs.push_back(parse_sweep_point(item));
                 },
                 [](const C& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.sweep_configs.size(); ++i) {
                     if (i) out += ',';
                     out += std::to_string(c.sweep_configs[i].input_dim) + "-" +
                            fmt_arch(c.sweep_configs[i].arch);
                   }
                   return out;
                 }});
    t.push_back(integer_entry("seed", "base random seed", &C::seed));
    t.push_back(integer_entry("jobs", "concurrent runs", &C::jobs));
    t.push_back(bool_entry("verbose", "print training progress to stderr", &C::verbose));
    return t;
  }();
  return table;
}

const Entry& find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

Architecture parse_architecture(std::string_view text) {
  text = trim(text);
  const auto x = text.find('x');
  if (x == std::string_view::npos) {
    throw ConfigError("architecture '" + std::string(text) + "' is not depthxwidth");
  }
  Architecture a{to_integer<Index>(text.substr(0, x)), to_integer<Index>(text.substr(x + 1))};
  if (a.depth < 1 || a.width < 1) throw ConfigError("architecture sizes must be >= 1");
  return a;
}

SweepPoint parse_sweep_point(std::string_view text) {
  text = trim(text);
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw ConfigError("sweep configuration '" + std::string(text) + "' is not d-depthxwidth");
  }
  SweepPoint p{to_integer<Index>(text.substr(0, dash)), parse_architecture(text.substr(dash + 1))};
  if (p.input_dim < 1) throw ConfigError("sweep input dimension must be >= 1");
  return p;
}

std::vector<double> parse_grid(std::string_view text) {
  text = trim(text);
  std::vector<double> out;
  if (text.empty()) return out;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("range '" + std::string(text) + "' is not lo:step:hi");
    const double lo = to_double(parts[0]);
    const double step = to_double(parts[1]);
    const double hi = to_double(parts[2]);
    if (!(step > 0.0) || hi < lo) throw ConfigError("range '" + std::string(text) + "' is empty");
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= count; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", lo + static_cast<double>(i) * step);
      out.push_back(to_double(buf));
    }
    return out;
  }
  for (auto item : split(text, ',')) out.push_back(to_double(item));
  return out;
}

void ExperimentConfig::validate() const {
  if (train_size < 1 || test_size < 1 || eval_samples < 1) {
    throw ConfigError("sample sizes must be >= 1");
  }
  if (initial_input_dimension < 1) throw ConfigError("initial_input_dimension must be >= 1");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be > 0");
  if (output_bound && !(*output_bound > 0.0)) throw ConfigError("output_bound must be > 0");
  if (input_map_cap && !(*input_map_cap > 0.0)) throw ConfigError("input_map_cap must be > 0");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(tau1_tolerance >= 0.0)) throw ConfigError("tau1_tolerance must be >= 0");
  if (kernel_bandwidths.empty()) throw ConfigError("kernel_bandwidths must be nonempty");
  for (double s : kernel_bandwidths) {
    if (!(s > 0.0)) throw ConfigError("kernel bandwidths must be > 0");
  }
  for (const auto* grid : {&lambda1_grid, &lambda2_grid, &lambda3_grid}) {
    for (double v : *grid) {
      if (v < 0.0) throw ConfigError("search grids must hold nonnegative values");
    }
  }
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || tau1 < 0 || tau2 < 0) {
    throw ConfigError("penalty weights and thresholds must be >= 0");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto& entry = find_entry(trim(key));
  try {
    entry.set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(entry.key.name) + ": " + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string(entry.key.name) + ": " + e.what());
  }
}

std::string get_config_value(const ExperimentConfig& cfg, std::string_view key) {
  return find_entry(trim(key)).get(cfg);
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<std::pair<std::string, std::string>> config_pairs(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries()) out.emplace_back(std::string(e.key.name), e.get(cfg));
  return out;
}

std::string print_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_pairs(cfg)) out += key + " = " + value + "\n";
  return out;
}

}  // namespace ggan
