#include "ggan/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ggan {

namespace {

constexpr const char* kMagic = "ggan-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_vector(std::ostream& out, const std::string& name, const Vector& v) {
  out << "vector " << name << ' ' << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << format_double(v(i));
  }
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of file");
    return w;
  }

  void expect(const std::string& w) {
    const auto got = word();
    if (got != w) fail("expected '" + w + "', found '" + got + "'");
  }

  long integer() {
    const auto w = word();
    long v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad integer '" + w + "'");
    return v;
  }

  std::uint64_t unsigned_integer() {
    const auto w = word();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad integer '" + w + "'");
    return v;
  }

  double real() {
    const auto w = word();
    double v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("bad number '" + w + "'");
    return v;
  }

  std::string rest_of_line() {
    std::string line;
    std::getline(in_, line);
    if (!line.empty() && line.front() == ' ') line.erase(0, 1);
    return line;
  }

  Matrix matrix(const std::string& name) {
    expect("matrix");
    expect(name);
    const long rows = integer();
    const long cols = integer();
    if (rows < 0 || cols < 0) fail("negative shape for " + name);
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
      for (long j = 0; j < cols; ++j) m(i, j) = real();
    }
    require_finite(m, name);
    return m;
  }

  Vector vector(const std::string& name) {
    expect("vector");
    expect(name);
    const long n = integer();
    if (n < 0) fail("negative length for " + name);
    Vector v(n);
    for (long i = 0; i < n; ++i) v(i) = real();
    require_finite(v, name);
    return v;
  }

  [[noreturn]] static void fail(const std::string& what) {
    throw CheckpointError("checkpoint: " + what);
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  validate(ckpt.generator);
  validate(ckpt.discriminator);
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
  const auto& g = ckpt.generator;
  const auto& d = ckpt.discriminator;
  out << kMagic << ' ' << kVersion << '\n';
  out << "seed " << ckpt.seed << '\n';
  for (const auto& [key, value] : ckpt.config) out << "config " << key << ' ' << value << '\n';
  out << "generator_layers " << g.layers.size() << '\n';
  out << "output_bound " << format_double(g.output_bound) << '\n';
  out << "input_map_cap " << (g.input_map_cap ? format_double(*g.input_map_cap) : "none") << '\n';
  write_matrix(out, "generator.input_map", g.input_map);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const auto prefix = "generator.layer" + std::to_string(l);
    write_matrix(out, prefix + ".weight", g.layers[l].weight);
    write_vector(out, prefix + ".bias", g.layers[l].bias);
  }
  out << "discriminator_layers " << d.layers.size() << '\n';
  out << "discriminator_mode " << to_string(d.mode) << '\n';
  for (std::size_t l = 0; l < d.layers.size(); ++l) {
    const auto prefix = "discriminator.layer" + std::to_string(l);
    write_matrix(out, prefix + ".weight", d.layers[l].weight);
    write_vector(out, prefix + ".bias", d.layers[l].bias);
    if (d.mode == CriticRegularization::spectral_norm) {
      write_vector(out, prefix + ".power", d.power_vectors[l]);
    }
  }
  out << "end\n";
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  Reader r(in);
  r.expect(kMagic);
  if (r.integer() != kVersion) Reader::fail("unsupported version");
  Checkpoint ckpt;
  r.expect("seed");
  ckpt.seed = r.unsigned_integer();
  std::string key = r.word();
  while (key == "config") {
    const auto name = r.word();
    ckpt.config.emplace_back(name, r.rest_of_line());
    key = r.word();
  }
  if (key != "generator_layers") Reader::fail("expected 'generator_layers', found '" + key + "'");
  const long glayers = r.integer();
  if (glayers < 2) Reader::fail("generator needs at least two layers");
  auto& g = ckpt.generator;
  r.expect("output_bound");
  g.output_bound = r.real();
  r.expect("input_map_cap");
  const auto cap = r.word();
  if (cap != "none") {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(cap.data(), cap.data() + cap.size(), v);
    if (ec != std::errc() || ptr != cap.data() + cap.size()) Reader::fail("bad input_map_cap");
    g.input_map_cap = v;
  }
  g.input_map = r.matrix("generator.input_map");
  for (long l = 0; l < glayers; ++l) {
    const auto prefix = "generator.layer" + std::to_string(l);
    AffineLayer layer;
    layer.weight = r.matrix(prefix + ".weight");
    layer.bias = r.vector(prefix + ".bias");
    g.layers.push_back(std::move(layer));
  }
  r.expect("discriminator_layers");
  const long dlayers = r.integer();
  if (dlayers < 1) Reader::fail("discriminator needs at least one layer");
  auto& d = ckpt.discriminator;
  r.expect("discriminator_mode");
  d.mode = critic_regularization_from(r.word());
  for (long l = 0; l < dlayers; ++l) {
    const auto prefix = "discriminator.layer" + std::to_string(l);
    AffineLayer layer;
    layer.weight = r.matrix(prefix + ".weight");
    layer.bias = r.vector(prefix + ".bias");
    d.layers.push_back(std::move(layer));
    if (d.mode == CriticRegularization::spectral_norm) {
      d.power_vectors.push_back(r.vector(prefix + ".power"));
    }
  }
  r.expect("end");
  validate(g);
  validate(d);
  return ckpt;
}

}  // namespace ggan
