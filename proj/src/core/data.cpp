#include "ggan/data.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace ggan {

namespace {

constexpr double kLogShift = 1e-6;

std::mt19937_64 stream_rng(std::uint64_t seed, Split split) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x64617461u, static_cast<std::uint32_t>(split)};
  return std::mt19937_64(seq);
}

double parse_cell(std::string_view cell, std::size_t line, std::size_t column) {
  while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
  while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw IngestionError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": '" + std::string(cell) + "' is not a finite number");
  }
  return value;
}

}  // namespace

std::string_view to_string(SyntheticModel model) {
  switch (model) {
    case SyntheticModel::m1:
      return "M1";
    case SyntheticModel::m2:
      return "M2";
    case SyntheticModel::m3:
      return "M3";
    case SyntheticModel::m4:
      return "M4";
  }
  return "M1";
}

SyntheticModel synthetic_model_from(std::string_view name) {
  if (name == "M1" || name == "m1") return SyntheticModel::m1;
  if (name == "M2" || name == "m2") return SyntheticModel::m2;
  if (name == "M3" || name == "m3") return SyntheticModel::m3;
  if (name == "M4" || name == "m4") return SyntheticModel::m4;
  throw ContractError("unknown synthetic model '" + std::string(name) + "'");
}

const Vector& band_sequence() {
  static const Vector seq = (Vector(10) << -1.0, -0.78, -0.56, -0.33, -0.11, 0.11, 0.33, 0.56,
                             0.78, 1.0)
                                .finished();
  return seq;
}

Matrix build_m1_matrix() {
  Matrix w = Matrix::Zero(100, 10);
  for (Index j = 0; j < 10; ++j) w.block(10 * j, j, 10, 1) = band_sequence();
  return w;
}

Matrix build_m2_inner_matrix() {
  Matrix w = Matrix::Zero(50, 10);
  const Vector band = (Vector(5) << -1.0, -0.5, 0.0, 0.5, 1.0).finished();
  for (Index j = 0; j < 10; ++j) w.block(5 * j, j, 5, 1) = band;
  return w;
}

Matrix build_m2_outer_matrix() {
  Matrix w = Matrix::Zero(100, 50);
  const Vector& seq = band_sequence();
  for (Index j = 0; j < 50; ++j) {
    w(2 * j, j) = seq((2 * j) % 10);
    w(2 * j + 1, j) = seq((2 * j + 1) % 10);
  }
  return w;
}

Matrix apply_model(SyntheticModel model, const Matrix& latent) {
  if (latent.cols() != 10) {
    throw ShapeError("apply_model: latent rows must have 10 coordinates, got " +
                     std::to_string(latent.cols()));
  }
  static const Matrix w = build_m1_matrix();
  if (model == SyntheticModel::m2) {
    static const Matrix inner = build_m2_inner_matrix();
    static const Matrix outer = build_m2_outer_matrix();
    const Matrix hidden = (latent * inner.transpose()).cwiseMax(0.0);
    return hidden * outer.transpose();
  }
  Matrix y = latent * w.transpose();
  if (model == SyntheticModel::m1) return y;

  // Blocks over 1-based ranges 1:20, 21:50, 51:70, 71:100.
  Matrix x = y;
  auto first = y.leftCols(20).array();
  auto third = y.middleCols(50, 20).array();
  auto fourth = y.rightCols(30).array();
  if (model == SyntheticModel::m3) {
    x.leftCols(20) = (first.square() / 4.0).matrix();
    x.middleCols(50, 20) = third.exp().matrix();
    x.rightCols(30) = (20.0 * fourth).sin().matrix();
  } else {
    x.leftCols(20) = (first.abs().sqrt() - 0.1).matrix();
    x.middleCols(50, 20) = ((third.abs() + kLogShift).log() + 0.5).matrix();
    x.rightCols(30) = (20.0 * fourth).cos().matrix();
  }
  return x;
}

Dataset sample_synthetic(const SyntheticSpec& spec, Index n, Split split) {
  if (n < 1) throw ContractError("sample_synthetic: n must be >= 1");
  if (spec.latent_dim != 10 || spec.ambient_dim != 100) {
    throw ContractError("sample_synthetic: models M1-M4 are defined for 10 -> 100 dimensions");
  }
  auto rng = stream_rng(spec.seed, split);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(n, spec.latent_dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < spec.latent_dim; ++j) z(i, j) = dist(rng);
  }
  Dataset out;
  out.samples = apply_model(spec.model, z);
  out.provenance = std::string(to_string(spec.model)) + " seed=" + std::to_string(spec.seed) +
                   (split == Split::train ? " train" : " test");
  return out;
}

Dataset sample_m1(Index n, std::uint64_t seed) {
  return sample_synthetic({SyntheticModel::m1, 10, 100, seed}, n);
}
Dataset sample_m2(Index n, std::uint64_t seed) {
  return sample_synthetic({SyntheticModel::m2, 10, 100, seed}, n);
}
Dataset sample_m3(Index n, std::uint64_t seed) {
  return sample_synthetic({SyntheticModel::m3, 10, 100, seed}, n);
}
Dataset sample_m4(Index n, std::uint64_t seed) {
  return sample_synthetic({SyntheticModel::m4, 10, 100, seed}, n);
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !options.header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_cell(rest.substr(0, comma), line_no, count + 1));
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw IngestionError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw IngestionError("'" + path.string() + "' holds no data rows");
  Dataset out;
  out.samples = matrix_from_rows(static_cast<Index>(rows), static_cast<Index>(cols), values);
  if (options.minmax) {
    for (Index j = 0; j < out.samples.cols(); ++j) {
      auto col = out.samples.col(j);
      const double lo = col.minCoeff();
      const double range = col.maxCoeff() - lo;
      if (range > 0.0) {
        col = (col.array() - lo) / range;
      } else {
        col.setZero();
      }
    }
  }
  out.provenance = path.string();
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& samples,
               const std::string& header) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out.precision(17);
  if (!header.empty()) out << header << '\n';
  for (Index i = 0; i < samples.rows(); ++i) {
    for (Index j = 0; j < samples.cols(); ++j) {
      if (j) out << ',';
      out << samples(i, j);
    }
    out << '\n';
  }
}

}  // namespace ggan
