#pragma once

#include "ggan/numcore.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ggan {

enum class SyntheticModel { m1, m2, m3, m4 };

std::string_view to_string(SyntheticModel model);
SyntheticModel synthetic_model_from(std::string_view name);

struct SyntheticSpec {
  SyntheticModel model = SyntheticModel::m1;
  Index latent_dim = 10;
  Index ambient_dim = 100;
  std::uint64_t seed = 0;
};

/// Samples as rows, with a note on where they came from.
struct Dataset {
  Matrix samples;
  std::string provenance;
};

/// Index of the RNG stream a split is drawn from. Train and test never share one.
enum class Split : std::uint32_t { train = 0, test = 1 };

/// The ten-value band [-1, -0.78, ..., 0.78, 1].
const Vector& band_sequence();

/// 100 x 10; column j holds the band sequence in rows 10j..10j+9 (0-based).
Matrix build_m1_matrix();
/// 50 x 10; column j holds [-1, -0.5, 0, 0.5, 1] in rows 5j..5j+4 (0-based).
Matrix build_m2_inner_matrix();
/// 100 x 50; column j holds sequence values at positions (2j mod 10) and
/// (2j+1 mod 10) in rows 2j and 2j+1 (0-based).
Matrix build_m2_outer_matrix();

/// Maps latent rows Z (n x 10) to observations (n x 100) under `model`.
/// The (M4) log block uses log(|y| + 1e-6) + 0.5.
Matrix apply_model(SyntheticModel model, const Matrix& latent);

/// Draws n standard-normal latents from the stream (seed, split) and maps them.
Dataset sample_synthetic(const SyntheticSpec& spec, Index n, Split split = Split::train);

Dataset sample_m1(Index n, std::uint64_t seed);
Dataset sample_m2(Index n, std::uint64_t seed);
Dataset sample_m3(Index n, std::uint64_t seed);
Dataset sample_m4(Index n, std::uint64_t seed);

/// Thrown for malformed CSV input.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvOptions {
  bool header = false;
  /// Rescale every column to [0, 1] (constant columns map to 0).
  bool minmax = false;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
/// Writes rows with 17 significant digits, optionally preceded by a header line.
void write_csv(const std::filesystem::path& path, const Matrix& samples,
               const std::string& header = {});

}  // namespace ggan
