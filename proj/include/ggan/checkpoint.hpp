#pragma once

#include "ggan/nets.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ggan {

/// A trained generator/critic pair plus the seed and configuration that produced it.
/// The on-disk layout is documented in docs/checkpoint_format.md.
struct Checkpoint {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ggan
