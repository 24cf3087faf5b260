#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hpgm/numcore/tensor.hpp"

namespace hpgm::nc {

/// Named tensors, in a stable order. The order defines checkpoint layout.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParameterSet = std::vector<NamedTensor>;

class MissingGrad : public std::logic_error {
 public:
  explicit MissingGrad(const std::string& name)
      : std::logic_error("parameter '" + name + "' has no gradient; run backward first") {}
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily per parameter
/// and always match the parameter's shape.
class Adam {
 public:
  Adam(ParameterSet params, AdamConfig config);

  /// One update from the current gradients, then zeroes them.
  /// Throws MissingGrad when a parameter never received a gradient.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  const ParameterSet& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  ParameterSet params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t steps_ = 0;
};

/// Deterministic N(mean, stddev^2) tensor for a fixed seed.
Tensor init_normal(Shape shape, double mean, double stddev, std::uint64_t seed);

/// Derives a stream seed from a base seed and a label, so that independent
/// parameter tensors never share random draws.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

// Checkpoint container: "HPGMCKPT", u32 version, u32 count, then per record
// u32 name length, name bytes, u32 rank, u64 extents, little-endian f64 payload.
inline constexpr char kCheckpointMagic[8] = {'H', 'P', 'G', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into same-named tensors of `target`.
/// Throws CheckpointError on a missing name or a shape mismatch.
void assign_parameters(ParameterSet& target, const ParameterSet& source);

/// FNV-1a over names, shapes and payload bytes; used as a model checksum.
std::string checksum(const ParameterSet& params);

}  // namespace hpgm::nc
