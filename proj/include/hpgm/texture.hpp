#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hpgm/image.hpp"
#include "hpgm/numcore/ops.hpp"
#include "hpgm/numcore/optim.hpp"
#include "hpgm/types.hpp"
#include "json.hpp"

namespace hpgm::tex {

inline constexpr std::size_t kMaterials = 19;
inline constexpr std::size_t kColours = 12;
inline constexpr std::size_t kUpsampleBlocks = 5;
inline constexpr std::size_t kScale = 32;  // 2^kUpsampleBlocks

class EmptyDataset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class NonConformingImage : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LctGanConfig {
  std::size_t base_width = 16;  // F
  std::size_t noise_dim = 100;  // d1
  std::size_t input_w = 5, input_h = 5;  // inference noise grid (w, h)
  double lr = 2e-4;
  double beta1 = 0.5;
  int batch = 24;
  int iterations = 500;
  double lambda_material = 1.0;
  double lambda_colour = 1.0;
  double init_std = 0.02;
  std::uint64_t seed = 1;

  std::size_t input_channels() const { return noise_dim + kMaterials + kColours; }
  nlohmann::json to_json() const;
  static LctGanConfig from_json(const nlohmann::json& j);
};

/// Noise plus broadcast condition, NCHW: (1, d1 + 19 + 12, h, w).
nc::Tensor build_input(const TextureCondition& cond, std::size_t w, std::size_t h, std::size_t noise_dim,
                       std::uint64_t seed);
/// Same, with the noise given: (1, d1, h, w).
nc::Tensor build_input(const TextureCondition& cond, const nc::Tensor& noise);
nc::Tensor sample_noise(std::size_t w, std::size_t h, std::size_t noise_dim, std::uint64_t seed);

struct GeneratorParams {
  std::vector<nc::Tensor> conv_w, conv_b;  // five 5x5 convolutions
  std::vector<nc::Tensor> bn_gamma, bn_beta;  // four batch norms
  std::vector<nc::BatchNormStats> bn_stats;

  static GeneratorParams init(std::size_t in_channels, std::size_t f, double stddev, std::uint64_t seed);
  nc::ParameterSet named() const;      // trainable tensors
  nc::ParameterSet state() const;      // trainable tensors plus running statistics
};

struct DiscriminatorParams {
  std::vector<nc::Tensor> conv_w, conv_b;  // five 5x5 stride-2 convolutions
  nc::Tensor real_w, real_b, material_w, material_b, colour_w, colour_b;

  static DiscriminatorParams init(std::size_t f, double stddev, std::uint64_t seed);
  nc::ParameterSet named() const;
};

/// (N, C, h, w) -> (N, 3, 32h, 32w) in (-1, 1).
nc::Tensor generator_forward(const nc::Tensor& z, GeneratorParams& g, nc::BatchNormMode mode);
/// Training-mode forward that leaves the running statistics untouched.
nc::Tensor generator_forward_scratch(const nc::Tensor& z, const GeneratorParams& g);

struct DiscriminatorOutput {
  nc::Tensor real;             // (N, 1) probabilities
  nc::Tensor material_logits;  // (N, 19)
  nc::Tensor colour_logits;    // (N, 12)
};
DiscriminatorOutput discriminator_forward(const nc::Tensor& x, const DiscriminatorParams& d);

/// -E[log D(R)] - E[log(1 - D(G(Z)))], probabilities clipped to [1e-7, 1 - 1e-7].
nc::Tensor loss_d_adv(const nc::Tensor& d_real, const nc::Tensor& d_fake);
/// -E[log D(G(Z))].
nc::Tensor loss_g_adv(const nc::Tensor& d_fake);
/// Cross-entropy on the real batch plus cross-entropy on the generated batch.
nc::Tensor loss_class(const nc::Tensor& logits_real, const nc::Tensor& logits_fake, const std::vector<int>& labels);
/// adv + lambda_m * mat + lambda_c * col.
nc::Tensor loss_total(const nc::Tensor& adv, const nc::Tensor& mat, const nc::Tensor& col, double lambda_m,
                      double lambda_c);

struct TextureSample {
  nc::Tensor image;  // (3, H, W) in [-1, 1]
  int material = 0;
  int colour = 0;
};

nc::Tensor image_to_tensor(const Image& img);   // (3, H, W) in [-1, 1]
Image tensor_to_image(const nc::Tensor& t, std::size_t index = 0);  // from (N, 3, H, W) or (3, H, W)

struct TrainStep {
  double loss_d = 0, loss_g = 0, loss_material = 0, loss_colour = 0;
  double real_material_acc = 0, real_colour_acc = 0;  // D heads on the real batch
};

struct LctGanModel {
  LctGanConfig config;
  GeneratorParams g;
  DiscriminatorParams d;
  std::set<std::pair<int, int>> seen_pairs;  // (material, colour) pairs in the training data

  static LctGanModel init(const LctGanConfig& config);

  /// Inference with running batch-norm statistics; one image of 32w x 32h.
  Image generate(const TextureCondition& cond, std::size_t w, std::size_t h, std::uint64_t seed) const;
  Image generate_from_noise(const TextureCondition& cond, const nc::Tensor& noise) const;
  std::string checksum() const;

  void save(const std::filesystem::path& dir) const;  // texture.ckpt + texture.json
  static LctGanModel load(const std::filesystem::path& dir);
};

/// Trains from scratch: alternating D-step / G-step Adam, one each per
/// iteration, deterministic per config.seed. `on_step` sees every iteration.
struct TrainOutcome {
  LctGanModel model;
  std::vector<TrainStep> trace;
};
TrainOutcome train_lctgan(const std::vector<TextureSample>& data, const LctGanConfig& config,
                          const std::function<void(int, const TrainStep&)>& on_step = {});

/// One D-step then one G-step on the given batch; exposed for tests.
TrainStep train_iteration(LctGanModel& model, nc::Adam& opt_g, nc::Adam& opt_d, const nc::Tensor& real,
                          const std::vector<int>& materials, const std::vector<int>& colours, std::uint64_t seed);

/// Images for (1 - t) * a + t * b at `steps` evenly spaced t with shared noise.
std::vector<Image> interpolate_conditions(const LctGanModel& model, const TextureCondition& a,
                                          const TextureCondition& b, int steps, std::size_t w, std::size_t h,
                                          std::uint64_t seed);

struct NovelResult {
  Image image;
  bool out_of_distribution = false;
};
NovelResult generate_novel(const LctGanModel& model, const TextureCondition& cond, std::size_t w, std::size_t h,
                           std::uint64_t seed);

}  // namespace hpgm::tex
