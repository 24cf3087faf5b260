#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "hpgm/image.hpp"
#include "hpgm/numcore/tensor.hpp"
#include "hpgm/numcore/optim.hpp"
#include "hpgm/texture.hpp"
#include "hpgm/types.hpp"
#include "json.hpp"

namespace hpgm::eval {

/// Intersection over union; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);

/// Per-room IoU averaged over all rooms of all layouts.
double mean_iou(const std::vector<std::vector<BBox>>& predicted, const std::vector<std::vector<BBox>>& truth);

class TooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Grey-level plane, row-major.
struct GrayImage {
  int width = 0, height = 0;
  std::vector<double> values;
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Luma 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const Image& img);
/// Bilinear resampling with pixel-centre alignment.
GrayImage resize_bilinear(const GrayImage& img, int width, int height);

struct MsSsimOptions {
  int resize_to = 64;  // 0 keeps the input size
  int filter_size = 11;
  double filter_sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
  double max_val = 255.0;
};

inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Five-scale structural similarity of two grey planes of equal size.
/// Negative per-scale terms are clamped to zero before exponentiation.
double ms_ssim(const GrayImage& a, const GrayImage& b, const MsSsimOptions& opt = {});
/// RGB front end: equal square shapes with side >= 32, converted to grey and
/// resized to opt.resize_to first.
double ms_ssim(const Image& a, const Image& b, const MsSsimOptions& opt = {});

/// Mean pairwise MS-SSIM over n generations sharing `cond` with distinct noise.
double diversity_score(const tex::LctGanModel& model, const TextureCondition& cond, int n, std::uint64_t seed,
                       std::size_t w = 1, std::size_t h = 1);
/// Mean pairwise MS-SSIM of a set of images (unordered pairs).
double mean_pairwise_ms_ssim(const std::vector<Image>& images);

class UntrainedProbe : public std::logic_error {
 public:
  UntrainedProbe() : std::logic_error("the probe classifier has not been trained") {}
};

struct ProbeConfig {
  std::size_t width = 16;
  std::size_t input_size = 32;
  int epochs = 40;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// Small CNN with material and colour heads, trained on real textures only.
struct ProbeClassifier {
  ProbeConfig config;
  std::vector<nc::Tensor> conv_w, conv_b;
  nc::Tensor material_w, material_b, colour_w, colour_b;
  bool trained = false;
  double test_material_acc = 0, test_colour_acc = 0;  // on held-out real textures

  static ProbeClassifier init(const ProbeConfig& config);
  nc::ParameterSet named() const;
  /// Logits for a batch of (N, 3, S, S) tensors in [-1, 1].
  std::pair<nc::Tensor, nc::Tensor> forward(const nc::Tensor& x) const;
  /// (material, colour) argmax for one image.
  std::pair<int, int> predict(const Image& img) const;
  /// Accuracy on labelled images.
  std::pair<double, double> accuracy(const std::vector<Image>& images, const std::vector<int>& materials,
                                     const std::vector<int>& colours) const;
  void save(const std::filesystem::path& dir) const;  // probe.ckpt + probe.json
  static ProbeClassifier load(const std::filesystem::path& dir);
};

struct LabelledImage {
  Image image;
  int material = 0;
  int colour = 0;
};

/// Trains on `train` and records accuracy on `test`.
ProbeClassifier train_probe(const std::vector<LabelledImage>& train, const std::vector<LabelledImage>& test,
                            const ProbeConfig& config);

/// Procedural real-texture sets for probe training: every (material, colour)
/// pair `per_pair` times, rendered at `size` with seeds from `seed`.
std::vector<LabelledImage> probe_corpus(int per_pair, int size, std::uint64_t seed);

struct Alignment {
  double material_acc = 0, colour_acc = 0;
  std::size_t n = 0;
};

/// Fraction of generated images (one per condition) whose probe argmax
/// matches the requested material / colour.
Alignment alignment_accuracy(const tex::LctGanModel& model, const std::vector<std::pair<int, int>>& conditions,
                             const ProbeClassifier& probe, std::uint64_t seed, std::size_t w = 1, std::size_t h = 1);

struct EvalReport {
  double mean_iou = 0;
  std::vector<double> per_room_iou;
  double ms_ssim = 0;
  double material_acc = 0, colour_acc = 0;
  double probe_material_acc = 0, probe_colour_acc = 0;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const;
  std::string table() const;
};

}  // namespace hpgm::eval
