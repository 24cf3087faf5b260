#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "hpgm/numcore/optim.hpp"
#include "hpgm/textparse.hpp"
#include "hpgm/types.hpp"
#include "json.hpp"

namespace hpgm::layout {

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyDataset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GcLpnConfig {
  std::size_t hidden = 64;
  bool gcn_on = true;      // false gives the C-LPN ablation
  bool softmax_on = true;  // false replaces the row softmax with identity
  double lr = 1e-3;
  int epochs = 300;
  int batch = 8;
  double init_std = 0.02;
  std::uint64_t seed = 1;
  // Share of the training samples held out to pick the best epoch; no
  // hold-out below ten samples or when zero.
  double validation_fraction = 0.0;
  bool mirror_augment = true;  // training_set adds the three mirror images

  nlohmann::json to_json() const;
  static GcLpnConfig from_json(const nlohmann::json& j);
};

/// W0, W1: D x D graph weights; MLP D -> H -> 4 with ReLU between.
struct GcLpnParams {
  nc::Tensor w0, w1;
  nc::Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;

  static GcLpnParams init(std::size_t d, std::size_t hidden, double stddev, std::uint64_t seed);
  std::size_t feature_width() const { return w0.dim(0); }
  /// Named views sharing storage with the members.
  nc::ParameterSet named() const;
  /// The parameters that receive gradients under `config`.
  nc::ParameterSet trainable(const GcLpnConfig& config) const;
};

/// S = X + Softmax_rows(A * ReLU(A X W0) * W1).
nc::Tensor gcn_forward(const nc::Tensor& x, const nc::Tensor& a, const GcLpnParams& p, bool softmax_on = true);

/// Per-row MLP; returns raw N x 4 box coordinates.
nc::Tensor predict_boxes(const nc::Tensor& s, const GcLpnParams& p);

/// MLP on X directly (C-LPN).
nc::Tensor clpn_forward(const nc::Tensor& x, const GcLpnParams& p);

/// Full forward under `config`.
nc::Tensor forward(const FeatureMatrix& x, const AdjacencyMatrix& a, const GcLpnParams& p, const GcLpnConfig& config);

/// (1/N) sum_i ||pred_i - truth_i||^2 on N x 4 tensors.
nc::Tensor layout_loss(const nc::Tensor& pred, const nc::Tensor& truth);
double layout_loss(const std::vector<BBox>& pred, const std::vector<BBox>& truth);

nc::Tensor boxes_to_tensor(const std::vector<BBox>& boxes);
std::vector<BBox> tensor_to_boxes(const nc::Tensor& t);

/// Reorders corners, clamps to [0, 1] and inflates degenerate extents to one
/// canvas pixel.
BBox clamp_box(const BBox& b);

/// Box of the given area centred at (cx, cy) with width / height = rho.
BBox mlg_box(double cx, double cy, double size_sqm, double rho);

/// Manual layout baseline: anchor-centred boxes of the stated area with
/// aspect ratio drawn from U(2/3, 3/2).
std::vector<BBox> mlg_baseline(const text::HouseSpec& spec, const text::Vocabularies& vocab, std::uint64_t seed);

struct Sample {
  FeatureMatrix x;
  AdjacencyMatrix a;
  nc::Tensor truth;  // N x 4
};

Sample make_sample(const text::HouseSpec& spec, const std::vector<BBox>& truth, const text::Vocabularies& vocab);

/// The house mirrored left-right and/or top-bottom: boxes reflected,
/// positions swapped to the reflected anchor, everything else unchanged.
std::pair<text::HouseSpec, std::vector<BBox>> mirror_house(const text::HouseSpec& spec, const std::vector<BBox>& boxes,
                                                           const text::Vocabularies& vocab, bool flip_x, bool flip_y);

/// Samples for the house and its three mirror images.
std::vector<Sample> mirrored_samples(const text::HouseSpec& spec, const std::vector<BBox>& boxes,
                                     const text::Vocabularies& vocab);

/// Encoded training samples for houses (spec, ground-truth boxes), mirrored
/// when config.mirror_augment is set.
std::vector<Sample> training_set(const std::vector<text::HouseSpec>& specs, const std::vector<std::vector<BBox>>& boxes,
                                 const text::Vocabularies& vocab, const GcLpnConfig& config);

struct TrainResult {
  GcLpnParams params;
  std::vector<double> loss_trace;        // mean training loss per epoch
  std::vector<double> validation_trace;  // held-out loss per epoch, if any
  int best_epoch = -1;                   // epoch whose parameters were kept
};

/// Adam (beta1 = 0.5) on the box loss; deterministic per config.seed.
TrainResult train_gclpn(const std::vector<Sample>& data, const GcLpnConfig& config);

/// Mean of the box loss over a dataset without recording gradients.
double dataset_loss(const std::vector<Sample>& data, const GcLpnParams& p, const GcLpnConfig& config);

/// Frozen model: configuration plus parameters.
struct LayoutModel {
  GcLpnConfig config;
  GcLpnParams params;

  std::vector<BBox> predict(const text::HouseSpec& spec, const text::Vocabularies& vocab) const;
  void save(const std::filesystem::path& dir) const;  // layout.ckpt + layout.json
  static LayoutModel load(const std::filesystem::path& dir);
};

}  // namespace hpgm::layout
