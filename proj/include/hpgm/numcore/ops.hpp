#pragma once

#include <cstdint>
#include <vector>

#include "hpgm/numcore/tensor.hpp"

namespace hpgm::nc {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// (m, k) x (k, n) -> (m, n).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);

/// NCHW nearest-neighbour upsampling by a factor of two in both spatial axes.
Tensor upsample2x_nearest(const Tensor& x);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// x: (N, C, H, W); weight: (O, C, K, K); bias: (O) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opt);

enum class BatchNormMode { kTrain, kInference };

/// Running statistics owned by a batch-norm layer.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

/// Per-channel normalisation over (N, H, W). In training mode batch statistics
/// are used and the running estimates are updated (unbiased variance).
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                   BatchNormMode mode);

/// (N, C, H, W) -> (N, C), mean over the spatial axes.
Tensor global_avg_pool(const Tensor& x);

inline constexpr double kProbEps = 1e-7;

/// Mean binary cross-entropy; probabilities are clipped to [eps, 1 - eps].
Tensor bce_loss(const Tensor& prob, const Tensor& target);

/// Mean over the batch of -log softmax(logits)[label]; logits: (N, K).
/// Log-probabilities are floored at log(eps).
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Mean squared error over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace hpgm::nc
