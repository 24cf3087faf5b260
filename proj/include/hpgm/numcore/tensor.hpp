#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpgm::nc {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

class ShapeMismatch : public std::invalid_argument {
 public:
  ShapeMismatch(const std::string& op, const Shape& a, const Shape& b);
  explicit ShapeMismatch(const std::string& message) : std::invalid_argument(message) {}
};

class NonScalarLoss : public std::logic_error {
 public:
  explicit NonScalarLoss(const Shape& shape);
};

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Reference-counted handle to a dense row-major array of doubles.
///
/// Copies share storage. Use clone() for a deep copy or detach() for a copy
/// that is cut off from gradient tracking.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  std::size_t rank() const { return p_->shape.size(); }
  std::size_t dim(std::size_t i) const { return p_->shape.at(i); }
  std::size_t size() const { return p_->value.size(); }

  std::span<double> data() { return p_->value; }
  std::span<const double> data() const { return p_->value; }
  double& operator[](std::size_t i) { return p_->value[i]; }
  double operator[](std::size_t i) const { return p_->value[i]; }
  double item() const;

  bool requires_grad() const { return p_->requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    p_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return p_->grad.size() == p_->value.size() && !p_->value.empty(); }
  std::span<double> grad() { return p_->grad; }
  std::span<const double> grad() const { return p_->grad; }
  void zero_grad() { std::fill(p_->grad.begin(), p_->grad.end(), 0.0); }
  void drop_grad() { p_->grad.clear(); }

  Tensor clone() const;
  Tensor detach() const;

  TensorData* impl() const { return p_.get(); }
  const std::shared_ptr<TensorData>& handle() const { return p_; }

 private:
  std::shared_ptr<TensorData> p_;
};

/// Records differentiable operations for one training step.
///
/// Constructing a Tape makes it the active tape of the calling thread until it
/// is destroyed. Operations only record when an active tape exists and at least
/// one input requires a gradient, so frozen-model inference never touches
/// shared state.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1, runs every recorded rule in reverse and clears
  /// the tape. Gradients accumulate into existing buffers.
  void backward(const Tensor& loss);

  static Tape* active();

  struct Node {
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward;
  };
  void push(Node node) { nodes_.push_back(std::move(node)); }

 private:
  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
};

/// Runs backward on the active tape of this thread.
void backward(const Tensor& loss);

namespace detail {
/// Registers `rule` for `out` if any input requires grad and a tape is active.
void record(std::initializer_list<Tensor> inputs, Tensor& out, std::function<void()> rule);
void record(const std::vector<Tensor>& inputs, Tensor& out, std::function<void()> rule);
}  // namespace detail

}  // namespace hpgm::nc
