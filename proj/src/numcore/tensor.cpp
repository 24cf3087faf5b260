#include "hpgm/numcore/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace hpgm::nc {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeMismatch::ShapeMismatch(const std::string& op, const Shape& a, const Shape& b)
    : std::invalid_argument(op + ": shape mismatch " + to_string(a) + " vs " + to_string(b)) {}

NonScalarLoss::NonScalarLoss(const Shape& shape)
    : std::logic_error("backward requires a scalar loss, got shape " + to_string(shape)) {}

Tensor::Tensor(Shape shape, double fill) : p_(std::make_shared<TensorData>()) {
  p_->value.assign(numel(shape), fill);
  p_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : p_(std::make_shared<TensorData>()) {
  if (numel(shape) != values.size()) {
    throw ShapeMismatch("Tensor: " + std::to_string(values.size()) + " values for shape " +
                        to_string(shape));
  }
  p_->shape = std::move(shape);
  p_->value = std::move(values);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeMismatch("item() on tensor of shape " + to_string(shape()));
  return p_->value[0];
}

Tensor Tensor::clone() const {
  Tensor t(shape(), p_->value);
  t.p_->requires_grad = p_->requires_grad;
  t.p_->grad = p_->grad;
  return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), p_->value); }

namespace {
thread_local Tape* g_active = nullptr;
}

Tape::Tape() : previous_(g_active) { g_active = this; }

Tape::~Tape() {
  if (g_active == this) g_active = previous_;
}

Tape* Tape::active() { return g_active; }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) throw NonScalarLoss(loss.shape());
  TensorData* root = loss.impl();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto& node : nodes_) {
    for (auto& in : node.inputs)
      if (in->requires_grad) in->ensure_grad();
  }
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not on a path to the loss
    it->backward();
  }
  nodes_.clear();
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (!tape) throw std::logic_error("backward called without an active tape");
  tape->backward(loss);
}

namespace detail {

void record(const std::vector<Tensor>& inputs, Tensor& out, std::function<void()> rule) {
  Tape* tape = Tape::active();
  if (!tape) return;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return;
  out.set_requires_grad(true);
  Tape::Node node;
  for (const auto& t : inputs)
    if (t.defined()) node.inputs.push_back(t.handle());
  node.output = out.handle();
  node.backward = std::move(rule);
  tape->push(std::move(node));
}

void record(std::initializer_list<Tensor> inputs, Tensor& out, std::function<void()> rule) {
  record(std::vector<Tensor>(inputs), out, std::move(rule));
}

}  // namespace detail

}  // namespace hpgm::nc
