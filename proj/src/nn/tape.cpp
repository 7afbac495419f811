#include "astgin/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "astgin/error.hpp"
#include "astgin/nn/params.hpp"

namespace astgin::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->node(id_).shape;
}

template <typename T>
std::size_t Var<T>::numel() const {
  return tape_->node(id_).value.size();
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return tape_->node(id_).value;
}

template <typename T>
std::span<const T> Var<T>::grad() const {
  return tape_->node(id_).grad;
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}

template <typename T>
T Var<T>::item() const {
  const auto& v = tape_->node(id_).value;
  if (v.size() != 1) throw ValidationError("item() on a tensor of shape " + to_string(shape()));
  return v[0];
}

template <typename T>
Var<T> Tape<T>::constant(Shape shape, std::vector<T> values) {
  return emplace("constant", std::move(shape), std::move(values), false);
}

template <typename T>
Var<T> Tape<T>::variable(Shape shape, std::vector<T> values) {
  return emplace("variable", std::move(shape), std::move(values), true);
}

template <typename T>
Var<T> Tape<T>::parameter(Param<T>& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var<T>(this, it->second);
  Var<T> v = emplace(param.name.c_str(), param.shape, buffer(std::span<const T>(param.value)), true);
  nodes_[v.id()].param = &param;
  param_nodes_.emplace(&param, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::emplace(const char* op, Shape shape, std::vector<T> values, bool requires_grad) {
  if (numel(shape) != values.size())
    throw ValidationError(std::string(op) + ": shape " + to_string(shape) + " does not hold " +
                          std::to_string(values.size()) + " values");
  if (checked_)
    for (const T& x : values)
      if (!std::isfinite(x)) throw NumericalError(std::string(op) + ": non-finite value produced");
  Node<T> node;
  node.shape = std::move(shape);
  node.value = std::move(values);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
void Tape<T>::set_backward(Var<T> v, BackwardFn fn) {
  auto& n = nodes_[v.id()];
  if (n.requires_grad) n.backward = std::move(fn);
}

template <typename T>
std::vector<T> Tape<T>::buffer(std::size_t n) {
  auto it = pool_.find(n);
  if (it == pool_.end() || it->second.empty()) return std::vector<T>(n, T(0));
  std::vector<T> out = std::move(it->second.back());
  it->second.pop_back();
  std::fill(out.begin(), out.end(), T(0));
  return out;
}

template <typename T>
std::vector<T> Tape<T>::buffer(std::span<const T> src) {
  auto it = pool_.find(src.size());
  if (it == pool_.end() || it->second.empty()) return std::vector<T>(src.begin(), src.end());
  std::vector<T> out = std::move(it->second.back());
  it->second.pop_back();
  std::copy(src.begin(), src.end(), out.begin());
  return out;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = buffer(n.value.size());
  return nodes_[id].grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (backward_done_) throw ValidationError("backward called twice without reset");
  if (loss.numel() != 1) throw ValidationError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = T(1);
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto& pg = n.param->grad;
    if (pg.size() != n.grad.size()) pg.assign(n.grad.size(), T(0));
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
  }
}

template <typename T>
void Tape<T>::reset() {
  // Storage from the previous round is dropped so the pool never holds more
  // than one tape's worth of buffers.
  pool_.clear();
  for (auto& n : nodes_) {
    if (!n.value.empty()) pool_[n.value.size()].push_back(std::move(n.value));
    if (!n.grad.empty()) pool_[n.grad.size()].push_back(std::move(n.grad));
  }
  nodes_.clear();
  param_nodes_.clear();
  backward_done_ = false;
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace astgin::nn
