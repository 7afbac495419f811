#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace astgin::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tape;

template <typename T>
struct Param;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::function<void(Tape<T>&, std::uint32_t)> backward;
  Param<T>* param = nullptr;
};

// Handle to a node recorded on a tape. Cheap to copy; valid until the tape
// is reset.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::span<const T> value() const;
  // Zero-length span when no gradient reached this node.
  std::span<const T> grad() const;
  bool requires_grad() const;
  T item() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode recording. Nodes are appended in evaluation order, so a
// reverse sweep is a valid topological order. One backward pass per reset.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape<T>&, std::uint32_t)>;

  explicit Tape(bool checked = false) : checked_(checked) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Shape shape, std::vector<T> values);
  Var<T> variable(Shape shape, std::vector<T> values);
  // Leaf bound to a stored parameter; repeated calls return the same node.
  Var<T> parameter(Param<T>& param);

  // Low-level op support: records a node holding `values`. In checked mode
  // non-finite values throw NumericalError naming `op`.
  Var<T> emplace(const char* op, Shape shape, std::vector<T> values, bool requires_grad);
  void set_backward(Var<T> v, BackwardFn fn);

  // Zero-filled (or copied) storage recycled from nodes dropped by reset(),
  // so repeated batches of the same shapes stop hitting the allocator.
  std::vector<T> buffer(std::size_t n);
  std::vector<T> buffer(std::span<const T> src);

  // Seeds d(loss)/d(loss) = 1, sweeps the tape, then adds leaf gradients
  // into their parameters.
  void backward(Var<T> loss);
  void reset();

  Node<T>& node(std::uint32_t id) { return nodes_[id]; }
  const Node<T>& node(std::uint32_t id) const { return nodes_[id]; }
  // Gradient buffer of `id`, zero-filled on first access.
  std::span<T> grad_buffer(std::uint32_t id);
  std::size_t size() const { return nodes_.size(); }

  bool checked() const { return checked_; }
  void set_checked(bool on) { checked_ = on; }
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

 private:
  std::vector<Node<T>> nodes_;
  std::unordered_map<const Param<T>*, std::uint32_t> param_nodes_;
  std::unordered_map<std::size_t, std::vector<std::vector<T>>> pool_;
  bool checked_ = false;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

// Disables gradient recording for the lifetime of the guard.
template <typename T>
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape<T>& tape) : tape_(tape), prev_(tape.grad_enabled()) { tape.set_grad_enabled(false); }
  ~NoGradGuard() { tape_.set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>& tape_;
  bool prev_;
};

}  // namespace astgin::nn
