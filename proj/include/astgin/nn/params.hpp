#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "astgin/nn/tape.hpp"

namespace astgin::nn {

// Only weights enter the L2 penalty.
enum class ParamKind : std::uint8_t { weight = 0, bias = 1, norm = 2 };

template <typename T>
struct Param {
  std::string name;
  Shape shape;
  ParamKind kind = ParamKind::weight;
  std::vector<T> value;
  std::vector<T> grad;
  // Adam moments and step count.
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
};

template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;

  // Throws ValidationError on duplicate names or size mismatch.
  Param<T>& add(const std::string& name, Shape shape, ParamKind kind, std::vector<T> values);
  Param<T>& get(const std::string& name);
  const Param<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

  // Values only; Adam state is left alone.
  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

  // Same names and shapes, values converted to U; fresh optimizer state.
  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.shape, p.kind, std::vector<U>(p.value.begin(), p.value.end()));
    return out;
  }

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Glorot-uniform initialization for a fan_in x fan_out weight.
template <typename T>
std::vector<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool checked = false;  // NaN/Inf gradients throw NumericalError
};

// Bias-corrected Adam applied in place to every parameter.
template <typename T>
void adam_step(ParameterStore<T>& store, double lr, const AdamConfig& config = {});

// Sum of squared weight entries (bias and norm parameters excluded).
template <typename T>
double l2_penalty_value(const ParameterStore<T>& store);

// Differentiable form of l2_penalty_value recorded on `tape`; returns a
// constant zero scalar when the store holds no weights.
template <typename T>
Var<T> l2_penalty(Tape<T>& tape, ParameterStore<T>& store);

// Binary checkpoint; layout described in README.md.
template <typename T>
void save_checkpoint(const ParameterStore<T>& store, const std::filesystem::path& path);

template <typename T>
ParameterStore<T> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into an existing store; names and shapes must
// match exactly.
template <typename T>
void load_checkpoint_into(ParameterStore<T>& store, const std::filesystem::path& path);

}  // namespace astgin::nn
