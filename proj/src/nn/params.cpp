#include "astgin/nn/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "astgin/error.hpp"
#include "astgin/nn/ops.hpp"

namespace astgin::nn {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'T', 'G', 'I', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename V>
void put(std::ofstream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V get(std::ifstream& in, const std::filesystem::path& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated checkpoint '" + path.string() + "'");
  return v;
}

}  // namespace

template <typename T>
Param<T>& ParameterStore<T>::add(const std::string& name, Shape shape, ParamKind kind, std::vector<T> values) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  if (numel(shape) != values.size())
    throw ValidationError("parameter '" + name + "' shape " + to_string(shape) + " does not match its values");
  Param<T> p;
  p.name = name;
  p.shape = std::move(shape);
  p.kind = kind;
  p.value = std::move(values);
  p.grad.assign(p.value.size(), T(0));
  p.m.assign(p.value.size(), T(0));
  p.v.assign(p.value.size(), T(0));
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Param<T>& ParameterStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("missing parameter '" + name + "'");
  return params_[it->second];
}

template <typename T>
const Param<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("missing parameter '" + name + "'");
  return params_[it->second];
}

template <typename T>
std::size_t ParameterStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
std::vector<std::vector<T>> ParameterStore<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != params_.size()) throw ValidationError("snapshot does not match parameter store");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != params_[i].value.size()) throw ValidationError("snapshot does not match parameter store");
    params_[i].value = values[i];
  }
}

template <typename T>
std::vector<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> w(fan_in * fan_out);
  for (T& x : w) x = static_cast<T>(dist(rng));
  return w;
}

template <typename T>
void adam_step(ParameterStore<T>& store, double lr, const AdamConfig& config) {
  for (auto& p : store) {
    if (p.grad.size() != p.value.size()) throw ValidationError("gradient missing for parameter '" + p.name + "'");
    if (config.checked)
      for (const T& g : p.grad)
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient for parameter '" + p.name + "'");
  }
  for (auto& p : store) {
    ++p.step;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.step));
    const T b1 = static_cast<T>(config.beta1);
    const T b2 = static_cast<T>(config.beta2);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      p.m[i] = b1 * p.m[i] + (T(1) - b1) * g;
      p.v[i] = b2 * p.v[i] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(p.m[i]) / c1;
      const double vhat = static_cast<double>(p.v[i]) / c2;
      p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
}

template <typename T>
double l2_penalty_value(const ParameterStore<T>& store) {
  double total = 0.0;
  for (const auto& p : store)
    if (p.kind == ParamKind::weight)
      for (T w : p.value) total += static_cast<double>(w) * static_cast<double>(w);
  return total;
}

template <typename T>
Var<T> l2_penalty(Tape<T>& tape, ParameterStore<T>& store) {
  Var<T> total;
  for (auto& p : store) {
    if (p.kind != ParamKind::weight) continue;
    Var<T> term = sum_squares(tape.parameter(p));
    total = total.valid() ? add(total, term) : term;
  }
  if (!total.valid()) return tape.constant(Shape{}, {T(0)});
  return total;
}

template <typename T>
void save_checkpoint(const ParameterStore<T>& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.kind));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) put<std::uint64_t>(out, d);
    for (T v : p.value) put<double>(out, static_cast<double>(v));
  }
  if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
}

template <typename T>
ParameterStore<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("'" + path.string() + "' is not a checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, path);
  ParameterStore<T> store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw IoError("corrupt checkpoint '" + path.string() + "'");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto kind = get<std::uint8_t>(in, path);
    if (kind > 2) throw IoError("corrupt checkpoint '" + path.string() + "'");
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw IoError("corrupt checkpoint '" + path.string() + "'");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, path));
    std::vector<T> values(numel(shape));
    for (T& v : values) v = static_cast<T>(get<double>(in, path));
    store.add(name, std::move(shape), static_cast<ParamKind>(kind), std::move(values));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint '" + path.string() + "'");
  return store;
}

template <typename T>
void load_checkpoint_into(ParameterStore<T>& store, const std::filesystem::path& path) {
  ParameterStore<T> loaded = load_checkpoint<T>(path);
  if (loaded.size() != store.size())
    throw ValidationError("checkpoint holds " + std::to_string(loaded.size()) + " parameters, model expects " +
                          std::to_string(store.size()));
  for (auto& p : store) {
    const auto& q = loaded.get(p.name);
    if (q.shape != p.shape)
      throw ValidationError("checkpoint shape " + to_string(q.shape) + " for '" + p.name + "' differs from model " +
                            to_string(p.shape));
    p.value = q.value;
  }
}

#define ASTGIN_INSTANTIATE_PARAMS(T)                                                             \
  template class ParameterStore<T>;                                                              \
  template std::vector<T> glorot_uniform<T>(std::size_t, std::size_t, std::mt19937_64&);         \
  template void adam_step<T>(ParameterStore<T>&, double, const AdamConfig&);                     \
  template double l2_penalty_value<T>(const ParameterStore<T>&);                                 \
  template Var<T> l2_penalty<T>(Tape<T>&, ParameterStore<T>&);                                   \
  template void save_checkpoint<T>(const ParameterStore<T>&, const std::filesystem::path&);      \
  template ParameterStore<T> load_checkpoint<T>(const std::filesystem::path&);                   \
  template void load_checkpoint_into<T>(ParameterStore<T>&, const std::filesystem::path&);

ASTGIN_INSTANTIATE_PARAMS(float)
ASTGIN_INSTANTIATE_PARAMS(double)

#undef ASTGIN_INSTANTIATE_PARAMS

}  // namespace astgin::nn
