#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dualx/error.hpp"
#include "dualx/rng.hpp"

namespace dualx {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto e : s) n *= e;
  return n;
}

inline Shape row_major_strides(const Shape& s) {
  Shape st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
struct dtype_name;
template <>
struct dtype_name<float> {
  static constexpr const char* value = "f32";
};
template <>
struct dtype_name<double> {
  static constexpr const char* value = "f64";
};

// Dense row-major tensor of reals. Values are shared copy-on-nothing: a
// tensor is immutable after construction except through the optimizer's
// explicit value access and gradient accumulation during backward. The
// gradient buffer exists exactly when requires_grad is set and always has
// the same element count as the values.
template <class T>
class TensorT {
  static_assert(std::is_floating_point_v<T>, "real-valued tensors only");

 public:
  TensorT() = default;

  explicit TensorT(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_ = std::make_shared<std::vector<T>>(static_cast<size_t>(dualx::numel(shape_)), T(0));
  }

  TensorT(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    validate_shape(shape_);
    if (static_cast<std::int64_t>(values.size()) != dualx::numel(shape_))
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape_));
    data_ = std::make_shared<std::vector<T>>(std::move(values));
    check_finite("tensor construction");
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

  static TensorT full(Shape shape, T v) {
    TensorT t(std::move(shape));
    for (auto& x : *t.data_) x = v;
    return t;
  }

  static TensorT ones(Shape shape) { return full(std::move(shape), T(1)); }

  static TensorT scalar(T v) {
    TensorT t{Shape{}};
    (*t.data_)[0] = v;
    return t;
  }

  static TensorT uniform(Shape shape, T a, T b, Rng& rng) {
    TensorT t(std::move(shape));
    for (auto& x : *t.data_) x = static_cast<T>(rng.next_uniform(a, b));
    return t;
  }

  static TensorT normal(Shape shape, T mu, T sigma, Rng& rng) {
    if (sigma < T(0)) throw ConfigError("normal fill requires sigma >= 0");
    TensorT t(std::move(shape));
    for (auto& x : *t.data_) x = static_cast<T>(rng.next_normal(mu, sigma));
    return t;
  }

  static TensorT truncated_normal(Shape shape, T mu, T sigma, Rng& rng) {
    if (sigma < T(0)) throw ConfigError("truncated normal fill requires sigma >= 0");
    TensorT t(std::move(shape));
    for (auto& x : *t.data_) x = static_cast<T>(rng.next_truncated_normal(mu, sigma));
    return t;
  }

  static TensorT from(Shape shape, std::initializer_list<T> values) {
    return TensorT(std::move(shape), std::vector<T>(values));
  }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  std::int64_t numel() const { return defined() ? static_cast<std::int64_t>(data_->size()) : 0; }

  const std::vector<T>& values() const { return *data_; }
  // Mutable access is reserved for leaf updates (init, optimizer steps);
  // everything else must go through recorded ops.
  std::vector<T>& values_mut() { return *data_; }
  const T* data() const { return data_->data(); }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
  }

  T at(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<std::int64_t>(idx.size()) != ndim())
      throw ShapeError("index rank mismatch");
    Shape st = row_major_strides(shape_);
    std::int64_t off = 0;
    size_t k = 0;
    for (auto i : idx) off += i * st[k++];
    return (*data_)[static_cast<size_t>(off)];
  }

  bool requires_grad() const { return grad_ != nullptr; }

  TensorT& set_requires_grad(bool on) {
    if (on && !grad_)
      grad_ = std::make_shared<std::vector<T>>(data_->size(), T(0));
    else if (!on)
      grad_.reset();
    return *this;
  }

  const std::vector<T>& grad() const {
    if (!grad_) throw ConfigError("gradient requested on tensor without requires_grad");
    return *grad_;
  }
  std::vector<T>& grad_mut() {
    if (!grad_) throw ConfigError("gradient requested on tensor without requires_grad");
    return *grad_;
  }
  void zero_grad() {
    if (grad_)
      for (auto& g : *grad_) g = T(0);
  }

  // Buffer identity, used to detect aliasing in tests.
  const void* data_id() const { return data_.get(); }

  TensorT clone() const {
    TensorT t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  void check_finite(const char* where) const {
    for (const T& v : *data_)
      if (!std::isfinite(v))
        throw NumericError(std::string(where) + ": non-finite value encountered");
  }

 private:
  static void validate_shape(const Shape& s) {
    for (auto e : s)
      if (e < 1) throw ShapeError("extent " + std::to_string(e) + " in shape " + shape_str(s));
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  std::shared_ptr<std::vector<T>> grad_;
};

using Tensor = TensorT<float>;

// --- DXTENSOR dump format -------------------------------------------------
// Header line "DXTENSOR v1 <dtype> <ndim> <extents...>" followed by the raw
// little-endian scalar payload. Checkpoints embed these blobs back to back.

static_assert(std::endian::native == std::endian::little,
              "DXTENSOR payloads are little-endian; big-endian hosts are unsupported");

template <class T>
void write_tensor(std::ostream& out, const TensorT<T>& t) {
  out << "DXTENSOR v1 " << dtype_name<T>::value << " " << t.ndim();
  for (auto e : t.shape()) out << " " << e;
  out << "\n";
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(T)));
  if (!out) throw IoError("tensor write failed");
}

template <class T>
TensorT<T> read_tensor(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("tensor read: missing header");
  std::istringstream hs(line);
  std::string magic, version, dtype;
  std::int64_t nd = -1;
  hs >> magic >> version >> dtype >> nd;
  if (magic != "DXTENSOR" || version != "v1" || nd < 0)
    throw IoError("tensor read: bad header '" + line + "'");
  if (dtype != dtype_name<T>::value)
    throw IoError("tensor read: dtype " + dtype + " does not match requested " +
                  dtype_name<T>::value);
  Shape shape(static_cast<size_t>(nd));
  for (auto& e : shape)
    if (!(hs >> e)) throw IoError("tensor read: truncated header");
  std::vector<T> values(static_cast<size_t>(numel(shape)));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!in) throw IoError("tensor read: truncated payload");
  return TensorT<T>(std::move(shape), std::move(values));
}

template <class T>
void save_tensor(const std::string& path, const TensorT<T>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_tensor(f, t);
}

template <class T>
TensorT<T> load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return read_tensor<T>(f);
}

}  // namespace dualx
