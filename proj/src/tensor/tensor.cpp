#include "elfdd/tensor/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace elfdd {

std::string to_string(DType dtype) {
  return dtype == DType::F32 ? "f32" : "f64";
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("nonpositive dimension in " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, DType dtype, std::shared_ptr<const Buffer> buffer)
    : shape_(std::move(shape)),
      numel_(shape_numel(shape_)),
      dtype_(dtype),
      buffer_(std::move(buffer)) {}

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  if (dtype == DType::F32) {
    return from(std::move(shape), std::vector<float>(n, static_cast<float>(value)));
  }
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

Tensor Tensor::from(Shape shape, std::vector<float> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("element count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  return Tensor(std::move(shape), DType::F32,
                std::make_shared<const Buffer>(std::move(values)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("element count " + std::to_string(values.size()) +
                     " does not match shape " + shape_string(shape));
  }
  return Tensor(std::move(shape), DType::F64,
                std::make_shared<const Buffer>(std::move(values)));
}

std::int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::flat(std::int64_t index) const {
  return dispatch(dtype_, [&]<class T>() { return static_cast<double>(data<T>()[index]); });
}

double Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return flat(0);
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel_) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), dtype_, buffer_);
}

Tensor Tensor::to(DType dtype) const {
  if (dtype == dtype_) return *this;
  if (dtype == DType::F64) {
    auto src = data<float>();
    return from(shape_, std::vector<double>(src.begin(), src.end()));
  }
  auto src = data<double>();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i]);
  return from(shape_, std::move(out));
}

std::vector<double> Tensor::to_vector() const {
  return dispatch(dtype_, [&]<class T>() {
    auto d = data<T>();
    return std::vector<double>(d.begin(), d.end());
  });
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (defined() != other.defined()) return false;
  if (!defined()) return true;
  if (shape_ != other.shape_ || dtype_ != other.dtype_) return false;
  return dispatch(dtype_, [&]<class T>() {
    auto a = data<T>();
    auto b = other.data<T>();
    return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  });
}

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ShapeError(std::string(op) + ": mixed dtypes " + to_string(a.dtype()) + " and " +
                     to_string(b.dtype()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_same_dtype(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

namespace {

template <class Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, Op op) {
  require_same_shape(a, b, name);
  return dispatch(a.dtype(), [&]<class T>() {
    auto x = a.data<T>();
    auto y = b.data<T>();
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(x[i], y[i]);
    return Tensor::from(a.shape(), std::move(out));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](auto x, auto y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](auto x, auto y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](auto x, auto y) { return x * y; });
}

Tensor scale(const Tensor& a, double factor) {
  return dispatch(a.dtype(), [&]<class T>() {
    auto x = a.data<T>();
    std::vector<T> out(x.size());
    const T f = static_cast<T>(factor);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
    return Tensor::from(a.shape(), std::move(out));
  });
}

double sum(const Tensor& a) {
  return dispatch(a.dtype(), [&]<class T>() {
    double s = 0.0;
    for (auto v : a.data<T>()) s += static_cast<double>(v);
    return s;
  });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.flat(i) - b.flat(i)));
  return m;
}

bool all_finite(const Tensor& a) {
  return dispatch(a.dtype(), [&]<class T>() {
    for (auto v : a.data<T>()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  });
}

}  // namespace elfdd
