#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "elfdd/core/error.hpp"

namespace elfdd {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

std::string to_string(DType dtype);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <class T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }

/// Immutable dense row-major array.
///
/// Copies share the underlying buffer; every operation that changes values
/// produces a new Tensor. A default-constructed Tensor is "undefined" (rank 0,
/// no buffer) and is used as the empty slot in gradient lists.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::F32);
  static Tensor full(Shape shape, double value, DType dtype = DType::F32);
  static Tensor scalar(double value, DType dtype = DType::F32);
  static Tensor from(Shape shape, std::vector<float> values);
  static Tensor from(Shape shape, std::vector<double> values);

  bool defined() const { return static_cast<bool>(buffer_); }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }

  template <class T>
  std::span<const T> data() const {
    if (!defined()) throw ShapeError("access to undefined tensor");
    const auto* v = std::get_if<std::vector<T>>(buffer_.get());
    if (v == nullptr) {
      throw ShapeError("dtype mismatch: tensor is " + to_string(dtype_));
    }
    return {v->data(), v->size()};
  }

  /// Element at flat index, widened to double.
  double flat(std::int64_t index) const;
  /// Value of a single-element tensor.
  double item() const;

  /// Same buffer, new shape with equal element count.
  Tensor reshape(Shape shape) const;
  Tensor to(DType dtype) const;
  std::vector<double> to_vector() const;

  /// True when shape, dtype and every element bit pattern agree.
  bool bit_equal(const Tensor& other) const;

 private:
  using Buffer = std::variant<std::vector<float>, std::vector<double>>;

  Tensor(Shape shape, DType dtype, std::shared_ptr<const Buffer> buffer);

  Shape shape_;
  std::int64_t numel_ = 0;
  DType dtype_ = DType::F32;
  std::shared_ptr<const Buffer> buffer_;
};

/// Raises ShapeError unless both tensors carry the same dtype.
void require_same_dtype(const Tensor& a, const Tensor& b, const char* op);
/// Raises ShapeError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

/// Calls fn.template operator()<T>() with T = float or double per dtype.
template <class Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
  if (dtype == DType::F32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

// Small elementwise helpers that produce new tensors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
double sum(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

}  // namespace elfdd
