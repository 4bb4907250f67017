#include "lasnn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace lasnn {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("nonpositive dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), 0.0f) {}

Tensor::Tensor(Shape s, float fill)
    : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), fill) {}

float& Tensor::at(int i, int j) {
  return data[static_cast<std::size_t>(i) * shape[1] + j];
}
float& Tensor::at(int i, int j, int k) {
  return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}
float& Tensor::at(int i, int j, int k, int l) {
  return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
}
float Tensor::at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }
float Tensor::at(int i, int j, int k) const { return const_cast<Tensor*>(this)->at(i, j, k); }
float Tensor::at(int i, int j, int k, int l) const { return const_cast<Tensor*>(this)->at(i, j, k, l); }

void Tensor::fill(float v) {
  for (float& x : data) x = v;
}

Tensor Tensor::reshaped(Shape s) const {
  if (shape_numel(s) != numel())
    throw std::invalid_argument("reshape " + shape_str(shape) + " -> " + shape_str(s) +
                                " changes element count");
  Tensor t;
  t.shape = std::move(s);
  t.data = data;
  return t;
}

bool Tensor::all_finite() const {
  for (float x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite())
    throw std::runtime_error(what + ": tensor " + shape_str(shape) + " contains NaN/Inf");
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

void require_shape(const Tensor& t, const Shape& want, const std::string& what) {
  if (t.shape != want)
    throw std::invalid_argument(what + ": expected shape " + shape_str(want) + ", got " +
                                shape_str(t.shape));
}

}  // namespace lasnn
