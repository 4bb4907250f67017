#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lasnn {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense row-major float32 tensor. The single value carrier of the engine:
// images, weights, spikes, membrane potentials, gradients.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, float fill);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, float v) { return Tensor(std::move(s), v); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  float& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  // Multi-index access for tests and cold paths; hot loops use raw pointers.
  float& at(int i, int j);
  float& at(int i, int j, int k);
  float& at(int i, int j, int k, int l);
  float at(int i, int j) const;
  float at(int i, int j, int k) const;
  float at(int i, int j, int k, int l) const;

  void fill(float v);
  // Same data, new shape; numel must match.
  Tensor reshaped(Shape s) const;

  bool all_finite() const;
  // Throws if any entry is NaN/Inf, naming the context.
  void check_finite(const std::string& what) const;
};

bool same_shape(const Tensor& a, const Tensor& b);
void require_shape(const Tensor& t, const Shape& want, const std::string& what);

}  // namespace lasnn
