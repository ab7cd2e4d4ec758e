#include "hubpath/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hubpath/error.hpp"

namespace hubpath {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_volume(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_string(shape_));
  if (shape_volume(shape_) != values_.size())
    throw ShapeError("shape " + shape_string(shape_) + " needs " + std::to_string(shape_volume(shape_)) +
                     " values, got " + std::to_string(values_.size()));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::span<double> Tensor::grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::generator:
      return "generator";
    case ParamGroup::aggregator:
      return "aggregator";
    case ParamGroup::expert:
      return "expert";
  }
  return "?";
}

}  // namespace hubpath
