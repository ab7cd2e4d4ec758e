#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hubpath {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer of the
/// same shape. Rank-2 tensors are the common case ([batch, features]).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  /// Leading dimension.
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_.front(); }
  /// Product of all trailing dimensions.
  std::size_t cols() const noexcept { return rows() == 0 ? 0 : size() / rows(); }
  std::size_t last_dim() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  bool has_grad() const noexcept { return !values_.empty() && grad_.size() == values_.size(); }
  /// Allocates a zeroed gradient buffer if none exists.
  std::span<double> grad();
  std::span<const double> grad() const noexcept { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

/// Which line of the dual objective updates a parameter.
enum class ParamGroup { generator, aggregator, expert };

std::string group_name(ParamGroup group);

struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::generator;
  int expert_index = -1;  // meaningful only for ParamGroup::expert
  Tensor tensor;

  Parameter() = default;
  Parameter(std::string n, ParamGroup g, Tensor t, int expert = -1)
      : name(std::move(n)), group(g), expert_index(expert), tensor(std::move(t)) {}

  std::size_t size() const noexcept { return tensor.size(); }
};

/// A dense layer's parameters. W is [in, out], b is [out].
struct AffineParams {
  Parameter weight;
  Parameter bias;

  std::size_t fan_in() const { return weight.tensor.shape().at(0); }
  std::size_t fan_out() const { return weight.tensor.shape().at(1); }
  std::size_t size() const { return weight.size() + bias.size(); }
};

}  // namespace hubpath
