#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hubpath/tensor.hpp"

namespace hubpath {

struct Dataset {
  std::string name;
  Tensor features;          // [N, D]
  std::vector<int> labels;  // N entries in [0, classes)
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  /// Rows `rows` as a new dataset.
  Dataset subset(std::span<const std::size_t> rows) const;
  std::vector<std::size_t> class_counts() const;
};

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows);

/// Header `f_0,...,f_{D-1},label`, one sample per line, values printed with
/// 17 significant digits so a reload is bit-exact.
void write_csv(const Dataset& data, const std::filesystem::path& path);
/// The class count is taken as max(label) + 1 unless `classes` is given.
Dataset read_csv(const std::filesystem::path& path, std::size_t classes = 0);

/// Fraction of rows whose argmax matches the label.
double accuracy(const Tensor& logits, std::span<const int> labels);
std::size_t argmax(std::span<const double> row);

}  // namespace hubpath
