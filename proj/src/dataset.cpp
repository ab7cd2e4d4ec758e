#include "hubpath/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hubpath/error.hpp"

namespace hubpath {

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.name = name;
  out.classes = classes;
  const std::size_t d = dim();
  if (!rows.empty()) out.features = Tensor({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(&features.data()[rows[r] * d], d, &out.features.data()[r * d]);
    out.labels.push_back(labels[rows[r]]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset s = data.subset(rows);
  return Batch{std::move(s.features), std::move(s.labels)};
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  const std::size_t d = data.dim();
  for (std::size_t j = 0; j < d; ++j) out << "f_" << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features.at(r, j));
      out << buf << ',';
    }
    out << data.labels[r] << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Dataset read_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset '" + path.string() + "' is empty");
  std::size_t d = 0;
  {
    std::stringstream ss(line);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 2 || cols.back() != "label")
      throw FormatError("dataset '" + path.string() + "' header must be f_0..f_{D-1},label");
    d = cols.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
      if (cols[j] != "f_" + std::to_string(j))
        throw FormatError("dataset '" + path.string() + "' column " + std::to_string(j) + " is '" + cols[j] + "'");
  }
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    try {
      while (std::getline(ss, cell, ',')) {
        if (n < d)
          values.push_back(std::stod(cell));
        else if (n == d)
          labels.push_back(std::stoi(cell));
        ++n;
      }
    } catch (const std::logic_error&) {
      throw FormatError("dataset '" + path.string() + "' line " + std::to_string(lineno) + " is malformed");
    }
    if (n != d + 1)
      throw FormatError("dataset '" + path.string() + "' line " + std::to_string(lineno) + " has " +
                        std::to_string(n) + " cells, expected " + std::to_string(d + 1));
  }
  if (labels.empty()) throw FormatError("dataset '" + path.string() + "' has no rows");
  Dataset data;
  data.name = path.stem().string();
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw FormatError("negative label in '" + path.string() + "'");
  data.classes = classes ? classes : static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= data.classes)
    throw FormatError("label " + std::to_string(max_label) + " outside class count in '" + path.string() + "'");
  data.features = Tensor({labels.size(), d}, std::move(values));
  data.labels = std::move(labels);
  return data;
}

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    if (static_cast<int>(argmax(logits.row(r))) == labels[r]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace hubpath
