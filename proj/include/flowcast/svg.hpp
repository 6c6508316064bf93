#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowcast/tensor.hpp"

namespace flowcast::svg {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
  bool dashed = false;
};

// Shaded region between two curves sharing the same xs.
struct Band {
  std::vector<double> xs;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string color = "#1f77b4";
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

// Non-finite points are skipped. Throws SizeError when there is nothing to draw.
std::string line_chart(const Axes& axes, const std::vector<Series>& series,
                       const std::optional<Band>& band = std::nullopt);

// Square matrix with row and column labels; darker cells hold larger values.
std::string heatmap(const std::string& title, const std::vector<std::string>& labels, const Tensor& matrix);

// Equal-width bins over [min, max] of the sample.
std::string histogram(const Axes& axes, const std::vector<double>& samples, std::size_t bins = 20);

}  // namespace flowcast::svg
