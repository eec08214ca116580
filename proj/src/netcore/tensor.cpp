#include "convat/netcore/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "convat/netcore/errors.hpp"

namespace convat {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged initializer for Tensor2");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor2::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("axpy: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> x, double alpha) {
  for (double& v : x) v *= alpha;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace convat
