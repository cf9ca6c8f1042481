#include "lfopt/vectors.hpp"

#include <numeric>

namespace lfopt {

void SparseVector::validate() const {
  if (indices.size() != values.size()) {
    throw std::invalid_argument("sparse vector: index/value length mismatch");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim) {
      throw std::invalid_argument("sparse vector: index " + std::to_string(indices[k]) +
                                  " out of range for dim " + std::to_string(dim));
    }
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw std::invalid_argument("sparse vector: indices not strictly increasing");
    }
  }
}

void SparseVector::canonicalize() {
  std::vector<std::size_t> order(indices.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return indices[a] < indices[b]; });
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  idx.reserve(order.size());
  val.reserve(order.size());
  for (std::size_t k : order) {
    idx.push_back(indices[k]);
    val.push_back(values[k]);
  }
  indices = std::move(idx);
  values = std::move(val);
  validate();
}

double dot(const SparseVector& a, std::span<const double> b) {
  if (a.dim > b.size()) {
    throw DimensionError("dot: sparse dim " + std::to_string(a.dim) + " exceeds dense length " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.indices.size(); ++k) s += a.values[k] * b[a.indices[k]];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double l2_norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double l2_norm_sq(const SparseVector& v) { return l2_norm_sq(std::span<const double>(v.values)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

DenseVector densify(const SparseVector& v) {
  DenseVector out(v.dim);
  for (std::size_t k = 0; k < v.indices.size(); ++k) out[v.indices[k]] = v.values[k];
  return out;
}

}  // namespace lfopt
