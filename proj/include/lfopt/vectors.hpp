#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfopt {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fixed-length dense vector of doubles.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit DenseVector(std::vector<double> values) : values_(std::move(values)) {}
  DenseVector(std::initializer_list<double> init) : values_(init) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> values_;
};

// Sparse vector with strictly increasing 0-based indices, each < dim.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t dim = 0;

  std::size_t nnz() const { return indices.size(); }

  // Throws std::invalid_argument if the invariants do not hold.
  void validate() const;

  // Sorts (index, value) pairs by index and rejects duplicates.
  void canonicalize();

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

double dot(const SparseVector& a, std::span<const double> b);
inline double dot(const SparseVector& a, const DenseVector& b) { return dot(a, b.span()); }

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm_sq(std::span<const double> v);
inline double l2_norm_sq(const DenseVector& v) { return l2_norm_sq(v.span()); }
double l2_norm_sq(const SparseVector& v);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

DenseVector densify(const SparseVector& v);

}  // namespace lfopt
