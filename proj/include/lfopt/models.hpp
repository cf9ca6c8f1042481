#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lfopt/dataset.hpp"
#include "lfopt/vectors.hpp"

namespace lfopt {

enum class ModelKind { logreg, svm, mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnsupportedModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelSpec {
  ModelKind kind = ModelKind::logreg;
  double lambda = 0.0;
  std::size_t input_dim = 0;
  std::uint32_t num_classes = 2;
  std::size_t hidden_width = 0;  // mlp only

  void validate() const;

  static ModelSpec logreg(std::size_t d, double lambda) { return {ModelKind::logreg, lambda, d, 2, 0}; }
  static ModelSpec svm(std::size_t d, double lambda) { return {ModelKind::svm, lambda, d, 2, 0}; }
  static ModelSpec mlp(std::size_t d, std::uint32_t k, std::size_t hidden, double lambda) {
    return {ModelKind::mlp, lambda, d, k, hidden};
  }
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  bool regularized = true;

  std::size_t size() const { return rows * cols; }
};

// Flat parameter layout. mlp: W1 (H x d), b1 (H), W2 (K x H), b2 (K), row-major.
struct ParameterLayout {
  std::size_t total_dim = 0;
  std::vector<Segment> segments;

  const Segment& segment(std::string_view name) const;
};

ParameterLayout make_layout(const ModelSpec& spec);

// Gradient values plus the list of coordinates that may be nonzero. A dense
// buffer covers every coordinate.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(std::size_t n) : values_(n) {}

  std::size_t size() const { return values_.size(); }
  bool dense() const { return dense_; }
  const std::vector<std::uint32_t>& support() const { return support_; }
  std::span<const double> values() const { return values_.span(); }
  std::span<double> values() { return values_.span(); }
  double operator[](std::size_t k) const { return values_[k]; }
  const DenseVector& vector() const { return values_; }

  // Zeroes the previously written coordinates and resizes if needed.
  void reset(std::size_t n);
  void set_dense() { dense_ = true; }
  void set_sparse(std::vector<std::uint32_t> support);
  std::vector<std::uint32_t>& mutable_support() { return support_; }
  void mark_sparse() { dense_ = false; }

  template <typename F>
  void for_each_support(F&& f) const {
    if (dense_) {
      for (std::size_t k = 0; k < values_.size(); ++k) f(k);
    } else {
      for (auto k : support_) f(static_cast<std::size_t>(k));
    }
  }

 private:
  DenseVector values_;
  std::vector<std::uint32_t> support_;
  bool dense_ = true;
};

double sigmoid(double z);
// log(1 + exp(z)) without overflow.
double softplus(double z);
// Max-subtracted softmax.
void softmax(std::span<const double> logits, std::span<double> out);

double loss_single(const ModelSpec& spec, std::span<const double> params, const SparseVector& x,
                   std::uint32_t label);
inline double loss_single(const ModelSpec& spec, const DenseVector& params, const SparseVector& x,
                          std::uint32_t label) {
  return loss_single(spec, params.span(), x, label);
}

// Writes grad f_i(params) into out and returns f_i(params).
double grad_single(const ModelSpec& spec, std::span<const double> params, const SparseVector& x,
                   std::uint32_t label, GradientBuffer& out);
inline double grad_single(const ModelSpec& spec, const DenseVector& params, const SparseVector& x,
                          std::uint32_t label, GradientBuffer& out) {
  return grad_single(spec, params.span(), x, label, out);
}

struct LossAndGrad {
  double loss = 0.0;
  DenseVector grad;
};

// Exact mean over all instances, summed in index order.
LossAndGrad full_loss_and_grad(const ModelSpec& spec, std::span<const double> params, const Dataset& data);
inline LossAndGrad full_loss_and_grad(const ModelSpec& spec, const DenseVector& params, const Dataset& data) {
  return full_loss_and_grad(spec, params.span(), data);
}

// Adds sum_{i in [begin, end)} of f_i and grad f_i into loss_sum / grad_sum.
void accumulate_loss_and_grad(const ModelSpec& spec, std::span<const double> params, const Dataset& data,
                              std::size_t begin, std::size_t end, double& loss_sum,
                              std::span<double> grad_sum, GradientBuffer& scratch);

// Upper bound on the per-instance smoothness constant (logreg, svm only).
double lipschitz_bound(const ModelSpec& spec, const Dataset& data);
// Bound V on ||grad f_i(w)|| over ||w|| <= radius (logreg, svm only).
double grad_bound(const ModelSpec& spec, const Dataset& data, double radius);

// logreg/svm: zeros. mlp: weights ~ N(0, 0.01), biases 0.
DenseVector init_params(const ModelSpec& spec, std::uint64_t seed);

void check_compatible(const ModelSpec& spec, const Dataset& data);

}  // namespace lfopt
