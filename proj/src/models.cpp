#include "lfopt/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lfopt/rng.hpp"

namespace lfopt {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::svm: return "svm";
    case ModelKind::mlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logreg") return ModelKind::logreg;
  if (name == "svm") return ModelKind::svm;
  if (name == "mlp") return ModelKind::mlp;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("model: lambda must be >= 0");
  if (input_dim == 0) throw std::invalid_argument("model: input_dim must be positive");
  if (kind == ModelKind::mlp) {
    if (num_classes < 2) throw std::invalid_argument("model: mlp needs at least 2 classes");
    if (hidden_width < 1) throw std::invalid_argument("model: mlp needs hidden_width >= 1");
  } else if (num_classes != 2) {
    throw std::invalid_argument("model: logreg/svm need exactly 2 classes");
  }
}

const Segment& ParameterLayout::segment(std::string_view name) const {
  for (const auto& s : segments) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("layout: no segment '" + std::string(name) + "'");
}

ParameterLayout make_layout(const ModelSpec& spec) {
  spec.validate();
  ParameterLayout layout;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, bool reg) {
    layout.segments.push_back({std::move(name), layout.total_dim, rows, cols, reg});
    layout.total_dim += rows * cols;
  };
  if (spec.kind == ModelKind::mlp) {
    const std::size_t h = spec.hidden_width;
    const std::size_t k = spec.num_classes;
    add("W1", h, spec.input_dim, true);
    add("b1", h, 1, false);
    add("W2", k, h, true);
    add("b2", k, 1, false);
  } else {
    add("w", spec.input_dim, 1, true);
  }
  return layout;
}

void GradientBuffer::reset(std::size_t n) {
  if (values_.size() != n) {
    values_ = DenseVector(n);
  } else if (dense_) {
    values_.fill(0.0);
  } else {
    for (auto k : support_) values_[k] = 0.0;
  }
  support_.clear();
  dense_ = false;
}

void GradientBuffer::set_sparse(std::vector<std::uint32_t> support) {
  support_ = std::move(support);
  dense_ = false;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

void softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.size() != out.size()) throw DimensionError("softmax: length mismatch");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    total += out[k];
  }
  for (double& o : out) o /= total;
}

void check_compatible(const ModelSpec& spec, const Dataset& data) {
  spec.validate();
  if (data.dim > spec.input_dim) {
    throw DimensionError("dataset dim " + std::to_string(data.dim) + " exceeds model input_dim " +
                         std::to_string(spec.input_dim));
  }
  if (data.num_classes > spec.num_classes) {
    throw std::invalid_argument("dataset has more classes than the model");
  }
}

namespace {

std::size_t total_dim(const ModelSpec& spec) {
  if (spec.kind != ModelKind::mlp) return spec.input_dim;
  const std::size_t h = spec.hidden_width;
  return h * spec.input_dim + h + spec.num_classes * h + spec.num_classes;
}

void check_params(const ModelSpec& spec, std::span<const double> params) {
  const auto total = total_dim(spec);
  if (params.size() != total) {
    throw DimensionError("params length " + std::to_string(params.size()) + " != layout total_dim " +
                         std::to_string(total));
  }
}

void check_instance(const ModelSpec& spec, const SparseVector& x, std::uint32_t label) {
  if (x.dim > spec.input_dim) throw DimensionError("instance dim exceeds model input_dim");
  if (label >= spec.num_classes) throw std::invalid_argument("label out of range for model");
}

double label_sign(std::uint32_t label) { return label == 1 ? 1.0 : -1.0; }

double half_sq_norm(std::span<const double> v) { return 0.5 * l2_norm_sq(v); }

struct MlpView {
  std::size_t d, h, k;
  std::size_t w1, b1, w2, b2;

  explicit MlpView(const ModelSpec& spec)
      : d(spec.input_dim), h(spec.hidden_width), k(spec.num_classes) {
    w1 = 0;
    b1 = h * d;
    w2 = b1 + h;
    b2 = w2 + k * h;
  }
};

// Forward pass: hidden activations and logits. Returns false on a non-finite logit.
bool mlp_forward(const MlpView& m, std::span<const double> p, const SparseVector& x,
                 std::vector<double>& hidden, std::vector<double>& logits) {
  hidden.assign(m.h, 0.0);
  logits.assign(m.k, 0.0);
  for (std::size_t j = 0; j < m.h; ++j) {
    const double* row = p.data() + m.w1 + j * m.d;
    double z = p[m.b1 + j];
    for (std::size_t t = 0; t < x.nnz(); ++t) z += row[x.indices[t]] * x.values[t];
    hidden[j] = sigmoid(z);
  }
  bool finite = true;
  for (std::size_t c = 0; c < m.k; ++c) {
    const double* row = p.data() + m.w2 + c * m.h;
    double z = p[m.b2 + c];
    for (std::size_t j = 0; j < m.h; ++j) z += row[j] * hidden[j];
    logits[c] = z;
    finite = finite && std::isfinite(z);
  }
  return finite;
}

double cross_entropy(std::span<const double> logits, std::uint32_t label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  return -(logits[label] - mx) + std::log(total);
}

double regularizer(const ModelSpec& spec, std::span<const double> params) {
  if (spec.lambda == 0.0) return 0.0;
  if (spec.kind != ModelKind::mlp) return spec.lambda * half_sq_norm(params);
  MlpView m(spec);
  return spec.lambda * (half_sq_norm(params.subspan(m.w1, m.h * m.d)) +
                        half_sq_norm(params.subspan(m.w2, m.k * m.h)));
}

double linear_grad(const ModelSpec& spec, std::span<const double> w, const SparseVector& x,
                   std::uint32_t label, GradientBuffer& out) {
  const double margin = dot(x, w);
  if (!std::isfinite(margin)) throw NonFiniteError("non-finite margin (parameters not finite)");
  const double y = label_sign(label);
  double coef = 0.0;
  double loss = 0.0;
  if (spec.kind == ModelKind::logreg) {
    loss = softplus(-y * margin);
    coef = -y * sigmoid(-y * margin);
  } else {
    const double slack = 1.0 - y * margin;
    if (slack > 0.0) {
      loss = slack;
      coef = -y;
    }
  }

  auto g = out.values();
  if (spec.lambda > 0.0) {
    double reg = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!std::isfinite(w[k])) throw NonFiniteError("non-finite parameter");
      g[k] = spec.lambda * w[k];
      reg += w[k] * w[k];
    }
    loss += 0.5 * spec.lambda * reg;
    if (coef != 0.0) {
      for (std::size_t t = 0; t < x.nnz(); ++t) g[x.indices[t]] += coef * x.values[t];
    }
    out.set_dense();
  } else {
    for (std::size_t t = 0; t < x.nnz(); ++t) g[x.indices[t]] = coef * x.values[t];
    out.mutable_support().assign(x.indices.begin(), x.indices.end());
    out.mark_sparse();
  }
  return loss;
}

double mlp_grad(const ModelSpec& spec, std::span<const double> p, const SparseVector& x,
                std::uint32_t label, GradientBuffer& out) {
  MlpView m(spec);
  std::vector<double> hidden, logits;
  if (!mlp_forward(m, p, x, hidden, logits)) throw NonFiniteError("non-finite logits (parameters not finite)");

  std::vector<double> delta2(m.k);
  softmax(logits, delta2);
  const double loss_data = cross_entropy(logits, label);
  delta2[label] -= 1.0;

  std::vector<double> delta1(m.h, 0.0);
  for (std::size_t c = 0; c < m.k; ++c) {
    const double* row = p.data() + m.w2 + c * m.h;
    for (std::size_t j = 0; j < m.h; ++j) delta1[j] += row[j] * delta2[c];
  }
  for (std::size_t j = 0; j < m.h; ++j) delta1[j] *= hidden[j] * (1.0 - hidden[j]);

  auto g = out.values();
  double loss = loss_data;
  if (spec.lambda > 0.0) {
    double reg = 0.0;
    for (std::size_t k = m.w1; k < m.w1 + m.h * m.d; ++k) {
      if (!std::isfinite(p[k])) throw NonFiniteError("non-finite parameter");
      g[k] = spec.lambda * p[k];
      reg += p[k] * p[k];
    }
    for (std::size_t k = m.w2; k < m.w2 + m.k * m.h; ++k) {
      g[k] = spec.lambda * p[k];
      reg += p[k] * p[k];
    }
    loss += 0.5 * spec.lambda * reg;
    out.set_dense();
  } else {
    auto& support = out.mutable_support();
    support.reserve(m.h * x.nnz() + m.h + m.k * m.h + m.k);
    for (std::size_t j = 0; j < m.h; ++j) {
      for (auto idx : x.indices) support.push_back(static_cast<std::uint32_t>(m.w1 + j * m.d + idx));
    }
    for (std::size_t k = m.b1; k < m.b2 + m.k; ++k) support.push_back(static_cast<std::uint32_t>(k));
    out.mark_sparse();
  }

  for (std::size_t j = 0; j < m.h; ++j) {
    double* row = g.data() + m.w1 + j * m.d;
    for (std::size_t t = 0; t < x.nnz(); ++t) row[x.indices[t]] += delta1[j] * x.values[t];
    g[m.b1 + j] = delta1[j];
  }
  for (std::size_t c = 0; c < m.k; ++c) {
    double* row = g.data() + m.w2 + c * m.h;
    for (std::size_t j = 0; j < m.h; ++j) row[j] += delta2[c] * hidden[j];
    g[m.b2 + c] = delta2[c];
  }
  return loss;
}

}  // namespace

double loss_single(const ModelSpec& spec, std::span<const double> params, const SparseVector& x,
                   std::uint32_t label) {
  check_params(spec, params);
  check_instance(spec, x, label);
  for (double v : params) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite parameter");
  }
  double loss = 0.0;
  if (spec.kind == ModelKind::mlp) {
    MlpView m(spec);
    std::vector<double> hidden, logits;
    mlp_forward(m, params, x, hidden, logits);
    loss = cross_entropy(logits, label);
  } else {
    const double y = label_sign(label);
    const double margin = dot(x, params);
    loss = spec.kind == ModelKind::logreg ? softplus(-y * margin) : std::max(0.0, 1.0 - y * margin);
  }
  return loss + regularizer(spec, params);
}

double grad_single(const ModelSpec& spec, std::span<const double> params, const SparseVector& x,
                   std::uint32_t label, GradientBuffer& out) {
  check_params(spec, params);
  check_instance(spec, x, label);
  out.reset(params.size());
  if (spec.kind == ModelKind::mlp) return mlp_grad(spec, params, x, label, out);
  return linear_grad(spec, params, x, label, out);
}

void accumulate_loss_and_grad(const ModelSpec& spec, std::span<const double> params, const Dataset& data,
                              std::size_t begin, std::size_t end, double& loss_sum,
                              std::span<double> grad_sum, GradientBuffer& scratch) {
  if (grad_sum.size() != params.size()) throw DimensionError("accumulate: gradient length mismatch");
  for (std::size_t i = begin; i < end; ++i) {
    loss_sum += grad_single(spec, params, data.instances[i], data.labels[i], scratch);
    scratch.for_each_support([&](std::size_t k) { grad_sum[k] += scratch[k]; });
  }
}

LossAndGrad full_loss_and_grad(const ModelSpec& spec, std::span<const double> params, const Dataset& data) {
  check_params(spec, params);
  if (data.size() == 0) throw std::invalid_argument("full_loss_and_grad: empty dataset");
  LossAndGrad result;
  result.grad = DenseVector(params.size());
  GradientBuffer scratch;
  accumulate_loss_and_grad(spec, params, data, 0, data.size(), result.loss, result.grad.span(), scratch);
  const auto n = static_cast<double>(data.size());
  result.loss /= n;
  for (double& g : result.grad) g /= n;
  return result;
}

namespace {

double max_row_norm_sq(const Dataset& data) {
  double best = 0.0;
  for (const auto& x : data.instances) best = std::max(best, l2_norm_sq(x));
  return best;
}

}  // namespace

double lipschitz_bound(const ModelSpec& spec, const Dataset& data) {
  switch (spec.kind) {
    case ModelKind::logreg: return max_row_norm_sq(data) / 4.0 + spec.lambda;
    case ModelKind::svm: return spec.lambda;
    case ModelKind::mlp: break;
  }
  throw UnsupportedModelError("lipschitz_bound: mlp has no global smoothness constant");
}

double grad_bound(const ModelSpec& spec, const Dataset& data, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("grad_bound: radius must be >= 0");
  if (spec.kind == ModelKind::mlp) throw UnsupportedModelError("grad_bound: mlp unsupported");
  // |loss derivative| <= 1 for both logistic and hinge losses.
  return std::sqrt(max_row_norm_sq(data)) + spec.lambda * radius;
}

DenseVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  const auto layout = make_layout(spec);
  DenseVector params(layout.total_dim);
  if (spec.kind != ModelKind::mlp) return params;
  std::mt19937_64 gen(splitmix64(seed ^ kInitStream));
  std::normal_distribution<double> normal(0.0, 0.1);
  for (const auto& seg : layout.segments) {
    if (!seg.regularized) continue;
    for (std::size_t k = seg.offset; k < seg.offset + seg.size(); ++k) params[k] = normal(gen);
  }
  return params;
}

}  // namespace lfopt
