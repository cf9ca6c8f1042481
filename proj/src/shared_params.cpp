#include "lfopt/shared_params.hpp"

namespace lfopt {

ParameterBlock::ParameterBlock(std::size_t length)
    : length_(length), cells_(std::make_unique<std::atomic<double>[]>(length)) {
  for (std::size_t k = 0; k < length_; ++k) store(k, 0.0);
}

ParameterBlock::ParameterBlock(const DenseVector& init) : ParameterBlock(init.size()) { store_all(init); }

DenseVector ParameterBlock::read_snapshot() const {
  DenseVector out(length_);
  read_snapshot(out);
  return out;
}

void ParameterBlock::read_snapshot(DenseVector& out) const {
  if (out.size() != length_) out = DenseVector(length_);
  for (std::size_t k = 0; k < length_; ++k) out[k] = load(k);
}

void ParameterBlock::write_saxpy(double step, const GradientBuffer& g) {
  if (g.size() != length_) throw DimensionError("write_saxpy: gradient length mismatch");
  g.for_each_support([&](std::size_t k) {
    const double current = load(k);
    store(k, current - step * g[k]);
  });
}

void ParameterBlock::write_saxpy(double step, std::span<const double> g) {
  if (g.size() != length_) throw DimensionError("write_saxpy: gradient length mismatch");
  for (std::size_t k = 0; k < length_; ++k) {
    const double current = load(k);
    store(k, current - step * g[k]);
  }
}

void ParameterBlock::store_all(const DenseVector& v) {
  if (v.size() != length_) throw DimensionError("store_all: length mismatch");
  for (std::size_t k = 0; k < length_; ++k) store(k, v[k]);
}

}  // namespace lfopt
