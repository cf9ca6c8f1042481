#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "lfopt/dataset.hpp"
#include "lfopt/models.hpp"

namespace lfopt::testing {

// Central differences of loss_single with step h, compared against grad_single.
// Returns ||g_fd - g|| / max(||g||, ||g_fd||, 1e-12).
inline double fd_relative_error(const ModelSpec& spec, const DenseVector& params, const SparseVector& x,
                                std::uint32_t label, double h = 1e-5) {
  GradientBuffer g;
  grad_single(spec, params, x, label, g);
  DenseVector p = params;
  double diff = 0.0, norm_g = 0.0, norm_fd = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + h;
    const double up = loss_single(spec, p, x, label);
    p[k] = orig - h;
    const double down = loss_single(spec, p, x, label);
    p[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    diff += (fd - g[k]) * (fd - g[k]);
    norm_g += g[k] * g[k];
    norm_fd += fd * fd;
  }
  return std::sqrt(diff) / std::max({std::sqrt(norm_g), std::sqrt(norm_fd), 1e-12});
}

inline DenseVector random_params(std::mt19937_64& gen, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  DenseVector p(n);
  for (double& v : p) v = normal(gen);
  return p;
}

inline double dist(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace lfopt::testing
