#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lfopt/vectors.hpp"

namespace lfopt::theory {

class InfeasibleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct AsyncModelParams {
  double L = 1.0;      // smoothness
  double alpha = 1.0;  // min eigenvalue of E[B_t], in (0, 1]
  std::size_t tau = 0; // max delay
  double V = 1.0;      // gradient bound
  double eta = 0.01;
  double rho = 1.1;

  void validate() const;
};

// sum_{k=0}^{terms-1} rho^k, i.e. (rho^terms - 1)/(rho - 1) with the rho -> 1
// limit `terms`; 0 when terms == 0.
double geometric_sum(double rho, std::size_t terms);

using GradientFn = std::function<DenseVector(const DenseVector&)>;

struct Lemma1Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline constexpr double kLemma1Slack = 1e-9;

// lhs = -grad(x)^T B grad(y), rhs = L^2/2 ||x-y||^2 - alpha/2 ||grad(x)||^2
// with diagonal B whose entries must lie in [alpha, 1].
Lemma1Result lemma1_check(double L, double alpha, const DenseVector& x, const DenseVector& y,
                          const DenseVector& b_diag, const GradientFn& grad);

// Residual rho * (1 - eta - 9 eta (tau+1) L^2 S(rho)) - 1 with
// S(rho) = (rho^{tau+1} - 1)/(rho - 1). rho satisfies the delay condition iff
// the residual is >= 0.
double rho_residual(double rho, double eta, std::size_t tau, double L);

inline constexpr double kRhoMax = 1e6;
inline constexpr double kRhoTolerance = 1e-10;

// Smallest rho in (1, kRhoMax] with 1/(1 - eta - 9 eta (tau+1) L^2 S(rho)) <= rho,
// or nullopt when none exists.
std::optional<double> solve_rho(double eta, std::size_t tau, double L);

struct HogwildStepsize {
  double eta_star = 0.0;
  double bound = 0.0;  // sqrt(A B / T~)
  double A = 0.0;
  double B = 0.0;
  std::size_t iterations = 0;
};

// B(eta) = 2 V^2 (2 tau L^2 eta rho (rho^tau - 1)/(alpha (rho - 1)) + L/(2 alpha)).
double hogwild_B(const AsyncModelParams& params, double eta);

// eta* = sqrt(A / (T~ B(eta*))) by fixed-point iteration; params.eta is ignored.
HogwildStepsize hogwild_stepsize(double f0, const AsyncModelParams& params, std::size_t total_iters);

struct Theorem2Schedule {
  std::vector<double> c;  // c_0 .. c_M
  std::vector<double> h;  // h_0 .. h_M (h_0 is reported for completeness)
  double gamma = 0.0;
  std::size_t gamma_argmin = 0;
  double g_const = 0.0;
  double f_const = 0.0;
  double a_const = 0.0;
  std::size_t M_tilde = 0;

  // 2 L^2 eta^2 f ((1+a)^M - 1)/a
  double c0_closed_form = 0.0;
};

Theorem2Schedule theorem2_schedule(double L, double alpha, std::size_t tau, double rho, double eta,
                                   double beta, std::size_t M_tilde);

struct ComplexityRegime {
  double eta = 0.0;
  double beta = 0.0;
  std::size_t M_tilde = 0;
  double gamma = 0.0;
  double c0 = 0.0;
  double a_const = 0.0;
  double f_const = 0.0;
  // 16 L^2 f mu / (alpha v^2)
  double mu_condition = 0.0;
  bool valid = false;
};

// eta = mu / n^{2/3}, beta = v / n^{1/3}, M~ = floor(1/a).
ComplexityRegime complexity_regime(std::size_t n, double mu, double v, double L, double alpha, std::size_t tau,
                                   double rho);

}  // namespace lfopt::theory
