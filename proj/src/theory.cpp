#include "lfopt/theory.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lfopt::theory {

void AsyncModelParams::validate() const {
  if (!(L > 0.0)) throw std::invalid_argument("L must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(V > 0.0)) throw std::invalid_argument("V must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(rho > 1.0)) throw std::invalid_argument("rho must be > 1");
}

double geometric_sum(double rho, std::size_t terms) {
  double sum = 0.0;
  double power = 1.0;
  for (std::size_t k = 0; k < terms; ++k) {
    sum += power;
    power *= rho;
  }
  return sum;
}

Lemma1Result lemma1_check(double L, double alpha, const DenseVector& x, const DenseVector& y,
                          const DenseVector& b_diag, const GradientFn& grad) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("lemma1_check: alpha must be in (0, 1]");
  if (x.size() != y.size() || x.size() != b_diag.size()) throw DimensionError("lemma1_check: length mismatch");
  for (double b : b_diag) {
    if (b < alpha || b > 1.0) throw std::invalid_argument("lemma1_check: B eigenvalue outside [alpha, 1]");
  }
  const DenseVector gx = grad(x);
  const DenseVector gy = grad(y);
  double cross = 0.0;
  double dist_sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    cross += gx[k] * b_diag[k] * gy[k];
    dist_sq += (x[k] - y[k]) * (x[k] - y[k]);
  }
  Lemma1Result r;
  r.lhs = -cross;
  r.rhs = 0.5 * L * L * dist_sq - 0.5 * alpha * l2_norm_sq(gx);
  r.holds = r.lhs <= r.rhs + kLemma1Slack;
  return r;
}

double rho_residual(double rho, double eta, std::size_t tau, double L) {
  const double coeff = 9.0 * eta * static_cast<double>(tau + 1) * L * L;
  return rho * (1.0 - eta - coeff * geometric_sum(rho, tau + 1)) - 1.0;
}

namespace {

// d/d rho of rho_residual; strictly decreasing in rho.
double rho_residual_slope(double rho, double eta, std::size_t tau, double L) {
  const double coeff = 9.0 * eta * static_cast<double>(tau + 1) * L * L;
  // d/drho sum_{k=1}^{tau+1} rho^k
  double deriv = 0.0;
  double power = 1.0;
  for (std::size_t k = 1; k <= tau + 1; ++k) {
    deriv += static_cast<double>(k) * power;
    power *= rho;
  }
  return (1.0 - eta) - coeff * deriv;
}

template <typename Pred>
double bisect(double lo, double hi, Pred hi_side) {
  // Invariant: !hi_side(lo), hi_side(hi). Runs to adjacent doubles.
  for (int it = 0; it < 400; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (hi_side(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

std::optional<double> solve_rho(double eta, std::size_t tau, double L) {
  if (!(eta > 0.0) || !(L > 0.0)) throw std::invalid_argument("solve_rho: eta and L must be > 0");
  // The residual is rho(1-eta) minus a convex increasing series, so it is
  // concave and negative at rho = 1: find its peak, then the root left of it.
  if (rho_residual_slope(1.0, eta, tau, L) <= 0.0) return std::nullopt;
  double peak = kRhoMax;
  if (rho_residual_slope(kRhoMax, eta, tau, L) < 0.0) {
    peak = bisect(1.0, kRhoMax, [&](double r) { return rho_residual_slope(r, eta, tau, L) < 0.0; });
  }
  if (!(rho_residual(peak, eta, tau, L) >= 0.0)) return std::nullopt;
  return bisect(1.0, peak, [&](double r) { return rho_residual(r, eta, tau, L) >= 0.0; });
}

double hogwild_B(const AsyncModelParams& p, double eta) {
  const double tau = static_cast<double>(p.tau);
  // rho (rho^tau - 1)/(rho - 1) = rho * sum_{k<tau} rho^k
  const double series = p.rho * geometric_sum(p.rho, p.tau);
  return 2.0 * p.V * p.V * (2.0 * tau * p.L * p.L * eta * series / p.alpha + p.L / (2.0 * p.alpha));
}

HogwildStepsize hogwild_stepsize(double f0, const AsyncModelParams& params, std::size_t total_iters) {
  AsyncModelParams p = params;
  p.eta = 1.0;  // eta is solved for
  p.validate();
  if (!(f0 > 0.0)) throw std::invalid_argument("hogwild_stepsize: f(w0) must be > 0");
  if (total_iters < 1) throw std::invalid_argument("hogwild_stepsize: T~ must be >= 1");

  HogwildStepsize out;
  out.A = 2.0 * f0 / p.alpha;
  const auto t = static_cast<double>(total_iters);
  double eta = std::sqrt(out.A / (t * hogwild_B(p, 0.0)));
  for (std::size_t it = 1; it <= 1000; ++it) {
    const double next = std::sqrt(out.A / (t * hogwild_B(p, eta)));
    const bool done = std::abs(next - eta) <= 1e-12 * std::abs(next);
    eta = next;
    if (done) {
      out.iterations = it;
      out.eta_star = eta;
      out.B = hogwild_B(p, eta);
      out.bound = std::sqrt(out.A * out.B / t);
      return out;
    }
  }
  throw std::runtime_error("hogwild_stepsize: fixed point did not converge in 1000 iterations");
}

Theorem2Schedule theorem2_schedule(double L, double alpha, std::size_t tau, double rho, double eta,
                                   double beta, std::size_t M_tilde) {
  if (!(L > 0.0) || !(alpha > 0.0 && alpha <= 1.0) || !(rho > 1.0) || !(eta > 0.0)) {
    throw std::invalid_argument("theorem2_schedule: invalid L, alpha, rho or eta");
  }
  if (!(beta > eta)) throw std::invalid_argument("theorem2_schedule: beta must exceed eta");
  if (M_tilde < 1) throw std::invalid_argument("theorem2_schedule: M~ must be >= 1");

  Theorem2Schedule s;
  s.M_tilde = M_tilde;
  // 4 tau rho^2 (rho^tau - 1)/(rho - 1); zero when tau == 0.
  const double delay_factor = 4.0 * static_cast<double>(tau) * rho * rho * geometric_sum(rho, tau);
  s.g_const = (2.0 * eta / beta) * delay_factor + rho;
  s.f_const = (eta * L * L / 2.0) * delay_factor + L * rho / 2.0;
  s.a_const = beta * eta + 2.0 * L * L * eta * eta * s.g_const;

  const double step = 2.0 * L * L * eta * eta * s.f_const;
  s.c.assign(M_tilde + 1, 0.0);
  for (std::size_t m = M_tilde; m-- > 0;) s.c[m] = s.c[m + 1] * (1.0 + s.a_const) + step;
  s.h.resize(M_tilde + 1);
  for (std::size_t m = 0; m <= M_tilde; ++m) s.h[m] = s.g_const * s.c[m] + s.f_const;

  s.gamma = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < M_tilde; ++m) {
    const double coeff = alpha * eta / 2.0 - 2.0 * s.c[m + 1] * eta / beta - 2.0 * eta * eta * s.h[m + 1];
    if (coeff < s.gamma) {
      s.gamma = coeff;
      s.gamma_argmin = m;
    }
  }
  s.c0_closed_form =
      step * std::expm1(static_cast<double>(M_tilde) * std::log1p(s.a_const)) / s.a_const;
  return s;
}

ComplexityRegime complexity_regime(std::size_t n, double mu, double v, double L, double alpha, std::size_t tau,
                                   double rho) {
  if (n < 1 || !(mu > 0.0) || !(v > 0.0)) throw std::invalid_argument("complexity_regime: invalid n, mu or v");
  const auto nd = static_cast<double>(n);
  ComplexityRegime r;
  r.eta = mu / std::cbrt(nd * nd);
  r.beta = v / std::cbrt(nd);
  if (!(r.eta < r.beta)) throw std::invalid_argument("complexity_regime: need eta < beta (increase n)");

  const double delay_factor = 4.0 * static_cast<double>(tau) * rho * rho * geometric_sum(rho, tau);
  const double g = (2.0 * r.eta / r.beta) * delay_factor + rho;
  r.f_const = (r.eta * L * L / 2.0) * delay_factor + L * rho / 2.0;
  r.a_const = r.beta * r.eta + 2.0 * L * L * r.eta * r.eta * g;
  r.mu_condition = 16.0 * L * L * r.f_const * mu / (alpha * v * v);
  r.M_tilde = static_cast<std::size_t>(std::floor(1.0 / r.a_const));
  if (r.M_tilde < 1) return r;

  const auto s = theorem2_schedule(L, alpha, tau, rho, r.eta, r.beta, r.M_tilde);
  r.gamma = s.gamma;
  r.c0 = s.c.front();
  r.valid = r.gamma > 0.0 && 4.0 * r.c0 / (alpha * r.beta) < 1.0;
  return r;
}

}  // namespace lfopt::theory
