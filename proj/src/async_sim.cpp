#include "lfopt/async_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lfopt/optimizers.hpp"
#include "lfopt/rng.hpp"

namespace lfopt::sim {

std::string_view to_string(SimAlgo algo) { return algo == SimAlgo::hogwild ? "hogwild" : "asysvrg"; }

SimAlgo parse_sim_algo(std::string_view name) {
  if (name == "hogwild") return SimAlgo::hogwild;
  if (name == "asysvrg") return SimAlgo::asysvrg;
  throw std::invalid_argument("unknown simulation algorithm '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("sim: keep_prob must be in (0, 1]");
  if (!(partial_prob >= 0.0 && partial_prob <= 1.0)) throw std::invalid_argument("sim: partial_prob must be in [0, 1]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("sim: eta must be >= 0");
  if (trials < 1) throw std::invalid_argument("sim: trials must be >= 1");
  if (algo == SimAlgo::hogwild && steps < 1) throw std::invalid_argument("sim: steps must be >= 1");
  if (algo == SimAlgo::asysvrg && (outer_iters < 1 || inner_iters < 1)) {
    throw std::invalid_argument("sim: outer and inner iterations must be >= 1");
  }
}

double q_plain(const ModelSpec& spec, const Dataset& data, std::span<const double> x) {
  GradientBuffer g;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    grad_single(spec, x, data.instances[i], data.labels[i], g);
    double s = 0.0;
    g.for_each_support([&](std::size_t k) { s += g[k] * g[k]; });
    total += s;
  }
  return total / static_cast<double>(data.size());
}

namespace {

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  return trial == 0 ? seed : splitmix64(seed + 0x632be59bd9b4e019ULL * trial);
}

// Per-instance gradients at the outer-loop anchor, for the variance-reduced q.
class AnchorCache {
 public:
  void reset(const ModelSpec& spec, const Dataset& data, const DenseVector& anchor) {
    anchor_ = anchor;
    full_ = partitioned_full_gradient(spec, anchor.span(), data, 1);
    const std::size_t dim = anchor.size();
    grads_.assign(data.size() * dim, 0.0);
    GradientBuffer g;
    for (std::size_t i = 0; i < data.size(); ++i) {
      grad_single(spec, anchor, data.instances[i], data.labels[i], g);
      std::copy(g.values().begin(), g.values().end(), grads_.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
  }

  // (1/n) sum_i ||grad f_i(x) - grad f_i(anchor) + full||^2
  double q(const ModelSpec& spec, const Dataset& data, std::span<const double> x) const {
    const std::size_t dim = anchor_.size();
    GradientBuffer g;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      grad_single(spec, x, data.instances[i], data.labels[i], g);
      const double* gi0 = grads_.data() + i * dim;
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = (g[k] - gi0[k]) + full_[k];
        s += v * v;
      }
      total += s;
    }
    return total / static_cast<double>(data.size());
  }

  const DenseVector& anchor() const { return anchor_; }
  const DenseVector& full() const { return full_; }

 private:
  DenseVector anchor_;
  DenseVector full_;
  std::vector<double> grads_;
};

// Serialized write/read sequences of one inner loop (the whole run for
// hogwild). Keeps the last tau+1 iterates and the last tau updates.
class DelayedSequence {
 public:
  DelayedSequence(std::size_t tau, const DenseVector& start) : tau_(tau) {
    history_.push_back(start);
  }

  const DenseVector& current() const { return history_.back(); }
  std::size_t step() const { return step_; }

  // Draws a(t) and builds the read w_hat_t into out. Returns the delay t - a(t).
  std::size_t read(CounterRng& masks, double eta, double partial_prob, DenseVector& out) {
    const std::size_t t = step_;
    const std::size_t max_d = std::min(tau_, t);
    const std::size_t d = max_d == 0 ? 0 : static_cast<std::size_t>(masks.uniform_index(max_d + 1));
    const std::size_t a = std::max(t - d, last_a_);
    last_a_ = a;

    // history_ holds w_{t - history_.size() + 1} .. w_t
    const std::size_t first = t + 1 - history_.size();
    out = history_[a - first];
    for (std::size_t j = a; j < t; ++j) {
      const DenseVector& g = updates_[j - (t - updates_.size())];
      for (std::size_t k = 0; k < out.size(); ++k) {
        if (partial_prob >= 1.0 || (partial_prob > 0.0 && masks.bernoulli(partial_prob))) {
          out[k] = out[k] - eta * g[k];
        }
      }
    }
    return t - a;
  }

  // w_{t+1} = w_t - eta B_t g. Records the realized B diagonal in b_diag.
  void write(CounterRng& masks, double eta, double keep_prob, const DenseVector& g,
             std::vector<std::uint8_t>& b_diag, std::uint64_t& kept) {
    DenseVector next = history_.back();
    b_diag.assign(next.size(), 1);
    for (std::size_t k = 0; k < next.size(); ++k) {
      const bool keep = keep_prob >= 1.0 || masks.bernoulli(keep_prob);
      b_diag[k] = keep ? 1 : 0;
      if (keep) {
        next[k] = next[k] - eta * g[k];
        ++kept;
      }
    }
    history_.push_back(std::move(next));
    if (history_.size() > tau_ + 1) history_.erase(history_.begin());
    if (tau_ > 0) {
      updates_.push_back(g);
      if (updates_.size() > tau_) updates_.erase(updates_.begin());
    }
    ++step_;
  }

 private:
  std::size_t tau_;
  std::size_t step_ = 0;
  std::size_t last_a_ = 0;
  std::vector<DenseVector> history_;
  std::vector<DenseVector> updates_;
};

double gap_sq(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

SimTrace simulate(const ModelSpec& spec, const Dataset& data, const SimConfig& config) {
  config.validate();
  data.validate();
  check_compatible(spec, data);

  const std::size_t n = data.size();
  const std::size_t dim = make_layout(spec).total_dim;
  const bool svrg = config.algo == SimAlgo::asysvrg;
  const std::size_t outer_count = svrg ? config.outer_iters : 1;
  const std::size_t inner_count = svrg ? config.inner_iters : config.steps;

  SimTrace trace;
  trace.config = config;
  trace.trials = config.trials;
  trace.steps.resize(outer_count * inner_count);
  for (std::size_t t = 0; t < outer_count; ++t) {
    for (std::size_t m = 0; m < inner_count; ++m) {
      trace.steps[t * inner_count + m].outer = t;
      trace.steps[t * inner_count + m].inner = m;
    }
  }
  std::vector<double> delay_sum(trace.steps.size(), 0.0);

  GradientBuffer gq, ga;
  DenseVector w_hat(dim), update(dim);
  std::vector<std::uint8_t> b_diag;

  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    const std::uint64_t seed = trial_seed(config.seed, trial);
    CounterRng index_rng(seed, 0);
    CounterRng mask_rng(seed, kSimMaskStream);
    DenseVector w = config.init ? *config.init : init_params(spec, seed);
    if (w.size() != dim) throw DimensionError("simulate: init length mismatch");
    const bool detail = trial == 0 && config.record_detail;
    AnchorCache anchor;

    for (std::size_t t = 0; t < outer_count; ++t) {
      if (svrg) anchor.reset(spec, data, w);
      DelayedSequence seq(config.tau, w);
      for (std::size_t m = 0; m < inner_count; ++m) {
        const std::size_t s = t * inner_count + m;
        const std::size_t delay = seq.read(mask_rng, config.eta, config.partial_prob, w_hat);
        const DenseVector& w_t = seq.current();

        StepStats& st = trace.steps[s];
        if (svrg) {
          st.q_hat += anchor.q(spec, data, w_hat.span());
          st.q_w += anchor.q(spec, data, w_t.span());
        } else {
          st.q_hat += q_plain(spec, data, w_hat.span());
          st.q_w += q_plain(spec, data, w_t.span());
        }
        st.gap_sq += gap_sq(w_t, w_hat);
        st.max_delay = std::max(st.max_delay, delay);
        delay_sum[s] += static_cast<double>(delay);

        const auto i = index_rng.uniform_index(n);
        if (svrg) {
          variance_reduced_gradient(spec, w_hat.span(), anchor.anchor().span(), anchor.full().span(), data, i, gq,
                                    ga, update.span());
        } else {
          grad_single(spec, w_hat, data.instances[i], data.labels[i], gq);
          std::copy(gq.values().begin(), gq.values().end(), update.begin());
        }
        st.vhat_sq += l2_norm_sq(update);

        if (detail) trace.detail.push_back({w_t, w_hat, i, {}, delay});
        seq.write(mask_rng, config.eta, config.keep_prob, update, b_diag, trace.kept_coords);
        trace.total_coords += dim;
        if (detail) trace.detail.back().b_diag = b_diag;
      }
      w = seq.current();
    }
    if (trial == 0) trace.final_w = w;
  }

  const auto trials = static_cast<double>(config.trials);
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    auto& st = trace.steps[s];
    st.q_hat /= trials;
    st.q_w /= trials;
    st.gap_sq /= trials;
    st.vhat_sq /= trials;
    st.mean_delay = delay_sum[s] / trials;
  }
  return trace;
}

namespace {

double safe_ratio(double num, double den) {
  if (num == 0.0 && den == 0.0) return 0.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

void require_steps(const SimTrace& trace) {
  if (trace.steps.size() < 2) throw std::invalid_argument("check: trace needs at least 2 steps");
}

}  // namespace

CheckReport check_q_ratio(const SimTrace& trace, double rho, double slack) {
  require_steps(trace);
  CheckReport r;
  for (std::size_t s = 0; s + 1 < trace.steps.size(); ++s) {
    if (trace.steps[s].outer != trace.steps[s + 1].outer) continue;
    const double ratio = trace.steps[s].q_hat == trace.steps[s + 1].q_hat
                             ? 1.0
                             : safe_ratio(trace.steps[s].q_hat, trace.steps[s + 1].q_hat);
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.worst_step = s;
    }
  }
  r.holds = r.max_ratio <= rho * slack;
  return r;
}

double gap_bound_factor(double eta, std::size_t tau, double rho, int rho_power) {
  // (rho^tau - 1)/(rho - 1) = sum_{k<tau} rho^k, zero for tau == 0
  double series = 0.0;
  double power = 1.0;
  for (std::size_t k = 0; k < tau; ++k) {
    series += power;
    power *= rho;
  }
  return 4.0 * eta * eta * static_cast<double>(tau) * std::pow(rho, rho_power) * series;
}

CheckReport check_gap_bound(const SimTrace& trace, double rho, double slack) {
  require_steps(trace);
  const auto& cfg = trace.config;
  const double factor_hat = gap_bound_factor(cfg.eta, cfg.tau, rho, 1);
  const double factor_u = gap_bound_factor(cfg.eta, cfg.tau, rho, 2);
  CheckReport r;
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& st = trace.steps[s];
    double ratio = safe_ratio(st.gap_sq, factor_hat * st.q_hat);
    if (cfg.algo == SimAlgo::asysvrg) ratio = std::max(ratio, safe_ratio(st.gap_sq, factor_u * st.q_w));
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.worst_step = s;
    }
  }
  r.holds = r.max_ratio <= slack;
  return r;
}

CheckReport check_qhat_vs_q(const SimTrace& trace, double rho, double slack) {
  if (trace.config.algo != SimAlgo::asysvrg) {
    throw std::invalid_argument("check_qhat_vs_q: requires an asysvrg trace");
  }
  CheckReport r;
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& st = trace.steps[s];
    const double ratio = st.q_hat == st.q_w ? 1.0 : safe_ratio(st.q_hat, st.q_w);
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.worst_step = s;
    }
  }
  r.holds = r.max_ratio <= rho * slack;
  return r;
}

}  // namespace lfopt::sim
