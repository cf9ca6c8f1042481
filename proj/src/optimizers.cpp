#include "lfopt/optimizers.hpp"

#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

#include "lfopt/rng.hpp"

namespace lfopt {

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::sgd: return "sgd";
    case Algorithm::hogwild: return "hogwild";
    case Algorithm::svrg: return "svrg";
    case Algorithm::asysvrg: return "asysvrg";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "sgd") return Algorithm::sgd;
  if (name == "hogwild") return Algorithm::hogwild;
  if (name == "svrg") return Algorithm::svrg;
  if (name == "asysvrg") return Algorithm::asysvrg;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("config: eta must be > 0");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (epochs < 1 || outer_iters < 1 || eval_every < 1) throw std::invalid_argument("config: counts must be >= 1");
  if (iters_per_epoch && *iters_per_epoch < 1) throw std::invalid_argument("config: iters_per_epoch must be >= 1");
  if (inner_iters && *inner_iters < 1) throw std::invalid_argument("config: inner_iters (M) must be >= 1");
  if (!(time_unit_seconds > 0.0)) throw std::invalid_argument("config: time unit must be > 0");
  if ((algo == Algorithm::sgd || algo == Algorithm::svrg) && threads != 1) {
    throw std::invalid_argument("config: sequential algorithms require threads = 1");
  }
}

bool RunMetrics::same_trajectory(const RunMetrics& other) const {
  if (rows.size() != other.rows.size()) return false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].same_trajectory(other.rows[r])) return false;
  }
  return true;
}

std::size_t resolve_iters_per_epoch(const RunConfig& config, std::size_t n) {
  return config.iters_per_epoch.value_or((n + config.threads - 1) / config.threads);
}

std::size_t resolve_inner_iters(const RunConfig& config, std::size_t n) {
  return config.inner_iters.value_or((n + config.threads - 1) / config.threads);
}

namespace {

using Clock = std::chrono::steady_clock;

// Wall clock that excludes time spent on metric evaluation.
class RunTimer {
 public:
  RunTimer() : segment_start_(Clock::now()) {}
  double pause() {
    elapsed_ += std::chrono::duration<double>(Clock::now() - segment_start_).count();
    return elapsed_;
  }
  void resume() { segment_start_ = Clock::now(); }

 private:
  Clock::time_point segment_start_;
  double elapsed_ = 0.0;
};

class MetricsRecorder {
 public:
  MetricsRecorder(const ModelSpec& spec, const Dataset& data, const RunConfig& config)
      : spec_(spec), data_(data), config_(config) {}

  // Quiescent measurement at params. Throws DivergenceError on blow-up.
  void record(std::span<const double> params, std::uint64_t grad_evals, double wall_seconds) {
    MetricsRow row;
    row.wall_seconds = wall_seconds;
    row.elapsed_units = wall_seconds / config_.time_unit_seconds;
    row.grad_evals = grad_evals;
    bool finite = true;
    for (double v : params) finite = finite && std::isfinite(v);
    if (finite) {
      auto lg = full_loss_and_grad(spec_, params, data_);
      row.train_loss = lg.loss;
      row.grad_norm_sq = l2_norm_sq(lg.grad);
    } else {
      row.train_loss = std::numeric_limits<double>::quiet_NaN();
      row.grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
    }
    metrics_.rows.push_back(row);
    if (!std::isfinite(row.train_loss) || row.train_loss > kDivergenceLoss) {
      throw DivergenceError("diverged: train_loss=" + std::to_string(row.train_loss) + " at " +
                                std::to_string(grad_evals) + " gradient evaluations",
                            metrics_);
    }
  }

  // A non-finite gradient inside a step is reported like a blown-up loss.
  [[noreturn]] void diverged(const NonFiniteError& e) {
    throw DivergenceError(std::string("diverged: ") + e.what(), std::move(metrics_));
  }

  RunMetrics take() { return std::move(metrics_); }
  const RunMetrics& metrics() const { return metrics_; }

 private:
  const ModelSpec& spec_;
  const Dataset& data_;
  const RunConfig& config_;
  RunMetrics metrics_;
};

void prepare(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  config.validate();
  data.validate();
  check_compatible(spec, data);
}

DenseVector starting_point(const ModelSpec& spec, const RunConfig& config) {
  DenseVector init = config.init ? *config.init : init_params(spec, config.seed);
  if (init.size() != make_layout(spec).total_dim) throw DimensionError("config: init length mismatch");
  return init;
}

bool is_eval_point(std::size_t step, std::size_t last, std::size_t every) {
  return step % every == 0 || step == last;
}

void pin_to_cpu(std::thread& t, std::size_t worker) {
#ifdef __linux__
  const unsigned ncpu = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<int>(worker % ncpu), &set);
  pthread_setaffinity_np(t.native_handle(), sizeof(set), &set);
#else
  (void)t;
  (void)worker;
#endif
}

// Shared failure state for worker threads: the first exception wins and
// every worker stops at the next barrier.
class StopState {
 public:
  void fail(std::exception_ptr e) {
    std::lock_guard lock(mu_);
    if (!error_) error_ = std::move(e);
    stop_.store(true, std::memory_order_relaxed);
  }
  bool stopped() const { return stop_.load(std::memory_order_relaxed); }
  void rethrow() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
  std::atomic<bool> stop_{false};
};

template <typename Worker>
void run_workers(std::size_t threads, bool pin, Worker&& worker) {
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t j = 0; j < threads; ++j) {
    pool.emplace_back(worker, j);
    if (pin) pin_to_cpu(pool.back(), j);
  }
  for (auto& t : pool) t.join();
}

}  // namespace

DenseVector partitioned_full_gradient(const ModelSpec& spec, std::span<const double> params,
                                      const Dataset& data, std::size_t parts) {
  const std::size_t n = data.size();
  std::vector<DenseVector> partial(parts, DenseVector(params.size()));
  GradientBuffer scratch;
  for (std::size_t j = 0; j < parts; ++j) {
    double loss = 0.0;
    accumulate_loss_and_grad(spec, params, data, j * n / parts, (j + 1) * n / parts, loss, partial[j].span(),
                             scratch);
  }
  DenseVector full(params.size());
  for (const auto& p : partial) axpy(1.0, p.span(), full.span());
  for (double& g : full) g /= static_cast<double>(n);
  return full;
}

void variance_reduced_gradient(const ModelSpec& spec, std::span<const double> query,
                               std::span<const double> anchor, std::span<const double> anchor_full_grad,
                               const Dataset& data, std::size_t i, GradientBuffer& scratch_query,
                               GradientBuffer& scratch_anchor, std::span<double> out) {
  grad_single(spec, query, data.instances[i], data.labels[i], scratch_query);
  grad_single(spec, anchor, data.instances[i], data.labels[i], scratch_anchor);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (scratch_query[k] - scratch_anchor[k]) + anchor_full_grad[k];
  }
}

RunResult run_sgd(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  prepare(spec, data, config);
  if (config.threads != 1) throw std::invalid_argument("run_sgd: threads must be 1");
  const std::size_t n = data.size();
  const std::size_t iters = resolve_iters_per_epoch(config, n);

  DenseVector w = starting_point(spec, config);
  CounterRng rng(config.seed, 0);
  GradientBuffer g;
  MetricsRecorder recorder(spec, data, config);
  RunTimer timer;
  std::uint64_t evals = 0;

  recorder.record(w.span(), evals, timer.pause());
  timer.resume();
  try {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      for (std::size_t it = 0; it < iters; ++it) {
        const auto i = rng.uniform_index(n);
        grad_single(spec, w, data.instances[i], data.labels[i], g);
        g.for_each_support([&](std::size_t k) { w[k] = w[k] - config.eta * g[k]; });
      }
      evals += iters;
      if (is_eval_point(epoch, config.epochs, config.eval_every)) {
        recorder.record(w.span(), evals, timer.pause());
        timer.resume();
      }
    }
  } catch (const NonFiniteError& e) {
    recorder.diverged(e);
  }
  return {recorder.take(), std::move(w)};
}

RunResult run_hogwild(const ModelSpec& spec, const Dataset& data, const RunConfig& config,
                      ParameterBlock& block) {
  prepare(spec, data, config);
  const std::size_t n = data.size();
  const std::size_t p = config.threads;
  const std::size_t iters = resolve_iters_per_epoch(config, n);

  DenseVector init = starting_point(spec, config);
  if (block.size() != init.size()) throw DimensionError("run_hogwild: block length mismatch");
  block.store_all(init);

  MetricsRecorder recorder(spec, data, config);
  RunTimer timer;
  StopState stop;
  std::uint64_t evals = 0;
  DenseVector quiescent(block.size());

  recorder.record(init.span(), 0, timer.pause());
  timer.resume();

  // Runs with every worker parked at the barrier, so reads are exact.
  auto on_sync = [&]() noexcept {
    const double wall = timer.pause();
    try {
      block.read_snapshot(quiescent);
      recorder.record(quiescent.span(), evals, wall);
    } catch (...) {
      stop.fail(std::current_exception());
    }
    timer.resume();
  };
  std::barrier sync(static_cast<std::ptrdiff_t>(p), on_sync);

  auto worker = [&](std::size_t j) {
    CounterRng rng(config.seed, j);
    GradientBuffer g;
    DenseVector w_hat(block.size());
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      if (!stop.stopped()) {
        try {
          for (std::size_t it = 0; it < iters; ++it) {
            block.read_snapshot(w_hat);
            const auto i = rng.uniform_index(n);
            grad_single(spec, w_hat, data.instances[i], data.labels[i], g);
            block.write_saxpy(config.eta, g);
          }
        } catch (...) {
          stop.fail(std::current_exception());
        }
      }
      if (is_eval_point(epoch, config.epochs, config.eval_every)) {
        if (j == 0) {
          // Read by the completion step, which runs after every arrival.
          evals = static_cast<std::uint64_t>(epoch) * p * iters;
        }
        sync.arrive_and_wait();
        if (stop.stopped()) break;
      }
    }
  };
  run_workers(p, config.pin_threads, worker);
  try {
    stop.rethrow();
  } catch (const NonFiniteError& e) {
    recorder.diverged(e);
  }
  return {recorder.take(), block.read_snapshot()};
}

RunResult run_hogwild(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  ParameterBlock block(make_layout(spec).total_dim);
  return run_hogwild(spec, data, config, block);
}

RunResult run_svrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  prepare(spec, data, config);
  if (config.threads != 1) throw std::invalid_argument("run_svrg: threads must be 1");
  const std::size_t n = data.size();
  const std::size_t m_inner = resolve_inner_iters(config, n);

  DenseVector w = starting_point(spec, config);
  const std::size_t dim = w.size();
  CounterRng rng(config.seed, 0);
  GradientBuffer gq, ga;
  DenseVector v(dim);
  MetricsRecorder recorder(spec, data, config);
  RunTimer timer;
  std::uint64_t evals = 0;

  recorder.record(w.span(), evals, timer.pause());
  timer.resume();
  try {
    for (std::size_t t = 1; t <= config.outer_iters; ++t) {
      const DenseVector anchor = w;
      const DenseVector full = partitioned_full_gradient(spec, anchor.span(), data, 1);
      for (std::size_t m = 0; m < m_inner; ++m) {
        const auto i = rng.uniform_index(n);
        variance_reduced_gradient(spec, w.span(), anchor.span(), full.span(), data, i, gq, ga, v.span());
        for (std::size_t k = 0; k < dim; ++k) w[k] = w[k] - config.eta * v[k];
      }
      evals += n + m_inner;
      if (is_eval_point(t, config.outer_iters, config.eval_every)) {
        recorder.record(w.span(), evals, timer.pause());
        timer.resume();
      }
    }
  } catch (const NonFiniteError& e) {
    recorder.diverged(e);
  }
  return {recorder.take(), std::move(w)};
}

RunResult run_asysvrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config,
                      ParameterBlock& block) {
  prepare(spec, data, config);
  const std::size_t n = data.size();
  const std::size_t p = config.threads;
  const std::size_t m_inner = resolve_inner_iters(config, n);

  DenseVector anchor = starting_point(spec, config);
  const std::size_t dim = anchor.size();
  if (block.size() != dim) throw DimensionError("run_asysvrg: block length mismatch");
  block.store_all(anchor);

  MetricsRecorder recorder(spec, data, config);
  RunTimer timer;
  StopState stop;
  std::uint64_t evals = 0;
  std::size_t outer = 0;
  bool full_phase = true;
  std::vector<DenseVector> partial(p, DenseVector(dim));
  DenseVector full(dim);

  recorder.record(anchor.span(), 0, timer.pause());
  timer.resume();

  // Two barriers per outer iteration: after the full gradient (combine the
  // partial sums in block order) and after the inner loop (capture w_{t+1}).
  auto on_sync = [&]() noexcept {
    try {
      if (full_phase) {
        full.fill(0.0);
        for (const auto& part : partial) axpy(1.0, part.span(), full.span());
        for (double& g : full) g /= static_cast<double>(n);
      } else {
        ++outer;
        evals += n + p * m_inner;
        block.read_snapshot(anchor);
        if (is_eval_point(outer, config.outer_iters, config.eval_every)) {
          const double wall = timer.pause();
          recorder.record(anchor.span(), evals, wall);
          timer.resume();
        }
      }
    } catch (...) {
      stop.fail(std::current_exception());
    }
    full_phase = !full_phase;
  };
  std::barrier sync(static_cast<std::ptrdiff_t>(p), on_sync);

  auto worker = [&](std::size_t j) {
    CounterRng rng(config.seed, j);
    GradientBuffer gq, ga, scratch;
    DenseVector u_hat(dim);
    DenseVector v(dim);
    for (std::size_t t = 0; t < config.outer_iters; ++t) {
      if (!stop.stopped()) {
        try {
          partial[j].fill(0.0);
          double loss = 0.0;
          accumulate_loss_and_grad(spec, anchor.span(), data, j * n / p, (j + 1) * n / p, loss, partial[j].span(),
                                   scratch);
        } catch (...) {
          stop.fail(std::current_exception());
        }
      }
      sync.arrive_and_wait();
      if (!stop.stopped()) {
        try {
          for (std::size_t m = 0; m < m_inner; ++m) {
            block.read_snapshot(u_hat);
            const auto i = rng.uniform_index(n);
            variance_reduced_gradient(spec, u_hat.span(), anchor.span(), full.span(), data, i, gq, ga, v.span());
            block.write_saxpy(config.eta, v.span());
          }
        } catch (...) {
          stop.fail(std::current_exception());
        }
      }
      sync.arrive_and_wait();
      if (stop.stopped()) break;
    }
  };
  run_workers(p, config.pin_threads, worker);
  try {
    stop.rethrow();
  } catch (const NonFiniteError& e) {
    recorder.diverged(e);
  }
  return {recorder.take(), block.read_snapshot()};
}

RunResult run_asysvrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  ParameterBlock block(make_layout(spec).total_dim);
  return run_asysvrg(spec, data, config, block);
}

RunResult run(const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
  switch (config.algo) {
    case Algorithm::sgd: return run_sgd(spec, data, config);
    case Algorithm::hogwild: return run_hogwild(spec, data, config);
    case Algorithm::svrg: return run_svrg(spec, data, config);
    case Algorithm::asysvrg: return run_asysvrg(spec, data, config);
  }
  throw std::invalid_argument("run: unknown algorithm");
}

VarianceProbe variance_probe(const ModelSpec& spec, const Dataset& data, const DenseVector& anchor,
                             const DenseVector& query, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw std::invalid_argument("variance_probe: samples must be > 0");
  if (anchor.size() != query.size()) throw DimensionError("variance_probe: anchor/query length mismatch");
  const std::size_t n = data.size();
  const DenseVector full = partitioned_full_gradient(spec, anchor.span(), data, 1);
  CounterRng rng(seed, 0);
  GradientBuffer gq, ga;
  DenseVector v(anchor.size());

  // Welford running moments.
  double mean_v = 0.0, m2_v = 0.0, mean_s = 0.0, m2_s = 0.0;
  for (std::size_t s = 1; s <= samples; ++s) {
    const auto i = rng.uniform_index(n);
    variance_reduced_gradient(spec, query.span(), anchor.span(), full.span(), data, i, gq, ga, v.span());
    const double sv = l2_norm_sq(v);
    const double ss = l2_norm_sq(gq.values());
    const double dv = sv - mean_v;
    mean_v += dv / static_cast<double>(s);
    m2_v += dv * (sv - mean_v);
    const double ds = ss - mean_s;
    mean_s += ds / static_cast<double>(s);
    m2_s += ds * (ss - mean_s);
  }
  VarianceProbe out;
  out.mean_sq_svrg = mean_v;
  out.mean_sq_sgd = mean_s;
  if (samples > 1) {
    const auto s = static_cast<double>(samples);
    out.se_svrg = std::sqrt(m2_v / (s - 1.0) / s);
    out.se_sgd = std::sqrt(m2_s / (s - 1.0) / s);
  }
  return out;
}

}  // namespace lfopt
