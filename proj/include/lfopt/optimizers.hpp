#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "lfopt/dataset.hpp"
#include "lfopt/models.hpp"
#include "lfopt/shared_params.hpp"

namespace lfopt {

enum class Algorithm { sgd, hogwild, svrg, asysvrg };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

struct RunConfig {
  Algorithm algo = Algorithm::sgd;
  double eta = 0.01;
  std::size_t threads = 1;

  // sgd / hogwild: number of epochs, each worker runs iters_per_epoch steps
  // per epoch (default ceil(n / threads), so one epoch is one effective pass).
  std::size_t epochs = 1;
  std::optional<std::size_t> iters_per_epoch;

  // svrg / asysvrg: outer iterations T and per-thread inner steps M
  // (default ceil(n / threads)).
  std::size_t outer_iters = 1;
  std::optional<std::size_t> inner_iters;

  std::uint64_t seed = 0;
  // Metrics cadence: every eval_every epochs (sgd/hogwild) or outer
  // iterations (svrg/asysvrg). The last one is always measured.
  std::size_t eval_every = 1;

  // Seconds per elapsed unit; the harness measures it per invocation.
  double time_unit_seconds = 1.0;
  bool pin_threads = false;

  // Starting point; init_params(spec, seed) when empty.
  std::optional<DenseVector> init;

  void validate() const;
};

struct MetricsRow {
  double elapsed_units = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t grad_evals = 0;
  double train_loss = 0.0;
  double grad_norm_sq = 0.0;

  // Equality on everything but the timing columns.
  bool same_trajectory(const MetricsRow& other) const {
    return grad_evals == other.grad_evals && train_loss == other.train_loss &&
           grad_norm_sq == other.grad_norm_sq;
  }
};

struct RunMetrics {
  std::vector<MetricsRow> rows;

  bool same_trajectory(const RunMetrics& other) const;
};

struct RunResult {
  RunMetrics metrics;
  DenseVector params;
};

// Raised when the training loss becomes non-finite or exceeds kDivergenceLoss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, RunMetrics partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunMetrics& partial() const { return partial_; }

 private:
  RunMetrics partial_;
};

inline constexpr double kDivergenceLoss = 1e12;

std::size_t resolve_iters_per_epoch(const RunConfig& config, std::size_t n);
std::size_t resolve_inner_iters(const RunConfig& config, std::size_t n);

RunResult run_sgd(const ModelSpec& spec, const Dataset& data, const RunConfig& config);
// Stores the starting point into block, then runs p lock-free workers on it.
RunResult run_hogwild(const ModelSpec& spec, const Dataset& data, const RunConfig& config,
                      ParameterBlock& block);
RunResult run_hogwild(const ModelSpec& spec, const Dataset& data, const RunConfig& config);
RunResult run_svrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config);
RunResult run_asysvrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config,
                      ParameterBlock& block);
RunResult run_asysvrg(const ModelSpec& spec, const Dataset& data, const RunConfig& config);

// Dispatches on config.algo.
RunResult run(const ModelSpec& spec, const Dataset& data, const RunConfig& config);

// (1/n) sum_i grad f_i(params), with instances split into `parts` contiguous
// blocks summed in index order and combined in block order.
DenseVector partitioned_full_gradient(const ModelSpec& spec, std::span<const double> params,
                                      const Dataset& data, std::size_t parts);

// v = grad f_i(query) - grad f_i(anchor) + anchor_full_grad, dense.
void variance_reduced_gradient(const ModelSpec& spec, std::span<const double> query,
                               std::span<const double> anchor, std::span<const double> anchor_full_grad,
                               const Dataset& data, std::size_t i, GradientBuffer& scratch_query,
                               GradientBuffer& scratch_anchor, std::span<double> out);

struct VarianceProbe {
  double mean_sq_svrg = 0.0;
  double mean_sq_sgd = 0.0;
  // Standard errors of the two means.
  double se_svrg = 0.0;
  double se_sgd = 0.0;
};

// Monte-Carlo estimates of E||v||^2 (anchor, query) and E||grad f_i(query)||^2.
VarianceProbe variance_probe(const ModelSpec& spec, const Dataset& data, const DenseVector& anchor,
                             const DenseVector& query, std::size_t samples, std::uint64_t seed);

}  // namespace lfopt
