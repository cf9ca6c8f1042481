#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "lfopt/dataset.hpp"
#include "lfopt/models.hpp"

namespace lfopt::sim {

enum class SimAlgo { hogwild, asysvrg };

std::string_view to_string(SimAlgo algo);
SimAlgo parse_sim_algo(std::string_view name);

struct SimConfig {
  SimAlgo algo = SimAlgo::hogwild;
  std::size_t tau = 0;
  // Probability that a written coordinate survives (diag of E[B_t]).
  double keep_prob = 1.0;
  // Probability that a pending gradient coordinate is visible to a read.
  double partial_prob = 0.5;
  double eta = 0.01;
  std::size_t steps = 50;        // hogwild
  std::size_t outer_iters = 1;   // asysvrg T
  std::size_t inner_iters = 50;  // asysvrg M~ (total inner steps per outer loop)
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  // Starting point; init_params(spec, trial seed) when empty.
  std::optional<DenseVector> init;
  // Keep the full per-step vectors of the first trial.
  bool record_detail = true;

  void validate() const;
};

// Trial-averaged statistics of one step of the write sequence.
struct StepStats {
  std::size_t outer = 0;  // outer loop (asysvrg), 0 for hogwild
  std::size_t inner = 0;  // t (hogwild) or m (asysvrg)
  double q_hat = 0.0;     // E q(w_hat_t)
  double q_w = 0.0;       // E q(w_t)
  double gap_sq = 0.0;    // E ||w_t - w_hat_t||^2
  double vhat_sq = 0.0;   // E ||stochastic update||^2
  double mean_delay = 0.0;
  std::size_t max_delay = 0;
};

// First-trial record of the write/read sequences.
struct StepDetail {
  DenseVector w;      // w_t (u_{t,m})
  DenseVector w_hat;  // w_hat_t
  std::size_t index = 0;
  std::vector<std::uint8_t> b_diag;
  std::size_t delay = 0;
};

struct SimTrace {
  SimConfig config;
  std::size_t trials = 0;
  std::vector<StepStats> steps;
  std::vector<StepDetail> detail;
  DenseVector final_w;  // first trial's last iterate
  std::uint64_t kept_coords = 0;
  std::uint64_t total_coords = 0;
};

// Runs config.trials independent trials of the serialized asynchronous model:
// w_{t+1} = w_t - eta B_t g_t, with reads
// w_hat_t = w_{a(t)} - eta sum_{j=a(t)}^{t-1} P_{t,j} g_j and 0 <= t - a(t) <= tau.
SimTrace simulate(const ModelSpec& spec, const Dataset& data, const SimConfig& config);

// q(x) = (1/n) sum_i ||grad f_i(x)||^2
double q_plain(const ModelSpec& spec, const Dataset& data, std::span<const double> x);

inline constexpr double kCheckSlack = 1.05;

struct CheckReport {
  double max_ratio = 0.0;
  std::size_t worst_step = 0;
  bool holds = false;
};

// max_t E q(w_hat_t) / E q(w_hat_{t+1}) within each outer loop; holds when <= rho * slack.
CheckReport check_q_ratio(const SimTrace& trace, double rho, double slack = kCheckSlack);

// Bound factor for E||w_t - w_hat_t||^2 <= factor * E q: 4 eta^2 tau rho^power (rho^tau - 1)/(rho - 1).
double gap_bound_factor(double eta, std::size_t tau, double rho, int rho_power);

// max_t E||w_t - w_hat_t||^2 / bound_t; for asysvrg both the q(w_hat) form and
// the q(u) form (rho^2) are checked. holds when <= slack.
CheckReport check_gap_bound(const SimTrace& trace, double rho, double slack = kCheckSlack);

// max_{t,m} E q(u_hat) / E q(u) for asysvrg traces; holds when <= rho * slack.
CheckReport check_qhat_vs_q(const SimTrace& trace, double rho, double slack = kCheckSlack);

}  // namespace lfopt::sim
