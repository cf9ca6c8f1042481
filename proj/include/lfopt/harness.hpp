#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lfopt/async_sim.hpp"
#include "lfopt/optimizers.hpp"
#include "lfopt/theory.hpp"

namespace lfopt::harness {

inline constexpr std::string_view kMetricsHeader =
    "algo,threads,seed,eta,row,elapsed_units,wall_seconds,grad_evals,train_loss,grad_norm_sq";

inline constexpr std::array<double, 7> kDefaultGrid = {0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001};

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitDiverged = 3 };

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// %.17g; round-trips every finite double.
std::string format_double(double value);

// One run's rows as written to a MetricsFile.
struct MetricsBlock {
  std::string algo;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  double eta = 0.0;
  RunMetrics metrics;
  bool diverged = false;
  std::string error;
};

// Writes `# cmdline: ...`, the header, then all rows sorted by (algo, threads, eta, row).
void write_metrics(std::ostream& out, std::string_view cmdline, const std::vector<MetricsBlock>& blocks);
void write_metrics_file(const std::string& path, std::string_view cmdline, const std::vector<MetricsBlock>& blocks);

struct MetricsRecord {
  std::string algo;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  double eta = 0.0;
  std::size_t row = 0;
  MetricsRow values;
};

struct MetricsTable {
  std::string cmdline;
  std::vector<MetricsRecord> records;
};

// Strict reader: exact header, ten columns per row. Throws SchemaError.
MetricsTable read_metrics(std::istream& in);
MetricsTable read_metrics_file(const std::string& path);

// Median wall time of `repeats` single-thread Hogwild! passes over the data.
double measure_time_unit(const ModelSpec& spec, const Dataset& data, std::uint64_t seed, std::size_t repeats = 3);

// Runs config once per eta. Divergence is captured per block, not thrown.
std::vector<MetricsBlock> run_grid(const ModelSpec& spec, const Dataset& data, const RunConfig& base,
                                   const std::vector<double>& etas);

// Index of the non-diverged block with the lowest final train_loss.
std::optional<std::size_t> best_block(const std::vector<MetricsBlock>& blocks);

struct TheoryQuery {
  double L = 1.0;
  double alpha = 1.0;
  std::size_t tau = 0;
  double eta = 0.01;
  // Hogwild! step size and bound when set (with V and T~).
  std::optional<double> f0;
  double V = 1.0;
  std::size_t total_iters = 0;
  // AsySVRG c/h/gamma schedule when beta and M~ are set.
  std::optional<double> beta;
  std::optional<std::size_t> M_tilde;
  // Complexity regime when n, mu and v are set.
  std::optional<std::size_t> n;
  std::optional<double> mu;
  std::optional<double> v;
};

// key=value lines. An infeasible rho yields `status=infeasible` and no further sections.
std::vector<std::string> theory_report(const TheoryQuery& query);

struct SimReport {
  sim::SimTrace trace;
  double L = 0.0;
  std::optional<double> rho;
  std::optional<sim::CheckReport> q_ratio;
  std::optional<sim::CheckReport> gap;
  std::optional<sim::CheckReport> qhat_vs_q;
};

// Simulates, solves rho from (eta, tau, lipschitz_bound) and runs the applicable checks.
SimReport simulate_and_check(const ModelSpec& spec, const Dataset& data, const sim::SimConfig& config);

inline constexpr std::string_view kSimHeader =
    "step,outer,inner,q_hat,q_w,gap_sq,gap_bound,ratio,rho,mean_delay,max_delay";

// Per-step CSV. ratio is E q(w_hat_t) / E q(w_hat_{t+1}) (empty on the last step of
// an outer loop); gap_bound and rho are empty when rho is infeasible.
void write_sim_csv(std::ostream& out, std::string_view cmdline, const SimReport& report);

// `holds_<check>=true|false max_ratio=...` lines plus rho status.
std::vector<std::string> sim_summary(const SimReport& report);

}  // namespace lfopt::harness
