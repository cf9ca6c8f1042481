#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lfopt/harness.hpp"

namespace {

using namespace lfopt;
namespace hn = lfopt::harness;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::string path;
  bool synthetic = false;
  std::size_t n = 1000;
  std::size_t d = 20;
  std::uint32_t classes = 2;
  std::uint64_t data_seed = 1;
  double flip = 0.1;
  bool binary_relabel = false;
  std::vector<std::string> class_pair;
  std::size_t head = 0;
  std::string scale = "none";

  void add_to(CLI::App& app) {
    auto* data = app.add_option("--data", path, "LIBSVM dataset path");
    auto* synth = app.add_flag("--synthetic", synthetic, "Generate a synthetic dataset instead of --data");
    data->excludes(synth);
    app.add_option("--n", n, "Synthetic instance count")->check(CLI::PositiveNumber);
    app.add_option("--d", d, "Synthetic feature count")->check(CLI::PositiveNumber);
    app.add_option("--classes", classes, "Synthetic class count (2 gives the logreg generator)")
        ->check(CLI::Range(2u, 1000u));
    app.add_option("--data-seed", data_seed, "Synthetic generator seed");
    app.add_option("--flip", flip, "Synthetic binary label noise")->check(CLI::Range(0.0, 1.0));
    app.add_flag("--binary-relabel", binary_relabel, "Map labels {-1,+1} onto classes {0,1}");
    app.add_option("--class-pair", class_pair, "Keep two labels NEG,POS as a binary problem")
        ->delimiter(',')
        ->expected(2);
    app.add_option("--head", head, "Use only the first N instances");
    app.add_option("--scale", scale, "Feature scaling")->check(CLI::IsMember({"none", "maxabs"}));
  }

  Dataset load() const {
    Dataset data;
    if (synthetic) {
      data = classes == 2 ? make_synthetic_logreg(n, d, data_seed, flip) : make_synthetic_multiclass(n, d, classes, data_seed);
    } else {
      if (path.empty()) throw CLI::ValidationError("--data", "one of --data or --synthetic is required");
      std::ifstream in(path, std::ios::binary);
      if (!in) throw IoError("cannot open dataset '" + path + "'");
      try {
        data = parse_libsvm(in, ParseOptions{binary_relabel});
      } catch (const ParseError& e) {
        throw IoError(path + ": " + e.what());
      }
    }
    if (head > 0) data = lfopt::head(data, head);
    if (!class_pair.empty()) {
      auto find = [&](const std::string& name) {
        const auto it = std::find(data.class_names.begin(), data.class_names.end(), name);
        if (it == data.class_names.end()) throw CLI::ValidationError("--class-pair", "unknown label '" + name + "'");
        return static_cast<std::uint32_t>(it - data.class_names.begin());
      };
      data = select_class_pair(data, find(class_pair[0]), find(class_pair[1]));
    }
    if (scale == "maxabs") scale_max_abs(data);
    return data;
  }
};

struct ModelOptions {
  std::string loss = "logreg";
  double lambda = 1e-3;
  std::size_t hidden = 16;

  void add_to(CLI::App& app) {
    app.add_option("--loss", loss, "Model")->check(CLI::IsMember({"logreg", "svm", "mlp"}));
    app.add_option("--lambda", lambda, "L2 regularization")->check(CLI::NonNegativeNumber);
    app.add_option("--hidden", hidden, "MLP hidden width")->check(CLI::PositiveNumber);
  }

  // Binary losses on multi-class data train class 0 against the rest.
  void adapt(Dataset& data) const {
    if (loss != "mlp" && data.num_classes > 2) data = binarize(data, 0);
  }

  ModelSpec spec(const Dataset& data) const {
    switch (parse_model_kind(loss)) {
      case ModelKind::logreg: return ModelSpec::logreg(data.dim, lambda);
      case ModelKind::svm: return ModelSpec::svm(data.dim, lambda);
      case ModelKind::mlp: return ModelSpec::mlp(data.dim, std::max<std::uint32_t>(data.num_classes, 2), hidden, lambda);
    }
    throw std::invalid_argument("unknown loss");
  }
};

std::string join_cmdline(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) out += ' ';
    out += argv[i];
  }
  return out;
}

struct RunOptions {
  DataOptions data;
  ModelOptions model;
  std::vector<std::string> algos{"hogwild"};
  std::vector<std::size_t> threads{1};
  std::vector<double> etas{0.01};
  bool grid = false;
  std::size_t epochs = 1;
  std::size_t iters_per_epoch = 0;
  std::size_t outer = 1;
  std::size_t inner = 0;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  bool pin_threads = false;
  std::string metrics;
};

int do_run(const RunOptions& o, const std::string& cmdline) {
  Dataset data = o.data.load();
  o.model.adapt(data);
  const ModelSpec spec = o.model.spec(data);
  std::vector<double> etas = o.etas;
  if (o.grid) etas.assign(hn::kDefaultGrid.begin(), hn::kDefaultGrid.end());

  const double unit = hn::measure_time_unit(spec, data, o.seed);
  std::cout << "time_unit_seconds=" << hn::format_double(unit) << '\n';

  std::vector<hn::MetricsBlock> blocks;
  for (const auto& algo_name : o.algos) {
    for (std::size_t p : o.threads) {
      RunConfig config;
      config.algo = parse_algorithm(algo_name);
      config.threads = p;
      config.epochs = o.epochs;
      if (o.iters_per_epoch > 0) config.iters_per_epoch = o.iters_per_epoch;
      config.outer_iters = o.outer;
      if (o.inner > 0) config.inner_iters = o.inner;
      config.seed = o.seed;
      config.eval_every = o.eval_every;
      config.pin_threads = o.pin_threads;
      config.time_unit_seconds = unit;
      config.eta = etas.front();
      config.validate();

      auto group = hn::run_grid(spec, data, config, etas);
      for (const auto& b : group) {
        std::cout << "run algo=" << b.algo << " threads=" << b.threads << " eta=" << hn::format_double(b.eta);
        if (b.diverged) {
          std::cout << " status=diverged (" << b.error << ")\n";
        } else {
          const auto& last = b.metrics.rows.back();
          std::cout << " status=ok final_loss=" << hn::format_double(last.train_loss)
                    << " grad_evals=" << last.grad_evals << '\n';
        }
      }
      if (const auto best = hn::best_block(group); best && etas.size() > 1) {
        const auto& b = group[*best];
        std::cout << "best algo=" << b.algo << " threads=" << b.threads << " eta=" << hn::format_double(b.eta)
                  << " final_loss=" << hn::format_double(b.metrics.rows.back().train_loss) << '\n';
      }
      std::move(group.begin(), group.end(), std::back_inserter(blocks));
    }
  }

  try {
    hn::write_metrics_file(o.metrics, cmdline, blocks);
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
  const bool all_diverged = std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.diverged; });
  return all_diverged ? hn::kExitDiverged : hn::kExitOk;
}

struct SimOptions {
  DataOptions data;
  ModelOptions model;
  std::string algo = "hogwild";
  std::size_t tau = 0;
  double keep = 1.0;
  double partial = 0.5;
  double eta = 0.01;
  std::size_t steps = 50;
  std::size_t outer = 1;
  std::size_t inner = 50;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  bool scenario_grid = false;
  std::string out;
};

void write_sim_file(const std::string& path, const std::string& cmdline, const hn::SimReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  hn::write_sim_csv(f, cmdline, report);
  if (!f.flush()) throw IoError("write to '" + path + "' failed");
}

int do_simulate(const SimOptions& o, const std::string& cmdline) {
  Dataset data = o.data.load();
  o.model.adapt(data);
  const ModelSpec spec = o.model.spec(data);
  sim::SimConfig base;
  base.algo = sim::parse_sim_algo(o.algo);
  base.partial_prob = o.partial;
  base.eta = o.eta;
  base.steps = o.steps;
  base.outer_iters = o.outer;
  base.inner_iters = o.inner;
  base.trials = o.trials;
  base.seed = o.seed;
  base.record_detail = false;

  std::vector<std::pair<std::size_t, double>> scenarios;
  if (o.scenario_grid) {
    for (std::size_t tau : {0, 1, 2, 4}) {
      for (double keep : {0.5, 0.9, 1.0}) scenarios.emplace_back(tau, keep);
    }
  } else {
    scenarios.emplace_back(o.tau, o.keep);
  }

  for (const auto& [tau, keep] : scenarios) {
    sim::SimConfig config = base;
    config.tau = tau;
    config.keep_prob = keep;
    config.validate();
    const auto report = hn::simulate_and_check(spec, data, config);
    const std::string prefix = "tau=" + std::to_string(tau) + " keep=" + hn::format_double(keep) + " ";
    for (const auto& line : hn::sim_summary(report)) std::cout << (o.scenario_grid ? prefix : "") << line << '\n';
    if (!o.out.empty()) {
      std::string path = o.out;
      if (o.scenario_grid) {
        std::ostringstream suffix;
        suffix << "_tau" << tau << "_keep" << keep;
        const auto dot = path.rfind('.');
        path.insert(dot == std::string::npos || dot < path.find_last_of('/') + 1 ? path.size() : dot, suffix.str());
      }
      write_sim_file(path, cmdline, report);
    }
  }
  return hn::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lock-free asynchronous SGD / SVRG trainer and analysis tools"};
  app.require_subcommand(1);
  const std::string cmdline = join_cmdline(argc, argv);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Train and write a metrics CSV");
  run.data.add_to(*run_cmd);
  run.model.add_to(*run_cmd);
  run_cmd->add_option("--algo", run.algos, "sgd, hogwild, svrg, asysvrg (comma list)")
      ->delimiter(',')
      ->check(CLI::IsMember({"sgd", "hogwild", "svrg", "asysvrg"}));
  run_cmd->add_option("--threads", run.threads, "Thread counts (comma list)")->delimiter(',')->check(CLI::PositiveNumber);
  auto* eta_opt = run_cmd->add_option("--eta", run.etas, "Step sizes (comma list)")->delimiter(',')->check(CLI::PositiveNumber);
  run_cmd->add_flag("--grid", run.grid, "Sweep the default step-size grid")->excludes(eta_opt);
  run_cmd->add_option("--epochs", run.epochs, "Epochs (sgd/hogwild)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--iters-per-epoch", run.iters_per_epoch, "Per-thread steps per epoch (default ceil(n/p))");
  run_cmd->add_option("--outer", run.outer, "Outer iterations T (svrg/asysvrg)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--inner", run.inner, "Per-thread inner steps M (default ceil(n/p))");
  run_cmd->add_option("--seed", run.seed, "RNG seed");
  run_cmd->add_option("--eval-every", run.eval_every, "Measure every k epochs / outer iterations")
      ->check(CLI::PositiveNumber);
  run_cmd->add_flag("--pin-threads", run.pin_threads, "Pin worker j to CPU j (Linux only; no-op elsewhere)");
  run_cmd->add_option("--metrics", run.metrics, "Output CSV path")->required();

  hn::TheoryQuery theory;
  auto* theory_cmd = app.add_subcommand("theory", "Evaluate the step-size conditions and bounds");
  theory_cmd->add_option("--L", theory.L, "Smoothness constant")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--alpha", theory.alpha, "Lower bound of E[B_t] eigenvalues")->check(CLI::Range(0.0, 1.0));
  theory_cmd->add_option("--tau", theory.tau, "Delay bound");
  theory_cmd->add_option("--eta", theory.eta, "Step size")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--f0", theory.f0, "f(w0) - f* for the Hogwild! step size");
  theory_cmd->add_option("--V", theory.V, "Gradient bound")->check(CLI::PositiveNumber);
  theory_cmd->add_option("--iters", theory.total_iters, "Total iterations T~");
  theory_cmd->add_option("--beta", theory.beta, "AsySVRG schedule beta");
  theory_cmd->add_option("--M", theory.M_tilde, "Inner loop length M~");
  theory_cmd->add_option("--n", theory.n, "Instance count for the complexity regime");
  theory_cmd->add_option("--mu", theory.mu, "Regime step-size constant");
  theory_cmd->add_option("--v", theory.v, "Regime beta constant");

  SimOptions simo;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate the asynchronous model and check the lemma bounds");
  simo.data.add_to(*sim_cmd);
  simo.model.add_to(*sim_cmd);
  sim_cmd->add_option("--algo", simo.algo, "hogwild or asysvrg")->check(CLI::IsMember({"hogwild", "asysvrg"}));
  sim_cmd->add_option("--tau", simo.tau, "Delay bound");
  sim_cmd->add_option("--keep", simo.keep, "Write survival probability")->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--partial", simo.partial, "Pending-coordinate visibility probability")
      ->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--eta", simo.eta, "Step size")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--steps", simo.steps, "Steps (hogwild)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--outer", simo.outer, "Outer iterations (asysvrg)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--inner", simo.inner, "Inner steps (asysvrg)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--trials", simo.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", simo.seed, "RNG seed");
  sim_cmd->add_flag("--scenario-grid", simo.scenario_grid, "Run tau in {0,1,2,4} x keep in {0.5,0.9,1}");
  sim_cmd->add_option("--out", simo.out, "Per-step CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hn::kExitOk : hn::kExitUsage;
  }

  try {
    if (*run_cmd) return do_run(run, cmdline);
    if (*theory_cmd) {
      for (const auto& line : hn::theory_report(theory)) std::cout << line << '\n';
      return hn::kExitOk;
    }
    if (*sim_cmd) return do_simulate(simo, cmdline);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hn::kExitIo;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hn::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hn::kExitUsage;
  }
  return hn::kExitUsage;
}
