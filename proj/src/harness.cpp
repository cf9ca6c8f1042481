#include "lfopt/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace lfopt::harness {

std::string format_double(double value) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {

struct BlockOrder {
  bool operator()(const MetricsBlock* a, const MetricsBlock* b) const {
    if (a->algo != b->algo) return a->algo < b->algo;
    if (a->threads != b->threads) return a->threads < b->threads;
    return a->eta < b->eta;
  }
};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
T parse_field(std::string_view text, std::size_t line, std::string_view column) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw SchemaError("metrics line " + std::to_string(line) + ": bad value '" + std::string(text) +
                      "' in column " + std::string(column));
  }
  return value;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

void write_metrics(std::ostream& out, std::string_view cmdline, const std::vector<MetricsBlock>& blocks) {
  std::vector<const MetricsBlock*> order;
  order.reserve(blocks.size());
  for (const auto& b : blocks) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(), BlockOrder{});

  out << "# cmdline: " << cmdline << '\n' << kMetricsHeader << '\n';
  for (const MetricsBlock* b : order) {
    const auto& rows = b->metrics.rows;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& m = rows[r];
      out << b->algo << ',' << b->threads << ',' << b->seed << ',' << format_double(b->eta) << ',' << r << ','
          << format_double(m.elapsed_units) << ',' << format_double(m.wall_seconds) << ',' << m.grad_evals << ','
          << format_double(m.train_loss) << ',' << format_double(m.grad_norm_sq) << '\n';
    }
  }
}

void write_metrics_file(const std::string& path, std::string_view cmdline, const std::vector<MetricsBlock>& blocks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open '" + path + "' for writing");
  write_metrics(out, cmdline, blocks);
  out.flush();
  if (!out) throw std::ios_base::failure("write to '" + path + "' failed");
}

MetricsTable read_metrics(std::istream& in) {
  MetricsTable table;
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  const auto columns = split(kMetricsHeader, ',');
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (!have_header) {
      if (line.starts_with("#")) {
        constexpr std::string_view prefix = "# cmdline: ";
        if (line.starts_with(prefix)) table.cmdline = std::string(line.substr(prefix.size()));
        continue;
      }
      if (line != kMetricsHeader) {
        throw SchemaError("metrics header mismatch: expected '" + std::string(kMetricsHeader) + "', got '" +
                          std::string(line) + "'");
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != columns.size()) {
      throw SchemaError("metrics line " + std::to_string(line_no) + ": expected " + std::to_string(columns.size()) +
                        " columns, got " + std::to_string(f.size()));
    }
    MetricsRecord rec;
    rec.algo = std::string(f[0]);
    rec.threads = parse_field<std::size_t>(f[1], line_no, columns[1]);
    rec.seed = parse_field<std::uint64_t>(f[2], line_no, columns[2]);
    rec.eta = parse_field<double>(f[3], line_no, columns[3]);
    rec.row = parse_field<std::size_t>(f[4], line_no, columns[4]);
    rec.values.elapsed_units = parse_field<double>(f[5], line_no, columns[5]);
    rec.values.wall_seconds = parse_field<double>(f[6], line_no, columns[6]);
    rec.values.grad_evals = parse_field<std::uint64_t>(f[7], line_no, columns[7]);
    rec.values.train_loss = parse_field<double>(f[8], line_no, columns[8]);
    rec.values.grad_norm_sq = parse_field<double>(f[9], line_no, columns[9]);
    table.records.push_back(std::move(rec));
  }
  if (!have_header) throw SchemaError("metrics file has no header");
  return table;
}

MetricsTable read_metrics_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  return read_metrics(in);
}

double measure_time_unit(const ModelSpec& spec, const Dataset& data, std::uint64_t seed, std::size_t repeats) {
  if (repeats < 1) throw std::invalid_argument("measure_time_unit: repeats must be >= 1");
  RunConfig config;
  config.algo = Algorithm::hogwild;
  config.threads = 1;
  config.epochs = 1;
  config.seed = seed;
  config.eta = 1e-4;  // small enough never to diverge; the pass cost does not depend on it
  std::vector<double> times;
  for (std::size_t r = 0; r < repeats; ++r) {
    times.push_back(run_hogwild(spec, data, config).metrics.rows.back().wall_seconds);
  }
  std::sort(times.begin(), times.end());
  return std::max(times[times.size() / 2], 1e-9);
}

std::vector<MetricsBlock> run_grid(const ModelSpec& spec, const Dataset& data, const RunConfig& base,
                                   const std::vector<double>& etas) {
  std::vector<MetricsBlock> blocks;
  for (double eta : etas) {
    RunConfig config = base;
    config.eta = eta;
    MetricsBlock block;
    block.algo = std::string(to_string(config.algo));
    block.threads = config.threads;
    block.seed = config.seed;
    block.eta = eta;
    try {
      block.metrics = run(spec, data, config).metrics;
    } catch (const DivergenceError& e) {
      block.metrics = e.partial();
      block.diverged = true;
      block.error = e.what();
    } catch (const NonFiniteError& e) {
      block.diverged = true;
      block.error = e.what();
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

std::optional<std::size_t> best_block(const std::vector<MetricsBlock>& blocks) {
  std::optional<std::size_t> best;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].diverged || blocks[b].metrics.rows.empty()) continue;
    const double loss = blocks[b].metrics.rows.back().train_loss;
    if (!best || loss < blocks[*best].metrics.rows.back().train_loss) best = b;
  }
  return best;
}

std::vector<std::string> theory_report(const TheoryQuery& q) {
  if (!(q.L > 0.0)) throw std::invalid_argument("theory: L must be > 0");
  if (!(q.alpha > 0.0 && q.alpha <= 1.0)) throw std::invalid_argument("theory: alpha must be in (0, 1]");
  if (!(q.eta > 0.0) || !std::isfinite(q.eta)) throw std::invalid_argument("theory: eta must be > 0");

  std::vector<std::string> lines;
  auto kv = [&](std::string_view key, double value) { lines.push_back(std::string(key) + "=" + format_double(value)); };
  auto kv_int = [&](std::string_view key, std::size_t value) {
    lines.push_back(std::string(key) + "=" + std::to_string(value));
  };
  auto kv_bool = [&](std::string_view key, bool value) {
    lines.push_back(std::string(key) + "=" + (value ? "true" : "false"));
  };

  const auto rho = theory::solve_rho(q.eta, q.tau, q.L);
  if (!rho) {
    lines.push_back("status=infeasible");
    return lines;
  }
  lines.push_back("status=feasible");
  kv("rho", *rho);

  if (q.f0) {
    if (q.total_iters < 1) throw std::invalid_argument("theory: --iters is required with --f0");
    theory::AsyncModelParams p;
    p.L = q.L;
    p.alpha = q.alpha;
    p.tau = q.tau;
    p.V = q.V;
    p.rho = *rho;
    const auto s = theory::hogwild_stepsize(*q.f0, p, q.total_iters);
    kv("eta_star", s.eta_star);
    kv("hogwild_bound", s.bound);
    kv("hogwild_A", s.A);
    kv("hogwild_B", s.B);
  }

  if (q.beta || q.M_tilde) {
    if (!q.beta || !q.M_tilde) throw std::invalid_argument("theory: --beta and --M go together");
    const auto s = theory::theorem2_schedule(q.L, q.alpha, q.tau, *rho, q.eta, *q.beta, *q.M_tilde);
    kv_int("M_tilde", s.M_tilde);
    kv("c0", s.c.front());
    kv("c0_closed_form", s.c0_closed_form);
    kv("gamma", s.gamma);
    kv_int("gamma_argmin", s.gamma_argmin);
    kv("a", s.a_const);
    kv_bool("valid", s.gamma > 0.0 && 4.0 * s.c.front() / (q.alpha * *q.beta) < 1.0);
  }

  if (q.n || q.mu || q.v) {
    if (!q.n || !q.mu || !q.v) throw std::invalid_argument("theory: --n, --mu and --v go together");
    const auto r = theory::complexity_regime(*q.n, *q.mu, *q.v, q.L, q.alpha, q.tau, *rho);
    kv("regime_eta", r.eta);
    kv("regime_beta", r.beta);
    kv_int("regime_M_tilde", r.M_tilde);
    kv("regime_gamma", r.gamma);
    kv("regime_c0", r.c0);
    kv("regime_mu_condition", r.mu_condition);
    kv_bool("regime_valid", r.valid);
  }
  return lines;
}

SimReport simulate_and_check(const ModelSpec& spec, const Dataset& data, const sim::SimConfig& config) {
  SimReport report;
  report.trace = sim::simulate(spec, data, config);
  report.L = lipschitz_bound(spec, data);
  if (config.eta > 0.0) report.rho = theory::solve_rho(config.eta, config.tau, report.L);
  if (report.rho && report.trace.steps.size() >= 2) {
    report.q_ratio = sim::check_q_ratio(report.trace, *report.rho);
    report.gap = sim::check_gap_bound(report.trace, *report.rho);
    if (config.algo == sim::SimAlgo::asysvrg) report.qhat_vs_q = sim::check_qhat_vs_q(report.trace, *report.rho);
  }
  return report;
}

void write_sim_csv(std::ostream& out, std::string_view cmdline, const SimReport& report) {
  const auto& steps = report.trace.steps;
  const auto& cfg = report.trace.config;
  const double factor = report.rho ? sim::gap_bound_factor(cfg.eta, cfg.tau, *report.rho, 1) : 0.0;
  out << "# cmdline: " << cmdline << '\n' << kSimHeader << '\n';
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto& st = steps[s];
    out << s << ',' << st.outer << ',' << st.inner << ',' << format_double(st.q_hat) << ',' << format_double(st.q_w)
        << ',' << format_double(st.gap_sq) << ',';
    if (report.rho) out << format_double(factor * st.q_hat);
    out << ',';
    if (s + 1 < steps.size() && steps[s + 1].outer == st.outer && steps[s + 1].q_hat != 0.0) {
      out << format_double(st.q_hat / steps[s + 1].q_hat);
    }
    out << ',';
    if (report.rho) out << format_double(*report.rho);
    out << ',' << format_double(st.mean_delay) << ',' << st.max_delay << '\n';
  }
}

std::vector<std::string> sim_summary(const SimReport& report) {
  std::vector<std::string> lines;
  if (!report.rho) {
    lines.push_back("status=infeasible");
    return lines;
  }
  lines.push_back("rho=" + format_double(*report.rho));
  lines.push_back("L=" + format_double(report.L));
  auto add = [&](std::string_view name, const std::optional<sim::CheckReport>& r) {
    if (!r) return;
    lines.push_back("holds_" + std::string(name) + "=" + (r->holds ? "true" : "false") +
                    " max_ratio=" + format_double(r->max_ratio) + " worst_step=" + std::to_string(r->worst_step));
  };
  add("q_ratio", report.q_ratio);
  add("gap_bound", report.gap);
  add("qhat_vs_q", report.qhat_vs_q);
  const auto& t = report.trace;
  if (t.total_coords > 0) {
    lines.push_back("kept_fraction=" +
                    format_double(static_cast<double>(t.kept_coords) / static_cast<double>(t.total_coords)));
  }
  return lines;
}

}  // namespace lfopt::harness
