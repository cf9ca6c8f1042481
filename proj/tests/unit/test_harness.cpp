#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lfopt/harness.hpp"

using namespace lfopt;
using namespace lfopt::harness;

namespace {

MetricsBlock block(std::string algo, std::size_t threads, double eta, std::size_t rows) {
  MetricsBlock b;
  b.algo = std::move(algo);
  b.threads = threads;
  b.eta = eta;
  b.seed = 3;
  for (std::size_t r = 0; r < rows; ++r) {
    MetricsRow row;
    row.elapsed_units = 0.1 * static_cast<double>(r);
    row.wall_seconds = 1.0 / 3.0 * static_cast<double>(r);
    row.grad_evals = 100 * r;
    row.train_loss = 0.7 / static_cast<double>(r + 1);
    row.grad_norm_sq = 1e-3 / 7.0 * static_cast<double>(r + 1);
    b.metrics.rows.push_back(row);
  }
  return b;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -0.0}) {
      CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.01) == "0.01");
    CHECK(format_double(0.05) == "0.050000000000000003");
  }

  TEST_CASE("metrics file layout and ordering") {
    std::vector<MetricsBlock> blocks = {block("hogwild", 4, 0.01, 2), block("asysvrg", 1, 0.05, 2),
                                        block("hogwild", 1, 0.1, 1), block("hogwild", 1, 0.01, 1)};
    std::ostringstream out;
    write_metrics(out, "lfopt run --x", blocks);
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 2 + 6);
    CHECK(lines[0] == "# cmdline: lfopt run --x");
    CHECK(lines[1] == "algo,threads,seed,eta,row,elapsed_units,wall_seconds,grad_evals,train_loss,grad_norm_sq");
    CHECK(lines[2].starts_with("asysvrg,1,3,0.050000000000000003,0,"));
    CHECK(lines[3].starts_with("asysvrg,1,3,0.050000000000000003,1,"));
    CHECK(lines[4].starts_with("hogwild,1,3,0.01,0,"));
    CHECK(lines[5].starts_with("hogwild,1,3,0.10000000000000001,0,"));
    CHECK(lines[6].starts_with("hogwild,4,3,0.01,0,"));
    CHECK(lines[7].starts_with("hogwild,4,3,0.01,1,"));
  }

  TEST_CASE("metrics round trip is lossless") {
    std::vector<MetricsBlock> blocks = {block("asysvrg", 2, 0.005, 4)};
    blocks[0].metrics.rows[2].train_loss = std::numeric_limits<double>::quiet_NaN();
    std::stringstream io;
    write_metrics(io, "cmd", blocks);
    const auto table = read_metrics(io);
    CHECK(table.cmdline == "cmd");
    REQUIRE(table.records.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      const auto& rec = table.records[r];
      const auto& row = blocks[0].metrics.rows[r];
      CHECK(rec.algo == "asysvrg");
      CHECK(rec.threads == 2);
      CHECK(rec.seed == 3);
      CHECK(rec.eta == 0.005);
      CHECK(rec.row == r);
      CHECK(rec.values.elapsed_units == row.elapsed_units);
      CHECK(rec.values.wall_seconds == row.wall_seconds);
      CHECK(rec.values.grad_evals == row.grad_evals);
      if (r == 2) {
        CHECK(std::isnan(rec.values.train_loss));
      } else {
        CHECK(rec.values.train_loss == row.train_loss);
      }
      CHECK(rec.values.grad_norm_sq == row.grad_norm_sq);
    }
  }

  TEST_CASE("schema violations") {
    std::istringstream wrong_header("algo,threads,seed,eta,row,elapsed,wall_seconds,grad_evals,train_loss,grad_norm_sq\n");
    CHECK_THROWS_AS(read_metrics(wrong_header), SchemaError);
    std::istringstream short_row(std::string(kMetricsHeader) + "\nhogwild,1,0,0.1,0,0,0,0,0.5\n");
    CHECK_THROWS_AS(read_metrics(short_row), SchemaError);
    std::istringstream bad_value(std::string(kMetricsHeader) + "\nhogwild,1,0,0.1,0,0,0,x,0.5,0.1\n");
    CHECK_THROWS_AS(read_metrics(bad_value), SchemaError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_metrics(empty), SchemaError);
  }

  TEST_CASE("committed fixture matches the schema") {
    const auto table = read_metrics_file(std::string(LFOPT_TEST_DATA) + "/fixture_metrics.csv");
    CHECK(table.cmdline.find("lfopt run") != std::string::npos);
    REQUIRE(table.records.size() == 20);
    std::vector<std::pair<std::string, std::size_t>> pairs;
    for (const auto& r : table.records) pairs.emplace_back(r.algo, r.threads);
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    CHECK(pairs.size() == 4);
    CHECK(table.records.back().values.grad_evals == 5000);
  }

  TEST_CASE("grid picks the lowest final loss and records divergence") {
    const auto data = make_synthetic_logreg(200, 8, 5);
    const auto spec = ModelSpec::logreg(8, 1e-3);
    RunConfig c;
    c.algo = Algorithm::hogwild;
    c.threads = 1;
    c.epochs = 3;
    c.seed = 2;
    const std::vector<double> etas = {1e5, 0.5, 0.1, 0.01};
    const auto blocks = run_grid(spec, data, c, etas);
    REQUIRE(blocks.size() == 4);
    CHECK(blocks[0].diverged);
    CHECK_FALSE(blocks[0].error.empty());
    const auto best = best_block(blocks);
    REQUIRE(best);
    for (const auto& b : blocks) {
      if (!b.diverged) CHECK(blocks[*best].metrics.rows.back().train_loss <= b.metrics.rows.back().train_loss);
    }
    CHECK(best_block({}) == std::nullopt);
  }

  TEST_CASE("time unit is positive") {
    const auto data = make_synthetic_logreg(500, 10, 1);
    CHECK(measure_time_unit(ModelSpec::logreg(10, 0.0), data, 1) > 0.0);
  }

  TEST_CASE("theory report") {
    TheoryQuery q;
    q.eta = 0.01;
    const auto lines = theory_report(q);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "status=feasible");
    CHECK(lines[1] == "rho=" + format_double(*theory::solve_rho(0.01, 0, 1.0)));

    q.tau = 2;
    q.L = 0.5;
    q.eta = 0.001;
    q.beta = 0.05;
    q.M_tilde = 30;
    q.f0 = 0.7;
    q.total_iters = 1000;
    const auto full = theory_report(q);
    const double rho = *theory::solve_rho(0.001, 2, 0.5);
    const auto s = theory::theorem2_schedule(0.5, 1.0, 2, rho, 0.001, 0.05, 30);
    auto has = [&](const std::string& line) { return std::find(full.begin(), full.end(), line) != full.end(); };
    CHECK(has("gamma=" + format_double(s.gamma)));
    CHECK(has("c0=" + format_double(s.c.front())));
    CHECK(has("M_tilde=30"));

    q.eta = 0.5;
    q.tau = 3;
    q.L = 1.0;
    CHECK(theory_report(q) == std::vector<std::string>{"status=infeasible"});
    q.eta = 0.0;
    CHECK_THROWS_AS(theory_report(q), std::invalid_argument);
  }

  TEST_CASE("simulate report: tau = 0 has zero gaps") {
    const auto data = make_synthetic_logreg(40, 5, 3);
    sim::SimConfig c;
    c.eta = 0.01;
    c.steps = 10;
    c.trials = 20;
    const auto report = simulate_and_check(ModelSpec::logreg(5, 0.0), data, c);
    REQUIRE(report.rho);
    REQUIRE(report.gap);
    CHECK(report.gap->holds);
    std::ostringstream out;
    write_sim_csv(out, "cmd", report);
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 2 + 10);
    CHECK(lines[1] == kSimHeader);
    for (std::size_t k = 2; k < lines.size(); ++k) {
      std::istringstream row(lines[k]);
      std::vector<std::string> cells;
      for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
      CHECK(cells[5] == "0");
    }
    const auto summary = sim_summary(report);
    CHECK(std::find_if(summary.begin(), summary.end(), [](const std::string& l) {
            return l.starts_with("holds_gap_bound=true");
          }) != summary.end());
  }
}
