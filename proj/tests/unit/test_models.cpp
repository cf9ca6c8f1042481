#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "../support.hpp"
#include "lfopt/models.hpp"
#include "lfopt/rng.hpp"

using namespace lfopt;
using lfopt::testing::fd_relative_error;
using lfopt::testing::random_params;

namespace {

SparseVector dense_x(std::initializer_list<double> values) {
  SparseVector x;
  x.dim = values.size();
  std::uint32_t k = 0;
  for (double v : values) {
    x.indices.push_back(k++);
    x.values.push_back(v);
  }
  return x;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("layout tiles the parameter vector") {
    const auto layout = make_layout(ModelSpec::mlp(5, 3, 4, 0.0));
    CHECK(layout.total_dim == 4 * 5 + 4 + 3 * 4 + 3);
    std::size_t offset = 0;
    for (const auto& s : layout.segments) {
      CHECK(s.offset == offset);
      offset += s.size();
    }
    CHECK(offset == layout.total_dim);
    CHECK(layout.segment("W2").rows == 3);
    CHECK_FALSE(layout.segment("b1").regularized);
    CHECK(make_layout(ModelSpec::logreg(7, 0.1)).total_dim == 7);
  }

  TEST_CASE("spec validation") {
    CHECK_THROWS(ModelSpec({ModelKind::logreg, 0.0, 3, 3, 0}).validate());
    CHECK_THROWS(ModelSpec::mlp(3, 1, 4, 0.0).validate());
    CHECK_THROWS(ModelSpec::mlp(3, 2, 0, 0.0).validate());
    CHECK_THROWS(ModelSpec::logreg(3, -1.0).validate());
    CHECK(parse_model_kind("svm") == ModelKind::svm);
    CHECK_THROWS(parse_model_kind("cnn"));
  }

  TEST_CASE("losses at zero parameters") {
    const auto x = dense_x({0.3, -1.2, 2.0});
    CHECK(loss_single(ModelSpec::logreg(3, 0.0), DenseVector(3), x, 1) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK(loss_single(ModelSpec::svm(3, 0.0), DenseVector(3), x, 0) == 1.0);
    const auto mlp = ModelSpec::mlp(3, 5, 4, 0.0);
    CHECK(loss_single(mlp, DenseVector(make_layout(mlp).total_dim), x, 2) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  }

  TEST_CASE("gradient closed forms") {
    GradientBuffer g;
    grad_single(ModelSpec::logreg(2, 0.0), DenseVector(2), dense_x({1.0, 0.0}), 1, g);
    CHECK(g[0] == -0.5);
    CHECK(g[1] == 0.0);

    // margin exactly 1: y x^T w = 1 so the hinge term is gated off
    grad_single(ModelSpec::svm(2, 0.0), DenseVector{0.5, 0.0}, dense_x({2.0, 3.0}), 1, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    grad_single(ModelSpec::svm(2, 0.0), DenseVector{0.25, 0.0}, dense_x({2.0, 3.0}), 1, g);
    CHECK(g[0] == -2.0);
    CHECK(g[1] == -3.0);
  }

  TEST_CASE("finite differences, all model kinds") {
    std::mt19937_64 gen(5);
    const auto data = make_synthetic_logreg(40, 12, 8);
    for (double lambda : {0.0, 1e-2}) {
      for (auto spec : {ModelSpec::logreg(12, lambda), ModelSpec::svm(12, lambda)}) {
        int checked = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const auto w = random_params(gen, 12, 1.0);
          const double margin = dot(data.instances[i], w) * (data.labels[i] == 1 ? 1.0 : -1.0);
          if (spec.kind == ModelKind::svm && std::abs(1.0 - margin) < 1e-3) continue;
          CHECK(fd_relative_error(spec, w, data.instances[i], data.labels[i]) <= 1e-6);
          ++checked;
        }
        CHECK(checked > 30);
      }
    }
    const auto multi = make_synthetic_multiclass(20, 6, 4, 3);
    for (double lambda : {0.0, 1e-3}) {
      const auto spec = ModelSpec::mlp(6, 4, 5, lambda);
      for (std::size_t i = 0; i < multi.size(); ++i) {
        const auto p = random_params(gen, make_layout(spec).total_dim, 0.5);
        CHECK(fd_relative_error(spec, p, multi.instances[i], multi.labels[i]) <= 1e-4);
      }
    }
  }

  TEST_CASE("lambda = 0 support equals the instance support") {
    SparseVector x{{1, 4}, {0.5, -2.0}, 6};
    GradientBuffer g;
    for (auto spec : {ModelSpec::logreg(6, 0.0), ModelSpec::svm(6, 0.0)}) {
      grad_single(spec, DenseVector(6), x, 1, g);
      CHECK_FALSE(g.dense());
      CHECK(g.support() == x.indices);
    }
    grad_single(ModelSpec::logreg(6, 0.1), DenseVector(6), x, 1, g);
    CHECK(g.dense());

    // Reusing a buffer must clear coordinates written by the previous call.
    SparseVector other{{0}, {1.0}, 6};
    grad_single(ModelSpec::logreg(6, 0.0), DenseVector(6), other, 1, g);
    for (std::size_t k = 1; k < 6; ++k) CHECK(g[k] == 0.0);

    const auto mlp = ModelSpec::mlp(6, 3, 2, 0.0);
    grad_single(mlp, init_params(mlp, 1), x, 2, g);
    DenseVector covered(g.size());
    g.for_each_support([&](std::size_t k) { covered[k] = 1.0; });
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g[k] != 0.0) CHECK(covered[k] == 1.0);
    }
  }

  TEST_CASE("softmax is normalized and overflow-safe") {
    std::vector<double> out(3);
    for (double big : {0.0, 700.0, -700.0, 1e300}) {
      softmax(std::vector<double>{big, big - 1.0, big - 2.0}, out);
      double s = 0.0;
      for (double v : out) {
        CHECK(std::isfinite(v));
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(softplus(800.0) == 800.0);
    CHECK(softplus(-800.0) >= 0.0);
  }

  TEST_CASE("loss is invariant under permuting then canonicalizing the instance") {
    SparseVector x{{4, 0, 2}, {1.5, -0.5, 2.0}, 5};
    SparseVector y = x;
    y.canonicalize();
    std::swap(x.indices[0], x.indices[1]);
    std::swap(x.values[0], x.values[1]);
    x.canonicalize();
    const DenseVector w{0.1, -0.2, 0.3, 0.4, -0.5};
    CHECK(loss_single(ModelSpec::logreg(5, 0.1), w, x, 1) == loss_single(ModelSpec::logreg(5, 0.1), w, y, 1));
  }

  TEST_CASE("full loss and gradient") {
    const auto data = make_synthetic_logreg(100, 6, 21);
    const auto spec = ModelSpec::logreg(6, 1e-2);
    std::mt19937_64 gen(1);
    const auto w = random_params(gen, 6, 1.0);

    Dataset one = head(data, 1);
    GradientBuffer g;
    const double l1 = grad_single(spec, w, one.instances[0], one.labels[0], g);
    auto lg1 = full_loss_and_grad(spec, w, one);
    CHECK(lg1.loss == l1);
    for (std::size_t k = 0; k < 6; ++k) CHECK(lg1.grad[k] == g[k]);

    Dataset twice = one;
    twice.instances.push_back(one.instances[0]);
    twice.labels.push_back(one.labels[0]);
    auto lg2 = full_loss_and_grad(spec, w, twice);
    CHECK(lg2.loss == doctest::Approx(l1).epsilon(1e-15));

    // Independent loop oracle.
    double loss = 0.0;
    std::vector<double> grad(6, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double y = data.labels[i] == 1 ? 1.0 : -1.0;
      const auto xd = densify(data.instances[i]);
      double m = 0.0;
      for (std::size_t k = 0; k < 6; ++k) m += xd[k] * w[k];
      loss += std::log1p(std::exp(-y * m));
      const double c = -y / (1.0 + std::exp(y * m));
      for (std::size_t k = 0; k < 6; ++k) grad[k] += c * xd[k] + spec.lambda * w[k];
    }
    loss = loss / 100.0 + 0.5 * spec.lambda * l2_norm_sq(w);
    auto lg = full_loss_and_grad(spec, w, data);
    CHECK(lg.loss == doctest::Approx(loss).epsilon(1e-12));
    for (std::size_t k = 0; k < 6; ++k) CHECK(lg.grad[k] == doctest::Approx(grad[k] / 100.0).epsilon(1e-12));
  }

  TEST_CASE("lipschitz_bound closed forms and sampling oracle") {
    const auto single = parse_libsvm("1 1:2\n");
    CHECK(lipschitz_bound(ModelSpec::logreg(1, 0.0), single) == 1.0);
    const auto two = parse_libsvm("1 1:2\n2 2:1 3:1\n");
    CHECK(lipschitz_bound(ModelSpec::logreg(3, 0.001), two) == doctest::Approx(1.001).epsilon(1e-15));
    CHECK_THROWS_AS(lipschitz_bound(ModelSpec::mlp(3, 2, 2, 0.0), two), UnsupportedModelError);

    const auto data = make_synthetic_logreg(200, 8, 4);
    const auto spec = ModelSpec::logreg(8, 1e-2);
    const double L = lipschitz_bound(spec, data);
    std::mt19937_64 gen(2);
    CounterRng rng(3, 0);
    GradientBuffer ga, gb;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto i = rng.uniform_index(data.size());
      const auto a = random_params(gen, 8, 2.0);
      const auto b = random_params(gen, 8, 2.0);
      grad_single(spec, a, data.instances[i], data.labels[i], ga);
      grad_single(spec, b, data.instances[i], data.labels[i], gb);
      double num = 0.0;
      for (std::size_t k = 0; k < 8; ++k) num += (ga[k] - gb[k]) * (ga[k] - gb[k]);
      CHECK(std::sqrt(num) <= L * lfopt::testing::dist(a, b) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("grad_bound closed forms and sampling oracle") {
    const auto unit = parse_libsvm("1 1:0.6 2:0.8\n2 1:0.5\n");
    CHECK(grad_bound(ModelSpec::logreg(2, 0.0), unit, 3.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(grad_bound(ModelSpec::logreg(2, 0.5), unit, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS(grad_bound(ModelSpec::logreg(2, 0.5), unit, -1.0));

    const auto data = make_synthetic_logreg(100, 5, 6);
    for (auto spec : {ModelSpec::logreg(5, 0.1), ModelSpec::svm(5, 0.1)}) {
      const double V = grad_bound(spec, data, 10.0);
      std::mt19937_64 gen(9);
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unif;
      GradientBuffer g;
      for (int trial = 0; trial < 1000; ++trial) {
        DenseVector w(5);
        for (double& v : w) v = normal(gen);
        const double r = 10.0 * std::pow(unif(gen), 1.0 / 5.0) / std::sqrt(l2_norm_sq(w));
        for (double& v : w) v *= r;
        const auto i = static_cast<std::size_t>(trial) % data.size();
        grad_single(spec, w, data.instances[i], data.labels[i], g);
        CHECK(std::sqrt(l2_norm_sq(g.vector())) <= V * (1.0 + 1e-12));
      }
    }
  }

  TEST_CASE("errors") {
    const auto spec = ModelSpec::logreg(3, 0.0);
    SparseVector x{{0}, {1.0}, 3};
    GradientBuffer g;
    CHECK_THROWS_AS(loss_single(spec, DenseVector(2), x, 1), DimensionError);
    CHECK_THROWS_AS(loss_single(spec, DenseVector{0.0, NAN, 0.0}, x, 1), NonFiniteError);
    CHECK_THROWS_AS(grad_single(spec, DenseVector{INFINITY, 0.0, 0.0}, x, 1, g), NonFiniteError);
    SparseVector wide{{0}, {1.0}, 4};
    CHECK_THROWS_AS(grad_single(spec, DenseVector(3), wide, 1, g), DimensionError);
  }

  TEST_CASE("mlp init: seeded weights, zero biases, variance 0.01") {
    const auto spec = ModelSpec::mlp(30, 10, 40, 1e-3);
    const auto a = init_params(spec, 4);
    CHECK(a == init_params(spec, 4));
    CHECK_FALSE(a == init_params(spec, 5));
    const auto layout = make_layout(spec);
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& s : layout.segments) {
      for (std::size_t k = s.offset; k < s.offset + s.size(); ++k) {
        if (s.regularized) {
          sum_sq += a[k] * a[k];
          ++count;
        } else {
          CHECK(a[k] == 0.0);
        }
      }
    }
    CHECK(sum_sq / static_cast<double>(count) == doctest::Approx(0.01).epsilon(0.1));
    CHECK(init_params(ModelSpec::logreg(4, 0.0), 3) == DenseVector(4));
  }
}
