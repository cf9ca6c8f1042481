import math
import os

import numpy as np
import pytest

import lfopt

DATA = os.environ.get("LFOPT_TEST_DATA", os.path.join(os.path.dirname(__file__), "..", "..", "tests", "data"))


def desk():
    return lfopt.make_synthetic_logreg(200, 5, 1), lfopt.ModelSpec.logreg(5, 1e-3)


def test_load_and_parse():
    data = lfopt.load_libsvm(os.path.join(DATA, "labels10.libsvm"))
    assert len(data) == 10
    assert data.num_classes == 3
    again = lfopt.parse_libsvm(lfopt.serialize_libsvm(data))
    assert again.labels == data.labels
    with pytest.raises(ValueError):
        lfopt.parse_libsvm("1 3:1 2:1\n")


def test_gradient_matches_finite_differences():
    data, spec = desk()
    w = np.linspace(-0.5, 0.5, spec.param_dim)
    loss, grad = lfopt.full_loss_and_grad(spec, w, data)
    h = 1e-6
    for k in range(spec.param_dim):
        e = np.zeros_like(w)
        e[k] = h
        fd = (lfopt.full_loss_and_grad(spec, w + e, data)[0] - lfopt.full_loss_and_grad(spec, w - e, data)[0]) / (2 * h)
        assert fd == pytest.approx(grad[k], abs=1e-7)
    assert math.isfinite(loss)


def test_single_thread_runners_agree():
    data, spec = desk()
    results = {}
    for algo in ("sgd", "hogwild"):
        cfg = lfopt.RunConfig(algo=algo, eta=0.05, epochs=3, seed=2)
        results[algo] = lfopt.run(spec, data, cfg)
    (ms, ws), (mh, wh) = results["sgd"], results["hogwild"]
    assert ms["train_loss"] == mh["train_loss"]
    assert ms["grad_evals"][-1] == 3 * len(data)
    np.testing.assert_array_equal(ws, wh)
    assert ms["train_loss"][-1] < ms["train_loss"][0]


def test_asysvrg_threads():
    data, spec = desk()
    cfg = lfopt.RunConfig(algo="asysvrg", eta=0.05, threads=2, outer_iters=3, seed=1)
    metrics, params = lfopt.run(spec, data, cfg)
    assert len(metrics["train_loss"]) == 4
    assert params.shape == (spec.param_dim,)


def test_theory():
    assert lfopt.solve_rho(0.01, 0, 1.0) == pytest.approx(1 / 0.9, abs=1e-10)
    assert lfopt.solve_rho(0.5, 3, 1.0) is None
    lines = lfopt.theory_report(L=1.0, alpha=1.0, tau=0, eta=0.01)
    assert lines[0] == "status=feasible"


def test_simulate_tau0_has_no_gap():
    data, spec = desk()
    out = lfopt.simulate(spec, data, tau=0, keep_prob=0.9, eta=0.01, steps=10, trials=20)
    assert all(g == 0.0 for g in out["gap_sq"])
    assert out["rho"] is not None


def test_metrics_fixture_schema(tmp_path):
    cmdline, rows = lfopt.read_metrics_file(os.path.join(DATA, "fixture_metrics.csv"))
    assert cmdline.startswith("lfopt run")
    assert len({(r[0], r[1]) for r in rows}) == 4
    bad = tmp_path / "bad.csv"
    bad.write_text("algo,threads\n")
    with pytest.raises(ValueError):
        lfopt.read_metrics_file(str(bad))
