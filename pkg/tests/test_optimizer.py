import numpy as np
import pytest

from doubleraman.optimizer import (
    SEARCH_BOX,
    OptimizationDivergedError,
    SimplexConfig,
    default_config,
    maximize_over_parameters,
    nelder_mead,
)


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_rosenbrock_minimum():
    res = nelder_mead(rosenbrock, SimplexConfig((-1.2, 1.0), (0.5, 0.5), x_tol=1e-8, f_tol=1e-14,
                                                max_evals=2000))
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-3)
    assert res.evals == len(res.trace)


def test_budget_is_respected_and_flagged():
    res = nelder_mead(rosenbrock, SimplexConfig((-1.2, 1.0), (0.5, 0.5), max_evals=15))
    assert res.evals <= 15
    assert res.budget_exhausted and not res.converged
    assert res.fun == min(f for _, f in res.trace)


def test_simplex_is_deterministic():
    cfg = SimplexConfig((0.3, -0.2), (0.1, 0.1))
    a, b = nelder_mead(rosenbrock, cfg), nelder_mead(rosenbrock, cfg)
    assert a.trace[-1][1] == b.trace[-1][1]
    np.testing.assert_array_equal(a.x, b.x)


def test_config_validation():
    with pytest.raises(ValueError):
        SimplexConfig((0.0,), (0.1, 0.1))
    with pytest.raises(ValueError):
        SimplexConfig((0.0,), (0.1,), x_tol=0.0)
    with pytest.raises(ValueError):
        nelder_mead(lambda x: np.nan, SimplexConfig((0.0,), (0.1,)))


def test_trace_csv(tmp_path):
    res = nelder_mead(lambda x: float(x[0] ** 2), SimplexConfig((1.0,), (0.5,)))
    path = tmp_path / "trace.csv"
    res.write_trace(path, names=["a"], comments=["config_hash=abc"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1] == "eval,a,objective"
    assert len(lines) == 2 + res.evals


def test_maximize_stays_in_box():
    (alo, ahi), (blo, bhi) = SEARCH_BOX

    def evaluate(a, b):
        # increases toward a corner outside the box; positive everywhere inside
        return 30.0 - (a - 1.0) ** 2 - (b + 5.0) ** 2

    opt = maximize_over_parameters(evaluate, default_config(max_evals=200))
    assert alo <= opt.alpha <= ahi and blo <= opt.beta <= bhi
    assert opt.value >= evaluate(*opt.result.trace[0][0])
    assert opt.value == pytest.approx(evaluate(opt.alpha, opt.beta))


def test_maximize_finds_interior_peak():
    target = (0.05, -0.5)
    opt = maximize_over_parameters(lambda a, b: 1 - ((a - target[0]) / 0.01) ** 2 - (b - target[1]) ** 2,
                                   default_config(max_evals=400))
    assert opt.alpha == pytest.approx(target[0], abs=1e-3)
    assert opt.beta == pytest.approx(target[1], abs=1e-2)


def test_diverged_objective():
    with pytest.raises(OptimizationDivergedError):
        maximize_over_parameters(lambda a, b: 0.0, default_config(max_evals=20))
