"""Derivative-free optimization of third-order pulse parameters.

The third-order pulses are parametrized by ``alpha`` (area calibration,
``A = int alpha Omega^3 dt``) and ``beta`` (light-shift compensation,
``delta = beta Omega_0^2``).  Both are tuned with a plain Nelder-Mead simplex
seeded at the box-pulse values from the method of averaging.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    THIRD_ORDER_WIDTH_SCALE,
    EfficiencyMap,
    evaluate_family,
    third_order_mirror,
    third_order_pulse,
    third_order_splitter,
)
from .core import MomentumGrid, RamanError
from .dynamics import DEFAULT_ABS_TOL, DEFAULT_REL_TOL, KernelCache
from .interferometer import DegenerateSignalError, mach_zehnder, shared_pulses
from .resonance import ALPHA_BOX, BETA_BOX

log = logging.getLogger(__name__)


class OptimizationDivergedError(RamanError):
    pass


@dataclass(frozen=True)
class SimplexConfig:
    initial_point: tuple
    initial_step: tuple
    x_tol: float = 1e-4
    f_tol: float = 1e-6
    max_evals: int = 400

    def __post_init__(self):
        if len(self.initial_point) != len(self.initial_step):
            raise ValueError("initial point and step differ in dimension")
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    evals: int
    converged: bool
    budget_exhausted: bool
    trace: list = field(default_factory=list)

    def write_trace(self, path, names=None, comments=()):
        names = names or [f"x{i}" for i in range(len(self.x))]
        with open(path, "w", newline="") as fh:
            fh.writelines(f"# {c}\n" for c in comments)
            writer = csv.writer(fh)
            writer.writerow(["eval", *names, "objective"])
            for k, (x, f) in enumerate(self.trace):
                writer.writerow([k, *(f"{v:.12g}" for v in x), f"{f:.12g}"])


def nelder_mead(objective, config: SimplexConfig) -> SimplexResult:
    """Minimize ``objective`` with the reflect/expand/contract/shrink simplex.

    Coefficients are 1, 2, 1/2, 1/2.  Stops when the simplex diameter drops
    below ``x_tol``, the spread of vertex values below ``f_tol``, or the
    evaluation budget is spent (flagged, best point still returned).
    """
    trace = []
    best = [None, math.inf]

    def f(x):
        x = np.array(x, float)
        value = float(objective(x))
        trace.append((x.copy(), value))
        if value < best[1]:
            best[0], best[1] = x.copy(), value
        return value

    x0 = np.asarray(config.initial_point, float)
    dim = x0.size
    simplex = [x0]
    values = [f(x0)]
    if not math.isfinite(values[0]):
        raise ValueError("objective is not finite at the initial point")
    for i in range(dim):
        if len(trace) >= config.max_evals:
            break
        vertex = x0.copy()
        vertex[i] += config.initial_step[i]
        simplex.append(vertex)
        values.append(f(vertex))

    converged = False
    while len(simplex) == dim + 1:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        diameter = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if diameter < config.x_tol or values[-1] - values[0] < config.f_tol:
            converged = True
            break
        if len(trace) >= config.max_evals:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < values[0]:
            if len(trace) >= config.max_evals:
                simplex[-1], values[-1] = xr, fr
                continue
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if len(trace) >= config.max_evals:
            break
        if fr < values[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        for i in range(1, dim + 1):
            if len(trace) >= config.max_evals:
                break
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            values[i] = f(simplex[i])

    return SimplexResult(best[0], best[1], len(trace), converged, not converged, trace)


# ---------------------------------------------------------------------------
# Pulse-parameter optimization
# ---------------------------------------------------------------------------

SEED = (ALPHA_BOX, BETA_BOX)
STEP_FRACTION = 0.3
# Search region around the seed: alpha in [a0/2, 2 a0], beta in [2 b0, b0/2].
# Outside it the objective is zero, which keeps the local search on the
# branch connected to the box-pulse analytics.
SEARCH_BOX = ((0.5 * ALPHA_BOX, 2.0 * ALPHA_BOX), (2.0 * BETA_BOX, 0.5 * BETA_BOX))


def default_config(seed=SEED, max_evals=400):
    return SimplexConfig(tuple(seed), tuple(STEP_FRACTION * s for s in seed), 1e-4, 1e-6, max_evals)


@dataclass
class ParameterOptimum:
    alpha: float
    beta: float
    value: float
    result: SimplexResult


def _round_key(x):
    return tuple(round(float(v), 10) for v in x)


def _inside(x, bounds):
    if bounds is None:
        return x[0] > 0
    return all(lo <= v <= hi for v, (lo, hi) in zip(x, bounds))


def maximize_over_parameters(evaluate, config=None, bounds=SEARCH_BOX):
    """Maximize ``evaluate(alpha, beta)`` inside ``bounds``.

    Points outside ``bounds`` (or with alpha <= 0 when ``bounds`` is None)
    score zero.  Evaluations are memoized on parameters rounded to 1e-10.
    """
    config = config or default_config()
    memo = {}

    def objective(x):
        key = _round_key(x)
        if key not in memo:
            memo[key] = -evaluate(key[0], key[1]) if _inside(key, bounds) else 0.0
        return memo[key]

    result = nelder_mead(objective, config)
    if all(-v <= 1e-6 for _, v in result.trace):
        raise OptimizationDivergedError("every evaluation gave an efficiency <= 1e-6")
    return ParameterOptimum(float(result.x[0]), float(result.x[1]), -result.fun, result)


class Target(str, enum.Enum):
    BEAM_SPLITTER = "bs"
    MIRROR = "mirror"


def third_order_objective(atom, duration_us, width, target=Target.BEAM_SPLITTER, *, cache=None,
                          rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL,
                          width_scale=THIRD_ORDER_WIDTH_SCALE):
    """Efficiency as a function of ``(alpha, beta)`` for one map cell."""
    target = Target(target)
    cache = cache or KernelCache()
    make = third_order_mirror if target is Target.MIRROR else third_order_splitter
    grid = MomentumGrid.for_packets([width], (make(SEED[0], SEED[1]).center,),
                                    n_max=make(SEED[0], SEED[1]).n_max_hint)

    def evaluate(alpha, beta):
        family = make(alpha, beta, width_scale)
        return float(evaluate_family(atom, family, duration_us, [width], cache=cache,
                                     rel_tol=rel_tol, abs_tol=abs_tol, grid=grid)[0])

    return evaluate


def optimize_third_order(atom, duration_us, width, target=Target.BEAM_SPLITTER, *, cache=None,
                         rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, config=None,
                         width_scale=THIRD_ORDER_WIDTH_SCALE, bounds=SEARCH_BOX) -> ParameterOptimum:
    """Best ``(alpha, beta)`` for a third-order splitter or mirror.

    The amplitude is recalibrated from ``alpha`` and the target area (pi/2
    for the splitter, pi for the mirror) at every evaluation.
    """
    if not (duration_us > 0 and width > 0):
        raise ValueError("duration and width must be positive")
    evaluate = third_order_objective(atom, duration_us, width, target, cache=cache,
                                     rel_tol=rel_tol, abs_tol=abs_tol, width_scale=width_scale)
    return maximize_over_parameters(evaluate, config, bounds)


def _optimize_cell(args):
    atom, d, w, target, rel_tol, abs_tol, config, width_scale = args
    return optimize_third_order(atom, d, w, target, rel_tol=rel_tol, abs_tol=abs_tol,
                                config=config, width_scale=width_scale)


def optimized_map(atom, target, durations_us, widths, *, rel_tol=DEFAULT_REL_TOL,
                  abs_tol=DEFAULT_ABS_TOL, config=None, width_scale=THIRD_ORDER_WIDTH_SCALE,
                  progress=None, jobs=1):
    """Efficiency map with ``(alpha, beta)`` optimized in every cell.

    Cells are independent, so with ``jobs > 1`` they are distributed over a
    process pool; the result does not depend on ``jobs``.  Returns the map
    together with the ``alpha`` and ``beta`` matrices.
    """
    durations_us = np.asarray(durations_us, float)
    widths = np.asarray(widths, float)
    if durations_us.size == 0 or widths.size == 0:
        raise ValueError("map axes must be nonempty")
    target = Target(target)
    cells = [(i, j) for i in range(durations_us.size) for j in range(widths.size)]
    tasks = [(atom, float(durations_us[i]), float(widths[j]), target, rel_tol, abs_tol, config,
              width_scale) for i, j in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_optimize_cell, tasks)
            optima = _collect(cells, results, progress)
    else:
        optima = _collect(cells, map(_optimize_cell, tasks), progress)
    values = np.empty((durations_us.size, widths.size))
    alphas, betas = values.copy(), values.copy()
    for (i, j), opt in zip(cells, optima):
        values[i, j], alphas[i, j], betas[i, j] = opt.value, opt.alpha, opt.beta
    meta = {"family": f"third_order_{target.value}_optimized", "rel_tol": rel_tol,
            "abs_tol": abs_tol, "atom": atom.name, "width_scale": width_scale}
    return EfficiencyMap(durations_us * 1e-6, widths, values, meta), alphas, betas


def _collect(cells, results, progress):
    optima = []
    for (i, j), opt in zip(cells, results):
        optima.append(opt)
        if progress is not None:
            progress(i, j, opt)
    return optima


def optimize_interferometer(atom, duration_us, width, *, separation_time=0.0, cache=None,
                            rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, config=None,
                            bounds=SEARCH_BOX) -> ParameterOptimum:
    """Maximize the fringe amplitude with one ``(alpha, beta)`` for both
    splitters and the mirror (same duration, mirror area doubled)."""
    if not (duration_us > 0 and width > 0):
        raise ValueError("duration and width must be positive")
    cache = cache or KernelCache()
    grid = MomentumGrid.for_packets([width], (0.0,), n_max=9)

    def evaluate(alpha, beta):
        pulses = shared_pulses(atom, duration_us, alpha, beta)
        try:
            signal = mach_zehnder(atom, width, pulses, separation_time, grid=grid, cache=cache,
                                  rel_tol=rel_tol, abs_tol=abs_tol)
        except DegenerateSignalError:
            return 0.0
        return signal.amplitude

    return maximize_over_parameters(evaluate, config, bounds)
