"""Method of averaging for third-order double diffraction with box pulses.

For a box pulse on the third-order resonance (offset 9, atom at rest) the
coupled equations of one sublattice read

    dc/dt = i Omega_0 sum_nu exp(2 i nu t) H_nu c

on the interleaved basis (..., e_{n-1}, g_n, e_{n+1}, ...) with g at even and
e at odd n.  Averaging out the oscillating terms order by order gives a
time-independent generator ``G`` with ``dc/dt = i G c``.  Restricted to
(e_{-3}, g_0, e_{+3}) it yields a three-level system with a resonant coupling
of order Omega_0^3 and light shifts of order Omega_0^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import AmplitudeLadder, BoxShape, PulseSpec, RamanError, make_rb87
from .dynamics import CoupledSystem, propagate_box
from .resonance import ALPHA_BOX, BETA_BOX, amplitude_for_area

DEFAULT_N_MAX = 7
TARGET_ORDERS = (-3, 0, 3)


class TruncationError(RamanError):
    pass


@dataclass(frozen=True)
class FourierCoupling:
    """Fourier component ``H_nu`` of the coupling on the interleaved basis."""

    nu: int
    matrix: np.ndarray
    n_max: int

    @property
    def orders(self):
        return np.arange(-self.n_max, self.n_max + 1)


def state_label(n):
    return f"{'g' if n % 2 == 0 else 'e'}{n:+d}"


def _index(n, n_max):
    return n + n_max


def build_coupling(nu, n_max=DEFAULT_N_MAX) -> FourierCoupling:
    """0/1 matrix of the couplings oscillating as ``exp(2 i nu t)``.

    Ground rows g_n couple to e_{n+1} with nu = 4 - n and to e_{n-1} with
    nu = 4 + n; excited rows e_n couple to g_{n+1} with nu = -(n + 5) and to
    g_{n-1} with nu = n - 5.
    """
    if n_max < 5:
        raise ValueError("n_max must be at least 5")
    size = 2 * n_max + 1
    mat = np.zeros((size, size))
    for n in range(-n_max, n_max + 1):
        row = _index(n, n_max)
        if n % 2 == 0:
            up, down = 4 - n, 4 + n
        else:
            up, down = -(n + 5), n - 5
        if n + 1 <= n_max and nu == up:
            mat[row, row + 1] = 1.0
        if n - 1 >= -n_max and nu == down:
            mat[row, row - 1] = 1.0
    return FourierCoupling(int(nu), mat, n_max)


def max_frequency(n_max):
    """Largest |nu| with a nonzero ``H_nu`` on the truncated ladder."""
    return n_max + 5


def _couplings(n_max, nu_max):
    return {nu: build_coupling(nu, n_max).matrix for nu in range(-nu_max, nu_max + 1)}


def _commutator(a, b):
    return a @ b - b @ a


def _generator_term(order, amplitude, n_max, nu_max):
    h = _couplings(n_max, nu_max)
    zero = np.zeros_like(h[0])
    if order == 1:
        return amplitude * h[0]
    if order == 2:
        total = zero.copy()
        for nu in range(-nu_max, nu_max + 1):
            if nu != 0:
                total += h[-nu] @ h[nu] / (2.0 * nu)
        return amplitude**2 * total
    if order == 3:
        first = zero.copy()
        for nu in range(-nu_max, nu_max + 1):
            for sigma in range(-nu_max, nu_max + 1):
                if nu == 0 or sigma == 0 or nu + sigma == 0 or abs(nu + sigma) > nu_max:
                    continue
                inner = _commutator(h[nu], h[sigma])
                first += _commutator(h[-nu - sigma], inner) / (nu * (nu + sigma))
        second = zero.copy()
        for mu in range(-nu_max, nu_max + 1):
            if mu != 0:
                second += _commutator(h[mu], _commutator(h[-mu], h[0])) / mu**2
        return amplitude**3 * (-first / 12.0 - second / 8.0)
    raise ValueError("order must be 1, 2 or 3")


def target_block(matrix, n_max=DEFAULT_N_MAX):
    idx = [_index(n, n_max) for n in TARGET_ORDERS]
    return matrix[np.ix_(idx, idx)]


def averaged_generator(order, amplitude, n_max=DEFAULT_N_MAX, nu_max=None):
    """Contribution of the given averaging order to ``G``.

    ``nu_max`` defaults to the largest frequency present on the ladder.  A
    :class:`TruncationError` is raised if adding one more frequency changes
    the (e_{-3}, g_0, e_{+3}) block by more than 1e-12.
    """
    nu_max = max_frequency(n_max) if nu_max is None else int(nu_max)
    if nu_max < 5:
        raise ValueError("nu_max must be at least 5")
    term = _generator_term(order, amplitude, n_max, nu_max)
    wider = _generator_term(order, amplitude, n_max, nu_max + 1)
    change = np.max(np.abs(target_block(wider - term, n_max)))
    if change > 1e-12:
        raise TruncationError(f"nu_max={nu_max} truncates the order-{order} generator (change {change:.3g})")
    return term


@dataclass(frozen=True)
class EffectiveHamiltonian3:
    """Three-level generator on (e_{-3}, g_0, e_{+3}) in units of omega_K."""

    matrix: np.ndarray
    amplitude: float
    delta: float

    @property
    def coupling(self):
        return float(self.matrix[1, 2].real)

    @property
    def shifts(self):
        """Light shifts (excited, ground) without the detuning delta."""
        return float(self.matrix[2, 2].real - self.delta), float(self.matrix[1, 1].real)

    def evolve(self, duration, initial=(0.0, 1.0, 0.0)):
        """Amplitudes after ``duration`` under ``dc/dt = i G c``."""
        return linalg.expm(1j * self.matrix * duration) @ np.asarray(initial, complex)


def effective_three_level(amplitude, delta, n_max=DEFAULT_N_MAX, nu_max=None) -> EffectiveHamiltonian3:
    total = sum(averaged_generator(k, amplitude, n_max, nu_max) for k in (1, 2, 3))
    block = target_block(total, n_max).astype(complex)
    block[0, 0] += delta
    block[2, 2] += delta
    return EffectiveHamiltonian3(block, float(amplitude), float(delta))


def box_pulse_analytics(amplitude, duration):
    """Detuning and pulse area of a resonant third-order box pulse.

    ``delta = -9/16 Omega_0^2`` equalizes the light-shifted levels and the
    bright-state coupling ``sqrt(2) Omega_0^3 / 32`` gives the area.
    """
    if amplitude < 0 or duration < 0:
        raise ValueError("amplitude and duration must be non-negative")
    return BETA_BOX * amplitude**2, ALPHA_BOX * amplitude**3 * duration


def box_duration_for_area(amplitude, area=math.pi / 2):
    return area / (ALPHA_BOX * amplitude**3)


@dataclass
class CrossValidation:
    amplitude: float
    duration: float
    numeric: tuple
    predicted: tuple
    deviation: float
    tolerance: float

    @property
    def passed(self):
        return self.deviation <= self.tolerance

    def to_dict(self):
        return {
            "amplitude": self.amplitude,
            "duration": self.duration,
            "numeric_populations": list(self.numeric),
            "predicted_populations": list(self.predicted),
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def cross_validate(amplitude, duration=None, tol=0.02, n_max=DEFAULT_N_MAX, atom=None) -> CrossValidation:
    """Compare full box-pulse dynamics from g_0 with the three-level model.

    ``duration`` defaults to the pi/2 area of the box analytics.  The
    deviation is the larger of the |e_{-3}|^2 and |e_{+3}|^2 mismatches.
    """
    if not 0 <= amplitude <= 0.5:
        raise ValueError("cross-validation needs 0 <= Omega_0 <= 0.5")
    if amplitude == 0:
        return CrossValidation(0.0, 0.0 if duration is None else duration, (0.0, 0.0), (0.0, 0.0), 0.0, tol)
    if duration is None:
        duration = box_duration_for_area(amplitude)
    delta, _ = box_pulse_analytics(amplitude, duration)
    shape = BoxShape(duration)
    pulse = PulseSpec(shape, amplitude, order=3, area=ALPHA_BOX * amplitude**3 * duration,
                      delta=delta, alpha=ALPHA_BOX, beta=BETA_BOX)
    system = CoupledSystem.for_quasi(atom or make_rb87(), pulse, 0.0, n_max)
    final = propagate_box(system, AmplitudeLadder.unit(0.0, n_max))
    numeric = (final.population(-3, "e"), final.population(3, "e"))
    amps = effective_three_level(amplitude, delta, n_max).evolve(duration)
    predicted = (float(abs(amps[0]) ** 2), float(abs(amps[2]) ** 2))
    deviation = max(abs(a - b) for a, b in zip(numeric, predicted))
    return CrossValidation(float(amplitude), float(duration), numeric, predicted, float(deviation), tol)


def averaging_report(amplitudes=(0.1, 0.2, 0.3), tol=0.02, n_max=DEFAULT_N_MAX):
    """Analytic versus numeric averaging results over an amplitude ladder."""
    rows = []
    for amp in amplitudes:
        eff = effective_three_level(amp, 0.0, n_max)
        cv = cross_validate(amp, tol=tol, n_max=n_max)
        rows.append({
            "amplitude": amp,
            "numeric_coupling": eff.coupling,
            "analytic_coupling": -amp**3 / 32.0,
            "numeric_shifts": list(eff.shifts),
            "analytic_shifts": [5.0 * amp**2 / 16.0, -amp**2 / 4.0],
            "dynamics": cv.to_dict(),
        })
    coupling_error = max(abs(r["numeric_coupling"] - r["analytic_coupling"]) for r in rows)
    shift_error = max(abs(a - b) for r in rows for a, b in zip(r["numeric_shifts"], r["analytic_shifts"]))
    return {
        "schema": "averaging_report/1",
        "n_max": n_max,
        "nu_max": max_frequency(n_max),
        "alpha_box": ALPHA_BOX,
        "beta_box": BETA_BOX,
        "amplitudes": rows,
        "max_coupling_error": coupling_error,
        "max_shift_error": shift_error,
        "max_dynamics_deviation": max(r["dynamics"]["deviation"] for r in rows),
        "passed": bool(coupling_error <= 1e-12 and shift_error <= 1e-12
                       and all(r["dynamics"]["passed"] for r in rows)),
    }


def write_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
