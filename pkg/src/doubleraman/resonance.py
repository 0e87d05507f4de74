"""Resonance conditions, light-shift corrections and pulse-area calibration.

A resonance is stored as the offset of the laser frequency difference from
the internal splitting, ``Delta omega = omega_eg + offset * omega_K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate

from .core import Direction, ProcessKind, PulseSpec, RamanError

# Box-pulse third-order analytics from the method of averaging.
ALPHA_BOX = math.sqrt(2.0) / 32.0
BETA_BOX = -9.0 / 16.0


class NoSolutionError(RamanError):
    pass


@dataclass(frozen=True)
class ResonanceSetting:
    offset: float
    delta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.offset) or not math.isfinite(self.delta):
            raise ValueError("resonance offset must be finite")


def first_order_resonance() -> ResonanceSetting:
    return ResonanceSetting(1.0, 0.0)


def doppler_box_delta(n0, direction, amplitude):
    """Differential two-photon light shift of a Doppler-detuned box pulse.

    ``amplitude`` is Omega_0 / omega_K.  The sign is negative for
    ``|g, n0> -> |e, n0+1>`` and positive for ``|e, n0> -> |g, n0+1>``.
    """
    if n0 < 1:
        raise ValueError("n0 must be >= 1; the shift is singular at n0 = 0")
    magnitude = amplitude**2 * (2 * n0 + 1) / (4.0 * n0 * (n0 + 1))
    direction = Direction(direction)
    return magnitude if direction is Direction.EXCITED_TO_GROUND else -magnitude


def doppler_resonance(n0, direction, delta) -> ResonanceSetting:
    """Resonance for the single transition starting at momentum n0.

    ``e -> g`` gives ``-(2 n0 + 1) + delta``, ``g -> e`` gives ``2 n0 + 1 + delta``.
    """
    base = 2 * n0 + 1
    if Direction(direction) is Direction.EXCITED_TO_GROUND:
        base = -base
    return ResonanceSetting(base + delta, delta)


def third_order_resonance(beta, amplitude) -> ResonanceSetting:
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    delta = beta * amplitude**2
    return ResonanceSetting(9.0 + delta, delta)


def resonance_for(pulse: PulseSpec) -> ResonanceSetting:
    """Resonance setting implied by a pulse's process, order and delta."""
    if pulse.process is ProcessKind.DOPPLER_SINGLE:
        return doppler_resonance(pulse.n0, pulse.direction, pulse.delta)
    return ResonanceSetting(pulse.order**2 + pulse.delta, pulse.delta)


# ---------------------------------------------------------------------------
# Pulse area
# ---------------------------------------------------------------------------


def _envelope_integral(shape, power):
    lo, hi = shape.t_span
    if shape.kind == "box":
        return hi - lo
    value, _ = integrate.quad(lambda t: float(shape.envelope(t)) ** power, lo, hi,
                              epsabs=0.0, epsrel=1e-13, limit=200)
    return value


def pulse_area(shape, order, amplitude, alpha=None, process=ProcessKind.DOUBLE_REST):
    """Area of a pulse with peak coupling ``amplitude`` (units of omega_K).

    Order 1 double diffraction uses ``A = int sqrt(2) Omega dt``; single
    (Doppler-detuned) diffraction the rotation-angle convention
    ``A = int 2 Omega dt``; order 3 uses ``A = int alpha Omega^3 dt``.
    """
    process = ProcessKind(process)
    if order == 1:
        factor = 2.0 if process is ProcessKind.DOPPLER_SINGLE else math.sqrt(2.0)
        return factor * amplitude * _envelope_integral(shape, 1)
    if order == 3:
        if alpha is None or not alpha > 0:
            raise ValueError("third-order area needs alpha > 0")
        return alpha * amplitude**3 * _envelope_integral(shape, 3)
    raise ValueError(f"no area convention for order {order}")


def amplitude_for_area(shape, order, target_area, alpha=None, process=ProcessKind.DOUBLE_REST):
    """Peak coupling Omega_0 / omega_K that gives ``target_area``."""
    if not target_area > 0:
        raise NoSolutionError("pulse area must be positive")
    unit = pulse_area(shape, order, 1.0, alpha, process)
    if order == 1:
        return target_area / unit
    return (target_area / unit) ** (1.0 / 3.0)
