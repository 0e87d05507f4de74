"""Diffraction efficiencies, efficiency maps and optimal pulse durations."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    BoxShape,
    Direction,
    GaussianShape,
    MomentumGrid,
    ProcessKind,
    PulseSpec,
    RamanError,
    SpinorWavePacket,
    WindowError,
    gaussian_packet,
)
from .dynamics import DEFAULT_ABS_TOL, DEFAULT_REL_TOL, KernelCache, apply_kernel, packet_support
from .resonance import amplitude_for_area, doppler_box_delta, third_order_resonance

log = logging.getLogger(__name__)

# Default axes of the efficiency maps.
FIRST_ORDER_DURATIONS_US = (1.0, 60.0)
THIRD_ORDER_DURATIONS_US = (1.0, 40.0)
POINTS_PER_DECADE = 40
DEFAULT_WIDTHS = (0.005, 0.2, 20)
WIDTH_CUT = 0.2
# Ratio between the nominal third-order duration and the width of Omega(t).
THIRD_ORDER_WIDTH_SCALE = 1.0


class EmptySelectionError(RamanError):
    pass


def window_population(packet: SpinorWavePacket, lo, hi):
    """Midpoint-rule population of ``lo <= p <= hi``.

    Samples sitting exactly on a window edge count with weight 1/2, so that
    adjacent unit windows partition the grid.
    """
    grid = packet.grid
    if lo < -grid.half_width - 1e-12 or hi > grid.half_width + 1e-12:
        raise WindowError(f"window [{lo:g}, {hi:g}] exceeds the grid")
    p = grid.samples
    eps = 0.25 * grid.spacing
    weight = ((p > lo + eps) & (p < hi - eps)).astype(float)
    weight += 0.5 * ((np.abs(p - lo) <= eps) | (np.abs(p - hi) <= eps))
    return float(np.sum(weight * packet.density) * grid.spacing)


def efficiency(packet: SpinorWavePacket, n0, n):
    """Population in the two windows ``+-[n0 + n - 1/2, n0 + n + 1/2]``."""
    if n < 0 or n0 < 0:
        raise ValueError("n and n0 must be non-negative")
    centre = n0 + n
    if centre == 0:
        return window_population(packet, -0.5, 0.5)
    return (window_population(packet, centre - 0.5, centre + 0.5)
            + window_population(packet, -centre - 0.5, -centre + 0.5))


def mirror_efficiency(packet: SpinorWavePacket):
    """One-sided population in ``[5/2, 7/2]`` for a mirror starting at -3."""
    return window_population(packet, 2.5, 3.5)


# ---------------------------------------------------------------------------
# Pulse families: everything that varies with the pulse duration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseFamily:
    """A single-pulse experiment parametrized by its duration.

    ``make_pulse`` maps a duration in natural units to a :class:`PulseSpec`
    with the area held fixed; ``center``/``symmetric``/``state`` describe the
    initial packet and ``target`` maps the final packet to an efficiency.
    """

    name: str
    make_pulse: Callable[[float], PulseSpec]
    target: Callable[[SpinorWavePacket], float]
    center: float = 0.0
    symmetric: bool = False
    state: str = "g"
    n_max_hint: int = 3

    def packet(self, grid, width):
        return gaussian_packet(grid, self.center, width, symmetric=self.symmetric, state=self.state)


def first_order_splitter(area=math.pi / 2):
    """Gaussian first-order double-diffraction beam splitter from rest."""

    def make(duration):
        shape = GaussianShape(duration)
        return PulseSpec(shape, amplitude_for_area(shape, 1, area), order=1, area=area)

    return PulseFamily("first_order_bs", make, lambda psi: efficiency(psi, 0, 1), 0.0, False, "g", 5)


def doppler_box(n0, direction):
    """Box pi pulse on the Doppler-detuned single transition starting at n0.

    The initial packet is the symmetric superposition at +-n0 in the internal
    state the transition starts from.
    """
    direction = Direction(direction)

    def make(duration):
        shape = BoxShape(duration)
        amp = amplitude_for_area(shape, 1, math.pi, process=ProcessKind.DOPPLER_SINGLE)
        return PulseSpec(shape, amp, order=1, process=ProcessKind.DOPPLER_SINGLE, area=math.pi,
                         delta=doppler_box_delta(n0, direction, amp), n0=n0, direction=direction)

    state = "g" if direction is Direction.GROUND_TO_EXCITED else "e"
    name = f"doppler_box_{n0}"
    return PulseFamily(name, make, lambda psi: efficiency(psi, n0, 1), float(n0), True, state, n0 + 5)


def third_order_pulse(duration, alpha, beta, area, width_scale=THIRD_ORDER_WIDTH_SCALE, mirror=False):
    """Third-order Gaussian pulse with area calibrated through ``alpha``.

    ``width_scale`` converts the nominal duration into the width of the
    coupling envelope Omega(t).
    """
    shape = GaussianShape(duration * width_scale)
    amp = amplitude_for_area(shape, 3, area, alpha=alpha)
    res = third_order_resonance(beta, amp)
    process = ProcessKind.DOUBLE_MIRROR if mirror else ProcessKind.DOUBLE_REST
    return PulseSpec(shape, amp, order=3, process=process, area=area, delta=res.delta,
                     alpha=alpha, beta=beta)


def third_order_splitter(alpha, beta, width_scale=THIRD_ORDER_WIDTH_SCALE):
    def make(duration):
        return third_order_pulse(duration, alpha, beta, math.pi / 2, width_scale)

    return PulseFamily("third_order_bs", make, lambda psi: efficiency(psi, 0, 3), 0.0, False, "g", 9)


def third_order_mirror(alpha, beta, width_scale=THIRD_ORDER_WIDTH_SCALE):
    def make(duration):
        return third_order_pulse(duration, alpha, beta, math.pi, width_scale, mirror=True)

    return PulseFamily("third_order_mirror", make, mirror_efficiency, -3.0, False, "e", 9)


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------


def duration_axis(lo_us, hi_us, points_per_decade=POINTS_PER_DECADE):
    """Geometric duration grid in microseconds, both ends included."""
    count = int(round(points_per_decade * math.log10(hi_us / lo_us))) + 1
    return np.geomspace(lo_us, hi_us, count)


def width_axis(lo=DEFAULT_WIDTHS[0], hi=DEFAULT_WIDTHS[1], count=DEFAULT_WIDTHS[2]):
    return np.linspace(lo, hi, count)


@dataclass
class EfficiencyMap:
    """Efficiencies on a (duration, width) grid; ``values[i, j]`` belongs to
    ``durations[i]`` (seconds) and ``widths[j]`` (hbar*K)."""

    durations: np.ndarray
    widths: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.durations = np.asarray(self.durations, float)
        self.widths = np.asarray(self.widths, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.durations.size, self.widths.size):
            raise ValueError("map values do not match its axes")

    @property
    def durations_us(self):
        return self.durations * 1e6

    def column(self, width):
        j = int(np.argmin(np.abs(self.widths - width)))
        return self.values[:, j]

    def write_csv(self, path, comments=()):
        """Write the map; ``comments`` become leading ``# `` lines."""
        with open(path, "w", newline="") as fh:
            fh.writelines(f"# {c}\n" for c in comments)
            writer = csv.writer(fh)
            writer.writerow(["duration_us", "width_hbarK", "efficiency"])
            for i, d in enumerate(self.durations_us):
                for j, w in enumerate(self.widths):
                    writer.writerow([f"{d:.10g}", f"{w:.10g}", f"{self.values[i, j]:.12g}"])

    def to_json(self):
        return {
            "schema": "efficiency_map/1",
            "durations_us": [float(f"{d:.10g}") for d in self.durations_us],
            "widths_hbarK": [float(f"{w:.10g}") for w in self.widths],
            "metadata": self.metadata,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def evaluate_family(atom, family: PulseFamily, duration_us, widths, *, cache=None,
                    rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, grid=None):
    """Efficiencies of one pulse duration for several packet widths.

    One kernel, computed on the union of the packets' supports, serves all
    widths.
    """
    widths = np.atleast_1d(np.asarray(widths, float))
    cache = cache or KernelCache()
    if grid is None:
        grid = MomentumGrid.for_packets(widths, (family.center,), n_max=family.n_max_hint)
    packets = [family.packet(grid, w) for w in widths]
    support = np.unique(np.concatenate([packet_support(p) for p in packets]))
    pulse = family.make_pulse(float(atom.us_to_natural(duration_us)))
    kernel = cache.get(atom, pulse, grid, rel_tol, abs_tol, support=support, states=(family.state,))
    return np.array([family.target(apply_kernel(kernel, p)) for p in packets])


def efficiency_map(atom, family: PulseFamily, durations_us, widths, *, cache=None,
                   rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, progress=None) -> EfficiencyMap:
    """Efficiency of ``family`` over ``durations_us`` x ``widths``.

    The pulse area is held fixed: the amplitude is recalibrated for every
    duration.  One kernel per duration is shared by the whole width sweep.
    """
    durations_us = np.asarray(durations_us, float)
    widths = np.asarray(widths, float)
    if durations_us.size == 0 or widths.size == 0:
        raise ValueError("efficiency map axes must be nonempty")
    cache = cache or KernelCache()
    grid = MomentumGrid.for_packets(widths, (family.center,), n_max=family.n_max_hint)
    values = np.empty((durations_us.size, widths.size))
    for i, d in enumerate(durations_us):
        try:
            values[i] = evaluate_family(atom, family, d, widths, cache=cache, rel_tol=rel_tol,
                                        abs_tol=abs_tol, grid=grid)
        except RamanError as exc:
            raise type(exc)(f"{exc} [map cell duration={d:g} us]") from exc
        if progress is not None:
            progress(i, d, values[i])
    meta = {"family": family.name, "rel_tol": rel_tol, "abs_tol": abs_tol,
            "grid": [grid.per_unit, grid.half_count], "atom": atom.name}
    return EfficiencyMap(durations_us * 1e-6, widths, values, meta)


def optimal_duration(emap: EfficiencyMap, width_cut=WIDTH_CUT):
    """Median over widths <= ``width_cut`` of the duration of maximal efficiency.

    Ties break toward the shortest duration; an even count takes the lower
    median.  Returns seconds.
    """
    cols = np.flatnonzero(emap.widths <= width_cut + 1e-12)
    if cols.size == 0:
        raise EmptySelectionError(f"no widths <= {width_cut:g} in the map")
    best = np.sort(emap.durations[np.argmax(emap.values[:, cols], axis=0)])
    return float(best[(best.size - 1) // 2])
