"""Pulse sequences and the third-order Mach-Zehnder interferometer.

A sequence folds transition kernels over a wave packet, optionally
projecting onto one momentum window and internal state after a pulse (the
numerical stand-in for blow-away pulses).  The interferometer propagates the
upper and lower arms separately and recombines them in the exit port around
zero momentum.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import doppler_box, efficiency, first_order_splitter, third_order_pulse
from .core import MomentumGrid, PulseSpec, RamanError, SpinorWavePacket, gaussian_packet
from .dynamics import DEFAULT_ABS_TOL, DEFAULT_REL_TOL, KernelCache, apply_kernel, occupied_states, packet_support
from .resonance import ResonanceSetting, resonance_for

log = logging.getLogger(__name__)

FRINGE_POINTS = 64
# Where the laser phase of a pulse is referenced: the start of its window or
# the centre of its envelope.  Single-pulse populations do not depend on it;
# interferometer phases do when pulses of different lengths are combined.
PHASE_REFERENCES = ("start", "center")


class DegenerateSignalError(RamanError):
    pass


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    """Keep only momenta in ``[order - 1/2, order + 1/2)`` of one internal state.

    With ``symmetric`` the mirrored window around ``-order`` is kept too.
    """

    order: int
    state: str
    symmetric: bool = False

    def __post_init__(self):
        if self.state not in ("g", "e"):
            raise ValueError("projection state must be 'g' or 'e'")

    def _window(self, p, centre, eps):
        return (p >= centre - 0.5 - eps) & (p < centre + 0.5 - eps)

    def apply(self, packet: SpinorWavePacket) -> SpinorWavePacket:
        p = packet.grid.samples
        eps = 0.25 * packet.grid.spacing
        keep = self._window(p, self.order, eps)
        if self.symmetric and self.order != 0:
            keep |= self._window(p, -self.order, eps)
        zeros = np.zeros(packet.grid.size, complex)
        if self.state == "g":
            return packet.replace(g=np.where(keep, packet.g, 0.0), e=zeros)
        return packet.replace(g=zeros, e=np.where(keep, packet.e, 0.0))


@dataclass(frozen=True)
class SequenceStep:
    pulse: PulseSpec
    projection: Projection | None = None

    @property
    def resonance(self) -> ResonanceSetting:
        return resonance_for(self.pulse)


def _frame_phase(pulse, packet, shift):
    """``exp(i eps shift)`` per sample with the rotating-frame energies
    ``eps = p^2`` (ground) and ``p^2 - offset`` (excited)."""
    p2 = packet.grid.samples**2
    offset = resonance_for(pulse).offset
    return np.exp(1j * p2 * shift), np.exp(1j * (p2 - offset) * shift)


def apply_pulse(atom, pulse, packet, *, cache=None, rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL,
                phase_reference="center"):
    """Apply one pulse to ``packet`` using a kernel restricted to its support.

    Kernels are computed with the coupling phases referenced to the pulse's
    integration window.  ``phase_reference`` moves that reference to the
    window start or to the envelope centre, which conjugates the kernel with
    the diagonal rotating-frame phases.
    """
    if phase_reference not in PHASE_REFERENCES:
        raise ValueError(f"phase_reference must be one of {PHASE_REFERENCES}")
    cache = cache or KernelCache()
    states = occupied_states(packet)
    if not states:
        return packet
    t0, t1 = pulse.t_span
    shift = -t0 if phase_reference == "start" else -0.5 * (t0 + t1)
    if shift != 0.0:
        pg, pe = _frame_phase(pulse, packet, shift)
        packet = packet.replace(g=packet.g / pg, e=packet.e / pe)
    kernel = cache.get(atom, pulse, packet.grid, rel_tol, abs_tol,
                       support=packet_support(packet), states=states)
    out = apply_kernel(kernel, packet)
    if shift != 0.0:
        out = out.replace(g=out.g * pg, e=out.e * pe)
    return out


def run_sequence(atom, packet, steps, *, cache=None, rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL):
    """Fold the pulses of ``steps`` over ``packet``.

    Projections are applied after their pulse without renormalization; the
    discarded norm is a physical loss.
    """
    if not steps:
        raise ValueError("a sequence needs at least one step")
    cache = cache or KernelCache()
    for k, step in enumerate(steps):
        try:
            packet = apply_pulse(atom, step.pulse, packet, cache=cache, rel_tol=rel_tol, abs_tol=abs_tol)
        except RamanError as exc:
            raise type(exc)(f"{exc} [sequence step {k}]") from exc
        if step.projection is not None:
            packet = step.projection.apply(packet)
    return packet


def three_pulse_sequence(atom, splitter_us, box_us, diffracted_only=True):
    """Gaussian first-order splitter followed by the two Doppler-detuned box
    pi pulses ``e(+-1) -> g(+-2)`` and ``g(+-2) -> e(+-3)``.

    With ``diffracted_only`` each pulse acts on the diffracted part of the
    previous one (``e`` at +-1, then ``g`` at +-2); otherwise the undiffracted
    remainders are carried along and interfere in the later pulses.
    """
    first = Projection(1, "e", symmetric=True) if diffracted_only else None
    second = Projection(2, "g", symmetric=True) if diffracted_only else None
    return [
        SequenceStep(first_order_splitter().make_pulse(float(atom.us_to_natural(splitter_us))), first),
        SequenceStep(doppler_box(1, "e->g").make_pulse(float(atom.us_to_natural(box_us))), second),
        SequenceStep(doppler_box(2, "g->e").make_pulse(float(atom.us_to_natural(box_us)))),
    ]


def sequence_efficiency(atom, widths, splitter_us, box_us, *, cache=None, rel_tol=DEFAULT_REL_TOL,
                        abs_tol=DEFAULT_ABS_TOL, steps=None):
    """Population in the +-3 windows after the three-pulse sequence, per width."""
    widths = np.atleast_1d(np.asarray(widths, float))
    steps = steps or three_pulse_sequence(atom, splitter_us, box_us)
    cache = cache or KernelCache()
    grid = MomentumGrid.for_packets(widths, (0.0,), n_max=8)
    out = np.empty(widths.size)
    # widest packet first: its kernels cover the narrower packets' supports
    for j in np.argsort(-widths, kind="stable"):
        w = widths[j]
        final = run_sequence(atom, gaussian_packet(grid, 0.0, w), steps, cache=cache,
                             rel_tol=rel_tol, abs_tol=abs_tol)
        out[j] = efficiency(final, 0, 3)
    return out


def free_evolution(atom, packet: SpinorWavePacket, duration) -> SpinorWavePacket:
    """Free phase ``exp(-i [p^2 + omega_eg (e only)] T)`` in natural units.

    ``duration`` is in seconds.
    """
    if duration < 0:
        raise ValueError("free-evolution time must be non-negative")
    if duration == 0:
        return packet
    t = float(atom.to_natural_time(duration))
    kinetic = np.exp(-1j * np.mod(packet.grid.samples**2 * t, 2 * math.pi))
    internal = np.exp(-1j * math.fmod(atom.splitting * t, 2 * math.pi))
    return packet.replace(g=packet.g * kinetic, e=packet.e * kinetic * internal)


# ---------------------------------------------------------------------------
# Mach-Zehnder signal
# ---------------------------------------------------------------------------


@dataclass
class MzSignal:
    """Fringe ``I(dphi) = A/2 [1 + C cos(dphi + phi0)]`` with its cosine fit."""

    phases: np.ndarray
    intensities: np.ndarray
    amplitude: float
    contrast: float
    phase_offset: float
    residual: float
    metadata: dict = field(default_factory=dict)

    def write_csv(self, path, comments=()):
        with open(path, "w", newline="") as fh:
            fh.writelines(f"# {c}\n" for c in comments)
            writer = csv.writer(fh)
            writer.writerow(["delta_phi_rad", "intensity"])
            for phi, value in zip(self.phases, self.intensities):
                writer.writerow([f"{phi:.12g}", f"{value:.15g}"])

    def summary(self):
        return {
            "schema": "mz_signal/1",
            "amplitude": float(self.amplitude),
            "contrast": float(self.contrast),
            "phase_offset": float(self.phase_offset),
            "fit_residual": float(self.residual),
            "metadata": self.metadata,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def fringe(upper: SpinorWavePacket, lower: SpinorWavePacket, points=FRINGE_POINTS):
    """Exit-port intensity ``int_{-1/2}^{1/2} |psi_up e^{i dphi} + psi_low|^2 dp``.

    Returns the phase grid on ``[0, 2 pi)`` and the intensities.
    """
    if points < 3:
        raise ValueError("need at least three fringe points")
    grid = upper.grid
    p = grid.samples
    eps = 0.25 * grid.spacing
    weight = ((p > -0.5 + eps) & (p < 0.5 - eps)).astype(float)
    weight += 0.5 * (np.abs(np.abs(p) - 0.5) <= eps)
    phases = 2 * math.pi * np.arange(points) / points
    rot = np.exp(1j * phases)[:, None]
    dens = (np.abs(upper.g[None, :] * rot + lower.g[None, :]) ** 2
            + np.abs(upper.e[None, :] * rot + lower.e[None, :]) ** 2)
    return phases, dens @ weight * grid.spacing


def fit_fringe(phases, intensities):
    """Least-squares fit on ``{1, cos, sin}``; returns (A, C, phi0, residual)."""
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    coef, *_ = np.linalg.lstsq(design, intensities, rcond=None)
    c0, c1, c2 = coef
    amplitude = 2.0 * c0
    if amplitude < 1e-9:
        raise DegenerateSignalError(f"signal amplitude {amplitude:.3g} is degenerate")
    swing = math.hypot(c1, c2)
    contrast = swing / c0
    residual = float(np.max(np.abs(design @ coef - intensities)))
    return float(amplitude), float(contrast), math.atan2(-c2, c1), residual


@dataclass(frozen=True)
class MzPulses:
    """Pulses of the interferometer: splitter (used twice) and mirror."""

    splitter: PulseSpec
    mirror: PulseSpec
    recombiner: PulseSpec | None = None

    @property
    def second_splitter(self):
        return self.splitter if self.recombiner is None else self.recombiner


def shared_pulses(atom, duration_us, alpha, beta) -> MzPulses:
    """Splitter and mirror with one duration and one ``(alpha, beta)``; the
    mirror only doubles the area."""
    d = float(atom.us_to_natural(duration_us))
    return MzPulses(third_order_pulse(d, alpha, beta, math.pi / 2),
                    third_order_pulse(d, alpha, beta, math.pi, mirror=True))


def individual_pulses(atom, splitter_us, splitter_params, mirror_us, mirror_params) -> MzPulses:
    """Splitter and mirror with their own durations and ``(alpha, beta)``."""
    bs = third_order_pulse(float(atom.us_to_natural(splitter_us)), *splitter_params, math.pi / 2)
    mirror = third_order_pulse(float(atom.us_to_natural(mirror_us)), *mirror_params, math.pi, mirror=True)
    return MzPulses(bs, mirror)


def mz_arms(atom, packet, pulses: MzPulses, separation_time=0.0, *, order=3, cache=None,
            rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, phase_reference="start"):
    """Final packets of the upper (+order then -order) and lower arms."""
    cache = cache or KernelCache()
    kw = dict(cache=cache, rel_tol=rel_tol, abs_tol=abs_tol, phase_reference=phase_reference)
    split = apply_pulse(atom, pulses.splitter, packet, **kw)
    arms = []
    for sign in (+1, -1):
        psi = Projection(sign * order, "e").apply(split)
        psi = free_evolution(atom, psi, separation_time)
        psi = apply_pulse(atom, pulses.mirror, psi, **kw)
        psi = Projection(-sign * order, "e").apply(psi)
        psi = free_evolution(atom, psi, separation_time)
        arms.append(apply_pulse(atom, pulses.second_splitter, psi, **kw))
    return arms[0], arms[1]


def mach_zehnder(atom, width, pulses: MzPulses, separation_time=0.0, *, grid=None, cache=None,
                 rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, points=FRINGE_POINTS,
                 phase_reference="start") -> MzSignal:
    """Mach-Zehnder fringe for a ground-state packet of ``width`` at rest.

    ``separation_time`` (seconds) is the free evolution between pulses.  By
    default each pulse's laser phase is referenced to the start of its own
    window, so splitter and mirror pulses of different lengths imprint
    momentum-dependent phases that differ between the arms.
    """
    if grid is None:
        grid = MomentumGrid.for_packets([width], (0.0,), n_max=9)
    packet = gaussian_packet(grid, 0.0, width)
    upper, lower = mz_arms(atom, packet, pulses, separation_time, cache=cache,
                           rel_tol=rel_tol, abs_tol=abs_tol, phase_reference=phase_reference)
    phases, intensities = fringe(upper, lower, points)
    amplitude, contrast, phi0, residual = fit_fringe(phases, intensities)
    meta = {"width_hbarK": width, "separation_time_s": separation_time,
            "phase_reference": phase_reference,
            "splitter": pulses.splitter.key(), "mirror": pulses.mirror.key()}
    return MzSignal(phases, intensities, amplitude, contrast, phi0, residual, meta)
