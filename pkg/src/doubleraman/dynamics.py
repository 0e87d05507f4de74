"""Coupled amplitude equations for double Raman diffraction.

A quasi-momentum ``q`` couples the ground and excited amplitudes on the ladder
of momenta ``q + n`` (units of hbar*K).  In the interaction picture with the
laser phases set to zero, every amplitude ``c_j`` couples to its two
neighbours through

    dc_j/dt = i Omega(t) sum_{k = j +- 1} exp(-i (eps_k - eps_j) t) c_k,

with ``eps_j = (q + j)^2 - offset * [j excited]`` in units of omega_K and
``offset = (Delta omega - omega_eg) / omega_K``.  Because g_n only couples to
e_{n+-1}, the ladder splits into two independent sublattices; the fast
integrator works sublattice by sublattice.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .core import (
    AmplitudeLadder,
    AtomSpecies,
    GridMismatchError,
    GridTooNarrowError,
    MomentumGrid,
    ProcessKind,
    PulseSpec,
    RamanError,
    SpinorWavePacket,
)
from . import _rk
from .resonance import resonance_for

log = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-3
DEFAULT_ABS_TOL = 1e-6
CHUNK_SAMPLES = 256


class StepUnderflowError(RamanError):
    pass


class KernelError(RamanError):
    """Integration failure with the offending quasi-momentum attached."""

    def __init__(self, message, quasi=None):
        super().__init__(message)
        self.quasi = quasi


@dataclass(frozen=True)
class CoupledSystem:
    """One ladder of the coupled equations.

    ``offset`` is the resonance offset of the laser frequency difference and
    ``doppler`` the Doppler frequency ``omega_D = 2 q``; both in units of
    omega_K.  The AC Stark shift is fixed at zero.
    """

    atom: AtomSpecies
    pulse: PulseSpec
    offset: float
    doppler: float
    n_max: int
    ac_stark: float = 0.0

    def __post_init__(self):
        if self.n_max < self.pulse.order + 2:
            raise ValueError("n_max must be at least order + 2")
        if self.ac_stark != 0.0:
            raise ValueError("AC Stark shifts are not modelled")

    @classmethod
    def for_quasi(cls, atom, pulse, quasi, n_max):
        return cls(atom, pulse, resonance_for(pulse).offset, 2.0 * quasi, n_max)

    @property
    def quasi(self):
        return 0.5 * self.doppler


# ---------------------------------------------------------------------------
# Reference generator on the full ladder (direct transcription of the
# general equations; used by ``rhs`` and the brute-force oracle)
# ---------------------------------------------------------------------------


def _full_generator(system: CoupledSystem, t):
    """Matrix M(t) with d/dt [g; e] = M(t) [g; e] on the full ladder."""
    n_max = system.n_max
    size = 2 * n_max + 1
    om = float(system.pulse.rabi(t))
    wd, off = system.doppler, system.offset
    mat = np.zeros((2 * size, 2 * size), complex)
    for n in range(-n_max, n_max + 1):
        gi = n + n_max
        # dg_n/dt <- e_{n+1}, e_{n-1}
        if n + 1 <= n_max:
            phase = wd - off + (1 + 2 * n)
            mat[gi, size + gi + 1] = 1j * om * np.exp(-1j * phase * t)
        if n - 1 >= -n_max:
            phase = -wd - off + (1 - 2 * n)
            mat[gi, size + gi - 1] = 1j * om * np.exp(-1j * phase * t)
        # de_{n+1}/dt <- g_{n+2}, g_n
        if -n_max <= n + 1 <= n_max:
            ei = size + gi + 1
            if n + 2 <= n_max:
                phase = wd + off + (3 + 2 * n)
                mat[ei, gi + 2] = 1j * om * np.exp(-1j * phase * t)
            phase = -wd + off - (1 + 2 * n)
            mat[ei, gi] = 1j * om * np.exp(-1j * phase * t)
    # e_{-n_max} <- g_{-n_max+1} is not reached by the loop above
    n = -n_max - 1
    ei = size
    phase = wd + off + (3 + 2 * n)
    mat[ei, 1] = 1j * om * np.exp(-1j * phase * t)
    return mat


def rhs(system: CoupledSystem, t, state: AmplitudeLadder) -> AmplitudeLadder:
    """Time derivative of a ladder; couplings beyond ``n_max`` are dropped."""
    if state.n_max != system.n_max:
        raise ValueError("ladder truncation does not match the system")
    vec = np.concatenate([state.g, state.e])
    out = _full_generator(system, t) @ vec
    size = 2 * system.n_max + 1
    return AmplitudeLadder(state.quasi, state.n_max, out[:size], out[size:])


def brute_force_propagate(system: CoupledSystem, initial: AmplitudeLadder, n_steps) -> AmplitudeLadder:
    """Independent oracle: exact exponentials of the midpoint generator.

    The pulse window is split into ``n_steps`` uniform steps; on each the
    generator is frozen at the step midpoint and exponentiated through its
    Hermitian eigen-decomposition, so every step is exactly unitary.
    """
    if n_steps < 10_000:
        raise ValueError("brute-force propagation needs at least 1e4 steps")
    t0, t1 = system.pulse.t_span
    h = (t1 - t0) / n_steps
    vec = np.concatenate([initial.g, initial.e]).astype(complex)
    for k in range(n_steps):
        herm = _full_generator(system, t0 + (k + 0.5) * h) / 1j
        herm = 0.5 * (herm + herm.conj().T)
        lam, vecs = np.linalg.eigh(herm)
        vec = vecs @ (np.exp(1j * h * lam) * (vecs.conj().T @ vec))
    size = 2 * system.n_max + 1
    return AmplitudeLadder(initial.quasi, initial.n_max, vec[:size], vec[size:])


# ---------------------------------------------------------------------------
# Fast sublattice integrator (compiled Dormand-Prince 5(4), see ``_rk``)
# ---------------------------------------------------------------------------


@dataclass
class IntegrationStats:
    steps: int = 0
    rejected: int = 0
    min_step: float = math.inf
    norm_drift: float = 0.0


def _shape_args(pulse):
    if pulse.shape.kind == "gaussian":
        return _rk.SHAPE_GAUSSIAN, float(pulse.shape.width)
    if pulse.shape.kind == "box":
        return _rk.SHAPE_BOX, 0.0
    raise ValueError(f"unsupported pulse shape {pulse.shape.kind!r}")


def _max_frequency(offset, n_max, quasi):
    """Largest link frequency of each row (``quasi`` may be an array)."""
    return 2 * n_max + 1 + abs(offset) + 2 * np.abs(quasi)


def _initial_step(pulse, max_frequency):
    t0, t1 = pulse.t_span
    rate = np.maximum(max_frequency + 2.0 * pulse.amplitude, 1e-12)
    return np.minimum((t1 - t0) / 20.0, 0.2 / rate)


def integrate_rows(pulse, offset, n_max, quasi, parity, rows0, rel_tol, abs_tol):
    """Integrate a batch of sublattice rows over the pulse window."""
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    rows0 = np.asarray(rows0, complex)
    if pulse.amplitude == 0.0:
        return rows0.copy(), IntegrationStats()
    quasi = np.ascontiguousarray(quasi, dtype=float)
    parity = np.ascontiguousarray(parity, dtype=np.int64)
    kind, width = _shape_args(pulse)
    t0, t1 = (float(t) for t in pulse.t_span)
    # per-row first step: a row's result must not depend on its batch
    h0 = np.ascontiguousarray(_initial_step(pulse, _max_frequency(offset, n_max, quasi)), dtype=float)
    y, steps, rejected, min_step, status = _rk.integrate_batch(
        np.ascontiguousarray(rows0), parity, quasi, -n_max, float(offset), kind,
        float(pulse.amplitude), width, t0, t1, float(rel_tol), float(abs_tol), h0)
    if status != _rk.STATUS_OK:
        raise StepUnderflowError("step size fell below 1e-6 of the pulse window")
    stats = IntegrationStats(int(steps), int(rejected), float(min_step))
    n0 = np.sum(np.abs(rows0) ** 2, axis=1)
    n1 = np.sum(np.abs(y) ** 2, axis=1)
    stats.norm_drift = float(np.max(np.abs(n1 - n0), initial=0.0))
    return y, stats


def _ladder_to_rows(ladder):
    """Split a ladder into its two sublattices (parity 0 holds g at even n)."""
    n = ladder.orders
    rows = np.zeros((2, n.size), complex)
    even = n % 2 == 0
    rows[0] = np.where(even, ladder.g, ladder.e)
    rows[1] = np.where(even, ladder.e, ladder.g)
    return rows


def _rows_to_ladder(rows, quasi, n_max):
    n = np.arange(-n_max, n_max + 1)
    even = n % 2 == 0
    g = np.where(even, rows[0], rows[1])
    e = np.where(even, rows[1], rows[0])
    return AmplitudeLadder(quasi, n_max, g, e)


def integrate_pulse(system: CoupledSystem, initial: AmplitudeLadder,
                    rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL) -> AmplitudeLadder:
    """Propagate one ladder through the pulse with adaptive RK 5(4).

    The returned ladder carries ``info`` with the step statistics and the
    norm drift.  Raises :class:`StepUnderflowError` when the step size
    collapses below 1e-6 of the pulse window.
    """
    if initial.n_max != system.n_max:
        raise ValueError("ladder truncation does not match the system")
    rows = _ladder_to_rows(initial)
    out, stats = integrate_rows(system.pulse, system.offset, system.n_max,
                                [system.quasi] * 2, [0, 1], rows, rel_tol, abs_tol)
    ladder = _rows_to_ladder(out, initial.quasi, system.n_max)
    ladder.info = {
        "steps": stats.steps,
        "rejected": stats.rejected,
        "norm_drift": abs(ladder.norm - initial.norm),
    }
    return ladder


def ladder_energies(system: CoupledSystem):
    """Rotating-frame energies ``eps`` of the full ladder, ordered ``[g; e]``."""
    p2 = (np.arange(-system.n_max, system.n_max + 1) + system.quasi) ** 2
    return np.concatenate([p2, p2 - system.offset])


def propagate_box(system: CoupledSystem, initial: AmplitudeLadder) -> AmplitudeLadder:
    """Exact propagation through a box pulse.

    With ``a_j = exp(-i eps_j t) c_j`` the equations become time independent,
    ``da/dt = i (Omega_0 C - diag(eps)) a`` with ``C`` the nearest-neighbour
    coupling pattern, and one matrix exponential covers the whole pulse.
    Used for long pulses where stepping through the fast phases is wasteful.
    """
    if system.pulse.shape.kind != "box":
        raise ValueError("propagate_box needs a box-shaped pulse")
    if initial.n_max != system.n_max:
        raise ValueError("ladder truncation does not match the system")
    t0, t1 = system.pulse.t_span
    eps = ladder_energies(system)
    # coupling pattern: generator at t = 0 with unit Rabi frequency
    unit = CoupledSystem(system.atom, _with_amplitude(system.pulse, 1.0), system.offset,
                         system.doppler, system.n_max)
    pattern = (_full_generator(unit, t0) / 1j) * np.exp(-1j * np.subtract.outer(eps, eps) * t0)
    gen = 1j * (system.pulse.amplitude * pattern - np.diag(eps))
    vec = np.concatenate([initial.g, initial.e]).astype(complex)
    vec = np.exp(-1j * eps * t0) * vec
    vec = linalg.expm(gen * (t1 - t0)) @ vec
    vec = np.exp(1j * eps * t1) * vec
    size = 2 * system.n_max + 1
    return AmplitudeLadder(initial.quasi, initial.n_max, vec[:size], vec[size:])


def _with_amplitude(pulse: PulseSpec, amplitude):
    return PulseSpec(pulse.shape, amplitude, pulse.order, pulse.process, pulse.area,
                     pulse.delta if pulse.order != 3 else pulse.beta * amplitude**2,
                     pulse.alpha, pulse.beta, pulse.n0, pulse.direction)


# ---------------------------------------------------------------------------
# Transition kernel
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TransitionKernel:
    """Final ladders for every computed grid sample and initial internal state.

    ``indices`` are grid indices of the computed samples.  ``from_g[i]`` is the
    sublattice row reached from ``|g, p_i>`` and ``from_e[i]`` from
    ``|e, p_i>``; row entry ``j`` sits at momentum ``q_i + j - n_max``.  Rows
    that were not requested are NaN.
    """

    pulse: PulseSpec
    grid: MomentumGrid
    n_max: int
    indices: np.ndarray
    from_g: np.ndarray
    from_e: np.ndarray
    rel_tol: float
    abs_tol: float
    meta: dict = field(default_factory=dict)

    @property
    def samples(self):
        return self.grid.samples[self.indices]

    def ladder(self, position, state="g"):
        """Final :class:`AmplitudeLadder` for the ``position``-th computed sample."""
        order, quasi = self.grid.split()
        idx = self.indices[position]
        k = int(order[idx])
        row = (self.from_g if state == "g" else self.from_e)[position]
        # parity: the initial amplitude at j = k is in ``state``
        even_holds_g = (k % 2 == 0) == (state == "g")
        rows = np.zeros((2, row.size), complex)
        rows[0 if even_holds_g else 1] = row
        return _rows_to_ladder(rows, float(quasi[idx]), self.n_max)


def target_orders(pulse):
    """Final orders that count as a successful diffraction for ``pulse``."""
    n = pulse.order
    if pulse.process is ProcessKind.DOPPLER_SINGLE:
        return (pulse.n0 + 1, -(pulse.n0 + 1))
    if pulse.process is ProcessKind.DOUBLE_MIRROR:
        return (n, -n)
    return (n, -n)


def _probe_population(pulse, offset, n_max, quasi, orders, states, targets, rel_tol, abs_tol):
    rows0, parity = _initial_rows(orders, states, n_max)
    out, _ = integrate_rows(pulse, offset, n_max, quasi, parity, rows0, rel_tol, abs_tol)
    cols = [t + n_max for t in targets if abs(t) <= n_max]
    return np.sum(np.abs(out[:, cols]) ** 2, axis=1)


def _initial_rows(orders, states, n_max):
    orders = np.asarray(orders, int)
    rows = np.zeros((orders.size, 2 * n_max + 1), complex)
    rows[np.arange(orders.size), orders + n_max] = 1.0
    is_g = np.array([s == "g" for s in states])
    # parity p: amplitude j is excited iff (j + p) odd; the start must match
    parity = np.where(is_g, orders % 2, (orders + 1) % 2)
    return rows, parity


def select_n_max(pulse, grid, indices, rel_tol, abs_tol, start=None, limit=24):
    """Smallest truncation whose target population is converged.

    Starts at ``max(order + 2, max|k| + 2)`` and increases ``n_max`` until the
    target-order population of every probe sample changes by no more than
    ``max(rel_tol, abs_tol)`` on adding one more order.
    """
    order, quasi = grid.split()
    offset = resonance_for(pulse).offset
    ks = order[indices]
    n_max = start or max(pulse.order + 2, int(np.abs(ks).max(initial=0)) + 2)
    # probe the extreme and central samples of the support
    probe = np.unique(np.concatenate([indices[:1], indices[-1:], indices[len(indices) // 2:][:1]]))
    probe_k = order[probe]
    probe_q = quasi[probe]
    states = ["g"] * probe.size + ["e"] * probe.size
    probe_k = np.concatenate([probe_k, probe_k])
    probe_q = np.concatenate([probe_q, probe_q])
    targets = sorted({t + int(k) for k in set(probe_k.tolist()) for t in (-pulse.order, pulse.order, -1, 1)}
                     | set(target_orders(pulse)))
    accept = max(rel_tol, abs_tol)
    previous = _probe_population(pulse, offset, n_max, probe_q, probe_k, states, targets, rel_tol, abs_tol)
    while n_max < limit:
        current = _probe_population(pulse, offset, n_max + 1, probe_q, probe_k, states, targets, rel_tol, abs_tol)
        if np.max(np.abs(current - previous)) <= accept:
            return n_max
        n_max += 1
        previous = current
    return n_max


def _kernel_chunk(args):
    pulse, offset, n_max, quasi, parity, rows0, rel_tol, abs_tol = args
    try:
        out, stats = integrate_rows(pulse, offset, n_max, quasi, parity, rows0, rel_tol, abs_tol)
    except StepUnderflowError as exc:
        raise KernelError(f"{exc} (quasi-momenta {quasi.min():.6g}..{quasi.max():.6g})",
                          quasi=float(quasi[0])) from exc
    return out, stats.norm_drift


def compute_kernel(atom, pulse: PulseSpec, grid: MomentumGrid,
                   rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, *,
                   support=None, states=("g", "e"), n_max=None, jobs=1) -> TransitionKernel:
    """Transition kernel of ``pulse`` on ``grid``.

    ``support`` restricts the computation to a subset of grid indices (all
    samples by default); ``states`` selects the initial internal states.
    Samples are processed in fixed chunks, so the result does not depend on
    ``jobs``.
    """
    indices = np.arange(grid.size) if support is None else np.unique(np.asarray(support, int))
    if indices.size == 0:
        raise ValueError("empty kernel support")
    if n_max is None:
        n_max = select_n_max(pulse, grid, indices, rel_tol, abs_tol)
    order, quasi = grid.split()
    if np.abs(order[indices]).max() > n_max:
        raise ValueError("n_max too small for the requested support")
    offset = resonance_for(pulse).offset
    size = 2 * n_max + 1
    from_g = np.full((indices.size, size), np.nan, complex)
    from_e = np.full((indices.size, size), np.nan, complex)

    tasks = []
    for start in range(0, indices.size, CHUNK_SAMPLES):
        sel = np.arange(start, min(start + CHUNK_SAMPLES, indices.size))
        ks = np.concatenate([order[indices[sel]]] * len(states))
        qs = np.concatenate([quasi[indices[sel]]] * len(states))
        st = [s for s in states for _ in sel]
        rows0, parity = _initial_rows(ks, st, n_max)
        tasks.append((sel, st, (pulse, offset, n_max, qs, parity, rows0, rel_tol, abs_tol)))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_kernel_chunk, [t[2] for t in tasks]))
    else:
        results = [_kernel_chunk(t[2]) for t in tasks]

    drift = 0.0
    for (sel, st, _), (out, chunk_drift) in zip(tasks, results):
        drift = max(drift, chunk_drift)
        for block, state in enumerate(states):
            rows = out[block * sel.size:(block + 1) * sel.size]
            (from_g if state == "g" else from_e)[sel] = rows
    log.debug("kernel: %d samples, n_max=%d, norm drift %.2e", indices.size, n_max, drift)
    return TransitionKernel(pulse, grid, n_max, indices, from_g, from_e, rel_tol, abs_tol,
                            meta={"norm_drift": drift, "states": tuple(states)})


def packet_support(packet: SpinorWavePacket, threshold=1e-14, states=None):
    """Grid indices where the packet density exceeds ``threshold * max``."""
    dens = packet.density
    peak = dens.max()
    if peak == 0.0:
        return np.zeros(0, int)
    return np.flatnonzero(dens > threshold * peak)


def occupied_states(packet: SpinorWavePacket, threshold=1e-14):
    peak = packet.density.max()
    states = []
    if np.any(np.abs(packet.g) ** 2 > threshold * peak):
        states.append("g")
    if np.any(np.abs(packet.e) ** 2 > threshold * peak):
        states.append("e")
    return tuple(states)


def apply_kernel(kernel: TransitionKernel, packet: SpinorWavePacket, leak_tol=1e-10) -> SpinorWavePacket:
    """Final packet ``psi_f(p_i + n) = sum G(p_i + n, p_i) psi_i(p_i)``.

    Amplitudes of the input outside the kernel support (or in an internal
    state the kernel was not computed for) may carry at most ``leak_tol`` of
    the norm; anything more raises :class:`GridMismatchError`.
    """
    grid = kernel.grid
    if packet.grid != grid:
        raise GridMismatchError("packet and kernel live on different grids")
    inside = np.zeros(grid.size, bool)
    inside[kernel.indices] = True
    leak = np.sum(packet.density[~inside]) * grid.spacing
    if leak > leak_tol:
        raise GridMismatchError(f"packet norm {leak:.3g} lies outside the kernel support")

    order, _ = grid.split()
    n_max, m = kernel.n_max, grid.per_unit
    j = np.arange(-n_max, n_max + 1)
    # target grid index of row entry j for sample index i: i + (j - k_i) * m
    k = order[kernel.indices]
    target = kernel.indices[:, None] + (j[None, :] - k[:, None]) * m
    valid = (target >= 0) & (target < grid.size)

    # internal state of row entry j: row from g starts in g at j = k
    flips = (j[None, :] - k[:, None]) % 2 == 1
    g_out = np.zeros(grid.size, complex)
    e_out = np.zeros(grid.size, complex)
    for state, rows in (("g", kernel.from_g), ("e", kernel.from_e)):
        amp_in = (packet.g if state == "g" else packet.e)[kernel.indices]
        if not np.any(amp_in):
            continue
        if np.isnan(rows).any():
            if np.sum(np.abs(amp_in) ** 2) * grid.spacing > leak_tol:
                raise GridMismatchError(f"kernel was not computed for initial state {state!r}")
            continue
        contrib = rows * amp_in[:, None]
        lost = np.sum(np.abs(contrib[~valid]) ** 2) * grid.spacing
        if lost > leak_tol:
            raise GridTooNarrowError(f"diffracted norm {lost:.3g} leaves the momentum grid")
        lands_in_g = ~flips if state == "g" else flips
        sel_g = valid & lands_in_g
        sel_e = valid & ~lands_in_g
        np.add.at(g_out, target[sel_g], contrib[sel_g])
        np.add.at(e_out, target[sel_e], contrib[sel_e])
    return SpinorWavePacket(grid, g_out, e_out)


def identity_kernel(pulse, grid, n_max, support=None):
    """Kernel that leaves every sample unchanged (zero-amplitude pulse)."""
    zero = PulseSpec(pulse.shape, 0.0, pulse.order, pulse.process, pulse.area, pulse.delta,
                     pulse.alpha, pulse.beta, pulse.n0, pulse.direction)
    return compute_kernel(None, zero, grid, support=support, n_max=n_max)


# ---------------------------------------------------------------------------
# Serialization and caching
# ---------------------------------------------------------------------------

_MAGIC = b"DRKERNEL"
_VERSION = 1


def kernel_key(pulse, grid, rel_tol, abs_tol, n_max=None, support=None, states=("g", "e")):
    """SHA-256 over everything that determines a kernel."""
    payload = {
        "pulse": pulse.key(),
        "grid": [grid.per_unit, grid.half_count],
        "tol": [float(rel_tol), float(abs_tol)],
        "n_max": n_max,
        "states": list(states),
        "support": None if support is None else hashlib.sha256(
            np.ascontiguousarray(np.unique(np.asarray(support, np.int64))).tobytes()).hexdigest(),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def save_kernel(kernel: TransitionKernel, path):
    """Write ``kernel`` as JSON header + little-endian float64 blocks."""
    header = {
        "pulse": kernel.pulse.key(),
        "grid": [kernel.grid.per_unit, kernel.grid.half_count],
        "n_max": kernel.n_max,
        "count": int(kernel.indices.size),
        "rel_tol": kernel.rel_tol,
        "abs_tol": kernel.abs_tol,
        "meta": {k: v for k, v in kernel.meta.items() if isinstance(v, (int, float, str, list, tuple))},
    }
    blob = json.dumps(header, sort_keys=True, default=str).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.asarray(kernel.indices, "<i8").tobytes())
        fh.write(np.asarray(kernel.from_g, "<c16").tobytes())
        fh.write(np.asarray(kernel.from_e, "<c16").tobytes())


def load_kernel(path, pulse: PulseSpec) -> TransitionKernel:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a kernel file")
        version, length = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported kernel file version {version}")
        header = json.loads(fh.read(length))
        count, size = header["count"], 2 * header["n_max"] + 1
        indices = np.frombuffer(fh.read(8 * count), "<i8").astype(int)
        from_g = np.frombuffer(fh.read(16 * count * size), "<c16").reshape(count, size).astype(complex)
        from_e = np.frombuffer(fh.read(16 * count * size), "<c16").reshape(count, size).astype(complex)
    if json.loads(json.dumps(pulse.key(), default=str)) != header["pulse"]:
        raise ValueError("kernel file was computed for a different pulse")
    grid = MomentumGrid(*header["grid"])
    meta = dict(header.get("meta", {}))
    if "states" in meta:
        meta["states"] = tuple(meta["states"])
    return TransitionKernel(pulse, grid, header["n_max"], indices, from_g, from_e,
                            header["rel_tol"], header["abs_tol"], meta=meta)


class KernelCache:
    """In-memory kernel cache, optionally backed by a directory of files."""

    def __init__(self, directory=None, jobs=1):
        self.directory = None if directory is None else Path(directory)
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.jobs = jobs
        self._memory = {}
        # kernels grouped by everything but their support, for superset reuse
        self._families = {}
        self.hits = 0
        self.misses = 0

    def get(self, atom, pulse, grid, rel_tol=DEFAULT_REL_TOL, abs_tol=DEFAULT_ABS_TOL, *,
            support=None, states=("g", "e"), n_max=None):
        key = kernel_key(pulse, grid, rel_tol, abs_tol, n_max, support, states)
        if key in self._memory:
            self.hits += 1
            log.info("kernel cache hit %s", key[:12])
            return self._memory[key]
        family = kernel_key(pulse, grid, rel_tol, abs_tol, n_max, None, states)
        if support is not None:
            wanted = np.unique(np.asarray(support, int))
            for kernel in self._families.get(family, ()):
                if np.isin(wanted, kernel.indices, assume_unique=True).all():
                    self.hits += 1
                    log.info("kernel cache hit %s (superset)", key[:12])
                    return kernel
        path = None if self.directory is None else self.directory / f"{key}.kernel"
        if path is not None and path.exists():
            self.hits += 1
            log.info("kernel cache hit %s (disk)", key[:12])
            kernel = load_kernel(path, pulse)
        else:
            self.misses += 1
            kernel = compute_kernel(atom, pulse, grid, rel_tol, abs_tol, support=support,
                                    states=states, n_max=n_max, jobs=self.jobs)
            if path is not None:
                save_kernel(kernel, path)
        self._memory[key] = kernel
        self._families.setdefault(family, []).append(kernel)
        return kernel
