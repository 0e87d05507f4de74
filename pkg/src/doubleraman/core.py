"""Shared types: atom constants, pulses, momentum grids and wave packets.

All quantities are stored in natural units: momenta in units of hbar*K,
times in units of 1/omega_K and frequencies in units of omega_K.  SI values
only appear when converting at the edges (CLI input, reports).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import constants


class RamanError(Exception):
    """Base class for all errors raised by this package."""


class GridTooNarrowError(RamanError):
    pass


class GridMismatchError(RamanError):
    pass


class WindowError(RamanError):
    pass


# ---------------------------------------------------------------------------
# Atom
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level atom seen by a retroreflected Raman beam pair.

    Attributes
    ----------
    mass : float
        Atomic mass in kg.
    wavenumber : float
        Effective wavenumber ``K = (omega_b + omega_r)/c`` in rad/m.
    recoil_omega : float
        Recoil frequency ``omega_K = hbar K^2 / (2M)`` in rad/s.
    splitting_omega : float
        Internal splitting ``omega_eg`` in rad/s.
    """

    mass: float
    wavenumber: float
    recoil_omega: float
    splitting_omega: float
    name: str = "atom"

    def __post_init__(self):
        for attr in ("mass", "wavenumber", "recoil_omega", "splitting_omega"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"{attr} must be strictly positive")
        expected = constants.HBAR * self.wavenumber**2 / (2.0 * self.mass)
        if abs(self.recoil_omega - expected) > 1e-12 * expected:
            raise ValueError("recoil_omega inconsistent with hbar K^2 / 2M")

    @classmethod
    def from_mass_and_wavenumber(cls, mass, wavenumber, splitting_omega, name="atom"):
        recoil = constants.HBAR * wavenumber**2 / (2.0 * mass)
        return cls(mass, wavenumber, recoil, splitting_omega, name)

    def to_natural_time(self, seconds):
        return seconds * self.recoil_omega

    def to_seconds(self, natural_time):
        return natural_time / self.recoil_omega

    def us_to_natural(self, microseconds):
        return self.to_natural_time(np.asarray(microseconds, dtype=float) * 1e-6)

    def natural_to_us(self, natural_time):
        return self.to_seconds(np.asarray(natural_time, dtype=float)) * 1e6

    @property
    def splitting(self):
        """Internal splitting in units of omega_K."""
        return self.splitting_omega / self.recoil_omega


def make_rb87() -> AtomSpecies:
    """Rubidium-87 driven by counterpropagating 780 nm photon pairs."""
    return AtomSpecies.from_mass_and_wavenumber(
        constants.RB87_MASS,
        constants.RB87_EFFECTIVE_WAVENUMBER,
        constants.RB87_HYPERFINE_SPLITTING,
        name="Rb87",
    )


# ---------------------------------------------------------------------------
# Pulses
# ---------------------------------------------------------------------------

# Gaussian pulses are integrated over t in [-4, 4] widths.
GAUSSIAN_WINDOW_WIDTHS = 8.0


@dataclass(frozen=True)
class GaussianShape:
    """Envelope ``exp(-t^2 / (2 width^2))`` truncated to a symmetric window."""

    width: float
    window: float | None = None

    kind = "gaussian"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("Gaussian width must be positive")
        if self.window is None:
            object.__setattr__(self, "window", GAUSSIAN_WINDOW_WIDTHS * self.width)
        if not self.window > 0:
            raise ValueError("truncation window must be positive")

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-(t * t) / (2.0 * self.width**2))

    @property
    def t_span(self):
        half = 0.5 * self.window
        return (-half, half)

    @property
    def duration(self):
        return self.width


@dataclass(frozen=True)
class BoxShape:
    """Constant envelope switched on for ``duration``."""

    duration: float

    kind = "box"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("box duration must be positive")

    def envelope(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    @property
    def t_span(self):
        return (0.0, self.duration)

    @property
    def window(self):
        return self.duration


PulseShape = GaussianShape | BoxShape


class ProcessKind(str, enum.Enum):
    DOUBLE_REST = "double"
    DOPPLER_SINGLE = "doppler"
    DOUBLE_MIRROR = "mirror"


class Direction(str, enum.Enum):
    GROUND_TO_EXCITED = "g->e"
    EXCITED_TO_GROUND = "e->g"


@dataclass(frozen=True)
class PulseSpec:
    """A single light pulse.

    ``amplitude`` is the peak coupling Omega_0 in units of omega_K and
    ``delta`` the resonance offset in units of omega_K.  ``alpha`` and
    ``beta`` only carry meaning for third-order pulses, where
    ``delta == beta * amplitude**2``.
    """

    shape: PulseShape
    amplitude: float
    order: int = 1
    process: ProcessKind = ProcessKind.DOUBLE_REST
    area: float = math.pi / 2
    delta: float = 0.0
    alpha: float | None = None
    beta: float | None = None
    n0: int = 0
    direction: Direction | None = None

    def __post_init__(self):
        if self.order < 1 or self.order % 2 != 1:
            raise ValueError("double Raman diffraction is resonant only at odd orders")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.process is ProcessKind.DOPPLER_SINGLE:
            if self.direction is None:
                raise ValueError("Doppler-detuned pulses need a direction")
            if self.n0 < 1:
                raise ValueError("Doppler-detuned pulses need n0 >= 1")
        if self.order == 3 and self.beta is not None:
            expected = self.beta * self.amplitude**2
            if abs(self.delta - expected) > 1e-12 * max(1.0, abs(expected)):
                raise ValueError("third-order pulse: delta must equal beta * amplitude**2")

    def rabi(self, t):
        return self.amplitude * self.shape.envelope(t)

    @property
    def t_span(self):
        return self.shape.t_span

    def key(self):
        """Hashable description used for caching and provenance."""
        shape = (self.shape.kind, float(self.shape.window),
                 float(getattr(self.shape, "width", self.shape.window)))
        return (
            shape,
            float(self.amplitude),
            self.order,
            self.process.value,
            float(self.area),
            float(self.delta),
            self.n0,
            None if self.direction is None else self.direction.value,
        )


# ---------------------------------------------------------------------------
# Momentum grid and wave packets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform grid ``k / per_unit`` for ``k = -half_count..half_count``.

    The spacing always divides hbar*K, so shifting a sample by an integer
    number of recoils lands exactly on another sample.
    """

    per_unit: int
    half_count: int

    def __post_init__(self):
        if self.per_unit < 1 or self.half_count < 0:
            raise ValueError("invalid grid")

    @classmethod
    def covering(cls, half_width, max_spacing):
        per_unit = int(math.ceil(1.0 / max_spacing - 1e-9))
        half_count = int(math.ceil(half_width * per_unit - 1e-9))
        return cls(per_unit, half_count)

    @classmethod
    def for_packets(cls, widths, centers=(0.0,), n_max=0, points_per_width=8):
        """Default grid: spacing ``min(width)/8``; covers every packet to six
        widths and the outermost ladder order ``n_max`` plus half a recoil."""
        widths = np.atleast_1d(np.asarray(widths, dtype=float))
        reach = max(abs(c) for c in centers) + 6.0 * widths.max()
        half_width = max(reach, n_max + 0.5)
        return cls.covering(half_width, widths.min() / points_per_width)

    @property
    def spacing(self):
        return 1.0 / self.per_unit

    @property
    def half_width(self):
        return self.half_count / self.per_unit

    @property
    def size(self):
        return 2 * self.half_count + 1

    @property
    def samples(self):
        return np.arange(-self.half_count, self.half_count + 1) / self.per_unit

    def index_of(self, p):
        return np.rint(np.asarray(p) * self.per_unit).astype(int) + self.half_count

    def split(self):
        """Integer order and quasi-momentum in [-1/2, 1/2) for every sample."""
        k = np.arange(-self.half_count, self.half_count + 1)
        order = np.floor_divide(2 * k + self.per_unit, 2 * self.per_unit)
        quasi = (k - order * self.per_unit) / self.per_unit
        return order, quasi


@dataclass(frozen=True, eq=False)
class SpinorWavePacket:
    """Ground and excited momentum amplitudes on a grid.

    Amplitudes are densities: the norm is ``sum(|g|^2 + |e|^2) * spacing``.
    """

    grid: MomentumGrid
    g: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        e = np.asarray(self.e, dtype=complex)
        if g.shape != (self.grid.size,) or e.shape != (self.grid.size,):
            raise GridMismatchError("amplitude arrays do not match the grid")
        g.flags.writeable = False
        e.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "e", e)

    @property
    def density(self):
        return np.abs(self.g) ** 2 + np.abs(self.e) ** 2

    @property
    def norm(self):
        return float(self.density.sum() * self.grid.spacing)

    def replace(self, g=None, e=None):
        return SpinorWavePacket(self.grid, self.g if g is None else g, self.e if e is None else e)


@dataclass(eq=False)
class AmplitudeLadder:
    """Amplitudes ``g_n``, ``e_n`` at momenta ``quasi + n`` for |n| <= n_max."""

    quasi: float
    n_max: int
    g: np.ndarray = field(default=None)
    e: np.ndarray = field(default=None)

    def __post_init__(self):
        size = 2 * self.n_max + 1
        self.g = np.zeros(size, complex) if self.g is None else np.asarray(self.g, complex)
        self.e = np.zeros(size, complex) if self.e is None else np.asarray(self.e, complex)
        if self.g.shape != (size,) or self.e.shape != (size,):
            raise ValueError("ladder arrays must have length 2*n_max+1")

    @classmethod
    def unit(cls, quasi, n_max, n=0, state="g"):
        ladder = cls(quasi, n_max)
        getattr(ladder, state)[n + n_max] = 1.0
        return ladder

    @property
    def orders(self):
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def norm(self):
        return float(np.sum(np.abs(self.g) ** 2 + np.abs(self.e) ** 2))

    def population(self, n, state=None):
        i = n + self.n_max
        if state == "g":
            return float(abs(self.g[i]) ** 2)
        if state == "e":
            return float(abs(self.e[i]) ** 2)
        return float(abs(self.g[i]) ** 2 + abs(self.e[i]) ** 2)

    def copy(self):
        return AmplitudeLadder(self.quasi, self.n_max, self.g.copy(), self.e.copy())


def gaussian_packet(grid, p0, width, *, symmetric=False, state="g"):
    """Normalized Gaussian packet ``exp(-(p - p0)^2 / (4 width^2))``.

    With ``symmetric=True`` the packet is the equal superposition of two
    Gaussians at ``+p0`` and ``-p0``.
    """
    if not width > 0:
        raise ValueError("packet width must be positive")
    if state not in ("g", "e"):
        raise ValueError("state must be 'g' or 'e'")
    reach = abs(p0) + 6.0 * width
    if reach > grid.half_width + 1e-12:
        raise GridTooNarrowError(
            f"grid half-width {grid.half_width:g} does not cover |p0| + 6 width = {reach:g}"
        )
    p = grid.samples
    amp = np.exp(-((p - p0) ** 2) / (4.0 * width**2))
    if symmetric:
        amp = amp + np.exp(-((p + p0) ** 2) / (4.0 * width**2))
    amp = amp / math.sqrt(np.sum(amp**2) * grid.spacing)
    zeros = np.zeros(grid.size, complex)
    if state == "g":
        return SpinorWavePacket(grid, amp.astype(complex), zeros)
    return SpinorWavePacket(grid, zeros, amp.astype(complex))
