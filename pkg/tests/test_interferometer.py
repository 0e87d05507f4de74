import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubleraman.core import MomentumGrid, gaussian_packet
from doubleraman.interferometer import (
    DegenerateSignalError,
    Projection,
    fit_fringe,
    free_evolution,
    fringe,
)


@settings(max_examples=50)
@given(amplitude=st.floats(0.01, 2.0), contrast=st.floats(0.0, 1.0), phi0=st.floats(-3.1, 3.1))
def test_fit_recovers_cosine(amplitude, contrast, phi0):
    phases = 2 * math.pi * np.arange(32) / 32
    values = 0.5 * amplitude * (1 + contrast * np.cos(phases + phi0))
    a, c, phi, residual = fit_fringe(phases, values)
    assert a == pytest.approx(amplitude, rel=1e-10)
    assert c == pytest.approx(contrast, abs=1e-10)
    assert residual <= 1e-12 * amplitude + 1e-15
    if contrast > 1e-3:
        assert math.cos(phi - phi0) == pytest.approx(1.0, abs=1e-8)


def test_fit_rejects_empty_signal():
    with pytest.raises(DegenerateSignalError):
        fit_fringe(np.linspace(0, 6, 10), np.zeros(10))


def test_projection_windows():
    grid = MomentumGrid.for_packets([0.05], centers=(3.0,))
    psi = gaussian_packet(grid, 3.0, 0.05, symmetric=True, state="e")
    one_sided = Projection(3, "e").apply(psi)
    both = Projection(3, "e", symmetric=True).apply(psi)
    assert one_sided.norm == pytest.approx(0.5, abs=1e-9)
    assert both.norm == pytest.approx(1.0, abs=1e-9)
    assert Projection(3, "g").apply(psi).norm == 0.0
    with pytest.raises(ValueError):
        Projection(1, "x")


def test_projection_windows_are_half_open():
    grid = MomentumGrid(4, 40)
    p = grid.samples
    ones = np.ones(grid.size, complex)
    psi = gaussian_packet(grid, 0.0, 0.1).replace(g=ones)
    kept = [np.flatnonzero(Projection(n, "g").apply(psi).g) for n in range(-9, 10)]
    counts = np.zeros(grid.size, int)
    for idx in kept:
        counts[idx] += 1
    inner = np.abs(p) < 9.5 - 1e-9
    assert np.all(counts[inner] == 1)
    # the window of order 1 starts at 1/2 and excludes 3/2
    assert 0.5 in p[kept[10]] and 1.5 not in p[kept[10]]


def test_free_evolution_phase(atom):
    grid = MomentumGrid.for_packets([0.05])
    psi = gaussian_packet(grid, 0.0, 0.05)
    t = 1e-3
    out = free_evolution(atom, psi, t)
    assert out.norm == pytest.approx(psi.norm)
    tau = atom.to_natural_time(t)
    p = grid.samples
    np.testing.assert_allclose(out.g, psi.g * np.exp(-1j * p**2 * tau), atol=1e-9)
    assert free_evolution(atom, psi, 0.0) is psi
    with pytest.raises(ValueError):
        free_evolution(atom, psi, -1.0)


def test_fringe_of_equal_arms():
    grid = MomentumGrid.for_packets([0.05])
    psi = gaussian_packet(grid, 0.0, 0.05)
    half = psi.replace(g=psi.g / math.sqrt(2))
    phases, values = fringe(half, half, points=16)
    a, c, phi0, _ = fit_fringe(phases, values)
    # constructive interference doubles the total population of the two arms
    assert a == pytest.approx(2.0, abs=1e-9)
    assert c == pytest.approx(1.0, abs=1e-9)
    assert abs(math.sin(phi0)) < 1e-9
    with pytest.raises(ValueError):
        fringe(half, half, points=2)


def test_common_free_phase_leaves_fringe_unchanged(atom):
    grid = MomentumGrid.for_packets([0.05])
    psi = gaussian_packet(grid, 0.0, 0.05)
    up = psi.replace(g=0.6 * psi.g)
    low = psi.replace(g=0.8j * psi.g)
    ref = fit_fringe(*fringe(up, low))
    later = fit_fringe(*fringe(free_evolution(atom, up, 0.01), free_evolution(atom, low, 0.01)))
    assert later[0] == pytest.approx(ref[0], abs=1e-12)
    assert later[1] == pytest.approx(ref[1], abs=1e-12)
