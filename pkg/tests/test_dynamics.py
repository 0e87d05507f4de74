import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubleraman.analysis import doppler_box, first_order_splitter, third_order_pulse
from doubleraman.core import (
    AmplitudeLadder,
    BoxShape,
    GaussianShape,
    GridMismatchError,
    MomentumGrid,
    PulseSpec,
    gaussian_packet,
)
from doubleraman.dynamics import (
    CoupledSystem,
    KernelCache,
    apply_kernel,
    brute_force_propagate,
    compute_kernel,
    identity_kernel,
    integrate_pulse,
    integrate_rows,
    kernel_key,
    load_kernel,
    packet_support,
    propagate_box,
    rhs,
    save_kernel,
    select_n_max,
)
from doubleraman.resonance import ALPHA_BOX, BETA_BOX

TIGHT = {"rel_tol": 1e-8, "abs_tol": 1e-10}


def _bs(width=0.8, amplitude=None):
    shape = GaussianShape(width)
    if amplitude is None:
        return first_order_splitter().make_pulse(width)
    return PulseSpec(shape, amplitude)


def test_n_max_lower_bound(atom):
    with pytest.raises(ValueError):
        CoupledSystem.for_quasi(atom, third_order_pulse(1.0, ALPHA_BOX, BETA_BOX, math.pi / 2), 0.0, 4)


def test_rhs_is_anti_hermitian(atom, rng):
    system = CoupledSystem.for_quasi(atom, _bs(amplitude=0.7), 0.23, 4)
    size = 9
    vecs = rng.normal(size=(2, 2 * size)) + 1j * rng.normal(size=(2, 2 * size))
    ladders = [AmplitudeLadder(0.23, 4, v[:size], v[size:]) for v in vecs]
    outs = [rhs(system, 0.37, lad) for lad in ladders]
    # <x, M y> = -<M x, y> for an anti-Hermitian generator
    lhs = np.vdot(vecs[0], np.concatenate([outs[1].g, outs[1].e]))
    rhs_ = -np.vdot(np.concatenate([outs[0].g, outs[0].e]), vecs[1])
    assert lhs == pytest.approx(rhs_, abs=1e-12)


def test_rhs_matches_stated_phase(atom):
    # g_0 <- e_{+1} couples with exp(-i (eps_{e,1} - eps_{g,0}) t), eps_{e,1} = (q+1)^2 - offset
    q, t, amp = 0.1, 0.8, 0.3
    system = CoupledSystem.for_quasi(atom, _bs(amplitude=amp), q, 3)
    ladder = AmplitudeLadder.unit(q, 3, 1, "e")
    out = rhs(system, t, ladder)
    om = amp * math.exp(-t**2 / (2 * 0.8**2))
    phase = (q + 1) ** 2 - 1.0 - q**2
    assert out.g[3] == pytest.approx(1j * om * np.exp(-1j * phase * t), abs=1e-14)


@pytest.mark.parametrize("quasi", [0.0, 0.21, -0.37])
def test_integrator_matches_brute_force(atom, quasi):
    system = CoupledSystem.for_quasi(atom, _bs(0.6, amplitude=0.9), quasi, 4)
    initial = AmplitudeLadder.unit(quasi, 4)
    fast = integrate_pulse(system, initial, **TIGHT)
    slow = brute_force_propagate(system, initial, 10_000)
    np.testing.assert_allclose(fast.g, slow.g, atol=1e-5)
    np.testing.assert_allclose(fast.e, slow.e, atol=1e-5)


def test_brute_force_requires_many_steps(atom):
    system = CoupledSystem.for_quasi(atom, _bs(), 0.0, 3)
    with pytest.raises(ValueError):
        brute_force_propagate(system, AmplitudeLadder.unit(0.0, 3), 100)


@settings(max_examples=20, deadline=None)
@given(quasi=st.floats(-0.5, 0.49), amplitude=st.floats(0.05, 2.0), width=st.floats(0.1, 1.5))
def test_norm_is_conserved(atom, quasi, amplitude, width):
    system = CoupledSystem.for_quasi(atom, _bs(width, amplitude), quasi, 5)
    out = integrate_pulse(system, AmplitudeLadder.unit(quasi, 5), rel_tol=1e-6, abs_tol=1e-9)
    assert out.norm == pytest.approx(1.0, abs=2e-3)


def test_zero_amplitude_is_identity(atom):
    system = CoupledSystem.for_quasi(atom, _bs(amplitude=0.0), 0.1, 3)
    initial = AmplitudeLadder.unit(0.1, 3, 2, "e")
    out = integrate_pulse(system, initial)
    np.testing.assert_array_equal(out.e, initial.e)


def test_parity_blocks_do_not_mix(atom):
    system = CoupledSystem.for_quasi(atom, _bs(amplitude=0.8), 0.05, 4)
    out = integrate_pulse(system, AmplitudeLadder.unit(0.05, 4), **TIGHT)
    n = out.orders
    # from g_0 only g at even and e at odd orders are reachable
    assert np.all(out.g[n % 2 == 1] == 0)
    assert np.all(out.e[n % 2 == 0] == 0)


def test_rows_are_independent_of_batch(atom):
    pulse = _bs(amplitude=0.5)
    rows = np.zeros((3, 9), complex)
    rows[:, 4] = 1.0
    quasi = np.array([0.0, 0.2, -0.3])
    parity = np.array([0, 0, 0])
    together, _ = integrate_rows(pulse, 1.0, 4, quasi, parity, rows, 1e-6, 1e-9)
    alone, _ = integrate_rows(pulse, 1.0, 4, quasi[1:2], parity[1:2], rows[1:2], 1e-6, 1e-9)
    np.testing.assert_array_equal(together[1], alone[0])


def test_propagate_box_matches_integrator(atom):
    amp = 0.3
    pulse = PulseSpec(BoxShape(2.5), amp, order=3, delta=BETA_BOX * amp**2, alpha=ALPHA_BOX, beta=BETA_BOX)
    system = CoupledSystem.for_quasi(atom, pulse, 0.12, 6)
    initial = AmplitudeLadder.unit(0.12, 6, 1, "e")
    exact = propagate_box(system, initial)
    stepped = integrate_pulse(system, initial, rel_tol=1e-10, abs_tol=1e-12)
    np.testing.assert_allclose(exact.g, stepped.g, atol=1e-7)
    np.testing.assert_allclose(exact.e, stepped.e, atol=1e-7)


def test_propagate_box_rejects_gaussian(atom):
    system = CoupledSystem.for_quasi(atom, _bs(), 0.0, 3)
    with pytest.raises(ValueError):
        propagate_box(system, AmplitudeLadder.unit(0.0, 3))


def test_select_n_max_grows_with_amplitude(atom):
    grid = MomentumGrid.for_packets([0.05], n_max=8)
    support = packet_support(gaussian_packet(grid, 0.0, 0.05))
    weak = select_n_max(_bs(1.0, amplitude=0.1), grid, support, 1e-3, 1e-6)
    strong = select_n_max(_bs(0.3, amplitude=10.0), grid, support, 1e-3, 1e-6)
    assert weak == 3  # order + 2
    assert strong > weak


def test_kernel_on_narrow_packet_splits_to_plus_minus_one(atom):
    grid = MomentumGrid.for_packets([0.01], n_max=5)
    psi = gaussian_packet(grid, 0.0, 0.01)
    pulse = first_order_splitter().make_pulse(float(atom.us_to_natural(8.8)))
    kernel = compute_kernel(atom, pulse, grid, support=packet_support(psi), states=("g",))
    out = apply_kernel(kernel, psi)
    assert out.norm == pytest.approx(1.0, abs=2e-3)
    p = grid.samples
    near = (np.abs(np.abs(p) - 1.0) < 0.5)
    assert np.sum(np.abs(out.e[near]) ** 2) * grid.spacing > 0.98
    # symmetric split
    left = np.sum(np.abs(out.e[p < 0]) ** 2)
    right = np.sum(np.abs(out.e[p > 0]) ** 2)
    assert left == pytest.approx(right, rel=1e-3)


def test_kernel_is_independent_of_jobs(atom):
    grid = MomentumGrid.for_packets([0.02], n_max=4)
    psi = gaussian_packet(grid, 0.0, 0.02)
    pulse = first_order_splitter().make_pulse(0.8)
    one = compute_kernel(atom, pulse, grid, support=packet_support(psi), states=("g",))
    two = compute_kernel(atom, pulse, grid, support=packet_support(psi), states=("g",), jobs=2)
    np.testing.assert_array_equal(one.from_g, two.from_g)


def test_apply_kernel_checks_support(atom):
    grid = MomentumGrid.for_packets([0.05], centers=(1.0,), n_max=6)
    narrow = gaussian_packet(grid, 0.0, 0.01)
    kernel = compute_kernel(atom, _bs(), grid, support=packet_support(narrow), states=("g",))
    with pytest.raises(GridMismatchError):
        apply_kernel(kernel, gaussian_packet(grid, 1.0, 0.05))
    with pytest.raises(GridMismatchError):
        apply_kernel(kernel, gaussian_packet(grid, 0.0, 0.01, state="e"))


def test_identity_kernel(atom):
    grid = MomentumGrid.for_packets([0.05], n_max=3)
    psi = gaussian_packet(grid, 0.0, 0.05)
    support = packet_support(psi)
    out = apply_kernel(identity_kernel(_bs(), grid, 3, support=support), psi)
    # exact on the support; the negligible tails outside it are dropped
    np.testing.assert_array_equal(out.g[support], psi.g[support])
    assert np.delete(np.abs(out.g), support).max() == 0.0
    assert not out.e.any()


def test_kernel_roundtrip_and_cache(atom, tmp_path):
    grid = MomentumGrid.for_packets([0.05], centers=(1.0,), n_max=6)
    psi = gaussian_packet(grid, 1.0, 0.05, symmetric=True, state="e")
    pulse = doppler_box(1, "e->g").make_pulse(3.0)
    support = packet_support(psi)
    cache = KernelCache(tmp_path)
    first = cache.get(atom, pulse, grid, support=support, states=("e",))
    assert cache.misses == 1
    again = KernelCache(tmp_path).get(atom, pulse, grid, support=support, states=("e",))
    np.testing.assert_array_equal(first.from_e, again.from_e)
    assert first.n_max == again.n_max
    path = tmp_path / "k.kernel"
    save_kernel(first, path)
    with pytest.raises(ValueError):
        load_kernel(path, doppler_box(1, "e->g").make_pulse(3.1))
    assert load_kernel(path, pulse).n_max == first.n_max


def test_cache_reuses_superset_kernels(atom):
    grid = MomentumGrid.for_packets([0.02, 0.1], n_max=5)
    pulse = first_order_splitter().make_pulse(0.8)
    cache = KernelCache()
    wide = cache.get(atom, pulse, grid, support=packet_support(gaussian_packet(grid, 0.0, 0.1)), states=("g",))
    narrow = cache.get(atom, pulse, grid, support=packet_support(gaussian_packet(grid, 0.0, 0.02)),
                       states=("g",))
    assert narrow is wide
    assert cache.hits == 1


def test_kernel_key_depends_on_inputs():
    grid = MomentumGrid(10, 50)
    pulse = first_order_splitter().make_pulse(0.8)
    base = kernel_key(pulse, grid, 1e-3, 1e-6)
    assert base == kernel_key(pulse, grid, 1e-3, 1e-6)
    assert base != kernel_key(pulse, grid, 1e-4, 1e-6)
    assert base != kernel_key(pulse, MomentumGrid(10, 51), 1e-3, 1e-6)
    assert base != kernel_key(pulse, grid, 1e-3, 1e-6, support=[1, 2, 3])
