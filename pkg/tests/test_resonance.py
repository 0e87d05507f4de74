import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from doubleraman.core import BoxShape, Direction, GaussianShape, ProcessKind, PulseSpec
from doubleraman.resonance import (
    ALPHA_BOX,
    BETA_BOX,
    NoSolutionError,
    amplitude_for_area,
    doppler_box_delta,
    doppler_resonance,
    first_order_resonance,
    pulse_area,
    resonance_for,
    third_order_resonance,
)


def test_box_constants():
    assert ALPHA_BOX == pytest.approx(0.0441941738)
    assert BETA_BOX == -0.5625


def test_first_order_resonance():
    assert first_order_resonance().offset == 1.0


@pytest.mark.parametrize(
    "n0, direction, amp, expected",
    [(1, "e->g", 0.2, 3 * 0.04 / 8), (2, "g->e", 0.2, -5 * 0.04 / 24)],
)
def test_doppler_light_shift(n0, direction, amp, expected):
    assert doppler_box_delta(n0, direction, amp) == pytest.approx(expected, rel=1e-12)


def test_doppler_light_shift_singular_at_rest():
    with pytest.raises(ValueError):
        doppler_box_delta(0, "g->e", 0.1)


def test_doppler_resonance_offsets():
    assert doppler_resonance(1, "e->g", 0.01).offset == pytest.approx(-3 + 0.01)
    assert doppler_resonance(2, "g->e", -0.01).offset == pytest.approx(5 - 0.01)


def test_third_order_resonance():
    res = third_order_resonance(BETA_BOX, 0.4)
    assert res.delta == pytest.approx(-0.09)
    assert res.offset == pytest.approx(9 - 0.09)
    with pytest.raises(ValueError):
        third_order_resonance(BETA_BOX, 0.0)


def test_resonance_for_pulses():
    pulse = PulseSpec(BoxShape(1.0), 0.1, process=ProcessKind.DOPPLER_SINGLE, delta=0.002, n0=2,
                      direction=Direction.GROUND_TO_EXCITED)
    assert resonance_for(pulse).offset == pytest.approx(5.002)
    assert resonance_for(PulseSpec(GaussianShape(1.0), 0.1)).offset == 1.0


def test_gaussian_first_order_amplitude():
    # truncation fraction of the [-4, 4] sigma window
    width = 2.0
    c4 = math.erf(4 / math.sqrt(2))
    expected = (math.pi / 2) / (math.sqrt(2) * math.sqrt(2 * math.pi) * width * c4)
    assert amplitude_for_area(GaussianShape(width), 1, math.pi / 2) == pytest.approx(expected, rel=1e-10)


def test_gaussian_third_order_amplitude():
    width, alpha = 1.5, 0.05
    c = math.erf(4 * math.sqrt(3) / math.sqrt(2))
    expected = (math.pi / (alpha * math.sqrt(2 * math.pi / 3) * width * c)) ** (1 / 3)
    assert amplitude_for_area(GaussianShape(width), 3, math.pi, alpha=alpha) == pytest.approx(expected, rel=1e-10)


def test_box_areas():
    assert pulse_area(BoxShape(2.0), 1, 0.5) == pytest.approx(math.sqrt(2))
    assert pulse_area(BoxShape(2.0), 1, 0.5, process=ProcessKind.DOPPLER_SINGLE) == pytest.approx(2.0)
    assert pulse_area(BoxShape(100.0), 3, 0.4, alpha=ALPHA_BOX) == pytest.approx(math.sqrt(2) * 0.064 * 100 / 32)


def test_area_errors():
    with pytest.raises(NoSolutionError):
        amplitude_for_area(BoxShape(1.0), 1, 0.0)
    with pytest.raises(ValueError):
        pulse_area(BoxShape(1.0), 3, 0.1)
    with pytest.raises(ValueError):
        pulse_area(BoxShape(1.0), 5, 0.1)


@given(area=st.floats(0.1, 10.0), width=st.floats(0.05, 5.0), order=st.sampled_from([1, 3]))
def test_amplitude_area_roundtrip(area, width, order):
    shape = GaussianShape(width)
    alpha = 0.04 if order == 3 else None
    amp = amplitude_for_area(shape, order, area, alpha=alpha)
    assert pulse_area(shape, order, amp, alpha=alpha) == pytest.approx(area, rel=1e-9)
