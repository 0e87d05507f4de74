import json

import numpy as np
import pytest

from doubleraman.analysis import (
    EfficiencyMap,
    EmptySelectionError,
    duration_axis,
    efficiency,
    efficiency_map,
    first_order_splitter,
    mirror_efficiency,
    optimal_duration,
    width_axis,
    window_population,
)
from doubleraman.core import MomentumGrid, gaussian_packet


def test_windows_partition_the_packet():
    grid = MomentumGrid.for_packets([0.3], n_max=3)
    psi = gaussian_packet(grid, 0.4, 0.3)
    top = int(grid.half_width - 0.5)
    total = sum(window_population(psi, n - 0.5, n + 0.5) for n in range(-top, top + 1))
    assert top >= 2
    assert total == pytest.approx(psi.norm, abs=1e-10)


def test_efficiency_counts_both_orders_in_target_state():
    grid = MomentumGrid.for_packets([0.02], centers=(1.0,), n_max=1)
    psi = gaussian_packet(grid, 1.0, 0.02, symmetric=True, state="e")
    assert efficiency(psi, 0, 1) == pytest.approx(1.0, abs=1e-9)
    at_rest = gaussian_packet(grid, 0.0, 0.02)
    assert efficiency(at_rest, 0, 1) == pytest.approx(0.0, abs=1e-12)


def test_mirror_efficiency_of_reflected_packet():
    grid = MomentumGrid.covering(4.0, 0.005)
    assert mirror_efficiency(gaussian_packet(grid, 3.0, 0.02, state="e")) == pytest.approx(1.0, abs=1e-9)
    assert mirror_efficiency(gaussian_packet(grid, -3.0, 0.02, state="e")) == pytest.approx(0.0, abs=1e-9)


def test_axes():
    d = duration_axis(1.0, 100.0, 10)
    assert d.size == 21 and d[0] == 1.0 and d[-1] == pytest.approx(100.0)
    np.testing.assert_allclose(width_axis(0.0, 0.2, 3), [0.0, 0.1, 0.2])


def _toy_map():
    durations = np.array([1.0, 2.0, 3.0, 4.0]) * 1e-6
    widths = np.array([0.01, 0.1, 0.2, 0.3])
    values = np.array([
        [0.1, 0.9, 0.2, 0.9],
        [0.9, 0.9, 0.3, 0.1],
        [0.2, 0.1, 0.9, 0.1],
        [0.1, 0.1, 0.1, 0.1],
    ])
    return EfficiencyMap(durations, widths, values)


def test_optimal_duration_median_and_ties():
    emap = _toy_map()
    # per-width argmax over widths <= 0.2: 2 us, 1 us (tie -> shortest), 3 us
    assert optimal_duration(emap) == pytest.approx(2e-6)
    # even count takes the lower median: 1 us and 2 us -> 1 us
    assert optimal_duration(emap, width_cut=0.1) == pytest.approx(1e-6)
    with pytest.raises(EmptySelectionError):
        optimal_duration(emap, width_cut=0.001)


def test_map_validates_shape():
    with pytest.raises(ValueError):
        EfficiencyMap([1e-6], [0.1, 0.2], np.zeros((2, 2)))


def test_map_files(tmp_path):
    emap = _toy_map()
    emap.write_csv(tmp_path / "m.csv", comments=["config_hash=x"])
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[:2] == ["# config_hash=x", "duration_us,width_hbarK,efficiency"]
    assert len(lines) == 2 + emap.values.size
    emap.write_json(tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["durations_us"] == [1.0, 2.0, 3.0, 4.0]


def test_first_order_map_peaks_near_short_pulses(atom):
    emap = efficiency_map(atom, first_order_splitter(), [4.0, 9.0, 30.0], [0.01, 0.05])
    assert np.all(emap.values <= 1.0 + 1e-3)
    assert emap.values[1, 0] > 0.95
    assert optimal_duration(emap) == pytest.approx(9e-6)
    with pytest.raises(ValueError):
        efficiency_map(atom, first_order_splitter(), [], [0.01])
