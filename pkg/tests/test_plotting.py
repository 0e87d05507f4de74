import numpy as np

from doubleraman.analysis import EfficiencyMap
from doubleraman.plotting import plot_curves, plot_efficiency_map


def _map():
    d = np.geomspace(1, 60, 6) * 1e-6
    w = np.linspace(0.005, 0.2, 4)
    return EfficiencyMap(d, w, np.outer(np.linspace(0, 1, 6), np.ones(4)))


def test_svg_is_deterministic(tmp_path):
    for name in ("a.svg", "b.svg"):
        plot_efficiency_map(_map(), tmp_path / name, optimum_us=8.8, title="map", provenance="config_hash=1")
    a, b = (tmp_path / "a.svg").read_bytes(), (tmp_path / "b.svg").read_bytes()
    assert a == b
    assert b"config_hash=1" in a
    assert a.lstrip().startswith(b"<?xml")


def test_curves(tmp_path):
    w = np.linspace(0.01, 0.2, 5)
    plot_curves(w, {"one": np.ones(5), "half": 0.5 * np.ones(5)}, tmp_path / "c.svg")
    assert (tmp_path / "c.svg").stat().st_size > 0
