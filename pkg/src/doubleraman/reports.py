"""Experiment runners behind the command-line subcommands.

Every runner takes a resolved :class:`RunConfig`, an output directory and a
kernel cache, writes CSV/JSON/SVG files and returns a JSON-serializable
summary.  CSV files start with ``# config_hash=...`` comment lines and every
JSON file carries the same hash, so each output can be traced back to the
configuration that produced it.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from . import plotting
from .analysis import (
    doppler_box,
    duration_axis,
    efficiency_map,
    evaluate_family,
    first_order_splitter,
    optimal_duration,
    third_order_mirror,
    third_order_splitter,
    width_axis,
)
from .averaging import averaging_report
from .config import ConfigError, RunConfig
from .core import make_rb87
from .interferometer import individual_pulses, mach_zehnder, sequence_efficiency, shared_pulses
from .optimizer import (
    Target,
    default_config,
    optimize_interferometer,
    optimize_third_order,
    optimized_map,
)

log = logging.getLogger(__name__)

ATOMS = {"rb87": make_rb87}
MAP_FAMILIES = ("first_order_bs", "doppler_box_1", "doppler_box_2", "third_order_bs",
                "third_order_mirror")


def make_atom(config: RunConfig):
    try:
        return ATOMS[config.run.atom.lower()]()
    except KeyError:
        raise ConfigError(f"unknown atom {config.run.atom!r}; known: {sorted(ATOMS)}") from None


def _tol(config):
    return {"rel_tol": config.run.rel_tol, "abs_tol": config.run.abs_tol}


def _simplex(config):
    return default_config(max_evals=config.third_order.max_evals)


def _fixed_parameters(config):
    """``(alpha, beta)`` from the config, or None when they are to be optimized."""
    if not config.third_order.alpha:
        return None
    try:
        return float(config.third_order.alpha), float(config.third_order.beta)
    except ValueError as exc:
        raise ConfigError(f"[third_order] alpha/beta: {exc}") from exc


class Writer:
    """Writes provenance-stamped output files into one directory."""

    def __init__(self, out_dir, config: RunConfig):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config_hash = config.hash()
        self.files = []

    @property
    def comments(self):
        return (f"config_hash={self.config_hash}",)

    def path(self, name):
        path = self.out / name
        self.files.append(name)
        return path

    def json(self, name, data):
        data = dict(data, config_hash=self.config_hash)
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def table(self, name, columns, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.writelines(f"# {c}\n" for c in self.comments)
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])

    @property
    def provenance(self):
        return f"config_hash={self.config_hash}"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return value


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return str(value)


# ---------------------------------------------------------------------------
# efficiency-map
# ---------------------------------------------------------------------------


def _map_family(name, params):
    if name == "first_order_bs":
        return first_order_splitter()
    if name == "doppler_box_1":
        return doppler_box(1, "e->g")
    if name == "doppler_box_2":
        return doppler_box(2, "g->e")
    if name == "third_order_bs":
        return third_order_splitter(*params)
    if name == "third_order_mirror":
        return third_order_mirror(*params)
    raise ConfigError(f"unknown map family {name!r}; choose from {', '.join(MAP_FAMILIES)}")


def run_efficiency_map(config: RunConfig, out_dir, cache):
    """Efficiency map of one pulse family with its optimal duration.

    Third-order families without fixed ``(alpha, beta)`` are optimized cell
    by cell; the parameter maps are written alongside.
    """
    section = config.efficiency_map
    name = section.family
    atom = make_atom(config)
    durations = duration_axis(*section.durations_us, section.points_per_decade)
    widths = width_axis(section.widths[0], section.widths[1], int(section.widths[2]))
    params = _fixed_parameters(config)
    out = Writer(out_dir, config)
    alphas = betas = None
    if name.startswith("third_order") and params is None:
        target = Target.MIRROR if name == "third_order_mirror" else Target.BEAM_SPLITTER
        emap, alphas, betas = optimized_map(atom, target, durations, widths, config=_simplex(config),
                                            width_scale=config.third_order.width_scale,
                                            jobs=config.run.jobs, **_tol(config))
    else:
        if name.startswith("third_order"):
            family = (third_order_mirror if name == "third_order_mirror" else third_order_splitter)(
                *params, config.third_order.width_scale)
        else:
            family = _map_family(name, params)
        emap = efficiency_map(atom, family, durations, widths, cache=cache, **_tol(config))
    optimum_us = optimal_duration(emap, section.width_cut) * 1e6
    emap.metadata.update({"optimal_duration_us": optimum_us, "width_cut": section.width_cut,
                          "config_hash": out.config_hash})
    emap.write_csv(out.path(f"{name}.csv"), out.comments)
    out.json(f"{name}.json", emap.to_json())
    plotting.plot_efficiency_map(emap, out.path(f"{name}.svg"), optimum_us=optimum_us,
                                 title=name.replace("_", " "), provenance=out.provenance)
    if alphas is not None:
        rows = [(d, w, alphas[i, j], betas[i, j], emap.values[i, j])
                for i, d in enumerate(emap.durations_us) for j, w in enumerate(widths)]
        out.table(f"{name}_parameters.csv",
                  ["duration_us", "width_hbarK", "alpha", "beta", "efficiency"], rows)
        plotting.plot_parameter_maps(emap.durations_us, widths, {"alpha": alphas, "beta": betas},
                                     out.path(f"{name}_parameters.svg"), provenance=out.provenance)
    summary = {"family": name, "optimal_duration_us": optimum_us,
               "max_efficiency": float(emap.values.max())}
    if alphas is not None:
        summary["alpha_range"] = [float(alphas.min()), float(alphas.max())]
        summary["beta_range"] = [float(betas.min()), float(betas.max())]
    return summary, out.files


# ---------------------------------------------------------------------------
# sequence and compare
# ---------------------------------------------------------------------------

SEQUENCE_COLUMNS = ["first_order_bs", "doppler_box_1", "doppler_box_2", "pulse_product", "sequence"]


def sequence_curves(atom, widths, config: RunConfig, cache):
    """Single-pulse efficiencies of the three sequence pulses, their product
    and the efficiency of the full sequence, per width."""
    d = config.durations
    tol = _tol(config)
    curves = {
        "first_order_bs": evaluate_family(atom, first_order_splitter(), d.first_order_us, widths,
                                          cache=cache, **tol),
        "doppler_box_1": evaluate_family(atom, doppler_box(1, "e->g"), d.box_us, widths,
                                         cache=cache, **tol),
        "doppler_box_2": evaluate_family(atom, doppler_box(2, "g->e"), d.box_us, widths,
                                         cache=cache, **tol),
    }
    curves["pulse_product"] = curves["first_order_bs"] * curves["doppler_box_1"] * curves["doppler_box_2"]
    curves["sequence"] = sequence_efficiency(atom, widths, d.first_order_us, d.box_us, cache=cache, **tol)
    return curves


def _width_rows(widths, curves, columns):
    return [(w, *(curves[c][j] for c in columns)) for j, w in enumerate(widths)]


def run_sequence(config: RunConfig, out_dir, cache):
    """Three-pulse sequence against its individual pulses."""
    atom = make_atom(config)
    widths = width_axis(config.compare.widths[0], config.compare.widths[1], int(config.compare.widths[2]))
    curves = sequence_curves(atom, widths, config, cache)
    out = Writer(out_dir, config)
    out.table("sequence.csv", ["width_hbarK", *SEQUENCE_COLUMNS], _width_rows(widths, curves, SEQUENCE_COLUMNS))
    plotting.plot_curves(widths, {k: curves[k] for k in SEQUENCE_COLUMNS}, out.path("sequence.svg"),
                         title="sequence and its pulses", provenance=out.provenance,
                         styles={"pulse_product": "--"})
    summary = {"schema": "sequence/1", "durations_us": vars(config.durations),
               "widths_hbarK": widths, "curves": curves}
    out.json("sequence.json", summary)
    return summary, out.files


def third_order_curves(atom, widths, config: RunConfig, cache):
    """Third-order splitter and mirror efficiencies per width, with
    ``(alpha, beta)`` optimized per width unless fixed in the config."""
    params = _fixed_parameters(config)
    curves = {}
    for target, duration in ((Target.BEAM_SPLITTER, config.durations.third_order_us),
                             (Target.MIRROR, config.durations.mirror_us)):
        name = "third_order_bs" if target is Target.BEAM_SPLITTER else "third_order_mirror"
        if params is None:
            opts = [optimize_third_order(atom, duration, w, target, cache=cache, config=_simplex(config),
                                         width_scale=config.third_order.width_scale, **_tol(config))
                    for w in widths]
            curves[name] = np.array([o.value for o in opts])
            curves[f"{name}_alpha"] = np.array([o.alpha for o in opts])
            curves[f"{name}_beta"] = np.array([o.beta for o in opts])
        else:
            family = _map_family(name, params)
            curves[name] = evaluate_family(atom, family, duration, widths, cache=cache, **_tol(config))
            curves[f"{name}_alpha"] = np.full(widths.size, params[0])
            curves[f"{name}_beta"] = np.full(widths.size, params[1])
    return curves


COMPARE_COLUMNS = SEQUENCE_COLUMNS + [
    "third_order_bs", "third_order_bs_alpha", "third_order_bs_beta",
    "third_order_mirror", "third_order_mirror_alpha", "third_order_mirror_beta",
]


def run_compare(config: RunConfig, out_dir, cache):
    """Per-width efficiencies of all methods at their configured durations."""
    atom = make_atom(config)
    widths = width_axis(config.compare.widths[0], config.compare.widths[1], int(config.compare.widths[2]))
    curves = sequence_curves(atom, widths, config, cache)
    curves.update(third_order_curves(atom, widths, config, cache))
    out = Writer(out_dir, config)
    out.table("compare.csv", ["width_hbarK", *COMPARE_COLUMNS], _width_rows(widths, curves, COMPARE_COLUMNS))
    plotting.plot_curves(widths, {k: curves[k] for k in ("first_order_bs", "sequence", "third_order_bs",
                                                         "third_order_mirror")},
                         out.path("compare_methods.svg"), title="beam splitters and mirror",
                         provenance=out.provenance, styles={"third_order_mirror": "--"})
    plotting.plot_curves(widths, {k: curves[k] for k in SEQUENCE_COLUMNS}, out.path("compare_sequence.svg"),
                         title="sequence and its pulses", provenance=out.provenance,
                         styles={"pulse_product": "--"})
    summary = {"schema": "compare/1", "durations_us": vars(config.durations),
               "widths_hbarK": widths, "curves": curves}
    out.json("compare.json", summary)
    return summary, out.files


# ---------------------------------------------------------------------------
# interferometer
# ---------------------------------------------------------------------------


def run_interferometer(config: RunConfig, out_dir, cache):
    """Fringes with shared and with individually optimized pulses, plus the
    amplitude and contrast map of the shared-parameter interferometer."""
    section = config.interferometer
    atom = make_atom(config)
    tol = _tol(config)
    d = config.durations
    width, sep = section.width, section.separation_time_s
    mz = dict(cache=cache, points=section.fringe_points, phase_reference=section.phase_reference, **tol)

    shared_opt = optimize_interferometer(atom, d.third_order_us, width, separation_time=sep, cache=cache,
                                         config=_simplex(config), **tol)
    shared = mach_zehnder(atom, width, shared_pulses(atom, d.third_order_us, shared_opt.alpha, shared_opt.beta),
                          sep, **mz)
    bs = optimize_third_order(atom, d.third_order_us, width, Target.BEAM_SPLITTER, cache=cache,
                              config=_simplex(config), **tol)
    mirror = optimize_third_order(atom, d.mirror_us, width, Target.MIRROR, cache=cache,
                                  config=_simplex(config), **tol)
    pulses = individual_pulses(atom, d.third_order_us, (bs.alpha, bs.beta), d.mirror_us,
                               (mirror.alpha, mirror.beta))
    individual = mach_zehnder(atom, width, pulses, sep, **mz)

    out = Writer(out_dir, config)
    signals = {"shared": shared, "individual": individual}
    for label, sig in signals.items():
        sig.write_csv(out.path(f"mz_{label}.csv"), out.comments)
    plotting.plot_fringes(signals, out.path("mz_fringes.svg"), provenance=out.provenance)
    summary = {
        "schema": "interferometer/1",
        "width_hbarK": width,
        "separation_time_s": sep,
        "phase_reference": section.phase_reference,
        "shared": dict(_signal_summary(shared), alpha=shared_opt.alpha, beta=shared_opt.beta,
                       duration_us=d.third_order_us),
        "individual": dict(_signal_summary(individual),
                           splitter={"duration_us": d.third_order_us, "alpha": bs.alpha, "beta": bs.beta},
                           mirror={"duration_us": d.mirror_us, "alpha": mirror.alpha, "beta": mirror.beta}),
    }
    if section.map_durations_us and section.map_widths:
        summary["map"] = _interferometer_map(atom, config, cache, out)
    out.json("interferometer.json", summary)
    return summary, out.files


def _signal_summary(sig):
    return {"amplitude": sig.amplitude, "contrast": sig.contrast, "phase_offset": sig.phase_offset,
            "fit_residual": sig.residual}


def _interferometer_map(atom, config, cache, out):
    section = config.interferometer
    durations = np.asarray(section.map_durations_us, float)
    widths = np.asarray(section.map_widths, float)
    amp = np.empty((durations.size, widths.size))
    con, alphas, betas = amp.copy(), amp.copy(), amp.copy()
    for i, dur in enumerate(durations):
        for j, w in enumerate(widths):
            opt = optimize_interferometer(atom, dur, w, separation_time=section.separation_time_s,
                                          cache=cache, config=_simplex(config), **_tol(config))
            sig = mach_zehnder(atom, w, shared_pulses(atom, dur, opt.alpha, opt.beta),
                               section.separation_time_s, cache=cache, points=section.fringe_points,
                               phase_reference=section.phase_reference, **_tol(config))
            amp[i, j], con[i, j], alphas[i, j], betas[i, j] = sig.amplitude, sig.contrast, opt.alpha, opt.beta
    rows = [(d, w, alphas[i, j], betas[i, j], amp[i, j], con[i, j])
            for i, d in enumerate(durations) for j, w in enumerate(widths)]
    out.table("mz_map.csv", ["duration_us", "width_hbarK", "alpha", "beta", "amplitude", "contrast"], rows)
    plotting.plot_parameter_maps(durations, widths, {"amplitude": amp, "contrast": con},
                                 out.path("mz_map.svg"), provenance=out.provenance)
    return {"durations_us": durations, "widths_hbarK": widths, "amplitude": amp, "contrast": con}


# ---------------------------------------------------------------------------
# averaging-check and optimize
# ---------------------------------------------------------------------------


def run_averaging_check(config: RunConfig, out_dir, cache=None):
    section = config.averaging
    report = averaging_report(section.amplitudes, section.tolerance, section.n_max)
    out = Writer(out_dir, config)
    out.json("averaging.json", report)
    return report, out.files


def run_optimize(config: RunConfig, out_dir, cache):
    """Single-cell optimization of ``(alpha, beta)`` with its trace.

    ``target`` is ``bs``, ``mirror`` or ``mz`` (fringe amplitude of the
    shared-parameter interferometer).
    """
    section = config.optimize
    atom = make_atom(config)
    if section.target == "mz":
        opt = optimize_interferometer(atom, section.duration_us, section.width,
                                      separation_time=config.interferometer.separation_time_s,
                                      cache=cache, config=_simplex(config), **_tol(config))
    else:
        try:
            target = Target(section.target)
        except ValueError:
            raise ConfigError(f"unknown optimize target {section.target!r} (bs, mirror or mz)") from None
        opt = optimize_third_order(atom, section.duration_us, section.width, target, cache=cache,
                                   config=_simplex(config), width_scale=config.third_order.width_scale,
                                   **_tol(config))
    out = Writer(out_dir, config)
    opt.result.write_trace(out.path("optimize_trace.csv"), ["alpha", "beta"], out.comments)
    summary = {
        "schema": "optimize/1",
        "target": section.target,
        "duration_us": section.duration_us,
        "width_hbarK": section.width,
        "alpha": opt.alpha,
        "beta": opt.beta,
        "value": opt.value,
        "evaluations": opt.result.evals,
        "converged": opt.result.converged,
    }
    out.json("optimize.json", summary)
    return summary, out.files


COMMANDS = {
    "efficiency-map": run_efficiency_map,
    "compare": run_compare,
    "sequence": run_sequence,
    "interferometer": run_interferometer,
    "averaging-check": run_averaging_check,
    "optimize": run_optimize,
}

