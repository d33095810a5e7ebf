"""Batch scenario runner: figure presets, scaling studies, method comparison.

Usage::

    excikit run config.json
    excikit scaling config.json
    excikit compare config.json
    excikit presets

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.integrate import trapezoid

from . import analytic, laplace, oracle
from .core import (
    AtomEnsembleConfig, Reservoirs, Topology, atom_excited, bell, symmetric, validate_config,
)
from .errors import (
    ExcikitError, NumericalError, UnsupportedConfiguration, ValidationError,
)
from .kernels import Markovian, Ohmic, PhotonicCrystal

log = logging.getLogger("excikit")

SCENARIOS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "scaling", "bell", "custom")
METHODS = ("analytic", "laplace_numeric", "oracle_modes", "oracle_convolution")
INITS = ("atom1_excited", "symmetric", "bell_plus", "bell_minus")
CSV_COLUMNS = ("tau", "atom_index", "re_amplitude", "im_amplitude", "population",
               "re_polarisation", "im_polarisation")
FIG_DETUNINGS = (-10.0, -5.0, 0.0, 5.0, 10.0)

# pairwise tolerances for compare_methods
PAIR_TOLERANCE = {
    frozenset({"analytic", "laplace_numeric"}): 1e-6,
    "oracle_convolution": 1e-3,
    "oracle_modes": 5e-3,
}

NOTES = {
    "units": "J and all detunings are in units of the band-edge coupling beta "
             "(J' = J/beta); times are in units of 1/beta.",
    "detuned_ends": "end-detuned chains shift atom 1 by 2d, every interior atom "
                    "2..N-1 by d and atom N by 0.",
    "chain_ends": "shared-reservoir chains: analytic and laplace_numeric give the end "
                  "atoms only, first order in J; polarisation columns are NaN there.",
}


def _pc(delta, **kw):
    return AtomEnsembleConfig.photonic(kw.pop("n_atoms", 5), kw.pop("dipole_coupling", 0.1),
                                       delta, **kw)


# the end-atom closed form is first order in J; the memory-kernel oracle shows the full chain
_CHAIN_METHODS = ("analytic", "laplace_numeric", "oracle_convolution")

PRESETS: dict[str, dict[str, Any]] = {
    "fig1": dict(help="N=5, J=0.1, atom 1 excited; population of atom 1 for each detuning",
                 ensemble=_pc(0.0), init="atom1_excited", plot_atom=1),
    "fig2": dict(help="same runs as fig1; population of atom 2",
                 ensemble=_pc(0.0), init="atom1_excited", plot_atom=2),
    "fig3": dict(help="N=100, J=0.1, atom 1 excited; population of atom 1",
                 ensemble=_pc(0.0, n_atoms=100), init="atom1_excited", plot_atom=1),
    "fig4": dict(help="N=10, J=0.1, symmetric start c_i=1/sqrt(10)",
                 ensemble=_pc(0.0, n_atoms=10), init="symmetric", plot_atom=1),
    "fig5": dict(help="Bell pair (plus) on two atoms, delta=-5, N in {2, 4, 10, 20}",
                 ensemble=_pc(-5.0, n_atoms=2), init="bell_plus", plot_atom=1,
                 n_list=(2, 4, 10, 20)),
    "fig6": dict(help="nearest-neighbour chain N=5, J=0.1, atom 1 excited; first atom",
                 ensemble=_pc(0.0, topology=Topology.NEAREST_NEIGHBOUR),
                 init="atom1_excited", plot_atom=1, methods=_CHAIN_METHODS),
    "fig7": dict(help="nearest-neighbour chain N=5, J=0.1, atom 1 excited; last atom",
                 ensemble=_pc(0.0, topology=Topology.NEAREST_NEIGHBOUR),
                 init="atom1_excited", plot_atom=5, methods=_CHAIN_METHODS),
    "bell": dict(help="Bell pair (minus), delta=-5, N in {2, 10}: decoupled, constant populations",
                 ensemble=_pc(-5.0, n_atoms=2), init="bell_minus", plot_atom=1, n_list=(2, 10)),
    "scaling": dict(help="decay-rate exponent, symmetric start, delta=0, J=0, N in {4..64}",
                    ensemble=_pc(0.0, n_atoms=4, dipole_coupling=0.0), init="symmetric",
                    plot_atom=1, n_list=(4, 8, 16, 32, 64)),
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved batch configuration.

    ``detunings`` and ``n_list`` define the sweep cells; ``None`` takes
    the scenario default.
    """

    scenario: str
    ensemble: AtomEnsembleConfig
    init: Any = "atom1_excited"
    tau_max: float = 100.0
    tau_steps: int = 2000
    methods: tuple = ("analytic", "laplace_numeric")
    output_dir: Path = Path("excikit_out")
    seed: int = 0
    detunings: tuple | None = None
    n_list: tuple | None = None
    plots: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if not (isinstance(self.tau_steps, int) and self.tau_steps >= 2):
            raise ValidationError("tau_steps must be an integer >= 2")
        if not (math.isfinite(self.tau_max) and self.tau_max > 0):
            raise ValidationError("tau_max must be positive and finite")
        if not self.methods:
            raise ValidationError("methods must be non-empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValidationError(f"unknown methods {bad}")
        if isinstance(self.init, str):
            if self.init not in INITS:
                raise ValidationError(f"unknown init preset {self.init!r}")
        else:
            amps = np.asarray(self.init, complex)
            if np.sum(np.abs(amps) ** 2) > 1 + 1e-12:
                raise ValidationError("explicit amplitudes must satisfy sum |c_i|^2 <= 1")
        validate_config(self.ensemble)

    @property
    def tau_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, self.tau_steps + 1)


# --- configuration parsing ---------------------------------------------------

def _reject_unknown(d: dict, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ValidationError(f"unknown keys in {where}: {sorted(extra)}")


def _parse_kernel(d, detuning):
    if not isinstance(d, dict) or "type" not in d:
        raise ValidationError("kernel must be an object with a 'type'")
    kind = d["type"]
    body = {k: v for k, v in d.items() if k != "type"}
    if kind == "photonic_crystal":
        _reject_unknown(body, ("beta", "delta"), "kernel")
        return PhotonicCrystal(float(body.get("beta", 1.0)), float(body.get("delta", detuning)))
    if kind == "ohmic":
        _reject_unknown(body, ("lam", "cutoff", "exponent", "omega0"), "kernel")
        try:
            return Ohmic(**{k: float(v) for k, v in body.items()})
        except TypeError as exc:
            raise ValidationError(f"ohmic kernel: {exc}") from None
    if kind == "markovian":
        _reject_unknown(body, ("gamma",), "kernel")
        return Markovian(float(body.get("gamma", 1.0)))
    raise ValidationError(f"unknown kernel type {kind!r}")


def _kernel_json(spec):
    name = {PhotonicCrystal: "photonic_crystal", Ohmic: "ohmic", Markovian: "markovian"}[type(spec)]
    return {"type": name, **asdict(spec)}


def _parse_ensemble(d, base: AtomEnsembleConfig | None):
    if not isinstance(d, dict):
        raise ValidationError("ensemble must be an object")
    keys = ("n_atoms", "dipole_coupling", "detuning", "topology", "reservoirs", "kernel",
            "end_detuning")
    _reject_unknown(d, keys, "ensemble")
    if base is None:
        missing = [k for k in ("n_atoms", "dipole_coupling", "detuning") if k not in d]
        if missing:
            raise ValidationError(f"ensemble is missing {missing}")
        base = _pc(float(d["detuning"]))
    n = d.get("n_atoms", base.n_atoms)
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError("n_atoms must be an integer")
    det = float(d.get("detuning", base.detuning))
    if "kernel" in d:
        kernel = _parse_kernel(d["kernel"], det)
    elif isinstance(base.kernel, PhotonicCrystal):
        kernel = replace(base.kernel, delta=det)
    else:
        kernel = base.kernel
    try:
        cfg = AtomEnsembleConfig(n, float(d.get("dipole_coupling", base.dipole_coupling)), det,
                                 Topology(d.get("topology", base.topology)),
                                 Reservoirs(d.get("reservoirs", base.reservoirs)), kernel,
                                 float(d.get("end_detuning", base.end_detuning)))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return validate_config(cfg) or cfg


def _parse_init(v):
    if isinstance(v, str):
        return v
    if not isinstance(v, list) or not v:
        raise ValidationError("init must be a preset name or a list of amplitudes")
    out = []
    for a in v:
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            out.append(complex(a))
        elif isinstance(a, list) and len(a) == 2:
            out.append(complex(float(a[0]), float(a[1])))
        else:
            raise ValidationError("explicit amplitudes are numbers or [re, im] pairs")
    return tuple(out)


def load_config(source) -> RunConfig:
    """Build a :class:`RunConfig` from a JSON file path or a mapping.

    Keys mirror the RunConfig fields; unknown keys are rejected. Preset
    scenarios fill every field that is not given.
    """
    if isinstance(source, (str, os.PathLike)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from None
    else:
        data = dict(source)
    if not isinstance(data, dict):
        raise ValidationError("configuration must be a JSON object")
    fields_ = ("scenario", "ensemble", "init", "tau_max", "tau_steps", "methods",
               "output_dir", "seed", "detunings", "n_list", "plots")
    _reject_unknown(data, fields_, "configuration")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise ValidationError(f"scenario must be one of {SCENARIOS}")
    preset = PRESETS.get(scenario, {})
    base = preset.get("ensemble")
    if "ensemble" in data:
        ens = _parse_ensemble(data["ensemble"], base)
    elif base is not None:
        ens = base
    else:
        raise ValidationError("custom scenario needs an ensemble")
    steps = data.get("tau_steps", 2000)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ValidationError("tau_steps must be an integer")
    methods = data.get("methods", list(preset.get("methods", ("analytic", "laplace_numeric"))))
    if not isinstance(methods, list):
        raise ValidationError("methods must be a list")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("seed must be an integer")
    det = data.get("detunings")
    nl = data.get("n_list")
    return RunConfig(
        scenario=scenario,
        ensemble=ens,
        init=_parse_init(data.get("init", preset.get("init", "atom1_excited"))),
        tau_max=float(data.get("tau_max", 100.0)),
        tau_steps=steps,
        methods=tuple(dict.fromkeys(methods)),
        output_dir=Path(data.get("output_dir", "excikit_out")),
        seed=seed,
        detunings=None if det is None else tuple(float(x) for x in det),
        n_list=None if nl is None else tuple(int(x) for x in nl),
        plots=bool(data.get("plots", True)),
    )


def config_to_json(config: RunConfig) -> dict:
    e = config.ensemble
    init = config.init if isinstance(config.init, str) else [[a.real, a.imag] for a in config.init]
    return {
        "scenario": config.scenario,
        "ensemble": {"n_atoms": e.n_atoms, "dipole_coupling": e.dipole_coupling,
                     "detuning": e.detuning, "topology": e.topology.value,
                     "reservoirs": e.reservoirs.value, "kernel": _kernel_json(e.kernel),
                     "end_detuning": e.end_detuning},
        "init": init,
        "tau_max": config.tau_max,
        "tau_steps": config.tau_steps,
        "methods": list(config.methods),
        "output_dir": str(config.output_dir),
        "seed": config.seed,
        "detunings": None if config.detunings is None else list(config.detunings),
        "n_list": None if config.n_list is None else list(config.n_list),
        "plots": config.plots,
    }


# --- cells and methods -------------------------------------------------------

@dataclass
class Cell:
    label: str
    slug: str
    ensemble: AtomEnsembleConfig
    init: np.ndarray


def initial_amplitudes(init, n_atoms):
    if isinstance(init, str):
        return {"atom1_excited": lambda: atom_excited(n_atoms),
                "symmetric": lambda: symmetric(n_atoms),
                "bell_plus": lambda: bell(n_atoms, +1),
                "bell_minus": lambda: bell(n_atoms, -1)}[init]()
    c = np.asarray(init, complex)
    if c.size != n_atoms:
        raise ValidationError(f"init has {c.size} amplitudes for {n_atoms} atoms")
    return c


def _fmt_num(x):
    return f"{x:+g}".replace("+", "p").replace("-", "m")


def build_cells(config: RunConfig) -> list[Cell]:
    """Sweep cells of a scenario (one per detuning, or one per N)."""
    ens = config.ensemble
    cells = []
    if config.scenario in ("fig5", "bell"):
        n_list = config.n_list or PRESETS[config.scenario]["n_list"]
        for n in n_list:
            e = ens.with_(n_atoms=int(n))
            cells.append(Cell(f"N={n}", f"n{n}", e, initial_amplitudes(config.init, int(n))))
        return cells
    if config.scenario == "custom":
        dets = config.detunings or (ens.detuning,)
    else:
        dets = config.detunings or FIG_DETUNINGS
    for d in dets:
        e = ens.with_(detuning=float(d))
        cells.append(Cell(f"delta={d:g}", f"delta{_fmt_num(d)}", e,
                          initial_amplitudes(config.init, e.n_atoms)))
    return cells


@dataclass
class Series:
    """Trajectory of a subset of atoms; ``polarisation`` may be NaN."""

    tau: np.ndarray
    atoms: list  # 1-based indices
    amplitudes: np.ndarray  # (len(atoms), T)
    polarisation: np.ndarray
    path: str
    info: dict = field(default_factory=dict)


def _full_series(traj, path, info=None):
    atoms = list(range(1, traj.n_atoms + 1))
    return Series(np.asarray(traj.tau_grid), atoms, np.asarray(traj.amplitudes),
                  np.asarray(traj.polarisation), path, dict(info or traj.info))


def _is_chain_shared(e):
    return e.topology == Topology.NEAREST_NEIGHBOUR and e.reservoirs == Reservoirs.SHARED_SINGLE


def _json_safe(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return _json_safe(v.tolist())
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _run_analytic(e, c0, tau):
    if isinstance(e.kernel, Markovian):
        return _full_series(analytic.markovian_amplitudes(e, c0, tau), "markovian_eigen")
    if isinstance(e.kernel, PhotonicCrystal) and e.reservoirs == Reservoirs.SHARED_SINGLE:
        if e.topology == Topology.FULLY_SYMMETRIC:
            t = analytic.pc_symmetric_amplitudes(e, c0, tau)
            return _full_series(t, "closed_form_symmetric")
        if e.end_detuning == 0 and np.allclose(c0, atom_excited(e.n_atoms), atol=1e-14, rtol=0):
            r = analytic.pc_nn_amplitudes(e, tau)
            info = {"roots": r.roots.roots.tolist(), "coefficients": r.roots.coefficients.tolist(),
                    "signs": list(r.roots.signs), "residuals": r.roots.residuals.tolist()}
            return Series(r.tau, [1, e.n_atoms], np.vstack([r.c1, r.cN]),
                          np.full(r.tau.size, np.nan + 0j), "closed_form_chain_ends", info)
    raise UnsupportedConfiguration("no closed form for this configuration")


def _run_laplace(e, c0, tau):
    if _is_chain_shared(e):
        if e.end_detuning:
            f = laplace.detuned_ends_cN(e, c0)
            cN = laplace.invert_laplace(f, tau)
            return Series(tau, [e.n_atoms], cN[None, :], np.full(tau.size, np.nan + 0j),
                          "laplace_inversion:detuned_ends_cN")
        parts = laplace.shared_nn_amplitudes(e, c0, order=1)
        f = laplace.LaplaceAmplitude(
            lambda s: np.stack([parts[k].eval(s) for k in ("c1", "cN", "cplus")]), 0.0,
            np.array([parts[k].initial_value for k in ("c1", "cN", "cplus")]),
            "shared_nn_o1", frequency_scale=parts["c1"].frequency_scale)
        out = laplace.invert_laplace(f, tau)
        return Series(tau, [1, e.n_atoms], out[:2], out[2], "laplace_inversion:shared_nn_ends_o1")
    f = laplace.laplace_amplitudes(e, c0)
    amps = laplace.invert_laplace(f, tau)
    return Series(tau, list(range(1, e.n_atoms + 1)), amps, amps.sum(axis=0),
                  f"laplace_inversion:{f.label}")


def _run_modes(e, c0, tau):
    grid = oracle.build_mode_grid(e.kernel)
    t = oracle.integrate_discretized_modes(e, c0, grid, tau)
    info = {k: v for k, v in t.info.items() if k != "mode_population"}
    info["max_mode_population"] = float(np.max(t.info["mode_population"]))
    return _full_series(t, "oracle_discretized_modes", info)


def _run_convolution(e, c0, tau):
    t = oracle.integrate_integrodifferential(e, c0, tau)
    return _full_series(t, "oracle_memory_kernel")


RUNNERS = {
    "analytic": _run_analytic,
    "laplace_numeric": _run_laplace,
    "oracle_modes": _run_modes,
    "oracle_convolution": _run_convolution,
}


def run_method(method, ensemble, init, tau) -> tuple[Series | None, dict]:
    """Run one method; numerical and applicability errors are captured, not raised."""
    record: dict[str, Any] = {"method": method}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            s = RUNNERS[method](ensemble, init, np.asarray(tau, float))
        except (NumericalError, UnsupportedConfiguration) as exc:
            record.update(status="error", error=type(exc).__name__, message=str(exc))
            s = None
        except ValidationError as exc:
            record.update(status="error", error=type(exc).__name__, message=str(exc))
            s = None
    record["warnings"] = sorted({str(w.message) for w in caught})
    if s is not None:
        record.update(status="ok", path=s.path, atoms=s.atoms, info=_json_safe(s.info))
    return s, record


# --- output ------------------------------------------------------------------

def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _g17(x):
    return f"{x:.17g}"


def series_csv(s: Series) -> bytes:
    buf = io.StringIO(newline="")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    amps = s.amplitudes
    for k, t in enumerate(s.tau):
        p = s.polarisation[k]
        pr, pi = _g17(p.real), _g17(p.imag)
        ts = _g17(t)
        for row, atom in enumerate(s.atoms):
            a = amps[row, k]
            pop = a.real * a.real + a.imag * a.imag
            buf.write(f"{ts},{atom},{_g17(a.real)},{_g17(a.imag)},{_g17(pop)},{pr},{pi}\n")
    return buf.getvalue().encode("utf-8")


def read_csv(path) -> dict[str, np.ndarray]:
    """Load a trajectory CSV written by :func:`series_csv`."""
    raw = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    return {name: raw[name] for name in raw.dtype.names}


def _threads():
    v = os.environ.get("EXCIKIT_THREADS")
    if not v:
        return None
    try:
        n = int(v)
    except ValueError:
        raise ValidationError("EXCIKIT_THREADS must be a positive integer") from None
    if n < 1:
        raise ValidationError("EXCIKIT_THREADS must be a positive integer")
    return n


def _map_cells(fn, items):
    n = _threads()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _plot_atom(config, cell):
    p = PRESETS.get(config.scenario, {}).get("plot_atom", 1)
    return cell.ensemble.n_atoms if config.scenario == "fig7" else p


def _write_manifest(out: Path, files, config):
    entries = []
    for f in sorted(files):
        entries.append({"file": f, "sha256": hashlib.sha256((out / f).read_bytes()).hexdigest()})
    doc = {"scenario": config.scenario, "files": entries}
    _atomic_write(out / "manifest.json", (json.dumps(doc, indent=2) + "\n").encode())


def run_scenario(config: RunConfig) -> dict:
    """Run every cell of a scenario with every method and write the bundle.

    Files: one CSV per (cell, method), ``metadata.json``, optional PNG per
    method, and ``manifest.json`` last. Per-method numerical errors are
    recorded and do not stop other methods.
    """
    if config.scenario == "scaling":
        return run_scaling(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tau = config.tau_grid
    cells = build_cells(config)
    jobs = [(c, m) for c in cells for m in config.methods]

    def work(job):
        cell, method = job
        s, rec = run_method(method, cell.ensemble, cell.init, tau)
        rec["cell"] = cell.label
        if s is not None:
            name = f"{config.scenario}_{cell.slug}_{method}.csv"
            _atomic_write(out / name, series_csv(s))
            rec["file"] = name
        return cell, method, s, rec

    results = _map_cells(work, jobs)
    files = [r[3]["file"] for r in results if "file" in r[3]]

    if config.plots:
        for method in config.methods:
            curves = []
            for cell, m, s, _ in results:
                if m != method or s is None:
                    continue
                atom = _plot_atom(config, cell)
                if atom in s.atoms:
                    a = s.amplitudes[s.atoms.index(atom)]
                    curves.append((cell.label, s.tau, a.real ** 2 + a.imag ** 2))
            if curves:
                from .plotting import plot_populations
                name = f"{config.scenario}_{method}.png"
                plot_populations(curves, out / name,
                                 title=f"{config.scenario}: atom {_plot_atom(config, cells[0])} ({method})")
                files.append(name)

    meta = {
        "config": config_to_json(config),
        "cells": [{"label": c.label, "n_atoms": c.ensemble.n_atoms, "detuning": c.ensemble.detuning,
                   "init": [[complex(a).real, complex(a).imag] for a in c.init]} for c in cells],
        "runs": [r[3] for r in results],
        "tolerances": {"laplace_numeric": {"target": 1e-11, "accept": 1e-7},
                       "oracle_modes": {"chebyshev_tol": 1e-15, "kernel_l2": 0.02},
                       "oracle_convolution": {"step": 1e-3}},
        "notes": NOTES,
    }
    _atomic_write(out / "metadata.json", (json.dumps(_json_safe(meta), indent=2) + "\n").encode())
    files.append("metadata.json")
    _write_manifest(out, files, config)
    failed = [r[3] for r in results if r[3]["status"] != "ok"]
    return {"output_dir": str(out), "files": sorted(files), "failed": failed,
            "runs": [r[3] for r in results]}


def expected_exponent(ensemble: AtomEnsembleConfig, J: float):
    """Reference exponent and tolerance band for a scaling study."""
    if isinstance(ensemble.kernel, Markovian):
        return 1.0, 0.05
    if J == 0:
        return 2.0 / 3.0, 0.1
    return 1.0, 0.15


def run_scaling(config: RunConfig, n_list: Sequence[int] | None = None, J: float | None = None) -> dict:
    """Fit the decay-rate exponent over ensemble sizes and write a report.

    Writes ``scaling.csv`` (columns ``n_atoms,decay_rate``) and
    ``scaling.json`` with the exponent, its standard error and the
    pass/fail verdict against the expected band.
    """
    n_list = tuple(n_list or config.n_list or PRESETS["scaling"]["n_list"])
    if len(n_list) < 4:
        raise ValidationError("n_list needs at least four entries")
    J = config.ensemble.dipole_coupling if J is None else float(J)
    res = analytic.scaling_fit(config.ensemble, n_list, J)
    ref, band = expected_exponent(config.ensemble, J)
    out = Path(config.output_dir)
    lines = ["n_atoms,decay_rate"] + [f"{n},{_g17(r)}" for n, r in zip(res.n_list, res.rates)]
    _atomic_write(out / "scaling.csv", ("\n".join(lines) + "\n").encode())
    report = {
        "config": config_to_json(config), "J": J, "n_list": list(map(int, res.n_list)),
        "rates": res.rates.tolist(), "exponent": res.exponent, "stderr": res.stderr,
        "expected": ref, "band": band, "pass": bool(abs(res.exponent - ref) <= band),
        "notes": NOTES,
    }
    _atomic_write(out / "scaling.json", (json.dumps(_json_safe(report), indent=2) + "\n").encode())
    _write_manifest(out, ["scaling.csv", "scaling.json"], config)
    return report


def _pair_tolerance(a, b):
    if frozenset({a, b}) in PAIR_TOLERANCE:
        return PAIR_TOLERANCE[frozenset({a, b})]
    tols = [PAIR_TOLERANCE[m] for m in (a, b) if m in PAIR_TOLERANCE]
    return max(tols) if tols else 1e-6


def discrepancy(s1: Series, s2: Series):
    """Max and RMS-in-time amplitude differences over the atoms both series hold."""
    common = [a for a in s1.atoms if a in s2.atoms]
    if not common:
        return None
    d = np.array([s1.amplitudes[s1.atoms.index(a)] - s2.amplitudes[s2.atoms.index(a)] for a in common])
    ad = np.abs(d)
    tau = s1.tau
    span = tau[-1] - tau[0] if tau.size > 1 else 1.0
    l2 = float(np.sqrt(trapezoid(ad ** 2, tau, axis=1).max() / span)) if tau.size > 1 else float(ad.max())
    return float(ad.max()), l2, common


def compare_methods(config: RunConfig) -> dict:
    """Pairwise discrepancies between every pair of selected methods, per cell."""
    if len(config.methods) < 2:
        raise ValidationError("compare needs at least two methods")
    tau = config.tau_grid
    cells = build_cells(config)

    def work(cell):
        got = {}
        recs = []
        for m in config.methods:
            s, rec = run_method(m, cell.ensemble, cell.init, tau)
            recs.append(rec)
            if s is not None:
                got[m] = s
        rows = []
        names = [m for m in config.methods if m in got]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                d = discrepancy(got[a], got[b])
                if d is None:
                    continue
                tol = _pair_tolerance(a, b)
                rows.append({"cell": cell.label, "method_a": a, "method_b": b, "max_abs": d[0],
                             "l2": d[1], "tolerance": tol, "atoms": d[2], "pass": d[0] <= tol})
        return rows, recs

    results = _map_cells(work, cells)
    rows = [r for rr, _ in results for r in rr]
    out = Path(config.output_dir)
    lines = ["cell,method_a,method_b,max_abs,l2,tolerance,pass"]
    lines += [f"{r['cell']},{r['method_a']},{r['method_b']},{_g17(r['max_abs'])},{_g17(r['l2'])},"
              f"{r['tolerance']:g},{str(r['pass']).lower()}" for r in rows]
    _atomic_write(out / "compare.csv", ("\n".join(lines) + "\n").encode())
    report = {"config": config_to_json(config), "pairs": rows,
              "runs": [rec for _, recs in results for rec in recs],
              "pass": all(r["pass"] for r in rows), "notes": NOTES}
    _atomic_write(out / "compare.json", (json.dumps(_json_safe(report), indent=2) + "\n").encode())
    _write_manifest(out, ["compare.csv", "compare.json"], config)
    return report


# --- entry point ---------------------------------------------------------------

def _presets_text():
    lines = []
    for name, p in PRESETS.items():
        lines.append(f"{name:8s} {p['help']}")
    lines.append(f"{'custom':8s} user-supplied ensemble (optionally swept over 'detunings')")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="excikit", description="single-excitation reservoir dynamics")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("run", "scaling", "compare"):
        p = sub.add_parser(verb)
        p.add_argument("config", help="JSON configuration file")
    sub.add_parser("presets", help="list figure presets")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.verb == "presets":
        print(_presets_text())
        return 0
    try:
        config = load_config(args.config)
        if args.verb == "run":
            res = run_scenario(config)
            if config.scenario == "scaling":
                print(f"exponent {res['exponent']:.4f} +- {res['stderr']:.4f} "
                      f"(expected {res['expected']:.3f} +- {res['band']}) "
                      f"{'PASS' if res['pass'] else 'FAIL'}")
            else:
                for f in res["failed"]:
                    print(f"{f['cell']} {f['method']}: {f['error']}: {f['message']}", file=sys.stderr)
                print(f"wrote {len(res['files'])} files to {res['output_dir']}")
                if res["failed"] and len(res["failed"]) == len(res["runs"]):
                    return 3
        elif args.verb == "scaling":
            res = run_scaling(config)
            print(f"exponent {res['exponent']:.4f} +- {res['stderr']:.4f} "
                  f"(expected {res['expected']:.3f} +- {res['band']}) "
                  f"{'PASS' if res['pass'] else 'FAIL'}")
        else:
            res = compare_methods(config)
            for r in res["pairs"]:
                print(f"{r['cell']:>12s} {r['method_a']}-{r['method_b']}: max {r['max_abs']:.3e} "
                      f"(tol {r['tolerance']:g}) {'PASS' if r['pass'] else 'FAIL'}")
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ExcikitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
