"""End-to-end acceptance checks, one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` or directly as a script.
"""
from __future__ import annotations

import sys
import time

import mpmath
import numpy as np
import pytest

from excikit import cli
from excikit.analytic import (
    bell_state_run,
    markovian_amplitudes,
    pc_symmetric_amplitudes,
    scaling_fit,
)
from excikit.core import (
    AtomEnsembleConfig,
    Reservoirs,
    Topology,
    atom_excited,
    bell,
    symmetric,
)
from excikit.errors import DegenerateRoots
from excikit.kernels import Markovian, Ohmic, PhotonicCrystal
from excikit.laplace import (
    detuned_ends_cN,
    invert_laplace,
    laplace_amplitudes,
    shared_nn_amplitudes,
    shared_symmetric_all,
    shared_symmetric_cplus,
    steady_state_fvt,
)
from excikit.oracle import build_mode_grid, integrate_discretized_modes, integrate_integrodifferential
from excikit.special import erfc_complex, poly_roots

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, title, checks, extra=""):
        ok = all(c for _, c in checks)
        parts = ", ".join(f"{name} {'ok' if c else 'FAIL'}" for name, c in checks)
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2} {title}: {parts}"
        if extra:
            line += f" | {extra}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok
    return emit


def _deviation(pop, p0):
    return float(np.max(np.abs(pop - p0[:, None])))


# 1 -------------------------------------------------------------------------

def test_zero_polarisation_decouples(report):
    t0 = time.perf_counter()
    tau = np.linspace(0, 100, 201)
    worst_exact, worst_oracle = 0.0, 0.0
    for kern in (PhotonicCrystal(delta=1.0), Ohmic(0.05, 1.0, 1.0, 2.0), Markovian(1.0)):
        grid = build_mode_grid(kern)
        for N in (2, 5, 20):
            d = kern.delta if isinstance(kern, PhotonicCrystal) else 1.0
            cfg = AtomEnsembleConfig(N, 0.1, d, Topology.FULLY_SYMMETRIC, Reservoirs.SHARED_SINGLE, kern)
            c0 = bell(N, -1)
            p0 = np.abs(c0) ** 2
            lap = invert_laplace(laplace_amplitudes(cfg, c0), tau[::2])
            worst_exact = max(worst_exact, _deviation(np.abs(lap) ** 2, p0))
            if isinstance(kern, PhotonicCrystal):
                worst_exact = max(worst_exact, _deviation(pc_symmetric_amplitudes(cfg, c0, tau).populations, p0))
            if isinstance(kern, Markovian):
                worst_exact = max(worst_exact, _deviation(markovian_amplitudes(cfg, c0, tau).populations, p0))
            else:
                conv = integrate_integrodifferential(cfg, c0, tau)
                worst_oracle = max(worst_oracle, _deviation(conv.populations, p0))
            modes = integrate_discretized_modes(cfg, c0, grid, tau)
            worst_oracle = max(worst_oracle, _deviation(modes.populations, p0))
    elapsed = time.perf_counter() - t0
    checks = [("exact<=1e-10", worst_exact <= 1e-10), ("oracles<=1e-6", worst_oracle <= 1e-6),
              ("runtime<60s", elapsed < 60)]
    assert report(1, "decoupling of zero-polarisation states", checks,
                  f"exact {worst_exact:.1e}, oracles {worst_oracle:.1e}, {elapsed:.0f}s")


# 2 -------------------------------------------------------------------------

def test_fractional_steady_state(report):
    t0 = time.perf_counter()
    cfg = AtomEnsembleConfig.photonic(5, 0.1, 1.0)
    c0 = atom_excited(5)
    fvt = steady_state_fvt(cfg, c0)
    exact = bool(fvt[0] == 0.8 and np.all(fvt[1:] == -0.2))
    tau = np.linspace(0, 100, 2001)
    traj = pc_symmetric_amplitudes(cfg, c0, tau)
    late = traj.populations[:, tau >= 80].mean(axis=1)
    target = np.abs(fvt) ** 2
    err = float(np.max(np.abs(late - target)))
    elapsed = time.perf_counter() - t0
    checks = [("fvt exact", exact), ("late mean within 0.05", err <= 0.05), ("runtime<60s", elapsed < 60)]
    assert report(2, "steady state of a single excited atom", checks,
                  f"fvt {np.round(fvt.real, 15).tolist()}, late-mean error {err:.3f}")


# 3 -------------------------------------------------------------------------

def test_methods_agree_on_grid(report):
    t0 = time.perf_counter()
    tau = np.linspace(0, 50, 251)
    worst = {"laplace": 0.0, "convolution": 0.0, "modes": 0.0}
    skipped = []
    grids = {}
    for N in (2, 5, 20):
        for J in (0.0, 0.1, 0.5):
            for D in (-5.0, 0.0, 5.0):
                cfg = AtomEnsembleConfig.photonic(N, J, D)
                c0 = atom_excited(N)
                try:
                    ref = pc_symmetric_amplitudes(cfg, c0, tau).amplitudes
                except DegenerateRoots:
                    skipped.append((N, J, D))
                    continue
                lap = invert_laplace(shared_symmetric_all(cfg, c0), tau)
                conv = integrate_integrodifferential(cfg, c0, tau).amplitudes
                if D not in grids:
                    grids[D] = build_mode_grid(cfg.kernel)
                modes = integrate_discretized_modes(cfg, c0, grids[D], tau).amplitudes
                for key, other in (("laplace", lap), ("convolution", conv), ("modes", modes)):
                    worst[key] = max(worst[key], float(np.max(np.abs(other - ref))))
    elapsed = time.perf_counter() - t0
    checks = [("laplace<=1e-6", worst["laplace"] <= 1e-6),
              ("convolution<=1e-3", worst["convolution"] <= 1e-3),
              ("modes<=5e-3", worst["modes"] <= 5e-3),
              ("runtime<30min", elapsed < 1800)]
    extra = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", skipped {skipped}, {elapsed:.0f}s"
    assert report(3, "analytic vs numeric methods on 27 points", checks, extra)


# 4 -------------------------------------------------------------------------

def test_superradiant_exponents(report):
    t0 = time.perf_counter()
    base = AtomEnsembleConfig.photonic(4, 0.0, 0.0)
    free = scaling_fit(base, (4, 8, 16, 32, 64), 0.0)
    coupled = scaling_fit(base, (64, 128, 256, 512), 0.1)
    elapsed = time.perf_counter() - t0
    checks = [("J=0 2/3+-0.1", abs(free.exponent - 2 / 3) <= 0.1),
              ("J=0.1 1+-0.15", abs(coupled.exponent - 1) <= 0.15),
              ("runtime<10min", elapsed < 600)]
    assert report(4, "decay-rate scaling with N", checks,
                  f"J=0 {free.exponent:.3f}+-{free.stderr:.3f}, "
                  f"J=0.1 {coupled.exponent:.3f}+-{coupled.stderr:.3f}, {elapsed:.0f}s")


# 5 -------------------------------------------------------------------------

def test_independent_reservoirs_empty_out(report):
    rng = np.random.default_rng(5)
    z = rng.normal(size=5) + 1j * rng.normal(size=5)
    inits = [atom_excited(5), symmetric(5), bell(5, +1), bell(5, -1), z / np.linalg.norm(z)]
    tau = np.array([0.0, 20.0, 40.0])
    worst, fvt_zero = 0.0, True
    for topo in (Topology.FULLY_SYMMETRIC, Topology.NEAREST_NEIGHBOUR):
        cfg = AtomEnsembleConfig(5, 0.1, 1.0, topo, Reservoirs.INDEPENDENT_PER_ATOM, Markovian(1.0))
        for c0 in inits:
            amps = invert_laplace(laplace_amplitudes(cfg, c0), tau)
            worst = max(worst, float(np.max(np.abs(amps[:, -1]) ** 2)))
            if topo == Topology.FULLY_SYMMETRIC:
                m = markovian_amplitudes(cfg, c0, tau)
                worst = max(worst, float(np.max(m.populations[:, -1])))
            fvt_zero &= bool(np.all(steady_state_fvt(cfg, c0) == 0))
    checks = [("|c(40)|^2<=1e-8", worst <= 1e-8), ("fvt exactly 0", fvt_zero)]
    assert report(5, "independent Markovian reservoirs", checks, f"max population {worst:.1e}")


# 6 -------------------------------------------------------------------------

def test_symmetric_start_collapses(report):
    N = 10
    tau = np.linspace(0, 100, 201)
    spread, scaled = 0.0, 0.0
    for D in cli.FIG_DETUNINGS:
        cfg = AtomEnsembleConfig.photonic(N, 0.1, D)
        c0 = symmetric(N)
        a = pc_symmetric_amplitudes(cfg, c0, tau).amplitudes
        lap = invert_laplace(shared_symmetric_all(cfg, c0), tau)
        for amps in (a, lap):
            spread = max(spread, float(np.max(np.abs(amps - amps[0]))))
        unit = invert_laplace(shared_symmetric_cplus(cfg, np.full(N, 1 / N)), tau)
        scaled = max(scaled, float(np.max(np.abs(a - unit / np.sqrt(N)))))
    checks = [("pairwise<=1e-12", spread <= 1e-12), ("rescaled<=1e-8", scaled <= 1e-8)]
    assert report(6, "symmetric start follows the rescaled polarisation", checks,
                  f"pairwise {spread:.1e}, rescaled {scaled:.1e}")


# 7 -------------------------------------------------------------------------

def test_bell_pairs(report):
    tau = np.linspace(0, 100, 2001)
    minus = [bell_state_run(N, -5.0, tau, "minus").deviation for N in (2, 10)]
    plus = [bell_state_run(N, -5.0, tau, "plus").deviation for N in (2, 4, 10, 20)]
    decreasing = all(b < a for a, b in zip(plus, plus[1:]))
    checks = [("minus<=1e-10", max(minus) <= 1e-10), ("plus decreasing", decreasing)]
    assert report(7, "Bell pair populations", checks,
                  f"minus {max(minus):.1e}, plus N=2,4,10,20 {np.round(plus, 3).tolist()}")


# 8 -------------------------------------------------------------------------

def test_mode_oracle_conserves_norm(report):
    tau = np.linspace(0, 100, 101)
    worst = {}
    seen = {}
    grids = {}
    for name in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"):
        p = cli.PRESETS[name]
        config = cli.RunConfig(name, p["ensemble"], p["init"], methods=("oracle_modes",))
        drift = 0.0
        for cell in cli.build_cells(config):
            key = (cell.ensemble, cell.init.tobytes())
            if key not in seen:
                kern = cell.ensemble.kernel
                if kern not in grids:
                    grids[kern] = build_mode_grid(kern)
                t = integrate_discretized_modes(cell.ensemble, cell.init, grids[kern], tau)
                seen[key] = float(t.info["norm_drift"])
            drift = max(drift, seen[key])
        worst[name] = drift
    checks = [(name, d <= 1e-6) for name, d in worst.items()]
    assert report(8, "mode-oracle norm drift <= 1e-6", checks,
                  f"max drift {max(worst.values()):.1e}")


# 9 -------------------------------------------------------------------------

def _erfc_series(z):
    # Maclaurin series of erf at high working precision
    z = mpmath.mpc(z.real, z.imag)
    z2 = z * z
    term, tot, n = z, z, 0
    eps = mpmath.mpf(10) ** -75
    while True:
        n += 1
        term = -term * z2 / n
        inc = term / (2 * n + 1)
        tot += inc
        if abs(inc) < eps * abs(tot):
            break
    return complex(1 - 2 / mpmath.sqrt(mpmath.pi) * tot)


def test_special_functions(report):
    rng = np.random.default_rng(9)
    r = 10 * np.sqrt(rng.uniform(0, 1, 1000))
    z = r * np.exp(2j * np.pi * rng.uniform(0, 1, 1000))
    with mpmath.workdps(100):
        ref = np.array([_erfc_series(v) for v in z])
    rel = float(np.max(np.abs(erfc_complex(z) - ref) / np.abs(ref)))

    res = 0.0
    for _ in range(1000):
        c = np.append(rng.normal(size=5) + 1j * rng.normal(size=5), 1.0)
        x = poly_roots(c)
        res = max(res, float(np.max(np.abs(np.polynomial.polynomial.polyval(x, c))) / np.abs(c).max()))
    checks = [("erfc rel<=1e-12", rel <= 1e-12), ("quintic residual<=1e-10", res <= 1e-10)]
    assert report(9, "special functions", checks, f"erfc {rel:.1e}, roots {res:.1e}")


# 10 ------------------------------------------------------------------------

def test_detuned_chain_ends(report):
    delta, N, J = 0.05, 5, 0.1
    tau = np.linspace(0, 50, 251)
    c0 = atom_excited(N)
    shift_err = 0.0
    for D in (0.0, 1.0):
        e = AtomEnsembleConfig.photonic(N, J, D, topology=Topology.NEAREST_NEIGHBOUR, end_detuning=delta)
        plain = AtomEnsembleConfig.photonic(N, J, D + delta, topology=Topology.NEAREST_NEIGHBOUR)
        a = invert_laplace(detuned_ends_cN(e, c0), tau)
        b = invert_laplace(shared_nn_amplitudes(plain, c0, order=1)["cN"], tau)
        shift_err = max(shift_err, float(np.max(np.abs(np.abs(a) - np.abs(b)))))

    e = AtomEnsembleConfig.photonic(N, J, 0.0, topology=Topology.NEAREST_NEIGHBOUR, end_detuning=delta)
    formula = np.abs(invert_laplace(detuned_ends_cN(e, c0), tau))
    modes = integrate_discretized_modes(e, c0, build_mode_grid(e.kernel), tau)
    oracle_err = float(np.max(np.abs(np.abs(modes.amplitudes[-1]) - formula)))
    checks = [("shift<=1e-6", shift_err <= 1e-6), ("oracle<=0.05", oracle_err <= 0.05)]
    assert report(10, "end-detuned chain", checks, f"shift {shift_err:.1e}, oracle {oracle_err:.3f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
