"""Closed-form band-edge dynamics and superradiant decay-rate analysis.

With ``y = sqrt(s - i*delta)`` the band-edge kernel becomes ``e^{-i pi/4}/y``
and every amplitude turns into a rational function of ``y``. Its partial
fractions invert term by term through

    L^{-1}[1 / (y - x)](t) = e^{i delta t} (1/sqrt(pi t) + x erfcx(-x sqrt t)),

where ``erfcx(z) = exp(z**2) erfc(z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .core import (
    AmplitudeTrajectory, AtomEnsembleConfig, Reservoirs, Topology, as_initial, bell,
    symmetric, validate_config,
)
from .errors import (
    BackSubstitutionFailure, DegenerateRoots, NonDecaying, UnsupportedConfiguration,
    ValidationError,
)
from .kernels import Markovian, PhotonicCrystal
from .special import PolynomialC, csgn, erfcx_complex, min_root_separation, poly_roots

_PHASE = np.exp(-1j * np.pi / 4)
_DEGENERATE = 1e-8
_BACKSUB_TOL = 1e-6


@dataclass(frozen=True)
class RootSystem:
    """Roots of the rationalised denominator and their partial-fraction weights.

    Attributes
    ----------
    roots : ndarray
        The five roots in ``y``.
    coefficients : ndarray
        Partial-fraction weights ``a_k``.
    signs : tuple of int
        ``csgn(x_k)``.
    phase_rate : float
        Frequency of the free phase (J for the all-to-all model, delta for
        the chain).
    polynomial : PolynomialC
        Quintic the roots solve.
    path : str
        How the roots were obtained.
    residuals : ndarray
        Backward error ``|Q(x)| / sum_k |q_k| |x|^k`` per root.
    """

    roots: np.ndarray
    coefficients: np.ndarray
    signs: tuple
    phase_rate: float
    polynomial: PolynomialC
    path: str
    residuals: np.ndarray
    diagnostics: tuple = field(default=())


def _backward_error(poly: PolynomialC, x):
    c = np.abs(np.array(poly.coefficients))
    ax = np.abs(x)
    scale = sum(ci * ax ** k for k, ci in enumerate(c))
    r = np.abs(poly(x))
    # an exact zero root of a polynomial with no constant term
    return np.divide(r, scale, out=np.zeros_like(r), where=scale > 0)


def _weights(x, numer):
    return np.array([numer(x[k]) / np.prod(np.delete(x[k] - x, k)) for k in range(x.size)])


def _check_pc(cfg, topology):
    validate_config(cfg)
    if not isinstance(cfg.kernel, PhotonicCrystal):
        raise UnsupportedConfiguration("closed form needs the photonic-crystal kernel")
    if cfg.topology != topology or cfg.reservoirs != Reservoirs.SHARED_SINGLE:
        raise UnsupportedConfiguration(
            f"closed form needs {topology.value} atoms on a shared reservoir")


def _symmetric_quintic(N, J, D, g):
    # (y^2 + i(D - J)) (y^3 + i kappa y + N g e^{-i pi/4})
    kap = D + J * (N - 1)
    quad = np.array([1j * (D - J), 0, 1])
    cub = np.array([N * g * _PHASE, 1j * kap, 0, 1])
    return PolynomialC(tuple(np.polynomial.polynomial.polymul(quad, cub)))


def _cardano(N, J, D, g, paired):
    kap = D + J * (N - 1)
    Ng = N * g
    root = np.sqrt(complex(1 + 4 * kap ** 3 / (27 * Ng ** 2)))
    Ap = Ng ** (1 / 3) * complex(0.5 + 0.5 * root) ** (1 / 3)
    if paired:
        Am = -kap / (3 * Ap)
    else:
        Am = Ng ** (1 / 3) * complex(0.5 - 0.5 * root) ** (1 / 3)
    x12 = np.exp(1j * np.pi / 4) * np.sqrt(complex(J - D))
    e6 = np.exp(1j * np.pi / 6)
    x3 = (Ap + Am) * np.exp(1j * np.pi / 4)
    x4 = (Ap / e6 - Am * e6) * np.exp(-1j * np.pi / 4)
    x5 = (Ap * e6 - Am / e6) * np.exp(3j * np.pi / 4)
    return np.array([x12, -x12, x3, x4, x5])


def pc_symmetric_roots(cfg: AtomEnsembleConfig) -> RootSystem:
    """Roots and weights for the all-to-all ensemble on a band edge.

    The denominator factorises into ``y^2 + i(delta - J)`` and the cubic
    ``y^3 + i kappa y + N e^{-i pi/4}``, ``kappa = delta + J (N - 1)``.
    The Cardano expressions are tried first as written, then with the
    second cube root tied to the first (``A- = -kappa / (3 A+)``), then a
    numerical root finder. Each attempt is validated by back-substitution.

    Raises
    ------
    DegenerateRoots
        If two roots lie within 1e-8 of each other.
    """
    _check_pc(cfg, Topology.FULLY_SYMMETRIC)
    N, J, D = cfg.n_atoms, cfg.dipole_coupling, cfg.detuning
    g = cfg.kernel.beta ** 1.5
    poly = _symmetric_quintic(N, J, D, g)
    diagnostics = []
    x = None
    for path, paired in (("cardano", False), ("cardano_paired", True)):
        cand = _cardano(N, J, D, g, paired)
        res = _backward_error(poly, cand)
        if np.all(res <= _BACKSUB_TOL):
            x, used = cand, path
            break
        diagnostics.append(f"{path}: back-substitution residual {res.max():.2e}")
    if x is None:
        x, used = poly_roots(poly), "poly_roots"
        diagnostics.append(str(BackSubstitutionFailure("closed-form roots rejected")))
    if min_root_separation(x) < _DEGENERATE:
        raise DegenerateRoots(f"roots closer than {_DEGENERATE:g} (N={N}, J={J}, delta={D})")
    a = _weights(x, lambda xk: g * _PHASE + 1j * J * xk)
    return RootSystem(x, a, tuple(csgn(v) for v in x), float(J), poly, used,
                      _backward_error(poly, x), tuple(diagnostics))


def band_edge_sum(roots: RootSystem, tau) -> np.ndarray:
    """``sum_k a_k x_k exp(x_k^2 tau) erfc(-x_k sqrt(tau))`` on a grid."""
    tau = np.asarray(tau, dtype=float)
    rt = np.sqrt(tau)
    return sum(a * x * erfcx_complex(-x * rt) for a, x in zip(roots.coefficients, roots.roots))


def band_edge_sum_signed(roots: RootSystem, tau) -> np.ndarray:
    """Same sum written with the complex sign: ``e^{x^2 t}(1 + r - r erfc(sqrt(x^2 t)))``.

    Overflows for large ``|x^2 tau|``; kept for cross-checking.
    """
    from scipy.special import erfc
    tau = np.asarray(tau, dtype=float)
    out = 0
    for a, x, r in zip(roots.coefficients, roots.roots, roots.signs):
        out = out + a * x * np.exp(x * x * tau) * (1 + r - r * erfc(np.sqrt(x * x * tau)))
    return out


def _cplus_cubic(cfg, cp, tau):
    # c+(tau) from the cubic factor alone; safe where the quadratic roots merge
    N, J, D = cfg.n_atoms, cfg.dipole_coupling, cfg.detuning
    g = cfg.kernel.beta ** 1.5
    kap = D + J * (N - 1)
    x = poly_roots([N * g * _PHASE, 1j * kap, 0, 1])
    if min_root_separation(x) < _DEGENERATE:
        raise DegenerateRoots("cubic roots coincide")
    w = x * x / (3 * x * x + 1j * kap)
    rt = np.sqrt(tau)
    return cp * np.exp(1j * D * tau) * sum(wk * erfcx_complex(-xk * rt) for wk, xk in zip(w, x))


def pc_symmetric_amplitudes(cfg: AtomEnsembleConfig, init, tau_grid, *,
                            roots: RootSystem | None = None) -> AmplitudeTrajectory:
    """Closed-form amplitudes of every atom.

    ``c_i = c_i(0) e^{iJ tau} - c+(0) e^{i delta tau} sum_k a_k x_k e^{x_k^2 tau} erfc(-x_k sqrt(tau))``.

    When the two quadratic roots coincide (``J == delta``) the solution is
    rebuilt from ``c_i = (c_i(0) - c+(0)/N) e^{iJ tau} + c+(tau)/N`` with
    ``c+`` from the cubic factor.
    """
    N, J, D = cfg.n_atoms, cfg.dipole_coupling, cfg.detuning
    c0 = as_initial(init, N)
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise ValidationError("tau_grid must be non-negative")
    cp = c0.sum()
    free = c0[:, None] * np.exp(1j * J * tau)[None, :]
    _check_pc(cfg, Topology.FULLY_SYMMETRIC)
    if cp == 0:
        return AmplitudeTrajectory(tau, free, "analytic", {"path": "decoupled"})
    info = {}
    if roots is None:
        try:
            roots = pc_symmetric_roots(cfg)
        except DegenerateRoots:
            if abs(J - D) > _DEGENERATE:
                raise
            roots = None
    if roots is None:
        cplus = _cplus_cubic(cfg, cp, tau)
        amps = (c0 - cp / N)[:, None] * np.exp(1j * J * tau)[None, :] + cplus[None, :] / N
        info["path"] = "cubic"
    else:
        S = band_edge_sum(roots, tau)
        amps = free - cp * (np.exp(1j * D * tau) * S)[None, :]
        info.update(path=roots.path, roots=roots.roots.tolist(),
                    coefficients=roots.coefficients.tolist(), signs=list(roots.signs),
                    residuals=roots.residuals.tolist(), diagnostics=list(roots.diagnostics))
        if tau.size and tau[0] == 0:
            amps[:, tau == 0] = c0[:, None]
    return AmplitudeTrajectory(tau, amps, "analytic", info)


def _nn_quintic(N, J, D, g):
    # y * [s^2 + N G s + 2iJ G + 2iJ s] with s = y^2 + i delta
    E = g * _PHASE
    return PolynomialC((2j * J * E + 1j * D * N * E, -(D * D + 2 * J * D), N * E,
                        2j * D + 2j * J, 0, 1))


def pc_nn_roots(cfg: AtomEnsembleConfig) -> RootSystem:
    """Roots and weights for the end atoms of a chain on a band edge.

    Quintic ``x^5 + 2i(delta+J) x^3 + N e^{-i pi/4} x^2 - (delta^2 + 2 J delta) x
    + (2iJ + i delta N) e^{-i pi/4}``; weights ``a_k = e^{-i pi/4} / Q'(x_k)``.
    """
    _check_pc(cfg, Topology.NEAREST_NEIGHBOUR)
    N, J, D = cfg.n_atoms, cfg.dipole_coupling, cfg.detuning
    g = cfg.kernel.beta ** 1.5
    poly = _nn_quintic(N, J, D, g)
    x = poly_roots(poly)
    if min_root_separation(x) < _DEGENERATE:
        raise DegenerateRoots(f"chain roots closer than {_DEGENERATE:g}")
    a = _weights(x, lambda xk: g * _PHASE)
    return RootSystem(x, a, tuple(csgn(v) for v in x), float(D), poly, "poly_roots",
                      _backward_error(poly, x))


class EndTrajectories(NamedTuple):
    tau: np.ndarray
    c1: np.ndarray
    cN: np.ndarray
    roots: RootSystem


def pc_nn_amplitudes(cfg: AtomEnsembleConfig, tau_grid) -> EndTrajectories:
    """First and last atom of a band-edge chain, first atom initially excited.

    ``c_N = -e^{i delta tau} sum_k a_k x_k e^{x_k^2 tau} erfc(-x_k sqrt(tau))`` and
    ``c_1 = 1 + c_N`` (first order in J).
    """
    roots = pc_nn_roots(cfg)
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise ValidationError("tau_grid must be non-negative")
    cN = -np.exp(1j * cfg.detuning * tau) * band_edge_sum(roots, tau)
    cN = np.where(tau == 0, 0j, cN)
    return EndTrajectories(tau, 1 + cN, cN, roots)


def markovian_amplitudes(cfg: AtomEnsembleConfig, init, tau_grid) -> AmplitudeTrajectory:
    """Exact amplitudes for a flat (memoryless) reservoir.

    The memory term collapses to ``(gamma/2) P P^T c``, so
    ``dc/dt = -(i H + (gamma/2) P P^T) c`` is solved by eigendecomposition
    of that constant generator.
    """
    validate_config(cfg)
    if not isinstance(cfg.kernel, Markovian):
        raise UnsupportedConfiguration("markovian_amplitudes needs the Markovian kernel")
    N, J = cfg.n_atoms, cfg.dipole_coupling
    c0 = as_initial(init, N)
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise ValidationError("tau_grid must be non-negative")
    if cfg.topology == Topology.FULLY_SYMMETRIC:
        H = J * (np.ones((N, N)) - np.eye(N))
    else:
        H = J * (np.eye(N, k=1) + np.eye(N, k=-1))
    if cfg.end_detuning:
        d = cfg.end_detuning
        H = H + np.diag(np.r_[2 * d, np.full(N - 2, d), 0.0])
    shared = cfg.reservoirs == Reservoirs.SHARED_SINGLE
    K = 1j * H + 0.5 * cfg.kernel.gamma * (np.ones((N, N)) if shared else np.eye(N))
    lam, V = np.linalg.eig(K)
    w = np.linalg.solve(V, c0.astype(complex))
    amps = V @ (w[:, None] * np.exp(-lam[:, None] * tau[None, :]))
    return AmplitudeTrajectory(tau, amps, "analytic", {"path": "markovian_eigen"})


# --- decay-rate analysis -----------------------------------------------------

def decay_window(trajectory: AmplitudeTrajectory, atom: int = 0):
    """Initial decay segment: from the start to the first population minimum."""
    tau = trajectory.tau_grid
    pop = trajectory.populations[atom]
    rising = np.flatnonzero(np.diff(pop) > 0)
    end = rising[0] if rising.size else pop.size - 1
    end = max(end, min(4, pop.size - 1))
    return float(tau[0]), float(tau[end])


def fit_decay_rate(trajectory: AmplitudeTrajectory, atom: int, window) -> float:
    """Exponential decay rate of one atom's population over a window.

    The plateau starts from the mean over the final 20% of the window and
    is refined together with amplitude and rate; the rate is then the
    least-squares slope of ``log(population - plateau)``, weighted by
    ``(population - plateau)^2`` so points near the plateau do not dominate.

    Raises
    ------
    NonDecaying
        If the fitted slope is not negative.
    """
    lo, hi = window
    tau = trajectory.tau_grid
    m = (tau >= lo) & (tau <= hi)
    t = tau[m]
    p = trajectory.populations[atom][m]
    if t.size < 3:
        raise ValidationError("window holds fewer than three samples")
    n = max(2, int(math.ceil(0.2 * t.size)))
    plateau = float(p[-n:].mean())

    def slope(P):
        y = p - P
        k = y > 0
        if k.sum() < 2:
            raise NonDecaying("population never exceeds its plateau")
        w = y[k]
        A = np.column_stack([np.ones(k.sum()), -t[k]]) * w[:, None]
        c, rate = np.linalg.lstsq(A, np.log(y[k]) * w, rcond=None)[0]
        return c, rate

    c, rate = slope(plateau)
    try:
        (_, rate_nl, P), _ = curve_fit(lambda tt, A, r, P: A * np.exp(-r * (tt - t[0])) + P,
                                       t, p, p0=[math.exp(c - rate * t[0]), rate, plateau],
                                       maxfev=20000, xtol=1e-15, ftol=1e-15)
        if np.isfinite(P) and rate_nl > 0:
            plateau = float(P)
            c, rate = slope(plateau)
    except (RuntimeError, ValueError):
        pass
    if not rate > 0:
        raise NonDecaying(f"fitted rate {rate:.3g} is not positive")
    return float(rate)


def _symmetric_trajectory(cfg, tau):
    c0 = symmetric(cfg.n_atoms)
    if isinstance(cfg.kernel, PhotonicCrystal) and cfg.topology == Topology.FULLY_SYMMETRIC \
            and cfg.reservoirs == Reservoirs.SHARED_SINGLE:
        return pc_symmetric_amplitudes(cfg, c0, tau)
    from .laplace import invert_laplace, laplace_amplitudes
    amps = invert_laplace(laplace_amplitudes(cfg, c0), tau)
    return AmplitudeTrajectory(tau, amps, "laplace_numeric")


class ScalingResult(NamedTuple):
    exponent: float
    stderr: float
    n_list: np.ndarray
    rates: np.ndarray


def scaling_fit(cfg_template: AtomEnsembleConfig, n_list: Sequence[int], J: float, *,
                tau_grid=None) -> ScalingResult:
    """Decay rate per ensemble size and the log-log slope with its standard error."""
    n_list = np.asarray(list(n_list), dtype=int)
    if n_list.size < 4:
        raise ValidationError("need at least four ensemble sizes")
    rates = []
    for N in n_list:
        cfg = cfg_template.with_(n_atoms=int(N), dipole_coupling=J)
        if tau_grid is None:
            # resolve the initial decay whatever its time scale
            if isinstance(cfg.kernel, Markovian):
                t_end = 20.0 / (N * cfg.kernel.gamma)
            else:
                t_end = 4.0
            tau = np.linspace(0, t_end, 40001 if isinstance(cfg.kernel, PhotonicCrystal) else 2001)
        else:
            tau = np.asarray(tau_grid, dtype=float)
        traj = _symmetric_trajectory(cfg, tau)
        rates.append(fit_decay_rate(traj, 0, decay_window(traj, 0)))
    rates = np.array(rates)
    x, y = np.log(n_list), np.log(rates)
    (slope, icpt), cov = np.polyfit(x, y, 1, cov="unscaled") if n_list.size > 2 else (np.polyfit(x, y, 1), None)
    resid = y - (slope * x + icpt)
    dof = max(n_list.size - 2, 1)
    s2 = float(resid @ resid) / dof
    stderr = math.sqrt(s2 * cov[0, 0]) if cov is not None else float("nan")
    return ScalingResult(float(slope), stderr, n_list, rates)


def scaling_exponent(cfg_template: AtomEnsembleConfig, n_list: Sequence[int], J: float, **kw) -> float:
    """Least-squares slope of log(decay rate) against log(N), symmetric start."""
    return scaling_fit(cfg_template, n_list, J, **kw).exponent


class BellRun(NamedTuple):
    trajectory: AmplitudeTrajectory
    deviation: float


def bell_state_run(n_atoms: int, delta: float, tau_grid, which: str = "plus", *,
                   dipole_coupling: float = 0.1) -> BellRun:
    """Two atoms in a Bell pair, the rest unexcited, on a shared band edge.

    ``deviation`` is ``max_tau | |c_1|^2 - 1/2 |``.
    """
    if which not in ("plus", "minus"):
        raise ValidationError("which must be 'plus' or 'minus'")
    cfg = AtomEnsembleConfig.photonic(n_atoms, dipole_coupling, delta)
    c0 = bell(n_atoms, +1 if which == "plus" else -1)
    traj = pc_symmetric_amplitudes(cfg, c0, tau_grid)
    dev = float(np.max(np.abs(traj.populations[0] - 0.5)))
    return BellRun(traj, dev)


__all__ = [
    "RootSystem", "pc_symmetric_roots", "pc_symmetric_amplitudes", "pc_nn_roots",
    "pc_nn_amplitudes", "EndTrajectories", "band_edge_sum", "band_edge_sum_signed",
    "decay_window", "fit_decay_rate", "scaling_exponent", "scaling_fit", "ScalingResult",
    "bell_state_run", "BellRun", "markovian_amplitudes",
]
