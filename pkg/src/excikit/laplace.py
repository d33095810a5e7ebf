"""Laplace-domain amplitudes, numerical Bromwich inversion and final values.

All assemblies return :class:`LaplaceAmplitude` objects whose ``eval`` is
vectorised over arrays of ``s``. Atom indices are 0-based.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import AtomEnsembleConfig, Reservoirs, Topology, as_initial, validate_config
from .errors import (
    ChainTooShort,
    ContourTooClose,
    DivergentLimit,
    LimitUndefined,
    NonConvergence,
    UnsupportedConfiguration,
    ValidationError,
)
from .kernels import Markovian, PhotonicCrystal, kernel_laplace, kernel_laplace_at_zero


@dataclass(frozen=True)
class LaplaceAmplitude:
    """A function ``s -> c~(s)`` plus what the inverter needs to know.

    ``eval`` may return an extra leading axis (one entry per atom); the
    inverter then returns one series per component.
    """

    eval: Callable
    singularity_abscissa: float = 0.0
    initial_value: Optional[complex] = None
    label: str = ""
    # largest oscillation/decay frequency expected; the quadrature is
    # extended at least a few times beyond it along the line
    frequency_scale: float = 0.0

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=complex))

    def __post_init__(self):
        if not math.isfinite(self.singularity_abscissa):
            raise ValidationError("singularity_abscissa must be finite")


def _kernel(cfg):
    return lambda s: kernel_laplace(cfg.kernel, s)


def frequency_scale(cfg) -> float:
    """Rough upper bound on the frequencies present in the dynamics."""
    N, J = cfg.n_atoms, abs(cfg.dipole_coupling)
    k = cfg.kernel
    if isinstance(k, PhotonicCrystal):
        ks = 2 * (N * k.beta ** 1.5) ** (2 / 3) + abs(k.delta)
    elif isinstance(k, Markovian):
        ks = N * k.gamma
    else:
        ks = k.omega0 + k.cutoff + N * k.lam * k.cutoff
    return J * (N + 1) + abs(cfg.detuning) + 2 * abs(cfg.end_detuning) + ks


def _zero(s):
    return np.zeros(np.shape(s), complex)


def _require(cfg, topology, reservoirs):
    validate_config(cfg)
    if cfg.topology != topology or cfg.reservoirs != reservoirs:
        raise UnsupportedConfiguration(
            f"expected {topology.value}/{reservoirs.value}, got "
            f"{cfg.topology.value}/{cfg.reservoirs.value}")


# --- shared reservoir, all-to-all coupling ----------------------------------

def shared_symmetric_cplus(cfg: AtomEnsembleConfig, init) -> LaplaceAmplitude:
    """Total polarisation c~+(s) = c+(0) / (s + iJ(N-1) + N G~(s))."""
    _require(cfg, Topology.FULLY_SYMMETRIC, Reservoirs.SHARED_SINGLE)
    c0 = as_initial(init, cfg.n_atoms)
    cp = c0.sum()
    N, J, G = cfg.n_atoms, cfg.dipole_coupling, _kernel(cfg)
    if cp == 0:
        return LaplaceAmplitude(_zero, 0.0, 0j, "cplus", frequency_scale=frequency_scale(cfg))

    def f(s):
        return cp / (s + 1j * J * (N - 1) + N * G(s))

    return LaplaceAmplitude(f, 0.0, cp, "cplus", frequency_scale=frequency_scale(cfg))


def shared_symmetric_all(cfg: AtomEnsembleConfig, init) -> LaplaceAmplitude:
    """Every atom at once; ``eval`` returns shape (N, *s.shape)."""
    _require(cfg, Topology.FULLY_SYMMETRIC, Reservoirs.SHARED_SINGLE)
    c0 = as_initial(init, cfg.n_atoms)
    cp = c0.sum()
    N, J, G = cfg.n_atoms, cfg.dipole_coupling, _kernel(cfg)
    idx = (slice(None),)

    def f(s):
        free = c0[idx + (None,) * s.ndim] / (s - 1j * J)
        if cp == 0:
            return free
        g = G(s)
        return free - cp * (g + 1j * J) / ((s - 1j * J) * (s + 1j * J * (N - 1) + N * g))

    return LaplaceAmplitude(f, 0.0, c0.copy(), "shared_symmetric", frequency_scale=frequency_scale(cfg))


def shared_symmetric_ci(cfg: AtomEnsembleConfig, init, i: int) -> LaplaceAmplitude:
    """Single-atom amplitude c~_i(s) for the all-to-all shared-reservoir model."""
    c0 = as_initial(init, cfg.n_atoms)
    if not 0 <= i < cfg.n_atoms:
        raise ValidationError(f"atom index {i} out of range")
    full = shared_symmetric_all(cfg, c0)
    return LaplaceAmplitude(lambda s: full.eval(s)[i], 0.0, c0[i], f"shared_symmetric[{i}]", frequency_scale=frequency_scale(cfg))


# --- shared reservoir, nearest-neighbour chain -------------------------------

def _nn_cplus(cfg, c0, order, G):
    N, J = cfg.n_atoms, cfg.dipole_coupling
    cp = c0.sum()
    ends = c0[0] + c0[-1]
    if order == 1:
        def f(s, g):
            return (s * cp + 1j * J * ends) / (s * s + (N * g + 2j * J) * s + 2j * J * g)
    else:
        inner = c0[1] + c0[-2]

        def f(s, g):
            num = s * s * cp + 1j * J * s * ends + J * J * inner
            den = s ** 3 + (N * g + 2j * J) * s * s + 2j * J * g * s + 2 * J * J * g
            return num / den
    return f


def shared_nn_amplitudes(cfg: AtomEnsembleConfig, init, *, order: int = 2):
    """End-atom and total amplitudes of a shared-reservoir chain.

    Parameters
    ----------
    order : {1, 2}
        Truncation order in the exchange coupling J.

    Returns
    -------
    dict
        ``{"c1": ..., "cN": ..., "cplus": ...}`` of LaplaceAmplitude.
    """
    _require(cfg, Topology.NEAREST_NEIGHBOUR, Reservoirs.SHARED_SINGLE)
    N, J = cfg.n_atoms, cfg.dipole_coupling
    if N < 3:
        raise ChainTooShort("nearest-neighbour chain needs N >= 3")
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    c0 = as_initial(init, N)
    G = _kernel(cfg)
    cplus = _nn_cplus(cfg, c0, order, G)

    def end(a, b, c):
        # a: the end atom, b: its neighbour, c: next-nearest
        if order == 1:
            cp = c0.sum()
            mix = 1j * J * (c0[0] + c0[-1] - cp)

            def f(s):
                g = G(s)
                d1 = s * s + (N * g + 2j * J) * s + 2j * J * g
                return a / s - 1j * J * b / s ** 2 - g * (s * cp + mix) / (s * d1)
        else:
            def f(s):
                g = G(s)
                den = (s * s + J * J) * s
                free = (s * s * a - 1j * J * s * b - J * J * c) / den
                return free + cplus(s, g) * g * (J * J + 1j * J * s - s * s) / den
        return f

    return {
        "c1": LaplaceAmplitude(end(c0[0], c0[1], c0[2]), 0.0, c0[0], f"shared_nn_c1_o{order}", frequency_scale=frequency_scale(cfg)),
        "cN": LaplaceAmplitude(end(c0[-1], c0[-2], c0[-3]), 0.0, c0[-1], f"shared_nn_cN_o{order}", frequency_scale=frequency_scale(cfg)),
        "cplus": LaplaceAmplitude(lambda s: cplus(s, G(s)), 0.0, c0.sum(), f"shared_nn_cplus_o{order}",
                                  frequency_scale=frequency_scale(cfg)),
    }


def detuned_ends_cN(cfg: AtomEnsembleConfig, init) -> LaplaceAmplitude:
    """Last-atom amplitude of a chain whose end atoms are detuned.

    First atom at +2*d, interior atoms at +d, last atom at 0 (d is
    ``cfg.end_detuning``), first atom initially excited, first order in J
    and d.
    """
    _require(cfg, Topology.NEAREST_NEIGHBOUR, Reservoirs.SHARED_SINGLE)
    N, J, d = cfg.n_atoms, cfg.dipole_coupling, cfg.end_detuning
    if N < 3:
        raise ChainTooShort("nearest-neighbour chain needs N >= 3")
    c0 = as_initial(init, N)
    expected = np.zeros(N, complex)
    expected[0] = 1
    if not np.allclose(c0, expected, rtol=0, atol=1e-14):
        raise ValidationError("detuned_ends_cN assumes the first atom alone is excited")
    G = _kernel(cfg)

    def f(s):
        g = G(s)
        u = s + 1j * d
        return -g / (u * u + N * g * u + 2j * J * (g + u))

    return LaplaceAmplitude(f, 0.0, 0j, "detuned_ends_cN", frequency_scale=frequency_scale(cfg))


# --- independent reservoirs --------------------------------------------------

def independent_symmetric_all(cfg: AtomEnsembleConfig, init) -> LaplaceAmplitude:
    _require(cfg, Topology.FULLY_SYMMETRIC, Reservoirs.INDEPENDENT_PER_ATOM)
    c0 = as_initial(init, cfg.n_atoms)
    cp = c0.sum()
    N, J, G = cfg.n_atoms, cfg.dipole_coupling, _kernel(cfg)

    def f(s):
        g = G(s)
        ci = c0[(slice(None),) + (None,) * s.ndim]
        return ci / (s - 1j * J + g) - 1j * J * cp / ((s + 1j * J * (N - 1) + g) * (s - 1j * J + g))

    return LaplaceAmplitude(f, 0.0, c0.copy(), "independent_symmetric", frequency_scale=frequency_scale(cfg))


def independent_symmetric_ci(cfg: AtomEnsembleConfig, init, i: int) -> LaplaceAmplitude:
    """c~_i(s) for all-to-all coupled atoms with one reservoir each."""
    c0 = as_initial(init, cfg.n_atoms)
    if not 0 <= i < cfg.n_atoms:
        raise ValidationError(f"atom index {i} out of range")
    full = independent_symmetric_all(cfg, c0)
    return LaplaceAmplitude(lambda s: full.eval(s)[i], 0.0, c0[i], f"independent_symmetric[{i}]", frequency_scale=frequency_scale(cfg))


def independent_nn_amplitudes(cfg: AtomEnsembleConfig, init, *, exact: bool = False) -> LaplaceAmplitude:
    """Chain with one reservoir per atom; ``eval`` returns shape (N, *s.shape).

    By default the interior atoms use the truncated expression that keeps
    couplings out to next-nearest neighbours, and the ends follow from one
    step of the chain recursion. ``exact=True`` solves the tridiagonal
    system ``(s + G~) c~ + iJ A c~ = c(0)`` instead.
    """
    _require(cfg, Topology.NEAREST_NEIGHBOUR, Reservoirs.INDEPENDENT_PER_ATOM)
    N, J = cfg.n_atoms, cfg.dipole_coupling
    if N < 5:
        raise ChainTooShort("independent nearest-neighbour chain needs N >= 5")
    c0 = as_initial(init, N)
    G = _kernel(cfg)
    pad = np.concatenate([[0, 0], c0, [0, 0]])

    if exact:
        A = np.diag(np.ones(N - 1), 1) + np.diag(np.ones(N - 1), -1)
        w, V = np.linalg.eigh(A)
        proj = V.T @ c0

        def f(s):
            sig = s + G(s)
            modes = proj[(slice(None),) + (None,) * s.ndim] / (sig[None] + 1j * J * w[(slice(None),) + (None,) * s.ndim])
            return np.tensordot(V, modes, axes=(1, 0))

        return LaplaceAmplitude(f, 0.0, c0.copy(), "independent_nn_exact", frequency_scale=frequency_scale(cfg))

    def f(s):
        sig = s + G(s)
        q = sig * sig + 2 * J * J
        out = np.empty((N,) + np.shape(s), complex)
        for i in range(1, N - 1):
            k = i + 2
            out[i] = (pad[k] * sig - 1j * J * (pad[k - 1] + pad[k + 1])) / q \
                + J * J * (pad[k - 2] + pad[k + 2]) / (sig * q)
        out[0] = (c0[0] - 1j * J * out[1]) / sig
        out[-1] = (c0[-1] - 1j * J * out[-2]) / sig
        return out

    return LaplaceAmplitude(f, 0.0, c0.copy(), "independent_nn", frequency_scale=frequency_scale(cfg))


def laplace_amplitudes(cfg: AtomEnsembleConfig, init, **kw) -> LaplaceAmplitude:
    """Dispatch to the all-atom assembly matching ``cfg``.

    Shared-reservoir chains only have end-atom expressions; for them the
    returned object holds (c1, cN).
    """
    validate_config(cfg)
    if cfg.reservoirs == Reservoirs.SHARED_SINGLE:
        if cfg.topology == Topology.FULLY_SYMMETRIC:
            return shared_symmetric_all(cfg, init)
        if cfg.end_detuning != 0:
            cN = detuned_ends_cN(cfg, init)
            return cN
        parts = shared_nn_amplitudes(cfg, init, **kw)
        c1, cN = parts["c1"], parts["cN"]
        return LaplaceAmplitude(lambda s: np.stack([c1.eval(s), cN.eval(s)]), 0.0,
                                np.array([c1.initial_value, cN.initial_value]), "shared_nn_ends",
                                frequency_scale=c1.frequency_scale)
    if cfg.topology == Topology.FULLY_SYMMETRIC:
        return independent_symmetric_all(cfg, init)
    return independent_nn_amplitudes(cfg, init, **kw)


# --- Bromwich inversion ------------------------------------------------------

def _wynn(S):
    """Wynn epsilon acceleration along the last axis; returns the last even-column entry."""
    n = S.shape[-1]
    em1 = np.zeros(S.shape[:-1] + (n + 1,), S.dtype)
    e0 = S.copy()
    best = S[..., -1]
    for k in range(1, n):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            diff = e0[..., 1:] - e0[..., :-1]
            e1 = em1[..., 1:e0.shape[-1]] + 1.0 / diff
        em1, e0 = e0, e1
        if k % 2 == 0:
            last = e0[..., -1]
            best = np.where(np.isfinite(last), last, best)
    return best


def _fourier_series(F, t, sigma, nterms, neps, tol, scale):
    """Trapezoid rule on Re s = a, with a chosen per t, accelerated by Wynn epsilon."""
    T = scale * t
    a = sigma + np.log(1 / tol) / (2 * T)
    K = nterms + 2 * neps
    k = np.arange(1, K + 1)
    y = np.pi * k[None, :] / T[:, None]
    z = np.exp(1j * np.pi * k[None, :] * t[:, None] / T[:, None])
    fp = np.asarray(F(a[:, None] + 1j * y))
    fm = np.asarray(F(a[:, None] - 1j * y))
    f0 = np.asarray(F(a[:, None].astype(complex)))[..., 0]
    terms = fp * z + fm / z
    S = np.cumsum(terms, axis=-1)
    S += f0[..., None]
    est = _wynn(S[..., nterms - 1:])
    return np.exp(a * t) / (2 * T) * est


def invert_laplace(f: LaplaceAmplitude, tau_grid, *, tol: float = 1e-14,
                   target: float = 1e-11, accept: float = 1e-7, start_terms: int = 32,
                   max_terms: int = 2 ** 14, neps: int = 12, scale: float = 2.2,
                   max_block: int = 400_000):
    """Numerical inverse Laplace transform on a time grid.

    Each time ``t`` is handled with its own Bromwich line
    ``Re s = sigma + ln(1/tol) / (2 T)``, ``T = scale * t``: a trapezoid
    rule on that line is a Fourier series whose partial sums are
    accelerated with Wynn's epsilon algorithm. The number of terms is
    doubled until successive estimates agree to ``target``.

    Parameters
    ----------
    f : LaplaceAmplitude
    tau_grid : array_like
        Non-negative, increasing times. ``t = 0`` uses ``f.initial_value``
        (or the large-s limit of ``s f(s)``).

    Returns
    -------
    ndarray
        Shape ``(len(tau_grid),)`` or ``(m, len(tau_grid))`` when ``f``
        has a leading component axis.

    Raises
    ------
    ContourTooClose
        If the line for the largest time sits within 1e-3 of the abscissa.
    NonConvergence
        If estimates still differ by more than ``accept`` at ``max_terms``.
    """
    tau = np.asarray(tau_grid, dtype=float).ravel()
    if np.any(tau < 0) or np.any(~np.isfinite(tau)):
        raise ValidationError("tau_grid must be finite and non-negative")
    if tau.size > 1 and np.any(np.diff(tau) <= 0):
        raise ValidationError("tau_grid must be strictly increasing")
    sigma = f.singularity_abscissa
    pos = tau > 0
    if np.any(pos):
        gap = np.log(1 / tol) / (2 * scale * tau[pos].max())
        if gap < 1e-3:
            raise ContourTooClose(
                f"Bromwich line only {gap:.2e} right of the singularities at t={tau.max():g}")

    probe = np.asarray(f(np.array([[sigma + 1.0 + 0j]])))
    extra = probe.shape[:-2]
    out = np.empty(extra + tau.shape, complex)

    if np.any(~pos):
        if f.initial_value is not None:
            v0 = np.asarray(f.initial_value, complex)
        else:
            big = 1e16
            v0 = big * np.asarray(f(np.array([[big + 0j]])))[..., 0, 0]
        out[..., ~pos] = v0[..., None] if v0.ndim else v0

    idx = np.flatnonzero(pos)
    if idx.size == 0:
        return out
    # terms needed for the line to extend well past the physical frequencies
    ymin = 3.0 * f.frequency_scale + 20.0
    need = np.ceil(ymin * scale * tau[idx] / np.pi)
    n0 = np.maximum(start_terms, 2 ** np.ceil(np.log2(np.maximum(need, 1)))).astype(int)
    n0 = np.minimum(n0, max_terms)
    worst = 0.0
    for n_start in np.unique(n0):
        pending = idx[n0 == n_start]
        n = int(n_start)
        prev = None
        while True:
            rows = max(1, max_block // (n + 2 * neps))
            est = np.empty(extra + (pending.size,), complex)
            for lo in range(0, pending.size, rows):
                sl = slice(lo, lo + rows)
                est[..., sl] = _fourier_series(f, tau[pending[sl]], sigma, n, neps, tol, scale)
            if prev is not None:
                diff = np.abs(est - prev)
                mag = np.abs(est)
                if diff.ndim > 1:
                    diff = diff.max(axis=tuple(range(diff.ndim - 1)))
                    mag = mag.max(axis=tuple(range(mag.ndim - 1)))
                ok = diff <= target * np.maximum(1.0, mag)
                out[..., pending[ok]] = est[..., ok]
                if np.all(ok) or 2 * n > max_terms:
                    if not np.all(ok):
                        worst = max(worst, float(diff[~ok].max()))
                        out[..., pending[~ok]] = est[..., ~ok]
                    break
                pending = pending[~ok]
                prev = est[..., ~ok]
            else:
                prev = est
            n *= 2
    if worst > accept or not np.all(np.isfinite(out)):
        raise NonConvergence(f"Laplace inversion unstable: successive estimates differ by {worst:.2e}")
    if worst > 1e-9:
        warnings.warn(f"Laplace inversion settled only to {worst:.1e}", RuntimeWarning, stacklevel=2)
    return out


# --- final values ------------------------------------------------------------

def steady_state_fvt(cfg: AtomEnsembleConfig, init) -> np.ndarray:
    """Late-time amplitudes with the free phase removed.

    * all-to-all, shared reservoir: ``c_i(0) - c+(0)/N`` (after s -> s + iJ);
    * chain, shared reservoir, first atom excited: ``c_1 = 1 - G/(2iJ(1+2/N) + N G)``
      and ``c_N = c_1 - 1`` with ``G = G~(0+)`` (after s -> s + 2iJ/N);
      interior atoms have no such expression and are returned as NaN;
    * independent reservoirs: zero.

    Raises
    ------
    LimitUndefined
        If the relevant denominator vanishes.
    """
    validate_config(cfg)
    N, J = cfg.n_atoms, cfg.dipole_coupling
    c0 = as_initial(init, N)
    if cfg.reservoirs == Reservoirs.INDEPENDENT_PER_ATOM:
        return np.zeros(N, complex)
    if cfg.topology == Topology.FULLY_SYMMETRIC:
        cp = c0.sum()
        if cp != 0:
            # after the shift the limit is c_i(0) - c+(0)(G+iJ)/(N(G+iJ)); check G(iJ+) != -iJ
            try:
                g = complex(kernel_laplace(cfg.kernel, complex(1e-300, J)))
            except Exception:
                g = math.inf
            if np.isfinite(g) and abs(g + 1j * J) < 1e-14:
                raise LimitUndefined("G~(iJ) = -iJ: final value is not defined")
        return c0 - cp / N
    expected = np.zeros(N, complex)
    expected[0] = 1
    if not np.allclose(c0, expected, rtol=0, atol=1e-14):
        raise UnsupportedConfiguration("chain final value is only known for the first atom excited")
    try:
        g = kernel_laplace_at_zero(cfg.kernel)
    except DivergentLimit:
        c1 = 1 - 1 / N
    else:
        den = 2j * J * (1 + 2 / N) + N * g
        if abs(den) < 1e-14:
            raise LimitUndefined("chain final value denominator vanishes")
        c1 = 1 - g / den
    out = np.full(N, np.nan + 0j)
    out[0] = c1
    out[-1] = c1 - 1
    return out


__all__ = [
    "LaplaceAmplitude", "shared_symmetric_cplus", "shared_symmetric_ci",
    "shared_symmetric_all", "shared_nn_amplitudes", "detuned_ends_cN",
    "independent_symmetric_ci", "independent_symmetric_all",
    "independent_nn_amplitudes", "laplace_amplitudes", "invert_laplace",
    "steady_state_fvt",
]
