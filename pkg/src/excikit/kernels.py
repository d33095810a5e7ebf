"""Reservoir memory kernels.

Conventions
-----------
``G(t) = int dw J(w) exp(i (w0 - w) t)`` and its Laplace transform
``Gl(s) = int dw J(w) / (s - i (w0 - w))``. Frequencies are measured from
the band edge for the photonic-crystal kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate
from scipy import special as sps

from .errors import (
    BranchPoint,
    DivergentLimit,
    NonFiniteParameter,
    NotRepresentable,
    QuadratureFailure,
    SingularAtZero,
    UnsupportedVariant,
    ValidationError,
)
from .special import gamma_upper_incomplete, gamma_upper_incomplete_array

_PHASE = np.exp(-1j * np.pi / 4)


@dataclass(frozen=True)
class PhotonicCrystal:
    """Isotropic band edge with an inverse-square-root density of states."""

    beta: float = 1.0
    delta: float = 0.0


@dataclass(frozen=True)
class Ohmic:
    """J(w) = lam * cutoff * (w / cutoff)**exponent * exp(-w / cutoff)."""

    lam: float
    cutoff: float
    exponent: float
    omega0: float


@dataclass(frozen=True)
class Markovian:
    """Flat spectrum; Laplace kernel is the constant gamma / 2."""

    gamma: float


KernelSpec = Union[PhotonicCrystal, Ohmic, Markovian]


def validate_kernel(spec) -> None:
    if not isinstance(spec, (PhotonicCrystal, Ohmic, Markovian)):
        raise UnsupportedVariant(f"unknown kernel spec {spec!r}")
    for name, value in vars(spec).items():
        if not math.isfinite(float(value)):
            raise NonFiniteParameter(f"kernel parameter {name} must be finite")
    if isinstance(spec, PhotonicCrystal) and spec.beta <= 0:
        raise ValidationError("photonic-crystal beta must be > 0")
    if isinstance(spec, Ohmic) and min(spec.lam, spec.cutoff, spec.exponent, spec.omega0) <= 0:
        raise ValidationError("Ohmic parameters must all be > 0")
    if isinstance(spec, Markovian) and spec.gamma <= 0:
        raise ValidationError("Markovian gamma must be > 0")


def _out(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def spectral_density(spec, omega):
    """Spectral density J(w) for frequencies ``omega >= 0``.

    The photonic-crystal kernel is defined through its Laplace transform
    and is rejected here.
    """
    if isinstance(spec, PhotonicCrystal):
        raise UnsupportedVariant("photonic-crystal kernel has no spectral_density entry")
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValidationError("spectral_density needs omega >= 0")
    if isinstance(spec, Markovian):
        return _out(np.full_like(w, spec.gamma / (2 * np.pi)))
    x = w / spec.cutoff
    return _out(spec.lam * spec.cutoff * x ** spec.exponent * np.exp(-x))


def photonic_spectral_density(spec: PhotonicCrystal, omega):
    """Band-edge density beta^(3/2)/pi * (w - w_C)^(-1/2) above the edge, zero below."""
    w = np.asarray(omega, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w > 0, spec.beta ** 1.5 / np.pi / np.sqrt(np.abs(w)), 0.0)
    return _out(out)


# --- Laplace domain ---------------------------------------------------------

def _ohmic_closed(spec: Ohmic, s):
    # Gl(s) = -i lam W G(p+1) e^b b^p G(-p, b),  b = (-i s - w0) / W
    p = spec.exponent
    pref = -1j * spec.lam * spec.cutoff * sps.gamma(p + 1)
    s = np.asarray(s, dtype=complex)
    b = (-1j * s - spec.omega0) / spec.cutoff
    below = (b.imag == 0) & (b.real < 0)  # on the cut: the limit from Re s > 0 is the lower lip
    bb = np.where(below, b.real + 0j, b)
    v = bb ** p * gamma_upper_incomplete_array(-p, bb, scaled=True)
    return pref * np.where(below, np.conj(v), v)


def _ohmic_quadrature(spec: Ohmic, s, rtol=1e-11):
    s = np.asarray(s, dtype=complex)
    out = np.empty(s.shape, complex)
    w0 = spec.omega0

    def J(w):
        return spectral_density(spec, w)

    for idx, sv in np.ndenumerate(s):
        if sv.real <= 0:
            raise QuadratureFailure("quadrature path needs Re s > 0")
        # 1/(s + i(w - w0)) = (sr - i(si + w - w0)) / (sr^2 + (si + w - w0)^2)
        peak = max(w0 - sv.imag, 0.0)
        pts = sorted({peak, 2 * peak + spec.cutoff})
        parts = [(0.0, pts[0]), (pts[0], pts[1]), (pts[1], np.inf)] if peak > 0 \
            else [(0.0, pts[1]), (pts[1], np.inf)]
        re = im = 0.0
        for lo, hi in parts:
            if hi <= lo:
                continue
            for sign, f in ((1, lambda w: J(w) * sv.real / (sv.real ** 2 + (sv.imag + w - w0) ** 2)),
                            (-1, lambda w: J(w) * (sv.imag + w - w0) / (sv.real ** 2 + (sv.imag + w - w0) ** 2))):
                val, err = integrate.quad(f, lo, hi, epsabs=0, epsrel=rtol, limit=500)
                if not np.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300) + 1e-14:
                    raise QuadratureFailure(f"Ohmic Laplace quadrature did not converge at s={sv}")
                if sign > 0:
                    re += val
                else:
                    im -= val
        out[idx] = complex(re, im)
    return out


def kernel_laplace(spec, s, *, method: str = "closed"):
    """Laplace-domain memory kernel.

    Parameters
    ----------
    spec : KernelSpec
    s : complex or array_like
        Evaluation points, ``Re s > 0`` or on the principal-branch
        continuation.
    method : {"closed", "quadrature"}
        Ohmic only: closed form through the incomplete gamma function, or
        direct adaptive quadrature over the spectral density.

    Raises
    ------
    BranchPoint
        Photonic crystal evaluated at ``s = i*delta``.
    QuadratureFailure
        Ohmic quadrature failed to converge.
    """
    if isinstance(spec, Markovian):
        return _out(np.full(np.shape(s), spec.gamma / 2, dtype=complex))
    if isinstance(spec, PhotonicCrystal):
        z = np.asarray(s, dtype=complex) - 1j * spec.delta
        if np.any(z == 0):
            raise BranchPoint("photonic-crystal kernel evaluated at its branch point s = i*delta")
        return _out(spec.beta ** 1.5 * _PHASE / np.sqrt(z))
    if isinstance(spec, Ohmic):
        if method == "quadrature":
            return _out(_ohmic_quadrature(spec, s))
        return _out(_ohmic_closed(spec, s))
    raise UnsupportedVariant(f"unknown kernel spec {spec!r}")


def ohmic_principal_value(spec: Ohmic) -> float:
    """P int_0^inf J(w) / (w - w0) dw by Cauchy-weighted quadrature."""
    w0 = spec.omega0

    def J(w):
        return spectral_density(spec, w)

    a, ea = integrate.quad(J, 0.0, 2 * w0, weight="cauchy", wvar=w0, limit=500,
                           epsabs=0, epsrel=1e-12)
    b, eb = integrate.quad(lambda w: J(w) / (w - w0), 2 * w0, np.inf, limit=500,
                           epsabs=0, epsrel=1e-12)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise QuadratureFailure("principal-value quadrature failed")
    return a + b


def kernel_laplace_at_zero(spec):
    """Limit of the Laplace kernel as s -> 0 from the right.

    For the Ohmic kernel this is
    ``J(w0) [pi (1 + i cot(pi p) - i e^{i pi p} csc(pi p))
    - i e^{i pi p} Gamma(1+p) Gamma(-p, -w0/W)]``, with a principal-value
    quadrature used instead when p is (close to) an integer.

    Raises
    ------
    DivergentLimit
        Photonic crystal with zero detuning.
    """
    if isinstance(spec, Markovian):
        return complex(spec.gamma / 2)
    if isinstance(spec, PhotonicCrystal):
        if spec.delta == 0:
            raise DivergentLimit("band-edge kernel diverges at s=0 when delta=0")
        return complex(spec.beta ** 1.5 * _PHASE / np.sqrt(complex(0.0, -spec.delta)))
    if isinstance(spec, Ohmic):
        p = spec.exponent
        Jw0 = float(spectral_density(spec, spec.omega0))
        if abs(math.sin(math.pi * p)) < 1e-6:
            return complex(np.pi * Jw0, -ohmic_principal_value(spec))
        m1p = complex(math.cos(math.pi * p), math.sin(math.pi * p))
        cot = math.cos(math.pi * p) / math.sin(math.pi * p)
        csc = 1 / math.sin(math.pi * p)
        inc = gamma_upper_incomplete(-p, -spec.omega0 / spec.cutoff)
        return Jw0 * (np.pi * (1 + 1j * cot - 1j * m1p * csc)
                      - 1j * m1p * sps.gamma(1 + p) * inc)
    raise UnsupportedVariant(f"unknown kernel spec {spec!r}")


# --- time domain -----------------------------------------------------------

def _ohmic_time_quadrature(spec: Ohmic, t):
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape, complex)

    def J(w):
        return spectral_density(spec, w)

    for idx, tv in np.ndenumerate(t):
        c, _ = integrate.quad(J, 0, np.inf, weight="cos", wvar=tv, limlst=200)
        s_, _ = integrate.quad(J, 0, np.inf, weight="sin", wvar=tv, limlst=200)
        out[idx] = np.exp(1j * spec.omega0 * tv) * complex(c, -s_)
    return out


def kernel_time_domain(spec, t, *, method: str = "closed"):
    """Time-domain memory kernel G(t) for ``t > 0``.

    The Ohmic kernel has the closed form
    ``lam W^2 Gamma(p+1) e^{i w0 t} (1 + i W t)^{-(p+1)}``;
    ``method="quadrature"`` integrates the spectral density instead.

    Raises
    ------
    SingularAtZero
        For ``t <= 0``.
    NotRepresentable
        For the Markovian kernel (a delta at t=0).
    """
    tt = np.asarray(t, dtype=float)
    if np.any(tt <= 0):
        raise SingularAtZero("kernel_time_domain needs t > 0")
    if isinstance(spec, Markovian):
        raise NotRepresentable("Markovian kernel is a delta at t=0; use the Laplace path")
    if isinstance(spec, PhotonicCrystal):
        return _out(spec.beta ** 1.5 * _PHASE * np.exp(1j * spec.delta * tt) / np.sqrt(np.pi * tt))
    if isinstance(spec, Ohmic):
        if method == "quadrature":
            return _out(_ohmic_time_quadrature(spec, tt))
        p, W = spec.exponent, spec.cutoff
        return _out(spec.lam * W ** 2 * sps.gamma(p + 1) * np.exp(1j * spec.omega0 * tt)
                    * (1 + 1j * W * tt) ** (-(p + 1)))
    raise UnsupportedVariant(f"unknown kernel spec {spec!r}")


__all__ = [
    "PhotonicCrystal", "Ohmic", "Markovian", "KernelSpec", "validate_kernel",
    "spectral_density", "photonic_spectral_density", "kernel_laplace",
    "kernel_laplace_at_zero", "kernel_time_domain", "ohmic_principal_value",
]
