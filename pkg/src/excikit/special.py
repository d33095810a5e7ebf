"""Complex special functions and polynomial roots.

Thin, validated wrappers: the error functions delegate to the Faddeeva
routine in :mod:`scipy.special`, the incomplete gamma function to
:mod:`mpmath`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special as sps

from .errors import (
    BranchPointAtZero,
    NonConvergence,
    NonFiniteParameter,
    PoleAtNonPositiveInteger,
    SaturationWarning,
    ValidationError,
)

# exp(700) is close to the largest double
_EXP_LIMIT = 700.0


def erfc_complex(z):
    """Complementary error function on the complex plane.

    Parameters
    ----------
    z : complex or array_like

    Returns
    -------
    complex or ndarray
        erfc(z). Where ``Re(-z**2) > 700`` on a growing branch the result
        saturates to a non-finite value and a :class:`SaturationWarning`
        is issued.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise NonFiniteParameter("erfc_complex needs finite arguments")
    out = sps.erfc(z)
    # erfc(z) ~ exp(-z^2) grows off the real axis when |Im z| > |Re z|
    grow = (-(z * z)).real > _EXP_LIMIT
    if np.any(grow):
        warnings.warn("erfc_complex saturated: |exp(-z^2)| exceeds double range",
                      SaturationWarning, stacklevel=2)
        out = np.where(grow, complex(np.inf, np.inf), out)
    return out[()] if out.ndim == 0 else out


def erfcx_complex(z):
    """Scaled complementary error function exp(z**2) * erfc(z)."""
    z = np.asarray(z, dtype=complex)
    out = sps.wofz(1j * z)
    return out[()] if out.ndim == 0 else out


def csgn(z) -> int:
    """Complex sign: sign of Re z, falling back to sign of Im z on the imaginary axis."""
    z = complex(z)
    if z.real > 0:
        return 1
    if z.real < 0:
        return -1
    if z.imag > 0:
        return 1
    if z.imag < 0:
        return -1
    return 0


def _near_nonpositive_integer(x):
    return x <= 0 and float(x).is_integer()


def gamma_complete(x: float) -> float:
    """Euler gamma function of a real argument."""
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteParameter("gamma_complete needs a finite argument")
    if _near_nonpositive_integer(x):
        raise PoleAtNonPositiveInteger(f"gamma has a pole at {x:g}")
    return float(sps.gamma(x))


def gamma_upper_incomplete(a: float, z) -> complex:
    """Upper incomplete gamma function on the principal branch.

    Arguments on the negative real axis are taken on the upper lip of the
    cut (``arg z = +pi``), whatever the sign of a zero imaginary part.

    Raises
    ------
    BranchPointAtZero
        If ``z == 0`` and ``a <= 0``.
    """
    a = float(a)
    z = complex(z)
    if not (math.isfinite(a) and math.isfinite(z.real) and math.isfinite(z.imag)):
        raise NonFiniteParameter("gamma_upper_incomplete needs finite arguments")
    if z == 0:
        if a <= 0:
            raise BranchPointAtZero("upper incomplete gamma diverges at z=0 for a<=0")
        return complex(gamma_complete(a))
    if z.imag == 0 and z.real < 0:
        z = complex(z.real, 0.0)  # drop a signed zero; mpmath uses arg = +pi here
    return complex(mpmath.gammainc(a, mpmath.mpc(z.real, z.imag)))


def _ginc_series(a, z, nmax=4000):
    # Gamma(a) - z^a sum_k (-z)^k / (k! (a + k)),  0 < a < 1
    term = np.ones_like(z)
    tot = term / a
    live = np.ones(z.shape, bool)
    for k in range(1, nmax):
        term = np.where(live, term * (-z) / k, 0)
        inc = term / (a + k)
        tot = tot + inc
        live &= np.abs(inc) > 1e-17 * np.abs(tot)
        if not live.any():
            break
    return sps.gamma(a) - z ** a * tot


def _ginc_cf(a, z, nmax=20000):
    # modified Lentz evaluation of 1/(z + 1 - a - 1(1 - a)/(z + 3 - a - ...));
    # Gamma(a, z) = e^{-z} z^a times this
    tiny = 1e-300
    b = z + 1 - a
    c = np.full_like(z, 1 / tiny)
    d = 1 / b
    h = d.copy()
    live = np.ones(z.shape, bool)
    for i in range(1, nmax):
        an = -i * (i - a)
        b = b + 2
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1 / d
        de = np.where(live, d * c, 1)
        h = h * de
        live &= np.abs(de - 1) > 1e-16
        if not live.any():
            break
    return h


_ASYMPTOTIC = 60.0


def _ginc_asymptotic(a, z, nmax=90):
    # exp(z) Gamma(a, z) ~ z^(a-1) sum_k (a-1)(a-2)...(a-k) / z^k
    term = np.ones_like(z)
    tot = term.copy()
    for k in range(1, nmax):
        nxt = term * (a - k) / z
        if np.all(np.abs(nxt) <= 1e-17 * np.abs(tot)):
            break
        term = nxt
        tot = tot + term
    return z ** (a - 1) * tot


def _ginc_scaled_small(a, z):
    a0 = a - math.floor(a)
    ser = (np.abs(z) < 3) | (np.abs(np.angle(z)) > 0.85 * np.pi)
    g = np.empty_like(z)  # exp(z) Gamma(a0, z)
    if ser.any():
        zs = z[ser]
        direct = sps.exp1(zs) if a0 == 0 else _ginc_series(a0, zs)
        g[ser] = np.exp(zs) * direct
    if (~ser).any():
        zc = z[~ser]
        g[~ser] = zc ** a0 * _ginc_cf(a0, zc)
    k = a0
    while k < a - 1e-12:  # Gamma(k+1, z) = k Gamma(k, z) + z^k e^{-z}
        g = k * g + z ** k
        k += 1
    while k > a + 1e-12:  # Gamma(k-1, z) = (Gamma(k, z) - z^(k-1) e^{-z}) / (k - 1)
        g = (g - z ** (k - 1)) / (k - 1)
        k -= 1
    return g


def gamma_upper_incomplete_array(a: float, z, *, scaled: bool = False) -> np.ndarray:
    """Vectorised upper incomplete gamma for real ``a`` and complex ``z != 0``.

    Same branch as :func:`gamma_upper_incomplete`. The order is reduced to
    the interval [0, 1), where a power series (or the exponential integral
    for integer orders) is used near the negative real axis and for small
    ``|z|`` and a continued fraction elsewhere; recurrences restore the
    order. For ``|z| >= 60`` the large-argument expansion is summed
    directly. ``scaled=True`` returns ``exp(z) * Gamma(a, z)``, which stays
    finite for large ``Re z``.
    """
    a = float(a)
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise BranchPointAtZero("gamma_upper_incomplete_array needs z != 0")
    z = np.where((z.imag == 0) & (z.real < 0), z.real + 0j, z)  # upper lip
    out = np.empty_like(z)  # exp(z) Gamma(a, z)
    big = np.abs(z) >= _ASYMPTOTIC
    if big.any():
        out[big] = _ginc_asymptotic(a, z[big])
    rest = ~big
    if rest.any():
        out[rest] = _ginc_scaled_small(a, z[rest])
    g = out
    return g if scaled else np.exp(-z) * g


@dataclass(frozen=True)
class PolynomialC:
    """Complex polynomial, coefficients in ascending degree order."""

    coefficients: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coefficients)
        if len(c) < 2:
            raise ValidationError("polynomial degree must be >= 1")
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in c):
            raise NonFiniteParameter("polynomial coefficients must be finite")
        if abs(c[-1]) == 0:
            raise ValidationError("leading coefficient must be nonzero")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, np.array(self.coefficients))

    def derivative(self, x):
        c = np.polynomial.polynomial.polyder(np.array(self.coefficients))
        return np.polynomial.polynomial.polyval(x, c)


def poly_roots(p, *, max_iter: int = 50, rtol: float = 1e-10) -> np.ndarray:
    """All roots of a complex polynomial.

    Companion-matrix eigenvalues followed by Newton polishing. Roots are
    not merged; use :func:`min_root_separation` to detect near-duplicates.

    Parameters
    ----------
    p : PolynomialC or sequence
        Coefficients in ascending degree order.
    rtol : float
        Required residual ``|p(x)| <= rtol * max|c_k|`` per root.

    Raises
    ------
    NonConvergence
        If a root cannot be brought below the residual bound.
    """
    if not isinstance(p, PolynomialC):
        p = PolynomialC(tuple(p))
    c = np.array(p.coefficients)
    scale = np.max(np.abs(c))
    x = np.roots(c[::-1]).astype(complex)
    dc = np.polynomial.polynomial.polyder(c)
    pv = np.polynomial.polynomial.polyval
    res = np.abs(pv(x, c))
    for _ in range(max_iter):
        if np.all(res <= 0.01 * rtol * scale):
            break
        d = pv(x, dc)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = pv(x, c) / d
        trial = x - np.where(np.isfinite(step), step, 0)
        rt = np.abs(pv(trial, c))
        better = rt < res
        if not np.any(better):
            break
        x = np.where(better, trial, x)
        res = np.where(better, rt, res)
    if np.any(res > rtol * scale):
        raise NonConvergence(
            f"root residuals above {rtol:g} * max|c|: {res.max():.3e}", residuals=res)
    return x


def min_root_separation(roots) -> float:
    r = np.asarray(roots)
    if r.size < 2:
        return math.inf
    d = np.abs(r[:, None] - r[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


__all__ = [
    "erfc_complex", "erfcx_complex", "csgn", "gamma_complete",
    "gamma_upper_incomplete", "gamma_upper_incomplete_array", "PolynomialC", "poly_roots", "min_root_separation",
]
