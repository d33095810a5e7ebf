"""Brute-force time-domain integrators used to cross-check the closed forms.

Two independent routes:

* :func:`integrate_discretized_modes` replaces the continuum reservoir by a
  finite set of modes and propagates the resulting Hermitian linear system.
* :func:`integrate_integrodifferential` integrates the memory-kernel
  equation of motion directly on a uniform grid.

Neither touches the Laplace-domain or closed-form code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import jv

from .core import (
    AmplitudeTrajectory, AtomEnsembleConfig, Reservoirs, Topology, as_initial, validate_config,
)
from .errors import (
    InsufficientModes, KernelNotRepresentable, StepSizeUnderflow,
    UnsupportedVariant, ValidationError,
)
from .kernels import Markovian, Ohmic, PhotonicCrystal, kernel_time_domain, spectral_density

MIN_MODES = 64
# band-edge grid: uniform in u = sqrt(w - w_C) up to U_EDGE, uniform in w beyond
_U_EDGE = 25.0
_PC_SPAN = 1600.0
_PC_MODES = 12000


@dataclass(frozen=True)
class ModeGrid:
    """Discrete reservoir.

    Attributes
    ----------
    frequencies : ndarray
        Mode frequencies. Photonic crystal: measured from the band edge.
        Ohmic: absolute. Markovian: measured from the atomic transition.
    couplings : ndarray
        ``g = sqrt(integral of J over the mode's cell)``.
    static_shift : float
        Principal-value shift ``int J(w)/(w - w0)`` of the spectrum beyond
        the grid; applied as a static correction by the propagator.
    kernel_error : float
        Relative L2 error of the discrete kernel on t in [0.1, 20] (NaN
        when the kernel has no time-domain form).
    """

    frequencies: np.ndarray
    couplings: np.ndarray
    count: int
    scheme: str = ""
    static_shift: float = 0.0
    kernel_error: float = float("nan")

    def __post_init__(self):
        w = np.asarray(self.frequencies, float)
        g = np.asarray(self.couplings, float)
        if w.shape != g.shape or w.size != self.count:
            raise ValidationError("frequencies and couplings must have length count")
        if self.count < MIN_MODES:
            raise InsufficientModes(f"a mode grid needs at least {MIN_MODES} modes")
        if np.any(np.diff(w) <= 0):
            raise ValidationError("mode frequencies must be strictly increasing")
        if np.any(g < 0):
            raise ValidationError("couplings must be non-negative")


def _hybrid_edges(span, n_modes, u_edge):
    # cell edges in w; spacing continuous at the seam (dw = 2 u du)
    u1 = min(u_edge, math.sqrt(span))
    far = max(span - u1 * u1, 0.0)
    du = (u1 + far / (2 * u1)) / n_modes
    n1 = max(1, int(round(u1 / du)))
    du = u1 / n1
    w_near = (np.arange(n1 + 1) * du) ** 2
    n2 = n_modes - n1
    if n2 > 0 and far > 0:
        w_far = u1 * u1 + np.arange(1, n2 + 1) * (far / n2)
        return np.concatenate([w_near, w_far])
    return w_near


def discrete_kernel(grid: ModeGrid, spec, t) -> np.ndarray:
    """``sum_l g_l^2 exp(i (w0 - w_l) t)`` evaluated on ``t``."""
    t = np.asarray(t, dtype=float)
    det = mode_detunings(grid, spec)
    g2 = grid.couplings ** 2
    out = np.zeros(t.shape, complex)
    step = max(1, 2_000_000 // max(t.size, 1))
    for lo in range(0, det.size, step):
        d = det[lo:lo + step]
        out += np.exp(-1j * np.outer(t, d)) @ g2[lo:lo + step]
    return out


def kernel_l2_error(grid: ModeGrid, spec, t_min=0.1, t_max=20.0, n=4000) -> float:
    t = np.linspace(t_min, t_max, n)
    ref = kernel_time_domain(spec, t)
    got = discrete_kernel(grid, spec, t)
    return float(np.sqrt(integrate.trapezoid(np.abs(got - ref) ** 2, t)
                         / integrate.trapezoid(np.abs(ref) ** 2, t)))


def mode_detunings(grid: ModeGrid, spec) -> np.ndarray:
    """Mode frequency minus atomic transition frequency."""
    if isinstance(spec, PhotonicCrystal):
        return grid.frequencies - spec.delta
    if isinstance(spec, Ohmic):
        return grid.frequencies - spec.omega0
    return np.asarray(grid.frequencies)


def build_mode_grid(spec, n_modes: int | None = None, omega_span=None, *,
                    scheme: str | None = None, tolerance: float = 0.02,
                    check: bool = True) -> ModeGrid:
    """Discretise a reservoir into modes.

    Parameters
    ----------
    spec : KernelSpec
    n_modes : int, optional
        Defaults: 12000 (band edge), 4096 (Ohmic, Markovian).
    omega_span : float or (float, float), optional
        Band edge: width above the edge (default 1600). Ohmic: ``(lo, hi)``
        absolute (default ``(0, 12 cutoff)``). Markovian: full width centred
        on the transition (default ``400 gamma``).
    scheme : {"hybrid", "sqrt"}, optional
        Band edge only. ``"sqrt"`` is uniform in ``u = sqrt(w - w_C)``;
        ``"hybrid"`` (default) switches to uniform-in-w cells at u = 25 so
        high modes do not rephase before t = 20.
    tolerance : float
        Maximum relative L2 kernel error on t in [0.1, 20].

    Raises
    ------
    InsufficientModes
        If the discrete kernel misses ``tolerance``.
    """
    if isinstance(spec, PhotonicCrystal):
        n = _PC_MODES if n_modes is None else int(n_modes)
        span = _PC_SPAN if omega_span is None else float(omega_span)
        scheme = scheme or "hybrid"
        if n < MIN_MODES:
            raise InsufficientModes(f"need at least {MIN_MODES} modes")
        if scheme == "sqrt":
            ue = np.linspace(0, math.sqrt(span), n + 1)
        elif scheme == "hybrid":
            ue = np.sqrt(_hybrid_edges(span, n, _U_EDGE))
        else:
            raise ValidationError(f"unknown scheme {scheme!r}")
        umid = 0.5 * (ue[1:] + ue[:-1])
        # integral of beta^(3/2)/pi (w)^(-1/2) dw over a cell = (2/pi) beta^(3/2) du
        g2 = (2 / np.pi) * spec.beta ** 1.5 * np.diff(ue)
        w = umid ** 2
        um, D = ue[-1], spec.delta
        if D > 0 and um * um <= D:
            raise InsufficientModes("grid must extend beyond the atomic transition")
        tail = integrate.quad(lambda u: 1.0 / (u * u - D), um, np.inf, limit=200)[0]
        shift = (2 / np.pi) * spec.beta ** 1.5 * tail
    elif isinstance(spec, Ohmic):
        n = 4096 if n_modes is None else int(n_modes)
        lo, hi = (0.0, 12 * spec.cutoff) if omega_span is None else map(float, omega_span)
        scheme = "uniform"
        if n < MIN_MODES:
            raise InsufficientModes(f"need at least {MIN_MODES} modes")
        edges = np.linspace(lo, hi, n + 1)
        w = 0.5 * (edges[1:] + edges[:-1])
        g2 = spectral_density(spec, w) * np.diff(edges)
        w0 = spec.omega0
        f = lambda x: float(spectral_density(spec, x)) / (x - w0)
        shift = integrate.quad(f, hi, np.inf, limit=200)[0] if hi > w0 else 0.0
        if lo > 0:
            shift += integrate.quad(f, 0, lo, limit=200)[0]
    elif isinstance(spec, Markovian):
        n = 4096 if n_modes is None else int(n_modes)
        width = 400 * spec.gamma if omega_span is None else float(omega_span)
        scheme = "uniform"
        if n < MIN_MODES:
            raise InsufficientModes(f"need at least {MIN_MODES} modes")
        edges = np.linspace(-width / 2, width / 2, n + 1)
        w = 0.5 * (edges[1:] + edges[:-1])
        g2 = np.full(n, spec.gamma / (2 * np.pi)) * np.diff(edges)
        shift = 0.0
    else:
        raise UnsupportedVariant(f"unknown kernel spec {spec!r}")

    grid = ModeGrid(w, np.sqrt(g2), int(w.size), scheme, float(shift))
    err = float("nan")
    if not isinstance(spec, Markovian):
        err = kernel_l2_error(grid, spec)
        if check and not err <= tolerance:
            raise InsufficientModes(
                f"discrete kernel error {err:.3%} above {tolerance:.1%} "
                f"({grid.count} modes, scheme {scheme})", error=err)
    return ModeGrid(w, np.sqrt(g2), int(w.size), scheme, float(shift), err)


def atom_hamiltonian(cfg: AtomEnsembleConfig) -> np.ndarray:
    """Static atomic block in the frame rotating at the reference transition."""
    N, J = cfg.n_atoms, cfg.dipole_coupling
    if cfg.topology == Topology.FULLY_SYMMETRIC:
        H = J * (np.ones((N, N)) - np.eye(N))
    else:
        H = J * (np.eye(N, k=1) + np.eye(N, k=-1))
    if cfg.end_detuning:
        d = cfg.end_detuning
        H = H + np.diag(np.r_[2 * d, np.full(max(N - 2, 0), d), 0.0][:N])
    return H.astype(complex)


def integrate_discretized_modes(cfg: AtomEnsembleConfig, init, grid: ModeGrid, tau_grid, *,
                                tol: float = 1e-15, max_chunk: float = 200.0) -> AmplitudeTrajectory:
    """Propagate atoms plus discrete modes exactly (Chebyshev expansion).

    The generator is time independent in the frame rotating with each
    mode, so each output interval is one application of ``exp(-i M dt)``
    expanded in Chebyshev polynomials to accuracy ``tol``. Modes start in
    the vacuum.

    Returns
    -------
    AmplitudeTrajectory
        ``info`` holds ``mode_population`` (per output time),
        ``norm_drift`` and ``ground_amplitude``.
    """
    validate_config(cfg)
    N = cfg.n_atoms
    c0 = as_initial(init, N)
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size < 1 or tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValidationError("tau_grid must be non-negative and strictly increasing")
    shared = cfg.reservoirs == Reservoirs.SHARED_SINGLE
    g = np.asarray(grid.couplings, float)
    wm = mode_detunings(grid, cfg.kernel).astype(float)
    H = atom_hamiltonian(cfg)
    H = H - grid.static_shift * (np.ones((N, N)) if shared else np.eye(N))

    hnorm = float(np.abs(np.linalg.eigvalsh(H)).max()) if N else 0.0
    R = math.sqrt(float(g @ g) * (N if shared else 1))
    lo = min(wm.min(), -hnorm) - R
    hi = max(wm.max(), hnorm) + R
    cen, rad = 0.5 * (hi + lo), 0.5 * (hi - lo) * 1.01
    Hn = (H - cen * np.eye(N)) / rad
    wn = (wm - cen) / rad
    gn = g / rad

    b = np.zeros(g.size if shared else (N, g.size), complex)
    c = c0.copy()
    ground = math.sqrt(max(0.0, 1 - float(np.sum(np.abs(c0) ** 2))))
    norm0 = float(np.sum(np.abs(c0) ** 2))

    def step(c, b, dt):
        x = rad * dt
        nterm = int(x) + 8
        while abs(jv(nterm, x)) > tol:
            nterm += 8
            if nterm > 10 * x + 10000:
                raise StepSizeUnderflow("Chebyshev series failed to converge")
        k = np.arange(nterm)
        coef = jv(k, x) * (-1j) ** k
        coef[1:] *= 2
        run = _chebyshev_shared if shared else _chebyshev_independent
        ac, ab = run(Hn.astype(complex), wn, gn, c, b, coef)
        ph = np.exp(-1j * cen * dt)
        return ac * ph, ab * ph

    out = np.empty((N, tau.size), complex)
    modes = np.empty(tau.size)
    drift = np.empty(tau.size)
    t_now = 0.0
    for j, tj in enumerate(tau):
        dt_total = tj - t_now
        nsub = max(1, int(math.ceil(rad * dt_total / max_chunk))) if dt_total > 0 else 0
        for _ in range(nsub):
            c, b = step(c, b, dt_total / nsub)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))):
            raise StepSizeUnderflow("non-finite amplitudes during propagation")
        t_now = tj
        out[:, j] = c
        modes[j] = float(np.sum(b.real ** 2 + b.imag ** 2))
        drift[j] = float(np.sum(c.real ** 2 + c.imag ** 2)) + modes[j] - norm0
    info = {
        "path": "discretized_modes",
        "mode_population": modes,
        "norm_drift": float(np.max(np.abs(drift))),
        "ground_amplitude": ground,
        "n_modes": grid.count,
        "scheme": grid.scheme,
        "kernel_error": grid.kernel_error,
        "static_shift": grid.static_shift,
    }
    return AmplitudeTrajectory(tau, out, "oracle_modes", info)


@numba.njit(cache=True, fastmath=True, nogil=True)
def _chebyshev_shared(Hn, wn, gn, c, b, coef):
    # sum_k coef_k T_k(M) (c, b), M(c, b) = (Hn c + i gn.b, wn*b - i gn sum(c));
    # mode vectors kept as separate real/imaginary arrays so the loop vectorises
    K = b.size
    t0c = c.copy()
    br0 = b.real.copy()
    bi0 = b.imag.copy()
    cs = np.sum(c)
    t1c = Hn @ c + 1j * np.sum(gn * b)
    br1 = np.empty(K)
    bi1 = np.empty(K)
    gb = 0j
    for l in range(K):
        vr = wn[l] * br0[l] + gn[l] * cs.imag
        vi = wn[l] * bi0[l] - gn[l] * cs.real
        br1[l] = vr
        bi1[l] = vi
        gb += gn[l] * (vr + 1j * vi)
    c0, c1 = coef[0], coef[1]
    ac = c0 * t0c + c1 * t1c
    ar = c0.real * br0 - c0.imag * bi0 + c1.real * br1 - c1.imag * bi1
    ai = c0.real * bi0 + c0.imag * br0 + c1.real * bi1 + c1.imag * br1
    for kk in range(2, coef.size):
        ckr = coef[kk].real
        cki = coef[kk].imag
        cs = np.sum(t1c)
        csr = cs.real
        csi = cs.imag
        mc = 2 * (Hn @ t1c + 1j * gb) - t0c
        gr = 0.0
        gi = 0.0
        for l in range(K):
            vr = 2 * (wn[l] * br1[l] + gn[l] * csi) - br0[l]
            vi = 2 * (wn[l] * bi1[l] - gn[l] * csr) - bi0[l]
            br0[l] = vr
            bi0[l] = vi
            ar[l] += ckr * vr - cki * vi
            ai[l] += ckr * vi + cki * vr
            gr += gn[l] * vr
            gi += gn[l] * vi
        gb = gr + 1j * gi
        ac += coef[kk] * mc
        t0c = t1c
        t1c = mc
        br0, br1 = br1, br0
        bi0, bi1 = bi1, bi0
    return ac, ar + 1j * ai


@numba.njit(cache=True, fastmath=True, nogil=True)
def _chebyshev_independent(Hn, wn, gn, c, b, coef):
    N, K = b.shape
    t0c = c.copy()
    br0 = b.real.copy()
    bi0 = b.imag.copy()
    br1 = np.empty((N, K))
    bi1 = np.empty((N, K))
    gb = np.zeros(N, np.complex128)
    for i in range(N):
        for l in range(K):
            gb[i] += gn[l] * (br0[i, l] + 1j * bi0[i, l])
    t1c = Hn @ c + 1j * gb
    for i in range(N):
        acc = 0j
        for l in range(K):
            vr = wn[l] * br0[i, l] + gn[l] * c[i].imag
            vi = wn[l] * bi0[i, l] - gn[l] * c[i].real
            br1[i, l] = vr
            bi1[i, l] = vi
            acc += gn[l] * (vr + 1j * vi)
        gb[i] = acc
    c0, c1 = coef[0], coef[1]
    ac = c0 * t0c + c1 * t1c
    ar = c0.real * br0 - c0.imag * bi0 + c1.real * br1 - c1.imag * bi1
    ai = c0.real * bi0 + c0.imag * br0 + c1.real * bi1 + c1.imag * br1
    for kk in range(2, coef.size):
        ckr = coef[kk].real
        cki = coef[kk].imag
        mc = 2 * (Hn @ t1c + 1j * gb) - t0c
        for i in range(N):
            cr = t1c[i].real
            ci = t1c[i].imag
            gr = 0.0
            gi = 0.0
            for l in range(K):
                vr = 2 * (wn[l] * br1[i, l] + gn[l] * ci) - br0[i, l]
                vi = 2 * (wn[l] * bi1[i, l] - gn[l] * cr) - bi0[i, l]
                br0[i, l] = vr
                bi0[i, l] = vi
                ar[i, l] += ckr * vr - cki * vi
                ai[i, l] += ckr * vi + cki * vr
                gr += gn[l] * vr
                gi += gn[l] * vi
            gb[i] = gr + 1j * gi
        ac += coef[kk] * mc
        t0c = t1c
        t1c = mc
        br0, br1 = br1, br0
        bi0, bi1 = bi1, bi0
    return ac, ar + 1j * ai


# --- memory-kernel equation --------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
# steps per block of the history sum; older blocks enter through one FFT convolution
_HISTORY_BLOCK = 2048


@numba.njit(cache=True, fastmath=True)
def _advance_block(lo, hi, C, v, f, far, K, B, phase_in, phase_out, Minv, H, P, pref, h):
    # trapezoidal steps n -> n+1 for lo <= n < hi; `far` holds history from j < lo
    N, m = P.shape
    hist = np.empty(m, np.complex128)
    rhs = np.empty(N, np.complex128)
    for n in range(lo, hi):
        for a in range(m):
            acc = far[n - lo, a] - B[n + 1] * v[0, a]
            for j in range(lo, n + 1):
                acc += K[n - j] * v[j, a]
            hist[a] = phase_out[n + 1] * acc
        for i in range(N):
            acc = C[n, i] + 0.5 * h * f[i]
            for a in range(m):
                acc -= 0.5 * h * P[i, a] * hist[a]
            rhs[i] = acc
        for i in range(N):
            acc = 0j
            for k in range(N):
                acc += Minv[i, k] * rhs[k]
            C[n + 1, i] = acc
        for a in range(m):
            acc = 0j
            for i in range(N):
                acc += P[i, a] * C[n + 1, i]
            v[n + 1, a] = phase_in[n + 1] * acc
            hist[a] += pref * B[0] * acc
        for i in range(N):
            acc = 0j
            for k in range(N):
                acc += H[i, k] * C[n + 1, k]
            for a in range(m):
                acc -= 1j * P[i, a] * hist[a]
            f[i] = -1j * acc
    return f


def _panel_weights(spec, h, n):
    """Weights for int_{kh}^{(k+1)h} R(sig) {(sig-kh)/h, ((k+1)h-sig)/h} dsig, k < n.

    The kernel is written ``G(sig) = pref * exp(i rate sig) * R(sig)``.
    """
    k = np.arange(n, dtype=float)
    if isinstance(spec, PhotonicCrystal):
        # R = sig^(-1/2): moments in closed form
        a, b = k * h, (k + 1) * h
        m0 = 2 * (np.sqrt(b) - np.sqrt(a))
        m1 = (2 / 3) * (b ** 1.5 - a ** 1.5)
        A = (m1 - a * m0) / h
        B = (b * m0 - m1) / h
        pref = spec.beta ** 1.5 * np.exp(-1j * np.pi / 4) / math.sqrt(math.pi)
        return A, B, pref, spec.delta
    if isinstance(spec, Ohmic):
        p, W = spec.exponent, spec.cutoff
        x = 0.5 * (_GL_X + 1)  # nodes on [0, 1]
        sig = (k[:, None] + x[None, :]) * h
        R = (1 + 1j * W * sig) ** (-(p + 1))
        wq = 0.5 * _GL_W[None, :] * h
        A = (R * x[None, :] * wq).sum(axis=1)
        B = (R * (1 - x[None, :]) * wq).sum(axis=1)
        pref = spec.lam * W ** 2 * math.gamma(p + 1)
        return A, B, pref, spec.omega0
    raise KernelNotRepresentable("memory-kernel integration needs a time-domain kernel")


def integrate_integrodifferential(cfg: AtomEnsembleConfig, init, tau_grid, *,
                                  h: float = 1e-3) -> AmplitudeTrajectory:
    """Integrate the memory-kernel equation of motion on a uniform grid.

    ``dc/dt = -i H c - P int_0^t G(t - t') P^T c(t') dt'`` with ``P`` the
    all-ones column (shared reservoir) or the identity (one reservoir per
    atom). The convolution uses product integration: the smooth factor
    ``exp(-i rate t') P^T c(t')`` is interpolated linearly and integrated
    exactly against the (possibly singular) kernel on each panel. Time
    stepping is the trapezoidal rule; the implicit part is linear and
    solved exactly. Output times are reached by linear interpolation.

    Raises
    ------
    KernelNotRepresentable
        For the Markovian kernel.
    """
    validate_config(cfg)
    if isinstance(cfg.kernel, Markovian):
        raise KernelNotRepresentable("Markovian kernel has no time-domain form; use the Laplace path")
    N = cfg.n_atoms
    c0 = as_initial(init, N)
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size < 1 or tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValidationError("tau_grid must be non-negative and strictly increasing")
    if not h > 0:
        raise ValidationError("step h must be positive")
    # align the step with a uniform output grid when possible
    if tau.size > 1:
        dtau = np.diff(tau)
        if np.allclose(dtau, dtau[0], rtol=1e-9, atol=0):
            h = dtau[0] / math.ceil(dtau[0] / h - 1e-9)
    nstep = int(math.ceil(tau[-1] / h - 1e-9))
    A, B, pref, rate = _panel_weights(cfg.kernel, h, nstep + 1)

    shared = cfg.reservoirs == Reservoirs.SHARED_SINGLE
    H = atom_hamiltonian(cfg)
    P = np.ones((N, 1)) if shared else np.eye(N)
    m = P.shape[1]
    M = np.eye(N) + 0.5 * h * (1j * H + pref * B[0] * (P @ P.T))
    Minv = np.linalg.inv(M)

    t = np.arange(nstep + 1) * h
    phase_in = np.exp(-1j * rate * t)
    phase_out = pref * np.exp(1j * rate * t)
    v = np.zeros((nstep + 1, m), complex)  # exp(-i rate t) P^T c
    C = np.empty((nstep + 1, N), complex)
    C[0] = c0
    v[0] = phase_in[0] * (P.T @ c0)
    f = (-1j * (H @ c0)).astype(complex)  # history is empty at t = 0
    # hist_{n+1} = sum_{j<=n} A_{n-j} v_j + sum_{1<=j<=n} B_{n+1-j} v_j
    #            = sum_{j<=n} K_{n-j} v_j - B_{n+1} v_0,   K_k = A_k + B_{k+1}
    K = A[:-1] + B[1:]
    Hc = H.astype(complex)
    block = _HISTORY_BLOCK
    Pc = P.astype(complex)
    for lo in range(0, nstep, block):
        hi = min(lo + block, nstep)
        far = np.zeros((block, m), complex)
        if lo:
            # contributions of every completed block to the steps of this one
            full = fftconvolve(v[:lo], K[:lo + block, None], axes=0)
            take = full[lo:lo + block]
            far[:take.shape[0]] = take
        f = _advance_block(lo, hi, C, v, f, far, K, B, phase_in, phase_out, Minv, Hc, Pc,
                           complex(pref), h)
    re = np.array([np.interp(tau, t, C[:, i].real) for i in range(N)])
    im = np.array([np.interp(tau, t, C[:, i].imag) for i in range(N)])
    ground = math.sqrt(max(0.0, 1 - float(np.sum(np.abs(c0) ** 2))))
    info = {"path": "memory_kernel", "step": h, "ground_amplitude": ground}
    return AmplitudeTrajectory(tau, re + 1j * im, "oracle_convolution", info)


__all__ = [
    "ModeGrid", "build_mode_grid", "discrete_kernel", "kernel_l2_error", "mode_detunings",
    "atom_hamiltonian", "integrate_discretized_modes", "integrate_integrodifferential",
]
