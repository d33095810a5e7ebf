import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from excikit.errors import (
    BranchPoint,
    DivergentLimit,
    NotRepresentable,
    SingularAtZero,
    UnsupportedVariant,
    ValidationError,
)
from excikit.kernels import (
    Markovian,
    Ohmic,
    PhotonicCrystal,
    kernel_laplace,
    kernel_laplace_at_zero,
    kernel_time_domain,
    ohmic_principal_value,
    spectral_density,
    validate_kernel,
)

PHASE = np.exp(-1j * np.pi / 4)


def laplace_of_time_kernel(spec, s, t_max=200.0):
    # oscillatory integrand; split into many panels
    def part(f):
        edges = np.linspace(0, t_max, 801)
        return sum(integrate.quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
                   for a, b in zip(edges[:-1], edges[1:]))

    g = lambda t: complex(kernel_time_domain(spec, max(t, 1e-300)) * np.exp(-s * t))
    return part(lambda t: g(t).real) + 1j * part(lambda t: g(t).imag)


def test_spectral_density_values():
    assert spectral_density(Ohmic(0.1, 10, 1, 1), 1.0) == pytest.approx(0.1 * 10 * 0.1 * math.exp(-0.1), rel=1e-14)
    assert spectral_density(Ohmic(0.1, 10, 1, 1), 0.0) == 0
    assert spectral_density(Markovian(0.2), 3.7) == pytest.approx(0.2 / (2 * math.pi))
    with pytest.raises(UnsupportedVariant):
        spectral_density(PhotonicCrystal(), 1.0)


def test_validation():
    with pytest.raises(ValidationError):
        validate_kernel(PhotonicCrystal(beta=0.0))
    with pytest.raises(ValidationError):
        validate_kernel(Ohmic(0.1, -1.0, 1.0, 1.0))
    with pytest.raises(ValidationError):
        validate_kernel(Markovian(float("nan")))


class TestLaplace:
    def test_band_edge_values(self):
        assert kernel_laplace(PhotonicCrystal(), 1.0) == pytest.approx(PHASE, rel=1e-15)
        assert kernel_laplace(PhotonicCrystal(delta=-5), 1e-14) == pytest.approx(-1j / math.sqrt(5), rel=1e-12)
        assert kernel_laplace(Markovian(1.0), 3 + 2j) == 0.5

    def test_branch_point(self):
        with pytest.raises(BranchPoint):
            kernel_laplace(PhotonicCrystal(delta=2.0), 2j)

    def test_band_edge_from_density_of_states(self):
        # G~(s) = int_0^inf rho(u) / (s - i(delta - u)) du with rho = u^{-1/2} / pi
        spec = PhotonicCrystal(delta=-5.0)
        s = 0.3 + 0.2j
        f = lambda u: 1 / (math.pi * math.sqrt(u)) / (s - 1j * (spec.delta - u))
        re = integrate.quad(lambda u: f(u).real, 0, np.inf, limit=400)[0]
        im = integrate.quad(lambda u: f(u).imag, 0, np.inf, limit=400)[0]
        assert complex(re, im) == pytest.approx(kernel_laplace(spec, s), rel=1e-7)

    @given(st.floats(0.05, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_conjugation(self, x, y, d):
        s = complex(x, y)
        a = kernel_laplace(PhotonicCrystal(delta=-d), s.conjugate())
        # the fixed e^{-i pi/4} prefactor turns conjugation into a quarter turn
        b = -1j * np.conj(kernel_laplace(PhotonicCrystal(delta=d), s))
        assert a == pytest.approx(b, rel=1e-13)

    @pytest.mark.parametrize("spec", [Ohmic(0.1, 10, 1, 1), Ohmic(0.05, 1, 2, 1), Ohmic(0.1, 10, 0.5, 1)])
    def test_ohmic_closed_vs_quadrature(self, spec):
        s = np.array([0.3, 1 + 2j, 0.5 - 3j, 4 + 0.1j])
        a = kernel_laplace(spec, s)
        b = kernel_laplace(spec, s, method="quadrature")
        assert np.allclose(a, b, rtol=1e-9, atol=0)

    def test_ohmic_decays_on_real_axis(self):
        spec = Ohmic(0.1, 10, 1, 1)
        vals = np.abs(kernel_laplace(spec, np.array([1e2, 1e4, 1e6])))
        assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-3

    @pytest.mark.parametrize("spec", [PhotonicCrystal(delta=1.0), Ohmic(0.05, 1.0, 2.0, 1.0)])
    def test_transform_of_time_kernel(self, spec):
        rng = np.random.default_rng(1)
        for s in 0.3 + rng.uniform(0, 1.5, 4) + 1j * rng.uniform(-2, 2, 4):
            ref = kernel_laplace(spec, s)
            got = laplace_of_time_kernel(spec, s)
            assert abs(got - ref) <= 1e-4 * abs(ref)


class TestAtZero:
    def test_markovian(self):
        assert kernel_laplace_at_zero(Markovian(0.4)) == 0.2

    def test_band_edge(self):
        with pytest.raises(DivergentLimit):
            kernel_laplace_at_zero(PhotonicCrystal(delta=0.0))
        assert kernel_laplace_at_zero(PhotonicCrystal(delta=-5)) == pytest.approx(-1j / math.sqrt(5))

    def test_ohmic_integer_exponent(self):
        spec = Ohmic(0.1, 10, 1, 1)
        v = kernel_laplace_at_zero(spec)
        assert v.real == pytest.approx(math.pi * 0.1 * 10 * 0.1 * math.exp(-0.1), rel=1e-10)
        assert v.imag == pytest.approx(-ohmic_principal_value(spec), rel=1e-10)

    def test_ohmic_fractional_exponent(self):
        spec = Ohmic(0.1, 10, 0.5, 1)
        v = kernel_laplace_at_zero(spec)
        pv = ohmic_principal_value(spec)
        assert v == pytest.approx(complex(math.pi * spectral_density(spec, 1.0), -pv), rel=1e-8)

    def test_matches_small_s(self):
        spec = Ohmic(0.05, 1.0, 2.0, 1.0)
        assert kernel_laplace(spec, 1e-9) == pytest.approx(kernel_laplace_at_zero(spec), rel=1e-6)


class TestTimeDomain:
    def test_band_edge_value(self):
        assert kernel_time_domain(PhotonicCrystal(), 1.0) == pytest.approx(PHASE / math.sqrt(math.pi))

    def test_detuning_is_a_phase(self):
        t = np.linspace(0.1, 10, 30)
        a = np.abs(kernel_time_domain(PhotonicCrystal(delta=2.0), t))
        b = np.abs(kernel_time_domain(PhotonicCrystal(delta=0.0), t))
        assert np.allclose(a, b, rtol=1e-14)

    def test_ohmic_linear_exponent(self):
        # int_0^inf w e^{-w/W} e^{-iwt} dw = W^2 / (1 + iWt)^2
        spec = Ohmic(0.1, 10.0, 1.0, 1.0)
        t = np.array([0.05, 0.3, 2.0])
        ref = spec.lam * np.exp(1j * spec.omega0 * t) * spec.cutoff ** 2 / (1 + 1j * spec.cutoff * t) ** 2
        assert np.allclose(kernel_time_domain(spec, t), ref, rtol=1e-13)
        assert np.allclose(kernel_time_domain(spec, t, method="quadrature"), ref, rtol=1e-7)

    def test_errors(self):
        with pytest.raises(SingularAtZero):
            kernel_time_domain(PhotonicCrystal(), 0.0)
        with pytest.raises(NotRepresentable):
            kernel_time_domain(Markovian(1.0), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3), st.floats(-3, 3))
def test_band_edge_principal_branch(x, y):
    # Re s > 0 keeps s - i delta off the cut, so Re sqrt > 0
    spec = PhotonicCrystal(delta=0.7)
    g = kernel_laplace(spec, complex(x, y))
    assert (g / PHASE).real > 0
