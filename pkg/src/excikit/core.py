"""Domain types and elementary quantities for the single-excitation sector.

Units: every time is measured in units of the reservoir coupling scale,
so couplings and detunings are dimensionless numbers.
"""
from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import (
    DetuningMismatch,
    EndDetuningOnWrongTopology,
    NonFiniteParameter,
    NonPositiveAtomCount,
    ValidationError,
)
from .kernels import KernelSpec, PhotonicCrystal, validate_kernel


class Topology(str, enum.Enum):
    FULLY_SYMMETRIC = "fully_symmetric"
    NEAREST_NEIGHBOUR = "nearest_neighbour"


class Reservoirs(str, enum.Enum):
    SHARED_SINGLE = "shared_single"
    INDEPENDENT_PER_ATOM = "independent_per_atom"


@dataclass(frozen=True)
class AtomEnsembleConfig:
    """Physical scenario: N atoms, their mutual coupling and their reservoir.

    Parameters
    ----------
    n_atoms : int
        Number of two-level atoms.
    dipole_coupling : float
        Atom-atom exchange coupling J.
    detuning : float
        Transition frequency minus band-edge frequency. For a
        photonic-crystal kernel this must equal ``kernel.delta``.
    topology, reservoirs : enum
        Coupling graph and reservoir arrangement.
    kernel : KernelSpec
    end_detuning : float
        Extra detuning of the chain ends (first atom +2d, interior +d,
        last atom 0). Only meaningful for a shared nearest-neighbour chain.
    """

    n_atoms: int
    dipole_coupling: float
    detuning: float
    topology: Topology
    reservoirs: Reservoirs
    kernel: KernelSpec
    end_detuning: float = 0.0

    @classmethod
    def photonic(cls, n_atoms, dipole_coupling, detuning, *,
                 topology=Topology.FULLY_SYMMETRIC,
                 reservoirs=Reservoirs.SHARED_SINGLE, end_detuning=0.0):
        """Shortcut for the band-edge kernel with matching detuning."""
        return cls(n_atoms, dipole_coupling, detuning, Topology(topology),
                   Reservoirs(reservoirs), PhotonicCrystal(delta=detuning),
                   end_detuning)

    def with_(self, **changes) -> "AtomEnsembleConfig":
        """Copy with fields replaced; keeps a PC kernel in sync with detuning."""
        if "detuning" in changes and "kernel" not in changes \
                and isinstance(self.kernel, PhotonicCrystal):
            changes["kernel"] = replace(self.kernel, delta=changes["detuning"])
        return replace(self, **changes)


@dataclass(frozen=True)
class SingleExcitationState:
    ground_amplitude: complex
    atom_amplitudes: tuple
    time: float = 0.0

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.atom_amplitudes)
        object.__setattr__(self, "atom_amplitudes", amps)
        object.__setattr__(self, "ground_amplitude", complex(self.ground_amplitude))
        vals = (self.ground_amplitude,) + amps
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in vals):
            raise NonFiniteParameter("state amplitudes must be finite")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValidationError("state time must be finite and non-negative")
        norm = abs(self.ground_amplitude) ** 2 + sum(abs(a) ** 2 for a in amps)
        if norm > 1 + 1e-12:
            raise ValidationError(f"state norm {norm:.6g} exceeds 1")

    @classmethod
    def from_atoms(cls, amplitudes, time=0.0):
        amps = np.asarray(amplitudes, dtype=complex)
        rest = 1.0 - float(np.sum(amps.real ** 2 + amps.imag ** 2))
        return cls(math.sqrt(max(rest, 0.0)), tuple(amps), time)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array(self.atom_amplitudes, dtype=complex)

    @property
    def n_atoms(self) -> int:
        return len(self.atom_amplitudes)


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Time series of atomic amplitudes.

    ``populations`` and ``polarisation`` are derived once from the stored
    amplitudes and never renormalised.
    """

    tau_grid: np.ndarray
    amplitudes: np.ndarray  # shape (N, T)
    method: str = ""
    info: Mapping = field(default_factory=dict)
    populations: np.ndarray = field(init=False, repr=False)
    polarisation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        if tau.ndim != 1 or amps.shape[1] != tau.size:
            raise ValidationError("amplitudes must have shape (N, len(tau_grid))")
        if tau.size > 1 and np.any(np.diff(tau) <= 0):
            raise ValidationError("tau_grid must be strictly increasing")
        object.__setattr__(self, "tau_grid", _readonly(tau))
        object.__setattr__(self, "amplitudes", _readonly(amps))
        object.__setattr__(self, "populations", _readonly(amps.real ** 2 + amps.imag ** 2))
        object.__setattr__(self, "polarisation", _readonly(amps.sum(axis=0)))
        object.__setattr__(self, "info", dict(self.info))

    @property
    def n_atoms(self):
        return self.amplitudes.shape[0]

    def state(self, k) -> SingleExcitationState:
        amps = self.amplitudes[:, k]
        return SingleExcitationState.from_atoms(amps, float(self.tau_grid[k]))


def _is_finite(x):
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate_config(cfg: AtomEnsembleConfig) -> AtomEnsembleConfig:
    """Check every invariant of ``cfg`` and return it unchanged.

    Raises
    ------
    NonPositiveAtomCount, EndDetuningOnWrongTopology, NonFiniteParameter,
    DetuningMismatch
    """
    n = cfg.n_atoms
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise NonPositiveAtomCount(f"n_atoms must be an integer, got {n!r}")
    if n < 1:
        raise NonPositiveAtomCount(f"n_atoms must be >= 1, got {n}")
    for name in ("dipole_coupling", "detuning", "end_detuning"):
        if not _is_finite(getattr(cfg, name)):
            raise NonFiniteParameter(f"{name} must be finite")
    Topology(cfg.topology)
    Reservoirs(cfg.reservoirs)
    validate_kernel(cfg.kernel)
    if cfg.end_detuning != 0 and not (
            cfg.topology == Topology.NEAREST_NEIGHBOUR
            and cfg.reservoirs == Reservoirs.SHARED_SINGLE):
        raise EndDetuningOnWrongTopology(
            "end_detuning requires a nearest-neighbour chain with a shared reservoir")
    if isinstance(cfg.kernel, PhotonicCrystal) and cfg.kernel.delta != cfg.detuning:
        raise DetuningMismatch(
            f"detuning {cfg.detuning} differs from kernel delta {cfg.kernel.delta}")
    return cfg


def total_polarisation(state) -> complex:
    """Sum of the excited-state amplitudes.

    Accepts a :class:`SingleExcitationState` or a plain amplitude sequence.
    """
    amps = state.atom_amplitudes if isinstance(state, SingleExcitationState) else state
    return complex(np.sum(np.asarray(amps, dtype=complex)))


# named initial conditions

def atom_excited(n_atoms: int, index: int = 0) -> np.ndarray:
    c = np.zeros(n_atoms, complex)
    c[index] = 1.0
    return c


def symmetric(n_atoms: int) -> np.ndarray:
    return np.full(n_atoms, 1 / np.sqrt(n_atoms), complex)


def bell(n_atoms: int, sign: int = +1) -> np.ndarray:
    """Atoms 1, 2 in (sign/sqrt2, 1/sqrt2); the rest in the ground state."""
    if n_atoms < 2:
        raise ValidationError("a Bell pair needs at least two atoms")
    c = np.zeros(n_atoms, complex)
    c[0] = np.copysign(1.0, sign) / np.sqrt(2)
    c[1] = 1 / np.sqrt(2)
    return c


def as_initial(init, n_atoms: int) -> np.ndarray:
    """Coerce an initial condition to a length-N complex vector."""
    if isinstance(init, SingleExcitationState):
        init = init.atom_amplitudes
    c = np.asarray(init, dtype=complex).ravel()
    if c.size != n_atoms:
        raise ValidationError(f"initial state has {c.size} amplitudes, expected {n_atoms}")
    if not np.all(np.isfinite(c)):
        raise NonFiniteParameter("initial amplitudes must be finite")
    if np.sum(np.abs(c) ** 2) > 1 + 1e-12:
        raise ValidationError("initial amplitudes have norm above 1")
    return c


__all__ = [
    "Topology", "Reservoirs", "AtomEnsembleConfig", "SingleExcitationState",
    "AmplitudeTrajectory", "validate_config", "total_polarisation",
    "atom_excited", "symmetric", "bell", "as_initial",
]
