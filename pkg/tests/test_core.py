import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from excikit.core import (
    AmplitudeTrajectory,
    AtomEnsembleConfig,
    Reservoirs,
    SingleExcitationState,
    Topology,
    as_initial,
    atom_excited,
    bell,
    symmetric,
    total_polarisation,
    validate_config,
)
from excikit.errors import (
    DetuningMismatch,
    EndDetuningOnWrongTopology,
    NonFiniteParameter,
    NonPositiveAtomCount,
    ValidationError,
)
from excikit.kernels import Markovian, PhotonicCrystal


def test_valid_config_round_trips():
    cfg = AtomEnsembleConfig.photonic(5, 0.1, 1.0)
    assert validate_config(cfg) is cfg
    assert cfg.kernel == PhotonicCrystal(delta=1.0)


@pytest.mark.parametrize("n", [0, -2, 2.5, True])
def test_atom_count(n):
    cfg = AtomEnsembleConfig(n, 0.1, 0.0, Topology.FULLY_SYMMETRIC, Reservoirs.SHARED_SINGLE, Markovian(1.0))
    with pytest.raises(NonPositiveAtomCount):
        validate_config(cfg)


def test_non_finite_and_mismatch():
    base = AtomEnsembleConfig.photonic(3, 0.1, 1.0)
    with pytest.raises(NonFiniteParameter):
        validate_config(base.with_(dipole_coupling=math.inf))
    with pytest.raises(DetuningMismatch):
        validate_config(base.with_(kernel=PhotonicCrystal(delta=2.0)))


def test_with_keeps_band_edge_in_sync():
    cfg = AtomEnsembleConfig.photonic(3, 0.1, 1.0).with_(detuning=-5.0)
    assert cfg.kernel.delta == -5.0
    validate_config(cfg)


def test_end_detuning_needs_shared_chain():
    with pytest.raises(EndDetuningOnWrongTopology):
        validate_config(AtomEnsembleConfig.photonic(5, 0.1, 0.0, end_detuning=0.05))
    validate_config(AtomEnsembleConfig.photonic(5, 0.1, 0.0, topology=Topology.NEAREST_NEIGHBOUR,
                                                end_detuning=0.05))


def test_polarisation_examples():
    assert total_polarisation(symmetric(7)) == pytest.approx(math.sqrt(7))
    assert total_polarisation([1 / math.sqrt(2), -1 / math.sqrt(2)]) == 0
    assert total_polarisation(bell(4, -1)) == 0
    assert total_polarisation(SingleExcitationState.from_atoms(atom_excited(3))) == 1


def test_state_norm():
    with pytest.raises(ValidationError):
        SingleExcitationState(0.5, (1.0,))
    s = SingleExcitationState.from_atoms([0.6, 0.0])
    assert s.ground_amplitude == pytest.approx(0.8)
    assert s.n_atoms == 2


def test_as_initial_checks():
    with pytest.raises(ValidationError):
        as_initial([1, 0], 3)
    with pytest.raises(ValidationError):
        as_initial([1, 1], 2)
    with pytest.raises(ValidationError):
        bell(1)


@given(st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=8))
def test_trajectory_derived_fields(amps):
    a = np.array(amps)[:, None] * np.exp(-1j * np.arange(3))[None, :]
    t = AmplitudeTrajectory(np.arange(3.0), a)
    assert np.allclose(t.populations, np.abs(a) ** 2)
    assert np.allclose(t.polarisation, a.sum(axis=0))
    assert not t.amplitudes.flags.writeable


def test_trajectory_shape_checks():
    with pytest.raises(ValidationError):
        AmplitudeTrajectory(np.arange(3.0), np.zeros((2, 4)))
    with pytest.raises(ValidationError):
        AmplitudeTrajectory(np.array([0.0, 2.0, 1.0]), np.zeros((1, 3)))
