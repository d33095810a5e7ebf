"""Single-excitation dynamics of atomic ensembles coupled to bosonic reservoirs."""
from .core import (
    AmplitudeTrajectory, AtomEnsembleConfig, Reservoirs, SingleExcitationState, Topology,
    atom_excited, bell, symmetric, total_polarisation, validate_config,
)
from .errors import ExcikitError, NumericalError, SaturationWarning, ValidationError
from .kernels import (
    Markovian, Ohmic, PhotonicCrystal, kernel_laplace, kernel_laplace_at_zero,
    kernel_time_domain, spectral_density,
)
from .laplace import invert_laplace, laplace_amplitudes, steady_state_fvt
from .analytic import (
    bell_state_run, fit_decay_rate, markovian_amplitudes, pc_nn_amplitudes, pc_nn_roots,
    pc_symmetric_amplitudes, pc_symmetric_roots, scaling_exponent,
)
from .oracle import build_mode_grid, integrate_discretized_modes, integrate_integrodifferential

__version__ = "0.1.0"
