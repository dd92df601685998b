"""Gaussian phase-space simulation of exponentially expanded cat interferometers.

A qubit-entangled cat state of a trapped mass is stretched by alternating
harmonic and inverted-harmonic segments and recombined.  The package
covers the closed protocol, force sensing, gravitationally induced
entanglement between two such interferometers, decoherence and the
precision required of the trap switching.
"""

from ._accel import USE_NUMBA
from .interferometer import (
    CatState,
    ProtocolSchedule,
    QubitDensity,
    TrapSetup,
    close_interferometer,
    create_cat,
    force_phase,
    force_phase_report,
    max_superposition,
    optimal_time_force,
    protocol_trajectory,
    visibility,
)
from .phase_space import (
    GaussianUnitary,
    QuadraticHamiltonian,
    characteristic_fn,
    compose,
    evolve_gaussian,
    evolve_numeric_oracle,
    higher_moments,
    matrix_exp_symplectic,
    symplectic_segment,
    wigner_fn,
)
from .gie import (
    GieResult,
    GravCouplings,
    JointQubitDensity,
    gie_total_unitary,
    grav_couplings,
    joint_qubit_density,
    optimal_time_gie,
    ppt_negativity,
    witness_matrix,
)
from .decoherence import (
    NoiseModel,
    gas_decoherence,
    lyapunov_evolve,
    pressure_bound,
    protocol_covariance_with_diffusion,
    quasi_static_suppression,
    qubit_dephase,
)
from .robustness import (
    humpty_visibility_analytic,
    humpty_visibility_mc,
    sigma_eps_bound,
    sudden_bound,
    sudden_variance,
)

__version__ = "0.1.0"
