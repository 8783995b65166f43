"""Quaternionic quantum mechanics on finite grids.

Quaternions are stored in symplectic form ``q = z + zeta j`` with complex
``z`` and ``zeta``. Fields sampled on a :class:`~qqm.grid.Grid` are
:class:`~qqm.grid.QField` objects holding two complex arrays.
"""

from .grid import Grid, GridError, QField
from .observables import (
    CurrentField,
    RealnessError,
    continuity_residual,
    current_closed_form,
    density,
    expectation_value,
    momentum_apply,
    probability_current,
    symmetrised_product,
)
from .quaternion import I, J, K, ONE, PolarUnitQuaternion, Quaternion, left_mul_i, polar_compose, polar_decompose, q_conj, q_mul, right_mul_i
from .scattering import (
    EvanescentRegime,
    NoPropagation,
    ScatteringError,
    StepScatteringResult,
    StepScatteringSpec,
    boundary_residuals,
    current_balance,
    solve_step,
)
from .schrodinger import Potential, ResidualReport, hamiltonian_apply, period_samples, stationary_residual, time_dependent_residual
from .wavefunction import (
    ConstraintViolation,
    FreeParticleSpec,
    PlaneWaveSpec,
    SeparationFields,
    TimePhaseSpec,
    co_propagating_wave,
    counter_propagating_wave,
    no_nontrivial_theta_check,
    random_free_particle_spec,
    sample_free_particle,
    separated_solution,
    separation_fields,
    separation_residuals,
    time_phase,
    time_phase_residual,
    validate_free_particle,
)

__version__ = "0.1.0"
