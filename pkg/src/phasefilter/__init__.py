"""Quantum filtering of an interferometer phase probed by a coherent field."""

from .filters import (
    ConditionedState,
    CountingVariant,
    HomodyneIntegrator,
    NumericalHealthError,
    counting_jump_rate,
    counting_step,
    filter_consistency_check,
    homodyne_expected_dy,
    homodyne_step,
)
from .gaussian import (
    GaussianBelief,
    GaussianForm,
    gaussian_step,
    heisenberg_check,
    third_moment_factorize,
    variance_closed_form,
)
from .interferometer import (
    InterferometerModel,
    integrate_master_equation,
    master_equation_rhs,
    scattering_matrix,
    verify_unitarity,
)
from .linear_regime import LinearRegimeSetup, run_linear_regime
from .operators import (
    DiagonalSpectrum,
    LinearizedOscillator,
    check_density,
    expectation,
    make_phase_operator,
    phase_unitary,
)
from .trajectories import (
    CoherentAmplitude,
    Scheme,
    Trajectory,
    TrajectoryConfig,
    collapse_statistics,
    ensemble_average,
    estimation_run,
    run_ensemble,
    simulate,
    simulate_counting,
    simulate_homodyne,
)

__version__ = "0.1.0"
