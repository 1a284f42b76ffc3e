"""Numerical lab for stochastic fractional conservation laws on a periodic interval.

Solves ``du + nu (-Delta)^{alpha/2} u dt + d_x A(u) dt = Phi(u) dW`` and
certifies computed trajectories through entropy and kinetic residuals.
"""
from .errors import (
    BracketError,
    ConfigurationError,
    FsclError,
    InvalidPairingError,
    ShapeError,
    SolverDivergenceError,
    UnsupportedGridError,
    UnusableTrajectoryError,
)
from .flux import FluxModel, engquist_osher, lax_friedrichs, max_wave_speed
from .fractional import (
    FractionalOrder,
    QuadratureSpec,
    apply_quadrature,
    apply_spectral,
    heat_semigroup,
    normalization_constant,
)
from .grid import Field, Grid, integrate, lp_norm, make_grid, positive_part_integral
from .kinetic import (
    KineticMeasure,
    XiGrid,
    assemble_measure,
    compute_m1,
    compute_m2,
    kinetic_function,
    measure_moment,
    validate_kinetic_measure,
    young_moment,
)
from .noise import NoiseIncrement, NoiseModel, sample_increment, verify_bounds
from .residuals import (
    Entropy,
    ResidualReport,
    XiCutoff,
    entropy_residual,
    kinetic_weak_residual,
    test_family,
    weak_form_residual,
)
from .solver import (
    InitialData,
    SolverConfig,
    Trajectory,
    contraction_experiment,
    ensemble,
    run,
    step,
    viscosity_sweep,
)

__version__ = "0.1.0"
