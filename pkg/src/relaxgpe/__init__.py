"""Ground states of Gross-Pitaevskii energies by relaxed-energy SLP iterations."""

from .functionals import (
    KappaRule,
    ProblemSpec,
    TruncationBound,
    chemical_potential,
    compute_kappa,
    compute_M,
    energy_original,
    relaxed_energy,
    trunc_f,
    trunc_F,
    truncated_relaxed_energy,
)
from .grid import SpectralGrid, WaveField, apply_heat_semigroup, inner_product, norms
from .harness import (
    ConvergenceReport,
    convergence_study,
    dissipation_audit,
    estimate_rates,
    reference_solution,
)
from .io import read_field_snapshot, read_trace_csv, write_field_snapshot, write_trace_csv
from .problems import ConfigError, ProblemConfig, builtin_problem, load_config, parse_config
from .rotating import (
    RotationOptions,
    RotationSpec,
    apply_rotating_semigroup,
    effective_potential,
    rot_slp_step,
    rotating_energy_original,
    rotating_relaxed_energy,
)
from .solvers import (
    IterationTrace,
    SolverConfig,
    SolverError,
    residual,
    run_adaptive,
    run_fixed,
    slp_step,
    solve,
)

__version__ = "0.1.0"
