"""Built-in experiments and YAML run configurations.

A config document looks like::

    domain: [[-16, 16]]
    grid_n: [4096]
    potential: {name: harmonic_lattice, params: {amplitude: 25, period: 4}}
    beta: 250
    omega: 0
    initial: {name: gaussian}
    solver: {order: 1, tau: 0.05, tol: 1.0e-12, n_max: 80000, kappa_rule: adaptive}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .functionals import ProblemSpec
from .grid import SpectralGrid, WaveField
from .solvers import SolverConfig


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


# -- potentials ---------------------------------------------------------------


def _harmonic(coords, gamma=None):
    gamma = gamma or [1.0] * len(coords)
    return 0.5 * sum((g * x) ** 2 for g, x in zip(gamma, coords))


def _harmonic_lattice(coords, amplitude=25.0, period=4.0):
    lattice = sum(np.sin(np.pi * x / period) ** 2 for x in coords)
    return _harmonic(coords) + amplitude * lattice


def _anisotropic_harmonic(coords, gamma_x=1.05, gamma_y=0.95):
    return _harmonic(coords, [gamma_x, gamma_y])


POTENTIALS = {
    "harmonic": _harmonic,
    "harmonic_lattice": _harmonic_lattice,
    "anisotropic_harmonic": _anisotropic_harmonic,
}


def make_potential(name, grid, **params) -> np.ndarray:
    if name not in POTENTIALS:
        raise ConfigError(f"unknown potential {name!r}; choose from {sorted(POTENTIALS)}")
    if name == "anisotropic_harmonic" and grid.dim != 2:
        raise ConfigError("anisotropic_harmonic needs a 2D grid")
    try:
        return POTENTIALS[name](grid.coords, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for potential {name!r}: {exc}") from None


# -- initial data -------------------------------------------------------------


def _gaussian(grid, V, omega, center=None, width=1.0):
    center = center or [0.0] * grid.dim
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
    return np.exp(-r2 / (2 * width**2))


def _exp_minus_potential(grid, V, omega):
    return np.exp(-V)


def _gaussian_vortex_mix(grid, V, omega, gamma_x=1.05, gamma_y=0.95):
    # (1 - Omega) phi_a + Omega phi_b, both damped by e^{-V}
    if grid.dim != 2:
        raise ConfigError("gaussian_vortex_mix needs a 2D grid")
    _, y = grid.coords
    phi_a = (gamma_x * gamma_y) ** 0.25 / np.sqrt(np.pi) * np.exp(-V)
    phi_b = (gamma_x - 1j * gamma_y * y) / np.sqrt(np.pi) * np.exp(-V)
    return (1 - omega) * phi_a + omega * phi_b


INITIALS = {
    "gaussian": _gaussian,
    "exp_minus_potential": _exp_minus_potential,
    "gaussian_vortex_mix": _gaussian_vortex_mix,
}


def make_initial(name, grid, V, omega=0.0, **params) -> WaveField:
    """Initial guess, normalized in the discrete L2 norm."""
    if name not in INITIALS:
        raise ConfigError(f"unknown initial condition {name!r}; choose from {sorted(INITIALS)}")
    try:
        values = INITIALS[name](grid, V, omega, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for initial condition {name!r}: {exc}") from None
    return WaveField(grid, values).normalized()


# -- configs ------------------------------------------------------------------


@dataclass
class ProblemConfig:
    domain: list
    grid_n: list
    potential: dict
    beta: float
    omega: float = 0.0
    initial: dict = field(default_factory=lambda: {"name": "gaussian"})
    solver: dict = field(default_factory=dict)
    name: str = "custom"

    def grid(self) -> SpectralGrid:
        try:
            return SpectralGrid(tuple(tuple(b) for b in self.domain), tuple(self.grid_n))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain/grid_n: {exc}") from None

    def build(self):
        """Materialize ``(ProblemSpec, initial field, SolverConfig)``."""
        grid = self.grid()
        V = make_potential(self.potential["name"], grid, **self.potential.get("params", {}))
        try:
            p = ProblemSpec(grid, V, self.beta, self.omega)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        f0 = make_initial(self.initial["name"], grid, p.potential, p.omega, **self.initial.get("params", {}))
        try:
            cfg = SolverConfig(**self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver settings: {exc}") from None
        return p, f0, cfg


REQUIRED_KEYS = ("domain", "grid_n", "potential", "beta")
OPTIONAL_KEYS = ("omega", "initial", "solver", "name")


def parse_config(text: str, source: str = "<config>") -> ProblemConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{source}:{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: expected a mapping at the top level")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise ConfigError(f"{source}: missing required key {key!r}")
    unknown = set(doc) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {sorted(unknown)}")
    pot = doc["potential"]
    if isinstance(pot, str):
        pot = {"name": pot}
    if not isinstance(pot, dict) or "name" not in pot:
        raise ConfigError(f"{source}: key 'potential' needs a 'name'")
    init = doc.get("initial", {"name": "gaussian"})
    if isinstance(init, str):
        init = {"name": init}
    if not isinstance(init, dict) or "name" not in init:
        raise ConfigError(f"{source}: key 'initial' needs a 'name'")
    try:
        beta = float(doc["beta"])
        omega = float(doc.get("omega", 0.0))
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: keys 'beta' and 'omega' must be numbers") from None
    solver = doc.get("solver", {}) or {}
    if not isinstance(solver, dict):
        raise ConfigError(f"{source}: key 'solver' must be a mapping")
    return ProblemConfig(
        domain=doc["domain"],
        grid_n=doc["grid_n"],
        potential=pot,
        beta=beta,
        omega=omega,
        initial=init,
        solver=solver,
        name=str(doc.get("name", "custom")),
    )


def load_config(path) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


# -- built-in experiments -----------------------------------------------------


def _ex1d_lattice(h=1 / 128):
    n = int(round(32 / h))
    return ProblemConfig(
        name="ex1d_lattice",
        domain=[[-16.0, 16.0]],
        grid_n=[n],
        potential={"name": "harmonic_lattice", "params": {"amplitude": 25.0, "period": 4.0}},
        beta=250.0,
        initial={"name": "gaussian"},
        solver={"order": 1, "tau": 1 / 20, "tol": 1e-12, "n_max": 80000},
    )


def _ex2d_harmonic(n=128):
    return ProblemConfig(
        name="ex2d_harmonic",
        domain=[[-8.0, 8.0], [-8.0, 8.0]],
        grid_n=[n, n],
        potential={"name": "harmonic"},
        beta=300.0,
        initial={"name": "exp_minus_potential"},
        solver={"order": 1, "tau": 1 / 64, "tol": 1e-7, "n_max": 80000},
    )


def _ex2d_rotating(omega=0.5, n=128):
    return ProblemConfig(
        name="ex2d_rotating",
        domain=[[-12.0, 12.0], [-12.0, 12.0]],
        grid_n=[n, n],
        potential={"name": "anisotropic_harmonic", "params": {"gamma_x": 1.05, "gamma_y": 0.95}},
        beta=1000.0,
        omega=omega,
        initial={"name": "gaussian_vortex_mix", "params": {"gamma_x": 1.05, "gamma_y": 0.95}},
        solver={"order": 1, "tau0": 1 / 64, "tauf": 1 / 128, "r": 2.0, "tol": 2e-3, "n_max": 80000},
    )


BUILTINS = {
    "ex1d_lattice": _ex1d_lattice,
    "ex2d_harmonic": _ex2d_harmonic,
    "ex2d_rotating": _ex2d_rotating,
}


def builtin_config(name: str, **overrides) -> ProblemConfig:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin problem {name!r}; choose from {sorted(BUILTINS)}")
    return BUILTINS[name](**overrides)


def builtin_problem(name: str, **overrides):
    """``(ProblemSpec, initial field, SolverConfig)`` for a named experiment.

    Overrides: ``h`` for ``ex1d_lattice``, ``n`` for the 2D problems and
    ``omega`` for ``ex2d_rotating``.
    """
    return builtin_config(name, **overrides).build()
