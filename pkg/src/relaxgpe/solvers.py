"""Sequential linear programming iterations for the relaxed energies.

Each step minimizes the linearization of the (concave) truncated relaxed
energy over the unit ball. The minimizer is the normalized negative
gradient, so a step costs one forward and one inverse FFT.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .functionals import (
    KappaRule,
    ProblemSpec,
    TruncationBound,
    _potential_terms,
    adaptive_kappa,
    compute_kappa,
    compute_M,
    relaxation_multiplier,
    relaxed_kinetic,
    trunc_f,
)
from .grid import WaveField, spectral_sum

log = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-300


class SolverError(RuntimeError):
    """Raised when an iteration breaks down; carries the trace so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-``tau`` or adaptive-``tau`` run settings.

    Adaptive mode is selected by giving ``tau0``, ``tauf`` and ``r`` instead
    of ``tau``.
    """

    order: int = 1
    tau: float | None = None
    tau0: float | None = None
    tauf: float | None = None
    r: float | None = None
    tol: float = 1e-12
    n_max: int = 80000
    kappa_rule: KappaRule = field(default_factory=KappaRule)

    def __post_init__(self):
        object.__setattr__(self, "kappa_rule", KappaRule.parse(self.kappa_rule))
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        adaptive = (self.tau0, self.tauf, self.r)
        if self.tau is not None:
            if any(v is not None for v in adaptive):
                raise ValueError("give either tau or (tau0, tauf, r), not both")
            if not self.tau > 0:
                raise ValueError(f"tau must be positive, got {self.tau}")
        else:
            if any(v is None for v in adaptive):
                raise ValueError("adaptive mode needs tau0, tauf and r")
            if not self.tau0 >= self.tauf > 0:
                raise ValueError("adaptive mode needs tau0 >= tauf > 0")
            if not self.r > 1:
                raise ValueError("reduction factor r must exceed 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    @property
    def adaptive(self) -> bool:
        return self.tau is None

    def stage_taus(self) -> list[float]:
        """``tau0 / r^j`` for as long as it stays at or above ``tauf``."""
        if not self.adaptive:
            return [self.tau]
        # tolerance keeps e.g. 1e-1 / 10**5 from slipping just under 1e-6
        count = math.floor(math.log(self.tau0 / self.tauf) / math.log(self.r) + 1e-9) + 1
        return [self.tau0 / self.r**j for j in range(count)]

    def fixed_at(self, tau: float) -> "SolverConfig":
        return replace(self, tau=tau, tau0=None, tauf=None, r=None)


@dataclass
class StageStart:
    stage: int
    tau: float
    e_relaxed: float
    e_original: float


@dataclass
class IterationTrace:
    """Per-iteration record of one run, stored column-wise."""

    order: int = 1
    mbound: float = float("inf")
    iters: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    kappa: list = field(default_factory=list)
    e_relaxed: list = field(default_factory=list)
    e_original: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    stage: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    status: str = "running"
    stage_status: list = field(default_factory=list)

    COLUMNS = ("iter", "tau", "kappa", "E_relaxed", "E_original", "residual", "wall_ns", "stage")

    def __len__(self):
        return len(self.iters)

    def append(self, it, tau, kappa, e_rel, e_orig, res, wall, stage):
        if self.iters and it <= self.iters[-1]:
            raise ValueError("iteration indices must increase")
        self.iters.append(int(it))
        self.tau.append(float(tau))
        self.kappa.append(float(kappa))
        self.e_relaxed.append(float(e_rel))
        self.e_original.append(float(e_orig))
        self.residual.append(float(res))
        self.wall_ns.append(int(wall))
        self.stage.append(int(stage))

    def rows(self):
        return zip(
            self.iters, self.tau, self.kappa, self.e_relaxed,
            self.e_original, self.residual, self.wall_ns, self.stage,
        )

    def column(self, name) -> np.ndarray:
        attr = {"iter": "iters", "E_relaxed": "e_relaxed", "E_original": "e_original"}.get(name, name)
        return np.asarray(getattr(self, attr))

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def n_stages(self) -> int:
        return len(self.starts)


class Stepper:
    """SLP update and energy evaluation for one fixed ``tau``.

    ``prepare`` computes everything about an iterate that both its energy
    and the next update need, so each iterate is transformed once.
    """

    def __init__(self, p: ProblemSpec, tau: float, order: int, mbound: TruncationBound):
        if p.omega != 0:
            raise ValueError("rotating problem: use relaxgpe.rotating.RotatingStepper")
        self.p = p
        self.grid = p.grid
        self.tau = float(tau)
        self.order = order
        self.mbound = mbound
        ksq = p.grid.ksq
        if order == 1:
            self.update_symbol = np.exp(-tau * ksq) / tau
        else:
            self.update_symbol = (4 * np.exp(-0.5 * tau * ksq) - np.exp(-tau * ksq)) / tau
        self.relax_symbol = relaxation_multiplier(p.grid, tau, order)

    def prepare(self, psi):
        return psi, sfft.fftn(psi)

    def direction(self, state, kappa):
        """Negative gradient of the truncated relaxed energy (unnormalized)."""
        psi, psihat = state
        lin = sfft.ifftn(psihat * self.update_symbol)
        nonlin = 2 * self.p.potential * psi + 0.5 * self.p.beta * trunc_f(psi, self.mbound)
        return lin - nonlin + 2 * kappa * psi

    def energies(self, state, kappa):
        """``(truncated relaxed energy, original energy)`` of a prepared iterate."""
        psi, psihat = state
        p = self.p
        pot, quart_t, l2sq = _potential_terms(self.grid, psi, p.potential, p.beta, self.mbound)
        rho = psi.real**2 + psi.imag**2
        quart = self.grid.integrate(rho * rho)
        e_rel = (
            relaxed_kinetic(self.grid, psihat, l2sq, self.tau, self.order, self.relax_symbol)
            + pot
            + 0.5 * p.beta * quart_t
            + kappa * (1.0 - l2sq)
        )
        kin = 0.5 * spectral_sum(self.grid, self.grid.ksq, psihat)
        e_orig = kin + pot + 0.5 * p.beta * quart
        return e_rel, e_orig


def make_stepper(p: ProblemSpec, tau, order, mbound, rotation=None) -> Stepper:
    if rotation is None and p.omega == 0:
        return Stepper(p, tau, order, mbound)
    from .rotating import RotatingStepper, RotationOptions

    return RotatingStepper(p, tau, order, mbound, rotation or RotationOptions())


def _normalize(grid, g, trace=None):
    nrm = math.sqrt(grid.weight * float(np.sum(g.real**2 + g.imag**2)))
    if not np.isfinite(nrm) or nrm < DEGENERATE_NORM:
        raise SolverError(
            f"degenerate SLP direction (norm {nrm:.3g}); kappa is probably misconfigured",
            trace,
        )
    return g / nrm


def residual(f_new: WaveField, f_old: WaveField, tau: float) -> float:
    """Stopping quantity ``max |f_new - f_old| / tau``."""
    if f_new.grid != f_old.grid:
        raise ValueError("fields live on different grids")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return _residual(f_new.values, f_old.values, tau)


def _residual(a, b, tau):
    return float(np.max(np.abs(a - b))) / tau


def slp_step(
    f: WaveField,
    p: ProblemSpec,
    tau: float,
    kappa: float,
    mbound: TruncationBound | None = None,
    order: int = 1,
) -> WaveField:
    """One SLP update: the unit-norm minimizer of the linearized energy."""
    l2 = math.sqrt(f.grid.weight * float(np.sum(np.abs(f.values) ** 2)))
    if abs(l2 - 1.0) > 1e-8:
        raise ValueError(f"slp_step needs a unit-norm field, got norm {l2}")
    mbound = mbound if mbound is not None else compute_M(p)
    stepper = Stepper(p, tau, order, mbound)
    g = stepper.direction(stepper.prepare(f.values), kappa)
    return f.with_values(_normalize(f.grid, g))


def _initial_values(f0: WaveField):
    l2 = math.sqrt(f0.grid.weight * float(np.sum(np.abs(f0.values) ** 2)))
    if abs(l2 - 1.0) > 1e-6:
        raise ValueError(f"initial field must be normalized, got norm {l2}")
    return np.array(f0.values) / l2


def _run_stage(psi, p, tau, cfg, mbound, stage, trace, rotation, clock0, kappa_fixed):
    """Iterate at one ``tau`` until the residual drops below ``tol``."""
    stepper = make_stepper(p, tau, cfg.order, mbound, rotation)
    rule = cfg.kappa_rule
    grid = p.grid
    state = stepper.prepare(psi)
    kappa0 = kappa_fixed if kappa_fixed is not None else adaptive_kappa(psi, p.potential, p.beta, rule.factor)
    e_rel, e_orig = stepper.energies(state, kappa0)
    trace.starts.append(StageStart(stage, tau, e_rel, e_orig))
    it0 = trace.iters[-1] if trace.iters else 0
    status = "max-iters"
    for n in range(1, cfg.n_max + 1):
        if kappa_fixed is None:
            kappa = adaptive_kappa(psi, p.potential, p.beta, rule.factor)
        else:
            kappa = kappa_fixed
        new = _normalize(grid, stepper.direction(state, kappa), trace)
        state = stepper.prepare(new)
        e_rel, e_orig = stepper.energies(state, kappa)
        res = _residual(new, psi, tau)
        psi = new
        trace.append(it0 + n, tau, kappa, e_rel, e_orig, res, time.perf_counter_ns() - clock0, stage)
        if not (np.isfinite(e_rel) and np.isfinite(e_orig)):
            trace.status = "diverged"
            raise SolverError(f"non-finite energy at iteration {it0 + n}", trace)
        if res <= cfg.tol:
            status = "converged"
            break
    trace.stage_status.append(status)
    log.debug("stage %d tau=%g: %s after %d iterations", stage, tau, status, n)
    return psi, status


def _run(f0, p, cfg, taus, rotation):
    psi = _initial_values(f0)
    mbound = compute_M(p)
    trace = IterationTrace(order=cfg.order, mbound=mbound.m)
    kappa_fixed = None
    if not cfg.kappa_rule.is_dynamic:
        kappa_fixed = compute_kappa(f0, p, cfg.kappa_rule, mbound)
    clock0 = time.perf_counter_ns()
    status = "converged"
    for stage, tau in enumerate(taus):
        psi, st = _run_stage(psi, p, tau, cfg, mbound, stage, trace, rotation, clock0, kappa_fixed)
        if st != "converged":
            status = st
    trace.status = status
    return f0.with_values(psi), trace


def run_fixed(f0: WaveField, p: ProblemSpec, cfg: SolverConfig, rotation=None):
    """Single-``tau`` SLP run. Returns ``(final field, trace)``."""
    if cfg.adaptive:
        raise ValueError("run_fixed needs a fixed-tau config")
    return _run(f0, p, cfg, [cfg.tau], rotation)


def run_adaptive(f0: WaveField, p: ProblemSpec, cfg: SolverConfig, rotation=None):
    """Warm-started ``tau`` continuation from ``tau0`` down to ``tauf``."""
    if not cfg.adaptive:
        raise ValueError("run_adaptive needs tau0, tauf and r")
    return _run(f0, p, cfg, cfg.stage_taus(), rotation)


def solve(f0: WaveField, p: ProblemSpec, cfg: SolverConfig, rotation=None):
    """Dispatch on the config mode."""
    if cfg.adaptive:
        return run_adaptive(f0, p, cfg, rotation)
    return run_fixed(f0, p, cfg, rotation)
