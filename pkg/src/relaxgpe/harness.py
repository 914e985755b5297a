"""Reference solutions, convergence tables and dissipation audits."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .functionals import ProblemSpec, chemical_potential, energy_original
from .grid import SpectralGrid, WaveField
from .io import read_field_snapshot, write_field_snapshot
from .problems import ProblemConfig
from .solvers import IterationTrace, SolverConfig, SolverError, run_adaptive, run_fixed, solve

log = logging.getLogger(__name__)

AUDIT_THRESHOLD = 1e-10


def _default_initial(p: ProblemSpec) -> WaveField:
    r2 = sum(x * x for x in p.grid.coords)
    return WaveField(p.grid, np.exp(-r2 / 2)).normalized()


def reference_solution(
    p: ProblemSpec,
    f0: WaveField | None = None,
    *,
    tau0: float = 0.1,
    tauf: float = 1e-3,
    r: float = 10.0,
    tol: float = 1e-12,
    n_max: int = 80000,
    extrapolate: bool = True,
    cache: str | os.PathLike | None = None,
) -> WaveField:
    """High-accuracy ground state from the second-order continuation.

    After the last stage at ``tauf`` one more stage is run at ``tauf / 2``
    and the two are combined as ``(4 phi(tauf/2) - phi(tauf)) / 3``, which
    removes the leading ``tau^2`` error. ``cache`` names a snapshot file
    that is read when present and written otherwise.
    """
    if cache is not None and os.path.exists(cache):
        return read_field_snapshot(cache, p.grid)
    f0 = f0 if f0 is not None else _default_initial(p)
    cfg = SolverConfig(order=2, tau0=tau0, tauf=tauf, r=r, tol=tol, n_max=n_max)
    coarse, trace = run_adaptive(f0, p, cfg)
    if not trace.converged:
        raise SolverError(f"reference did not converge: stages {trace.stage_status}", trace)
    result = coarse
    if extrapolate:
        tau_last = cfg.stage_taus()[-1]
        fine, trace2 = run_fixed(coarse, p, cfg.fixed_at(tau_last / 2))
        if not trace2.converged:
            raise SolverError("reference refinement stage did not converge", trace2)
        result = WaveField(p.grid, (4 * fine.values - coarse.values) / 3).normalized()
    if cache is not None:
        write_field_snapshot(result, cache)
    return result


def align_phase(f: WaveField, ref: np.ndarray) -> np.ndarray:
    """``f`` times the unit phase maximizing ``Re <f e^{i theta}, ref>``."""
    c = np.vdot(ref, f.values)
    if c == 0:
        return np.array(f.values)
    return f.values * (np.conj(c) / abs(c))


def estimate_rates(errors, ratio) -> list[float]:
    """Observed orders ``ln(e_{i-1} / e_i) / ln(ratio)``; NaN where undefined."""
    errors = [float(e) for e in errors]
    ratios = [float(ratio)] * max(len(errors) - 1, 0) if np.ndim(ratio) == 0 else list(ratio)
    if len(ratios) != max(len(errors) - 1, 0):
        raise ValueError("need one ratio per consecutive pair of errors")
    rates = []
    for (a, b), q in zip(zip(errors, errors[1:]), ratios):
        if not q > 1:
            raise ValueError("sweep ratio must exceed 1")
        if a > 0 and b > 0:
            rates.append(math.log(a / b) / math.log(q))
        else:
            rates.append(float("nan"))
    return rates


@dataclass
class ConvergenceRow:
    param: float
    err_phi: float
    err_E: float
    err_mu: float
    err_phi_unaligned: float
    status: str
    iterations: int
    rate_phi: float = float("nan")
    rate_E: float = float("nan")
    rate_mu: float = float("nan")


@dataclass
class ConvergenceReport:
    kind: str
    rows: list = field(default_factory=list)
    reference: dict = field(default_factory=dict)

    COLUMNS = ("param", "err_phi", "rate_phi", "err_E", "rate_E", "err_mu", "rate_mu")

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(format(getattr(r, c), ".17g") for c in self.COLUMNS) + "\n")

    def format_table(self) -> str:
        label = "tau" if self.kind == "tau" else "h"
        lines = [f"{label:>10} {'max|dphi|':>10} {'rate':>6} {'|dE|':>10} {'rate':>6} {'|dmu|':>10} {'rate':>6}"]
        for i, r in enumerate(self.rows):
            def rate(v):
                return "    --" if i == 0 or not np.isfinite(v) else f"{v:6.2f}"
            lines.append(
                f"{r.param:10.4g} {r.err_phi:10.2e} {rate(r.rate_phi)} {r.err_E:10.2e} "
                f"{rate(r.rate_E)} {r.err_mu:10.2e} {rate(r.rate_mu)}"
            )
        return "\n".join(lines)


def _sample_reference(ref: WaveField, grid: SpectralGrid) -> np.ndarray:
    """Reference values at the nodes of a coarser nested grid."""
    if ref.grid == grid:
        return ref.values
    if ref.grid.bounds != grid.bounds or ref.grid.dim != grid.dim:
        raise ValueError("reference grid covers a different domain")
    steps = []
    for nr, n in zip(ref.grid.n, grid.n):
        if nr % n:
            raise ValueError(f"reference grid with {nr} points does not refine {n}")
        steps.append(nr // n)
    return ref.values[tuple(slice(None, None, s) for s in steps)]


def _reference_problem(config: ProblemConfig, ref: WaveField) -> ProblemSpec:
    cfg = replace(config, grid_n=list(ref.grid.n))
    p, _, _ = cfg.build()
    return p


def convergence_study(
    config: ProblemConfig,
    sweep,
    cfg: SolverConfig,
    reference: WaveField,
    kind: str = "tau",
    reference_tau: float | None = None,
    reference_order: int = 2,
) -> ConvergenceReport:
    """Error table of converged runs against ``reference``.

    ``kind="tau"`` reruns ``cfg`` at each relaxation parameter on the
    config's grid. ``kind="h"`` reruns ``cfg`` unchanged on grids of spacing
    ``h``; the reference must live on a grid that refines all of them.
    """
    if kind not in ("tau", "h"):
        raise ValueError("kind must be 'tau' or 'h'")
    sweep = [float(s) for s in sweep]
    if any(a <= b for a, b in zip(sweep, sweep[1:])):
        raise ValueError("sweep must be strictly decreasing")
    p_ref = _reference_problem(config, reference)
    E_ref = energy_original(reference, p_ref)
    mu_ref = chemical_potential(reference, p_ref)
    report = ConvergenceReport(
        kind,
        reference={
            "grid": reference.grid,
            "tau": reference_tau,
            "order": reference_order,
            "E": E_ref,
            "mu": mu_ref,
        },
    )
    for s in sweep:
        if kind == "tau":
            p, f0, _ = config.build()
            run_cfg = cfg.fixed_at(s)
        else:
            n = [int(round((b - a) / s)) for a, b in config.domain]
            p, f0, _ = replace(config, grid_n=n).build()
            run_cfg = cfg
        if kind == "tau" and p.grid != reference.grid:
            raise ValueError("tau sweep needs the reference on the problem grid")
        f, trace = solve(f0, p, run_cfg)
        ref_vals = _sample_reference(reference, p.grid)
        aligned = align_phase(f, ref_vals)
        row = ConvergenceRow(
            param=s,
            err_phi=float(np.max(np.abs(aligned - ref_vals))),
            err_E=abs(energy_original(f, p) - E_ref),
            err_mu=abs(chemical_potential(f, p) - mu_ref),
            err_phi_unaligned=float(np.max(np.abs(f.values - ref_vals))),
            status=trace.status,
            iterations=len(trace),
        )
        report.rows.append(row)
        log.info("%s=%g: %s in %d iterations", kind, s, trace.status, len(trace))
    ratios = [a / b for a, b in zip(sweep, sweep[1:])]
    for name in ("phi", "E", "mu"):
        rates = estimate_rates(report.column(f"err_{name}"), ratios)
        for row, rate in zip(report.rows[1:], rates):
            setattr(row, f"rate_{name}", rate)
    return report


@dataclass
class AuditReport:
    relaxed_violations: list
    original_violations: list
    max_relaxed_increase: float
    max_original_increase: float
    threshold: float

    @property
    def ok(self) -> bool:
        return not self.relaxed_violations

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 4

    def summary(self) -> str:
        return (
            f"relaxed-energy increases > {self.threshold:g}: {len(self.relaxed_violations)} "
            f"(max increase {self.max_relaxed_increase:.3e})\n"
            f"original-energy increases > {self.threshold:g}: {len(self.original_violations)} "
            f"(max increase {self.max_original_increase:.3e})"
        )


def dissipation_audit(trace: IterationTrace, threshold: float = AUDIT_THRESHOLD) -> AuditReport:
    """Flag every iteration where an energy rose by more than ``threshold``.

    The relaxed energy depends on ``tau``, so it is only compared within a
    stage; the original energy is compared across the whole run. When the
    trace knows the energies of each stage's initial field, the first step
    of the stage is checked against them.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    starts = {s.stage: s for s in trace.starts}
    e_rel = trace.e_relaxed
    e_orig = trace.e_original
    rel_bad, orig_bad = [], []
    max_rel = max_orig = -math.inf
    for i in range(len(trace)):
        st = trace.stage[i]
        if i > 0 and trace.stage[i - 1] == st:
            prev_rel = e_rel[i - 1]
        else:
            prev_rel = starts[st].e_relaxed if st in starts else None
        if i > 0:
            prev_orig = e_orig[i - 1]
        else:
            prev_orig = starts[st].e_original if st in starts else None
        if prev_rel is not None:
            d = e_rel[i] - prev_rel
            max_rel = max(max_rel, d)
            if d > threshold:
                rel_bad.append((i, d))
        if prev_orig is not None:
            d = e_orig[i] - prev_orig
            max_orig = max(max_orig, d)
            if d > threshold:
                orig_bad.append((i, d))
    return AuditReport(rel_bad, orig_bad, max_rel, max_orig, threshold)
