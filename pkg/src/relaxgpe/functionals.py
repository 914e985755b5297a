"""Gross-Pitaevskii energies, their heat-semigroup relaxations, and truncation.

The relaxed energies replace the kinetic term ``-1/2 <Delta f, f>`` by a
combination of heat-semigroup quadratic forms. On the periodic grid these
are Fourier multipliers, evaluated here in the rearranged forms

    order 1:  (1 - e^{-tau k^2}) / (2 tau)
    order 2:  a (2 + a) / (2 tau),   a = 1 - e^{-tau k^2 / 2}

plus ``c (1 - ||f||^2) / (2 tau)`` with ``c = 1`` or ``3``. Both are
algebraically identical to the textbook expressions but avoid cancelling
``1/(2 tau)`` against a quantity of the same size when ``tau`` is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import SpectralGrid, WaveField, spectral_sum


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Trap potential sampled on the grid, interaction strength and rotation speed."""

    grid: SpectralGrid
    potential: np.ndarray
    beta: float
    omega: float = 0.0

    def __post_init__(self):
        V = np.array(self.potential, dtype=np.float64)
        if V.shape != self.grid.shape:
            V = V.reshape(self.grid.shape)
        if not np.all(np.isfinite(V)):
            raise ValueError("potential contains non-finite values")
        if V.min() < 0:
            raise ValueError(f"potential must be nonnegative, min is {V.min():.3g}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not self.omega >= 0:
            raise ValueError(f"omega must be nonnegative, got {self.omega}")
        if self.omega and self.grid.dim != 2:
            raise ValueError("rotation needs a 2D grid")
        V.flags.writeable = False
        object.__setattr__(self, "potential", V)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "omega", float(self.omega))

    @classmethod
    def from_function(cls, grid, potential_fn, beta, omega=0.0):
        return cls(grid, potential_fn(*grid.coords), beta, omega)

    def replace(self, **changes) -> "ProblemSpec":
        kw = dict(grid=self.grid, potential=self.potential, beta=self.beta, omega=self.omega)
        kw.update(changes)
        return ProblemSpec(**kw)


@dataclass(frozen=True)
class TruncationBound:
    """Amplitude ``M`` beyond which ``|v|^4`` is continued quadratically."""

    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"truncation bound must be positive, got {self.m}")


@dataclass(frozen=True)
class KappaRule:
    """How the concavity shift ``kappa`` is chosen.

    ``adaptive``  ``max_x (V + factor * beta * |f|^2)``, re-evaluated per iterate
    ``theory``    ``max V + 3 beta M^2``, independent of the iterate
    ``fixed``     a user constant
    """

    kind: str = "adaptive"
    value: float = 0.0
    factor: float = 3.0

    def __post_init__(self):
        if self.kind not in ("adaptive", "theory", "fixed"):
            raise ValueError(f"unknown kappa rule {self.kind!r}")
        if self.kind == "fixed" and not self.value >= 0:
            raise ValueError("fixed kappa must be nonnegative")

    @classmethod
    def adaptive(cls, factor=3.0):
        return cls("adaptive", factor=factor)

    @classmethod
    def theory(cls):
        return cls("theory")

    @classmethod
    def fixed(cls, value):
        return cls("fixed", value=float(value))

    @classmethod
    def parse(cls, text) -> "KappaRule":
        """``"adaptive"``, ``"theory"`` or a number for a fixed value."""
        if isinstance(text, KappaRule):
            return text
        if isinstance(text, (int, float)):
            return cls.fixed(text)
        text = str(text).strip().lower()
        if text in ("adaptive", "theory"):
            return cls(text)
        try:
            return cls.fixed(float(text))
        except ValueError:
            raise ValueError(f"unknown kappa rule {text!r}") from None

    def __str__(self):
        return self.kind if self.kind != "fixed" else repr(self.value)

    @property
    def is_dynamic(self) -> bool:
        return self.kind == "adaptive"


# -- truncated nonlinearity ---------------------------------------------------


def _m_value(m) -> float:
    return m.m if isinstance(m, TruncationBound) else float(m)


def trunc_F(v, m) -> np.ndarray:
    """``|v|^4`` inside ``|v| <= M``, its C1 quadratic continuation outside."""
    M = _m_value(m)
    a = np.abs(v)
    if not np.isfinite(M):
        return a**4
    outer = 6 * M**2 * a**2 - 8 * M**3 * a + 3 * M**4
    return np.where(a <= M, a**4, outer)


def trunc_f(v, m) -> np.ndarray:
    """Gradient of ``trunc_F`` for the real inner product, phase-equivariant."""
    M = _m_value(m)
    v = np.asarray(v, dtype=np.complex128)
    a = np.abs(v)
    if not np.isfinite(M):
        return 4 * a**2 * v
    inside = a <= M
    # outer branch only evaluated where |v| > M > 0, so the division is safe
    safe = np.where(inside, 1.0, a)
    outer = 12 * M**2 * v - 8 * M**3 * v / safe
    return np.where(inside, 4 * a**2 * v, outer)


def compute_M(p: ProblemSpec) -> TruncationBound:
    """``sqrt((beta + 2 int V) / (beta |D|))``; infinite without interaction."""
    if p.beta == 0:
        return TruncationBound(np.inf)
    intV = p.grid.integrate(p.potential)
    return TruncationBound(float(np.sqrt((p.beta + 2 * intV) / (p.beta * p.grid.volume))))


def compute_kappa(f: WaveField, p: ProblemSpec, rule: KappaRule | None = None, mbound=None) -> float:
    rule = rule or KappaRule()
    if rule.kind == "fixed":
        return rule.value
    if rule.kind == "theory":
        M = _m_value(mbound if mbound is not None else compute_M(p))
        if not np.isfinite(M):
            return float(p.potential.max())
        return float(p.potential.max() + 3 * p.beta * M**2)
    return adaptive_kappa(f.values, p.potential, p.beta, rule.factor)


def adaptive_kappa(psi: np.ndarray, V: np.ndarray, beta: float, factor: float = 3.0) -> float:
    return float(np.max(V + factor * beta * (psi.real**2 + psi.imag**2)))


# -- quadratic forms ----------------------------------------------------------


def _check_order(order):
    if order not in (1, 2):
        raise ValueError(f"relaxation order must be 1 or 2, got {order}")


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")


def relaxation_multiplier(grid: SpectralGrid, tau: float, order: int) -> np.ndarray:
    """Fourier symbol of the relaxed kinetic form, without the norm term."""
    _check_order(order)
    _check_tau(tau)
    if order == 1:
        return -np.expm1(-tau * grid.ksq) / (2 * tau)
    a = -np.expm1(-0.5 * tau * grid.ksq)
    return a * (2 + a) / (2 * tau)


def relaxed_kinetic(grid, fhat, l2sq, tau, order, multiplier=None) -> float:
    """Relaxed stand-in for ``int |grad f|^2 / 2`` including the constant."""
    if multiplier is None:
        multiplier = relaxation_multiplier(grid, tau, order)
    c = 1.0 if order == 1 else 3.0
    return c * (1.0 - l2sq) / (2 * tau) + spectral_sum(grid, multiplier, fhat)


def _potential_terms(grid, psi, V, beta, mbound=None):
    rho = psi.real**2 + psi.imag**2
    pot = grid.integrate(V * rho)
    if mbound is None:
        quart = grid.integrate(rho * rho)
    else:
        quart = grid.integrate(trunc_F(psi, mbound))
    return pot, quart, grid.weight * float(rho.sum())


# -- energies -----------------------------------------------------------------


def _require_nonrotating(p: ProblemSpec):
    if p.omega != 0:
        raise ValueError("rotating problem: use relaxgpe.rotating.rotating_energy_original")


def energy_original(f: WaveField, p: ProblemSpec) -> float:
    """``int |grad f|^2/2 + V|f|^2 + beta/2 |f|^4``."""
    _require_nonrotating(p)
    fhat = sfft.fftn(f.values)
    pot, quart, _ = _potential_terms(p.grid, f.values, p.potential, p.beta)
    return 0.5 * spectral_sum(p.grid, p.grid.ksq, fhat) + pot + 0.5 * p.beta * quart


def quartic_integral(f: WaveField) -> float:
    rho = f.density()
    return f.grid.integrate(rho * rho)


def chemical_potential(f: WaveField, p: ProblemSpec) -> float:
    """``E(f) + beta/2 int |f|^4``."""
    return energy_original(f, p) + 0.5 * p.beta * quartic_integral(f)


def relaxed_energy(f: WaveField, p: ProblemSpec, tau: float, order: int = 1) -> float:
    """First- or second-order relaxed energy (untruncated, no kappa shift)."""
    _check_order(order)
    _check_tau(tau)
    _require_nonrotating(p)
    fhat = sfft.fftn(f.values)
    pot, quart, l2sq = _potential_terms(p.grid, f.values, p.potential, p.beta)
    return relaxed_kinetic(p.grid, fhat, l2sq, tau, order) + pot + 0.5 * p.beta * quart


def truncated_relaxed_energy(
    f: WaveField,
    p: ProblemSpec,
    tau: float,
    kappa: float,
    mbound: TruncationBound | None = None,
    order: int = 1,
) -> float:
    """Relaxed energy with the truncated quartic term and the ``kappa (1 - ||f||^2)`` shift."""
    _check_order(order)
    _check_tau(tau)
    _require_nonrotating(p)
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    mbound = mbound if mbound is not None else compute_M(p)
    fhat = sfft.fftn(f.values)
    pot, quart, l2sq = _potential_terms(p.grid, f.values, p.potential, p.beta, mbound)
    return (
        relaxed_kinetic(p.grid, fhat, l2sq, tau, order)
        + pot
        + 0.5 * p.beta * quart
        + kappa * (1.0 - l2sq)
    )

