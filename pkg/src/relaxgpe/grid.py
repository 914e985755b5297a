"""Periodic pseudospectral grids and complex wave fields.

Fields are stored as C-ordered arrays of shape ``grid.shape`` with axis 0
along ``x`` and axis 1 along ``y``. Every discrete integral carries the
quadrature weight ``h_x * h_y`` so that a unit-norm field approximates the
continuum normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid on a box ``[a_0, b_0) x [a_1, b_1)``."""

    bounds: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        n = tuple(int(k) for k in self.n)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "n", n)
        if len(bounds) not in (1, 2) or len(n) != len(bounds):
            raise ValueError("grid must be 1D or 2D with one point count per axis")
        for (a, b), k in zip(bounds, n):
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b})")
            if k < 4 or not _is_power_of_two(k):
                raise ValueError(f"point count {k} must be a power of two >= 4")

    @classmethod
    def square(cls, a: float, b: float, n: int, dim: int = 1) -> "SpectralGrid":
        """Same interval ``[a, b)`` and point count on every axis."""
        return cls(((a, b),) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in self.bounds)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / k for L, k in zip(self.lengths, self.n))

    @property
    def volume(self) -> float:
        """Lebesgue measure of the box."""
        return float(np.prod(self.lengths))

    @property
    def weight(self) -> float:
        """Quadrature weight ``h^d`` of a single grid cell."""
        return float(np.prod(self.h))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(a + h * np.arange(k) for (a, _), h, k in zip(self.bounds, self.h, self.n))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis ``k = 2 pi m / L`` in FFT ordering (Nyquist mode negative)."""
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(k, d=L / k) for L, k in zip(self.lengths, self.n)
        )

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|k|^2`` on the full spectral grid."""
        ks = np.meshgrid(*self.wavenumbers, indexing="ij")
        return sum(k * k for k in ks)

    def heat_multiplier(self, s: float) -> np.ndarray:
        return np.exp(-s * self.ksq)

    def integrate(self, values: np.ndarray) -> float:
        return self.weight * float(np.sum(values))

    def __repr__(self):
        return f"SpectralGrid(bounds={self.bounds}, n={self.n})"


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex grid function; the value array is read-only."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128, order="C")
        if values.shape != self.grid.shape:
            if values.size != self.grid.size:
                raise ValueError(
                    f"field of {values.size} values does not match grid shape {self.grid.shape}"
                )
            values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: SpectralGrid, fn) -> "WaveField":
        return cls(grid, fn(*grid.coords))

    @classmethod
    def constant(cls, grid: SpectralGrid, value: complex = 1.0) -> "WaveField":
        return cls(grid, np.full(grid.shape, value, dtype=np.complex128))

    def with_values(self, values: np.ndarray) -> "WaveField":
        return WaveField(self.grid, values)

    def normalized(self) -> "WaveField":
        l2, _ = norms(self)
        if l2 == 0.0:
            raise ValueError("cannot normalize the zero field")
        return self.with_values(self.values / l2)

    def abs(self) -> "WaveField":
        return self.with_values(np.abs(self.values))

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _check_same_grid(f: WaveField, g: WaveField):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def apply_heat_semigroup(f: WaveField, s: float) -> WaveField:
    """Exact heat flow ``e^{s Delta} f`` of the discrete periodic Laplacian."""
    if s < 0:
        raise ValueError(f"heat semigroup time must be nonnegative, got {s}")
    if s == 0:
        return f
    fhat = sfft.fftn(f.values)
    return f.with_values(sfft.ifftn(fhat * f.grid.heat_multiplier(s)))


def inner_product(f: WaveField, g: WaveField) -> float:
    """Real L2 inner product ``Re sum f conj(g) h^d``."""
    _check_same_grid(f, g)
    return f.grid.weight * float(np.vdot(g.values, f.values).real)


def norms(f: WaveField) -> tuple[float, float]:
    """Discrete ``(L2, Linf)`` norms; the max norm is a raw grid maximum."""
    a = np.abs(f.values)
    l2 = float(np.sqrt(f.grid.weight * np.sum(a * a)))
    return l2, float(a.max())


def kinetic_integral(f: WaveField) -> float:
    """Spectral ``int |grad f|^2 / 2``."""
    fhat = sfft.fftn(f.values)
    return 0.5 * spectral_sum(f.grid, f.grid.ksq, fhat)


def spectral_sum(grid: SpectralGrid, multiplier: np.ndarray, fhat: np.ndarray) -> float:
    """``h^d / N * sum m_k |fhat_k|^2``: the quadratic form of a Fourier multiplier."""
    return grid.weight / grid.size * float(np.sum(multiplier * (fhat.real**2 + fhat.imag**2)))
