"""Uniform grids, quaternion-valued fields and second-order finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quaternion import Quaternion, conj_parts, mul_parts, norm2_parts

MIN_POINTS = 5


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Rectangular grid with ``dims[a]`` points spaced ``spacing[a]`` apart along axis ``a``."""

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        origin = tuple(float(v) for v in np.atleast_1d(self.origin))
        spacing = tuple(float(v) for v in np.atleast_1d(self.spacing))
        dims = tuple(int(v) for v in np.atleast_1d(self.dims))
        if not (len(origin) == len(spacing) == len(dims)) or not 1 <= len(dims) <= 3:
            raise GridError(f"origin/spacing/dims must share a length in 1..3, got {len(origin)}/{len(spacing)}/{len(dims)}")
        if any(not h > 0 for h in spacing):
            raise GridError(f"spacings must be positive, got {spacing}")
        if any(n < MIN_POINTS for n in dims):
            raise GridError(f"every axis needs at least {MIN_POINTS} points, got {dims}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, lengths, dims, origin=None) -> Grid:
        """Grid covering ``[origin, origin + length]`` per axis, endpoints included."""
        lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
        dims = np.broadcast_to(np.atleast_1d(dims), lengths.shape)
        if origin is None:
            origin = np.zeros_like(lengths)
        spacing = lengths / (dims - 1)
        return cls(tuple(origin), tuple(spacing), tuple(dims))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(h * (n - 1) for h, n in zip(self.spacing, self.dims))

    def axes(self) -> list[np.ndarray]:
        return [x0 + h * np.arange(n) for x0, h, n in zip(self.origin, self.spacing, self.dims)]

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def positions(self) -> np.ndarray:
        """Point coordinates as an array of shape ``dims + (3,)``; missing axes are zero."""
        out = np.zeros(self.dims + (3,))
        for a, c in enumerate(self.coords()):
            out[..., a] = c
        return out

    def interior(self, margin: int = 1) -> tuple[slice, ...]:
        return tuple(slice(margin, n - margin) for n in self.dims)

    def refined(self) -> Grid:
        """Same extent with the spacing halved."""
        return Grid(self.origin, tuple(h / 2 for h in self.spacing), tuple(2 * (n - 1) + 1 for n in self.dims))

    def trapezoid_weights(self) -> np.ndarray:
        """Dimensionless trapezoid weights (1 inside, 1/2 per boundary face)."""
        w = np.ones(self.dims)
        for a, n in enumerate(self.dims):
            edge = [slice(None)] * self.ndim
            for idx in (0, n - 1):
                edge[a] = idx
                w[tuple(edge)] *= 0.5
        return w


@dataclass(frozen=True, eq=False)
class QField:
    """Quaternion field ``z + zeta j`` sampled on a grid (two complex arrays)."""

    grid: Grid
    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex)
        zeta = np.broadcast_to(np.asarray(self.zeta, dtype=complex), z.shape).copy()
        if z.shape != self.grid.shape:
            raise GridError(f"field shape {z.shape} does not match grid {self.grid.shape}")
        z.setflags(write=False)
        zeta.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zeta", zeta)

    @classmethod
    def zeros(cls, grid: Grid) -> QField:
        return cls(grid, np.zeros(grid.shape, complex), 0j)

    @classmethod
    def constant(cls, grid: Grid, q: Quaternion) -> QField:
        return cls(grid, np.full(grid.shape, q.z), q.zeta)

    @classmethod
    def from_complex(cls, grid: Grid, values) -> QField:
        return cls(grid, values, 0j)

    def _check(self, other: QField):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other: QField) -> QField:
        self._check(other)
        return QField(self.grid, self.z + other.z, self.zeta + other.zeta)

    def __sub__(self, other: QField) -> QField:
        self._check(other)
        return QField(self.grid, self.z - other.z, self.zeta - other.zeta)

    def __neg__(self) -> QField:
        return QField(self.grid, -self.z, -self.zeta)

    def __mul__(self, other) -> QField:
        # real scalars or real arrays only; quaternion factors must say which side
        if np.iscomplexobj(other):
            raise TypeError("use left_mul/right_mul for non-real factors")
        return QField(self.grid, self.z * other, self.zeta * other)

    __rmul__ = __mul__

    def right_mul(self, q) -> QField:
        """``self * q`` with ``q`` a Quaternion or a QField."""
        if isinstance(q, QField):
            self._check(q)
        z, w = mul_parts(self.z, self.zeta, q.z, q.zeta)
        return QField(self.grid, z, w)

    def left_mul(self, q) -> QField:
        """``q * self`` with ``q`` a Quaternion, a QField or a complex scalar/array."""
        if isinstance(q, QField):
            self._check(q)
            qz, qw = q.z, q.zeta
        elif isinstance(q, Quaternion):
            qz, qw = q.z, q.zeta
        else:
            qz, qw = np.asarray(q, dtype=complex), 0j
        z, w = mul_parts(qz, qw, self.z, self.zeta)
        return QField(self.grid, z, w)

    def conj(self) -> QField:
        z, w = conj_parts(self.z, self.zeta)
        return QField(self.grid, z, w)

    def norm2(self) -> np.ndarray:
        return norm2_parts(self.z, self.zeta)

    def norm(self) -> np.ndarray:
        return np.sqrt(self.norm2())

    def max_norm(self) -> float:
        return float(self.norm().max())

    def at(self, index) -> Quaternion:
        return Quaternion(self.z[index], self.zeta[index])


def _check_dims(dims: Sequence[int], need: int = 3):
    if any(n < need for n in dims):
        raise GridError(f"stencils need at least {need} points per axis, got {tuple(dims)}")


def gradient_array(values: np.ndarray, spacing: Sequence[float]) -> list[np.ndarray]:
    """Central differences inside, one-sided second order at the edges."""
    _check_dims(values.shape)
    grads = np.gradient(values, *spacing, edge_order=2)
    return [grads] if values.ndim == 1 else list(grads)


def second_derivative_array(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    _check_dims(values.shape, 4)
    f = np.moveaxis(values, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def laplacian_array(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Sum of 3-point second differences; the edge rows use a one-sided stencil."""
    return sum(second_derivative_array(values, h, a) for a, h in enumerate(spacing))


def gradient_fd(f: QField) -> list[QField]:
    gz = gradient_array(f.z, f.grid.spacing)
    gw = gradient_array(f.zeta, f.grid.spacing)
    return [QField(f.grid, a, b) for a, b in zip(gz, gw)]


def laplacian_fd(f: QField) -> QField:
    return QField(f.grid, laplacian_array(f.z, f.grid.spacing), laplacian_array(f.zeta, f.grid.spacing))


def divergence_array(vectors: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence of a field stored as ``dims + (3,)``; components off-grid are ignored."""
    return sum(gradient_array(vectors[..., a], grid.spacing)[a] for a in range(grid.ndim))


def time_derivative_fd(samples: Sequence[Quaternion], dt: float) -> list[Quaternion]:
    """Second-order differences of a uniformly spaced quaternion time series."""
    if len(samples) < 3:
        raise GridError(f"need at least 3 time samples, got {len(samples)}")
    if not dt > 0:
        raise GridError(f"dt must be positive, got {dt}")
    z = np.gradient(np.array([s.z for s in samples]), dt, edge_order=2)
    w = np.gradient(np.array([s.zeta for s in samples]), dt, edge_order=2)
    return [Quaternion(a, b) for a, b in zip(z, w)]


def interior_linf(values: np.ndarray, grid: Grid, margin: int = 1) -> float:
    return float(np.max(np.abs(values[grid.interior(margin)])))
