"""Residuals of the quaternionic Schrodinger equation on finite grids.

The dynamics multiplies the time derivative by ``i`` on the right,
``hbar dPsi/dt i = H Psi``. The Hamiltonian is
``-(hbar^2/2m) laplacian + V`` with a real scalar potential.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Grid, GridError, QField, laplacian_fd


@dataclass(frozen=True, eq=False)
class Potential:
    """Real scalar potential: ``zero``, ``step`` (``v0`` where ``x[axis] >= offset``) or ``sampled``."""

    kind: str = "zero"
    v0: float = 0.0
    axis: int = 0
    offset: float = 0.0
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "step", "sampled"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "sampled":
            if self.values is None or np.iscomplexobj(self.values):
                raise ValueError("a sampled potential needs real values")

    @classmethod
    def zero(cls) -> Potential:
        return cls()

    @classmethod
    def step(cls, v0: float, axis: int = 0, offset: float = 0.0) -> Potential:
        return cls("step", v0=float(v0), axis=axis, offset=float(offset))

    @classmethod
    def sampled(cls, values) -> Potential:
        values = np.asarray(values)
        if np.iscomplexobj(values):
            raise ValueError("a sampled potential needs real values")
        return cls("sampled", values=values.astype(float))

    def on(self, grid: Grid):
        if self.kind == "zero":
            return 0.0
        if self.kind == "step":
            x = grid.coords()[self.axis]
            return np.where(x >= self.offset, self.v0, 0.0)
        if self.values.shape != grid.shape:
            raise GridError(f"potential shape {self.values.shape} does not match grid {grid.shape}")
        return self.values


@dataclass
class ResidualReport:
    linf: float
    l2: float
    field: Optional[np.ndarray] = None
    masked_fraction: float = 0.0


def _report(norms: np.ndarray, grid: Grid, scale: float, margin: int = 1, keep: bool = True) -> ResidualReport:
    inner = norms[grid.interior(margin)] / scale
    return ResidualReport(
        linf=float(inner.max()),
        l2=float(np.sqrt(np.mean(inner**2))),
        field=norms / scale if keep else None,
    )


def hamiltonian_apply(f: QField, v: Optional[Potential] = None, hbar: float = 1.0, mass: float = 1.0) -> QField:
    out = laplacian_fd(f) * (-(hbar**2) / (2.0 * mass))
    if v is not None and v.kind != "zero":
        out = out + f * v.on(f.grid)
    return out


def stationary_residual(
    f: QField,
    energy: float,
    v: Optional[Potential] = None,
    hbar: float = 1.0,
    mass: float = 1.0,
    margin: int = 1,
) -> ResidualReport:
    """``H f - E f`` over interior points, scaled by ``max |f|``."""
    scale = f.max_norm()
    if scale == 0.0:
        raise ValueError("zero field: residual normalisation undefined")
    r = hamiltonian_apply(f, v, hbar, mass) - f * energy
    return _report(r.norm(), f.grid, scale, margin)


def time_dependent_residual(
    psi: Callable[[float], QField],
    v: Optional[Potential],
    grid: Grid,
    t_samples: Sequence[float],
    dt: float = 1e-4,
    hbar: float = 1.0,
    mass: float = 1.0,
    order: str = "right",
    margin: int = 1,
) -> ResidualReport:
    """L-infinity of ``hbar dPsi/dt i - H Psi`` over interior space-time points.

    ``psi(t)`` returns the field on ``grid``. The time derivative at every
    sample uses a central difference of step ``dt``. ``order="left"``
    evaluates ``hbar i dPsi/dt`` instead, which only agrees with the right
    ordering for complex fields. The result is scaled by ``max |Psi|``.
    """
    if len(t_samples) < 3:
        raise GridError(f"need at least 3 time samples, got {len(t_samples)}")
    if order not in ("right", "left"):
        raise ValueError(f"order must be 'right' or 'left', got {order!r}")
    worst = np.zeros(grid.shape)
    scale = 0.0
    for t in t_samples:
        frames = [psi(t - dt), psi(t), psi(t + dt)]
        for fr in frames:
            if fr.grid != grid:
                raise GridError("psi returned a field on a different grid")
        mid = frames[1]
        # vectorised central difference, same stencil as time_derivative_fd
        dz = (frames[2].z - frames[0].z) / (2 * dt)
        dw = (frames[2].zeta - frames[0].zeta) / (2 * dt)
        if order == "right":
            lhs = QField(grid, 1j * dz, -1j * dw) * hbar
        else:
            lhs = QField(grid, 1j * dz, 1j * dw) * hbar
        r = lhs - hamiltonian_apply(mid, v, hbar, mass)
        worst = np.maximum(worst, r.norm())
        scale = max(scale, mid.max_norm())
    if scale == 0.0:
        raise ValueError("zero field: residual normalisation undefined")
    return _report(worst, grid, scale, margin)


def period_samples(energy: float, hbar: float = 1.0, count: int = 9) -> np.ndarray:
    """``count`` times spanning one period ``2 pi hbar / E``."""
    return np.linspace(0.0, 2.0 * np.pi * hbar / abs(energy), count)


__all__ = [
    "Potential",
    "ResidualReport",
    "hamiltonian_apply",
    "stationary_residual",
    "time_dependent_residual",
    "period_samples",
]
