"""Momentum, probability density/current, continuity and expectation values.

Operators carry no fixed hermiticity; observables use the symmetrised real
form ``(1/2)[Psi* (O Psi) + (Psi* (O Psi))*]``. Momentum multiplies by ``i`` on
the right: ``p Phi = -hbar (grad Phi) i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridError, QField, divergence_array, gradient_fd
from .quaternion import conj_parts, mul_parts
from .schrodinger import ResidualReport
from .wavefunction import FreeParticleSpec, _check_in_plane, phase_angles

REALNESS_TOL = 1e-12


class RealnessError(ArithmeticError):
    """A symmetrised quantity came out with a non-real part."""


@dataclass(frozen=True, eq=False)
class CurrentField:
    grid: Grid
    vectors: np.ndarray  # dims + (3,)

    def __post_init__(self):
        if self.vectors.shape != self.grid.shape + (3,):
            raise GridError(f"current shape {self.vectors.shape} does not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("current has non-finite entries")

    def mean(self) -> np.ndarray:
        return self.vectors.reshape(-1, 3).mean(axis=0)

    def interior(self, margin: int = 1) -> np.ndarray:
        return self.vectors[self.grid.interior(margin)]


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid
    values: np.ndarray


def density(f: QField) -> DensityField:
    return DensityField(f.grid, f.norm2())


def momentum_apply(f: QField, hbar: float = 1.0, gradient: list[QField] | None = None) -> list[QField]:
    """``-hbar (d f / dx_a) i`` for each grid axis.

    ``gradient`` supplies exact derivatives; finite differences are used
    otherwise.
    """
    if gradient is None:
        gradient = gradient_fd(f)
    elif len(gradient) != f.grid.ndim:
        raise GridError(f"need {f.grid.ndim} gradient components, got {len(gradient)}")
    out = []
    for d in gradient:
        # right multiplication by i: (z, w) -> (i z, -i w)
        out.append(QField(f.grid, -hbar * 1j * d.z, hbar * 1j * d.zeta))
    return out


def symmetrised_parts(fz, fw, gz, gw) -> np.ndarray:
    """Real scalar ``(1/2)[f* g + (f* g)*]`` on raw complex components.

    The quaternion sum is formed in full so that any imaginary or j leftovers
    can be checked rather than dropped.
    """
    cz, cw = conj_parts(fz, fw)
    pz, pw = mul_parts(cz, cw, gz, gw)
    qz, qw = conj_parts(pz, pw)
    sz, sw = pz + qz, pw + qw
    scale = max(1.0, float(np.max(np.abs(sz))))
    leftover = max(float(np.max(np.abs(sz.imag))), float(np.max(np.abs(sw))))
    if leftover > REALNESS_TOL * scale:
        raise RealnessError(f"symmetrised product has non-real part {leftover:.3e}")
    return 0.5 * sz.real


def symmetrised_product(f: QField, g: QField) -> np.ndarray:
    if f.grid != g.grid:
        raise GridError("fields live on different grids")
    return symmetrised_parts(f.z, f.zeta, g.z, g.zeta)


def probability_current(
    f: QField, hbar: float = 1.0, mass: float = 1.0, gradient: list[QField] | None = None
) -> CurrentField:
    """``j = (1/2m)[Phi* p Phi + (Phi* p Phi)*]`` evaluated pointwise by quaternion products.

    Gradients are finite differences unless ``gradient`` is given.
    """
    vec = np.zeros(f.grid.shape + (3,))
    for a, p in enumerate(momentum_apply(f, hbar, gradient)):
        vec[..., a] = symmetrised_product(f, p) / mass
    return CurrentField(f.grid, vec)


def current_closed_form(spec: FreeParticleSpec, grid: Grid) -> CurrentField:
    """Analytic current of a single-branch free particle.

    ``j = rho^2 cos(2 Theta) j0 + (hbar/m) rho^2 |phi|^2 (cos^2(Theta) grad(Gamma) - sin^2(Theta) grad(Omega))``
    with ``j0 = (hbar/m) Im(conj(phi) grad(phi))``. A complex ``Q1`` scales
    ``rho`` by ``|Q1|``.
    """
    if not spec.is_single_branch():
        raise ValueError("closed-form current is only available for single-branch specs (Q2 = Q3 = Q4 = 0)")
    q1 = spec.q_weights[0]
    if not q1.is_complex():
        raise ValueError("closed-form current needs a complex Q1")
    _check_in_plane(spec, grid)
    x = grid.positions()
    theta, _, _ = phase_angles(spec, x)
    phi = spec.phi.value(x)
    dphi = spec.phi.gradient(x)
    coef = spec.hbar / spec.mass
    rho2 = (spec.rho * abs(q1.z)) ** 2
    j0 = coef * np.imag(np.conj(phi)[..., None] * dphi)
    c2, s2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    phase_part = c2[..., None] * spec.gamma - s2[..., None] * spec.omega
    vec = rho2 * np.cos(2 * theta)[..., None] * j0 + coef * rho2 * (np.abs(phi) ** 2)[..., None] * phase_part
    vec[..., grid.ndim:] = 0.0
    return CurrentField(grid, vec)


def continuity_residual(f: QField, hbar: float = 1.0, mass: float = 1.0, margin: int = 2) -> ResidualReport:
    """``div j`` of the numeric current for a stationary state.

    The time derivative of the density vanishes for stationary states, so
    the check is the divergence alone. The result is scaled by
    ``max |Phi|^2``. Two stencils are chained here, so one-sided edge errors
    reach two cells in; the default margin excludes them.
    """
    j = probability_current(f, hbar, mass)
    div = divergence_array(j.vectors, f.grid)
    scale = float(f.norm2().max())
    if scale == 0.0:
        raise ValueError("zero field: residual normalisation undefined")
    inner = np.abs(div[f.grid.interior(margin)]) / scale
    return ResidualReport(float(inner.max()), float(np.sqrt(np.mean(inner**2))), div / scale)


def expectation_value(op_applied: QField, f: QField, weight: float | None = None) -> float:
    """Trapezoid-rule ``(1/2) integral [f* (O f) + (f* (O f))*]``.

    ``weight`` is the cell volume (defaults to the grid's). The result is not
    divided by the norm; pass ``f`` itself as ``op_applied`` to get ``<1>``.
    """
    if op_applied.grid != f.grid:
        raise GridError("fields live on different grids")
    if weight is None:
        weight = f.grid.cell_volume
    integrand = symmetrised_product(f, op_applied)
    return float(weight * np.sum(f.grid.trapezoid_weights() * integrand))
