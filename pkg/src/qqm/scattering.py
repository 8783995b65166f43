"""Quaternionic particle scattering on a scalar step potential.

Geometry: the step normal is the x-axis, the interface is the plane x = 0
and the incidence point is the origin. Region I (x < 0) holds the incident
and reflected waves, region II (x >= 0, potential ``V0``) the transmitted
one. Every partial wave has the form::

    A [cos(Theta) e^{i a.x} + sin(Theta) e^{i b.x} j]

with the complex-part wave vector ``a`` and j-part wave vector ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .observables import symmetrised_parts
from .grid import Grid, QField
from .schrodinger import ResidualReport

NORMAL = np.array([1.0, 0.0, 0.0])


class ScatteringError(ValueError):
    pass


class EvanescentRegime(ScatteringError):
    """Total energy does not exceed the step height."""


class NoPropagation(ScatteringError):
    """Transverse wave number exhausts the energy budget, so no normal momentum is left."""


def _vec3(v) -> np.ndarray:
    arr = np.zeros(3)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    arr[: v.size] = v
    return arr


@dataclass(frozen=True)
class StepScatteringSpec:
    total_energy: float
    v0: float
    theta_k: float = 0.0
    gamma_k_perp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_k_perp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "gamma_k_perp", _vec3(self.gamma_k_perp))
        object.__setattr__(self, "omega_k_perp", _vec3(self.omega_k_perp))

    @property
    def wave_budget(self) -> float:
        """``2 m E / hbar^2``."""
        return 2.0 * self.mass * self.total_energy / self.hbar**2

    def check(self):
        g, w = self.gamma_k_perp, self.omega_k_perp
        if not self.v0 >= 0:
            raise ScatteringError(f"step height must be non-negative, got {self.v0}")
        if self.total_energy <= self.v0:
            raise EvanescentRegime(f"E = {self.total_energy} <= V0 = {self.v0}: only the propagating regime is handled")
        if abs(g[0]) > 0 or abs(w[0]) > 0:
            raise ScatteringError("transverse vectors must be orthogonal to the step normal")
        g2, w2 = g @ g, w @ w
        if abs(g2 - w2) > 1e-12 * max(1.0, g2):
            raise ScatteringError(f"S6 violated: |gamma_perp|^2 = {g2} but |omega_perp|^2 = {w2}")
        if g2 >= self.wave_budget:
            raise NoPropagation(f"|gamma_perp|^2 = {g2} leaves no normal momentum (2mE/hbar^2 = {self.wave_budget})")


@dataclass(frozen=True)
class PartialWave:
    amplitude: float
    theta: float
    a: np.ndarray
    b: np.ndarray

    def value(self, x: np.ndarray):
        """``(z, zeta)`` at positions ``x`` of shape ``(..., 3)``."""
        z = self.amplitude * math.cos(self.theta) * np.exp(1j * (x @ self.a))
        w = self.amplitude * math.sin(self.theta) * np.exp(1j * (x @ self.b))
        return z, w

    def gradient(self, x: np.ndarray):
        """Analytic gradient, arrays of shape ``(..., 3)`` for each component."""
        z, w = self.value(x)
        return 1j * z[..., None] * self.a, 1j * w[..., None] * self.b


@dataclass(frozen=True)
class StepScatteringResult:
    k_mag: float
    q_mag: float
    p_mag: float
    r_coeff: float
    t_coeff: float
    theta_k: float
    theta_q: float
    theta_p: float
    gamma_k_perp: np.ndarray
    omega_k_perp: np.ndarray
    gamma_q_perp: np.ndarray
    omega_q_perp: np.ndarray
    gamma_p_perp: np.ndarray
    omega_p_perp: np.ndarray
    j_incident: float
    j_reflected: float
    j_transmitted: float

    @property
    def reflect_prob(self) -> float:
        return self.r_coeff**2

    @property
    def transmit_prob(self) -> float:
        """Transmitted flux over incident flux, ``(p/k) T^2``."""
        return self.p_mag / self.k_mag * self.t_coeff**2

    def incident(self) -> PartialWave:
        k = self.k_mag * NORMAL
        return PartialWave(1.0, self.theta_k, k + self.gamma_k_perp, -k + self.omega_k_perp)

    def reflected(self) -> PartialWave:
        q = self.q_mag * NORMAL
        return PartialWave(self.r_coeff, self.theta_q, -q + self.gamma_q_perp, q + self.omega_q_perp)

    def transmitted(self) -> PartialWave:
        p = self.p_mag * NORMAL
        return PartialWave(self.t_coeff, self.theta_p, p + self.gamma_p_perp, -p + self.omega_p_perp)

    def region_waves(self, region: int) -> list[PartialWave]:
        return [self.incident(), self.reflected()] if region == 1 else [self.transmitted()]


def solve_step(spec: StepScatteringSpec) -> StepScatteringResult:
    """Closed-form solution with real coefficients and collinear k, q, p.

    ``|k|^2 = 2mE/hbar^2 - |gamma_k|^2``, ``|q| = |k|``,
    ``|p|^2/|k|^2 = |gamma_p|^2/|gamma_k|^2 = 1 - V0/E``,
    ``R = (k - p)/(k + p)``, ``T = 2k/(k + p)``. All mixing angles equal
    ``theta_k``; the reflected transverse vectors flip sign and the
    transmitted ones scale by ``p/k``.
    """
    spec.check()
    g = spec.gamma_k_perp
    k = math.sqrt(spec.wave_budget - g @ g)
    ratio = 1.0 - spec.v0 / spec.total_energy
    p = k * math.sqrt(ratio)
    q = k
    r = (k - p) / (k + p)
    t = 2.0 * k / (k + p)
    scale = p / k
    coef = spec.hbar / spec.mass
    return StepScatteringResult(
        k_mag=k,
        q_mag=q,
        p_mag=p,
        r_coeff=r,
        t_coeff=t,
        theta_k=spec.theta_k,
        theta_q=spec.theta_k,
        theta_p=spec.theta_k,
        gamma_k_perp=g.copy(),
        omega_k_perp=spec.omega_k_perp.copy(),
        gamma_q_perp=-g,
        omega_q_perp=-spec.omega_k_perp,
        gamma_p_perp=scale * g,
        omega_p_perp=scale * spec.omega_k_perp,
        j_incident=coef * k,
        j_reflected=-coef * r**2 * q,
        j_transmitted=coef * t**2 * p,
    )


def _region_state(result: StepScatteringResult, region: int, x: np.ndarray):
    z = w = 0j
    gz = gw = 0j
    for wave in result.region_waves(region):
        vz, vw = wave.value(x)
        dz, dw = wave.gradient(x)
        z, w, gz, gw = z + vz, w + vw, gz + dz, gw + dw
    return z, w, gz, gw


@dataclass
class BoundaryReport:
    value: ResidualReport
    normal_gradient: ResidualReport
    transverse_gradient: ResidualReport

    def max_linf(self) -> float:
        return max(self.value.linf, self.normal_gradient.linf, self.transverse_gradient.linf)


def _mismatch(values: np.ndarray) -> ResidualReport:
    return ResidualReport(float(values.max()), float(np.sqrt(np.mean(values**2))), values)


def boundary_residuals(spec: StepScatteringSpec, result: StepScatteringResult, probe_points=None) -> BoundaryReport:
    """Matching of value, normal gradient and transverse gradient on the interface.

    Both region wave functions are evaluated with analytic gradients at the
    probe points (default: the incidence point at the origin). With nonzero
    transverse vectors the three partial waves carry different transverse
    phases, so the conditions hold at the incidence point only.
    """
    if probe_points is None:
        probe_points = np.zeros((1, 3))
    x = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if x.shape[1] != 3:
        x = np.column_stack([x, np.zeros((x.shape[0], 3 - x.shape[1]))])
    if np.any(np.abs(x[:, 0]) > 0):
        raise ValueError("probe points must lie on the interface x = 0")
    z1, w1, gz1, gw1 = _region_state(result, 1, x)
    z2, w2, gz2, gw2 = _region_state(result, 2, x)
    value = np.sqrt(np.abs(z1 - z2) ** 2 + np.abs(w1 - w2) ** 2)
    dgz, dgw = gz1 - gz2, gw1 - gw2
    normal = np.sqrt(np.abs(dgz[:, 0]) ** 2 + np.abs(dgw[:, 0]) ** 2)
    transverse = np.sqrt(np.sum(np.abs(dgz[:, 1:]) ** 2 + np.abs(dgw[:, 1:]) ** 2, axis=1))
    return BoundaryReport(_mismatch(value), _mismatch(normal), _mismatch(transverse))


@dataclass
class CurrentBalance:
    incident: np.ndarray
    reflected: np.ndarray
    transmitted: np.ndarray
    region1: np.ndarray
    region2: np.ndarray
    flux_in: float  # k (1 - R^2) hbar/m
    flux_out: float  # p T^2 hbar/m

    @property
    def residual(self) -> float:
        """Mismatch of the normal current across the interface (numeric)."""
        return abs(self.region1[0] - self.region2[0])

    @property
    def partial_residual(self) -> float:
        """``|j_inc + j_refl - j_trans|`` along the normal (numeric)."""
        return abs(self.incident[0] + self.reflected[0] - self.transmitted[0])

    @property
    def closed_form_residual(self) -> float:
        return abs(self.flux_in - self.flux_out)


def _sample_points(region: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, size=(n, 3))
    pts[:, 0] = -np.abs(pts[:, 0]) - 0.1 if region == 1 else np.abs(pts[:, 0]) + 0.1
    return pts


def _numeric_current(waves: list[PartialWave], x: np.ndarray, hbar: float, mass: float) -> np.ndarray:
    """Mean of ``(1/2m)[Phi* p Phi + c.c.]`` over points ``x`` built by quaternion algebra."""
    z = w = 0j
    gz = gw = 0j
    for wave in waves:
        vz, vw = wave.value(x)
        dz, dw = wave.gradient(x)
        z, w, gz, gw = z + vz, w + vw, gz + dz, gw + dw
    out = np.zeros((x.shape[0], 3))
    for a in range(3):
        # p_a Phi = -hbar (d_a Phi) i
        out[:, a] = symmetrised_parts(z, w, -hbar * 1j * gz[:, a], hbar * 1j * gw[:, a]) / mass
    return out


def current_balance(spec: StepScatteringSpec, result: StepScatteringResult, n_samples: int = 16, seed: int = 0) -> CurrentBalance:
    """Probability currents of every partial wave and of each region.

    Currents are evaluated pointwise from the sampled wave functions and their
    analytic gradients using the quaternion product, then averaged over
    ``n_samples`` fixed points per region.
    """
    x1 = _sample_points(1, n_samples, seed)
    x2 = _sample_points(2, n_samples, seed + 1)
    hb, m = spec.hbar, spec.mass
    inc = _numeric_current([result.incident()], x1, hb, m)
    ref = _numeric_current([result.reflected()], x1, hb, m)
    tra = _numeric_current([result.transmitted()], x2, hb, m)
    r1 = _numeric_current(result.region_waves(1), x1, hb, m)
    r2 = _numeric_current(result.region_waves(2), x2, hb, m)
    coef = hb / m
    return CurrentBalance(
        incident=inc.mean(axis=0),
        reflected=ref.mean(axis=0),
        transmitted=tra.mean(axis=0),
        region1=r1.mean(axis=0),
        region2=r2.mean(axis=0),
        flux_in=coef * result.k_mag * (1.0 - result.r_coeff**2),
        flux_out=coef * result.p_mag * result.t_coeff**2,
    )


def sample_region_field(result: StepScatteringResult, grid: Grid) -> QField:
    """Piecewise wave function on a grid: region I for x < 0, region II otherwise."""
    x = grid.positions()
    z1, w1, _, _ = _region_state(result, 1, x)
    z2, w2, _, _ = _region_state(result, 2, x)
    left = x[..., 0] < 0
    return QField(grid, np.where(left, z1, z2), np.where(left, w1, w2))
