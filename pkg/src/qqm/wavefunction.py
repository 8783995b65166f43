"""Closed-form quaternionic wave functions and their validators.

Covers the unit-quaternion time factor, free-particle solutions built from a
complex plane wave times a quaternionic phase, the four real equations that
the phase fields must satisfy, and the ODE check showing that a non-linear
mixing angle cannot solve both free-particle conditions at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Grid, GridError, QField, gradient_array, laplacian_array, time_derivative_fd
from .quaternion import ONE, Quaternion, q_conj, q_mul, right_mul_i

UNIT_TOL = 1e-12
CONSTRAINT_TOL = 1e-10


class ConstraintViolation(ValueError):
    """A parameter set breaks one of the solution constraints.

    ``tag`` names the equation and the constraint, e.g. ``"L6:norm"``.
    """

    def __init__(self, tag: str, residual: float, message: str = ""):
        self.tag = tag
        self.residual = residual
        super().__init__(message or f"{tag} violated (residual {residual:.3e})")


class ODEError(RuntimeError):
    pass


def _vec3(v) -> np.ndarray:
    arr = np.zeros(3)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size > 3:
        raise ValueError(f"expected at most 3 components, got {v.size}")
    arr[: v.size] = v
    return arr


# --------------------------------------------------------------------------
# time factor


@dataclass(frozen=True)
class TimePhaseSpec:
    """``lambda0 (cos(xi) e^{-i E t/hbar} + sin(xi) e^{i(E t/hbar + tau0)} j)``."""

    lambda0: Quaternion = ONE
    xi: float = 0.0
    energy: float = 1.0
    tau0: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        n = self.lambda0.norm()
        if abs(n - 1.0) > UNIT_TOL:
            raise ConstraintViolation("a10:unit", abs(n - 1.0), f"lambda0 must be a unit quaternion, |lambda0| = {n!r}")

    @property
    def frequency(self) -> float:
        return self.energy / self.hbar


def time_phase(spec: TimePhaseSpec, t: float) -> Quaternion:
    w = spec.frequency
    inner = Quaternion(
        math.cos(spec.xi) * np.exp(-1j * w * t),
        math.sin(spec.xi) * np.exp(1j * (w * t + spec.tau0)),
    )
    return q_mul(spec.lambda0, inner)


def time_phase_derivative(spec: TimePhaseSpec, t: float) -> Quaternion:
    """Exact time derivative of :func:`time_phase`."""
    w = spec.frequency
    inner = Quaternion(
        -1j * w * math.cos(spec.xi) * np.exp(-1j * w * t),
        1j * w * math.sin(spec.xi) * np.exp(1j * (w * t + spec.tau0)),
    )
    return q_mul(spec.lambda0, inner)


def phase_generator(dlam: Quaternion, lam: Quaternion) -> Quaternion:
    """``dlam * i * conj(lam)``; equals ``E/hbar`` for a valid time factor."""
    return q_mul(right_mul_i(dlam), q_conj(lam))


def time_phase_residual(
    spec: TimePhaseSpec,
    t_samples: Sequence[float],
    dt: float,
    phase: Callable[[TimePhaseSpec, float], Quaternion] = time_phase,
) -> float:
    """Max over ``t_samples`` of ``|FD(dLambda/dt) i Lambda* - E/hbar|``.

    The derivative at each sample uses a central difference with step ``dt``.
    ``phase`` can be swapped for a modified time factor (negative controls).
    The norm includes the j-part, which must vanish on its own.
    """
    if len(t_samples) < 3:
        raise GridError(f"need at least 3 time samples, got {len(t_samples)}")
    target = Quaternion(spec.frequency, 0.0)
    worst = 0.0
    for t in t_samples:
        series = [phase(spec, t - dt), phase(spec, t), phase(spec, t + dt)]
        dlam = time_derivative_fd(series, dt)[1]
        worst = max(worst, (phase_generator(dlam, series[1]) - target).norm())
    return worst


# --------------------------------------------------------------------------
# free particle


@dataclass(frozen=True)
class PlaneWaveSpec:
    """Complex free particle ``a1 e^{i k.x} + a2 e^{-i k.x}``."""

    a1: complex = 1.0
    a2: complex = 0.0
    k: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "a1", complex(self.a1))
        object.__setattr__(self, "a2", complex(self.a2))
        object.__setattr__(self, "k", _vec3(self.k))

    def energy(self, hbar: float = 1.0, mass: float = 1.0) -> float:
        return hbar**2 * float(self.k @ self.k) / (2.0 * mass)

    def value(self, positions: np.ndarray) -> np.ndarray:
        phase = positions @ self.k
        return self.a1 * np.exp(1j * phase) + self.a2 * np.exp(-1j * phase)

    def gradient(self, positions: np.ndarray) -> np.ndarray:
        phase = (positions @ self.k)[..., None]
        return 1j * self.k * (self.a1 * np.exp(1j * phase) - self.a2 * np.exp(-1j * phase))


@dataclass(frozen=True)
class FreeParticleSpec:
    """Parameters of the general free-particle solution.

    ``Phi = rho * phi(x) * sum_a K_a(x) Q_a`` with the four sign branches
    ``K_a = cos(Theta) e^{+-i Gamma} + sin(Theta) e^{+-i Omega} j`` and linear
    phases ``Gamma = gamma.x + gamma0``, ``Omega = omega.x + omega0``,
    ``Theta = theta.x + theta0``.
    """

    phi: PlaneWaveSpec
    gamma: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    total_energy: float
    gamma0: float = 0.0
    omega0: float = 0.0
    theta0: float = 0.0
    q_weights: tuple[Quaternion, Quaternion, Quaternion, Quaternion] = (ONE, Quaternion(), Quaternion(), Quaternion())
    rho: float = 1.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "omega", "theta"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if len(self.q_weights) != 4:
            raise ValueError(f"need exactly four branch weights, got {len(self.q_weights)}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def complex_energy(self) -> float:
        return self.phi.energy(self.hbar, self.mass)

    def is_single_branch(self) -> bool:
        return all(q.norm() == 0.0 for q in self.q_weights[1:])


@dataclass
class ConstraintReport:
    residuals: dict[str, float]
    scales: dict[str, float]
    tolerance: float = CONSTRAINT_TOL

    def failures(self) -> list[str]:
        return [k for k, r in self.residuals.items() if abs(r) > self.tolerance * max(1.0, self.scales[k])]

    @property
    def valid(self) -> bool:
        return not self.failures()

    def raise_if_invalid(self):
        bad = self.failures()
        if bad:
            worst = bad[0]
            raise ConstraintViolation(worst, self.residuals[worst], f"{worst} violated: residual {self.residuals[worst]:.6g}")


def validate_free_particle(spec: FreeParticleSpec) -> ConstraintReport:
    """Evaluate the two norm constraints and five orthogonality constraints."""
    g, w, th, k = spec.gamma, spec.omega, spec.theta, spec.phi.k
    g2, w2, th2 = g @ g, w @ w, th @ th
    budget = 2.0 * spec.mass / spec.hbar**2 * (spec.total_energy - spec.complex_energy)
    dots = {
        "L7:theta.gamma": (th, g),
        "L7:theta.omega": (th, w),
        "L7:k.theta": (k, th),
        "L7:k.gamma": (k, g),
        "L7:k.omega": (k, w),
    }
    residuals = {"L6:norm": g2 - w2, "L6:energy": g2 + th2 - budget}
    scales = {"L6:norm": max(g2, w2), "L6:energy": max(g2 + th2, abs(budget))}
    for name, (a, b) in dots.items():
        residuals[name] = float(a @ b)
        scales[name] = float(np.linalg.norm(a) * np.linalg.norm(b))
    return ConstraintReport({k: float(v) for k, v in residuals.items()}, {k: float(v) for k, v in scales.items()})


def _check_in_plane(spec: FreeParticleSpec, grid: Grid):
    for name in ("gamma", "omega", "theta"):
        if np.any(getattr(spec, name)[grid.ndim:] != 0):
            raise GridError(f"{name} has components outside the {grid.ndim}-D grid")
    if np.any(spec.phi.k[grid.ndim:] != 0):
        raise GridError(f"k has components outside the {grid.ndim}-D grid")


def phase_angles(spec: FreeParticleSpec, positions: np.ndarray):
    """``(Theta, Gamma, Omega)`` sampled at ``positions`` (shape ``(..., 3)``)."""
    theta = positions @ spec.theta + spec.theta0
    gamma = positions @ spec.gamma + spec.gamma0
    omega = positions @ spec.omega + spec.omega0
    return theta, gamma, omega


def sample_free_particle(spec: FreeParticleSpec, grid: Grid, check: bool = True) -> QField:
    if check:
        validate_free_particle(spec).raise_if_invalid()
    _check_in_plane(spec, grid)
    x = grid.positions()
    theta, gamma, omega = phase_angles(spec, x)
    c, s = np.cos(theta), np.sin(theta)
    eg, ew = np.exp(1j * gamma), np.exp(1j * omega)
    branches = [(eg, ew), (eg, ew.conj()), (eg.conj(), ew), (eg.conj(), ew.conj())]
    total = QField.zeros(grid)
    for (pg, pw), q in zip(branches, spec.q_weights):
        if q.norm() == 0.0:
            continue
        total = total + QField(grid, c * pg, s * pw).right_mul(q)
    return total.left_mul(spec.rho * spec.phi.value(x))


def counter_propagating_wave(grid: Grid, k, theta: float, with_gradient: bool = False):
    """``cos(theta) e^{i k.x} + sin(theta) e^{-i k.x} j``, an eigenfunction of the momentum.

    With ``with_gradient`` the exact gradient (one QField per axis) is returned too.
    """
    k = _vec3(k)
    phase = grid.positions() @ k
    f = QField(grid, math.cos(theta) * np.exp(1j * phase), math.sin(theta) * np.exp(-1j * phase))
    if not with_gradient:
        return f
    return f, [QField(grid, 1j * k[a] * f.z, -1j * k[a] * f.zeta) for a in range(grid.ndim)]


def co_propagating_wave(grid: Grid, k, theta: float, with_gradient: bool = False):
    """``e^{i k.x} (cos(theta) + sin(theta) j)``."""
    k = _vec3(k)
    e = np.exp(1j * (grid.positions() @ k))
    f = QField(grid, math.cos(theta) * e, math.sin(theta) * e)
    if not with_gradient:
        return f
    return f, [QField(grid, 1j * k[a] * f.z, 1j * k[a] * f.zeta) for a in range(grid.ndim)]


def separated_solution(spatial: QField, phase: TimePhaseSpec) -> Callable[[float], QField]:
    """``Psi(x, t) = Phi(x) Lambda(t)``, the time factor multiplied on the right."""

    def psi(t: float) -> QField:
        return spatial.right_mul(time_phase(phase, t))

    return psi


# --------------------------------------------------------------------------
# separation equations


@dataclass(frozen=True, eq=False)
class SeparationFields:
    """``Phi = phi * rho * (cos(Theta) e^{i Gamma} + sin(Theta) e^{i Omega} j)`` split into fields."""

    phi: QField
    rho: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    phi_gradient: Optional[list] = None

    def __post_init__(self):
        if np.max(np.abs(self.phi.zeta)) > UNIT_TOL * max(1.0, self.phi.max_norm()):
            raise ValueError("phi must be complex (zero j-part)")
        for name in ("rho", "theta", "gamma", "omega"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.phi.grid.shape)
            object.__setattr__(self, name, arr)

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    def assemble(self) -> QField:
        g = self.grid
        lam = QField(g, self.rho * np.cos(self.theta) * np.exp(1j * self.gamma),
                     self.rho * np.sin(self.theta) * np.exp(1j * self.omega))
        return lam.left_mul(self.phi.z)


def separation_fields(spec: FreeParticleSpec, grid: Grid) -> SeparationFields:
    """Closed-form fields of a single-branch spec.

    A complex weight ``Q1 = |c| e^{i a}`` is absorbed as ``rho -> rho|c|``,
    ``Gamma -> Gamma + a``, ``Omega -> Omega - a``.
    """
    if not spec.is_single_branch():
        raise ValueError("separation fields need a single-branch spec (Q2 = Q3 = Q4 = 0)")
    q1 = spec.q_weights[0]
    if not q1.is_complex() or q1.norm() == 0.0:
        raise ValueError("Q1 must be a nonzero complex number for the polar split")
    _check_in_plane(spec, grid)
    x = grid.positions()
    theta, gamma, omega = phase_angles(spec, x)
    a = np.angle(q1.z)
    return SeparationFields(
        phi=QField.from_complex(grid, spec.phi.value(x)),
        rho=np.full(grid.shape, spec.rho * abs(q1.z)),
        theta=theta,
        gamma=gamma + a,
        omega=omega - a,
        phi_gradient=[d for d in np.moveaxis(spec.phi.gradient(x), -1, 0)[: grid.ndim]],
    )


SEPARATION_TAGS = ("A16", "A17", "A18", "A19")


@dataclass
class SeparationReport:
    residuals: dict[str, np.ndarray]
    masks: dict[str, np.ndarray]
    linf: dict[str, float]
    masked_fraction: float

    def max_linf(self) -> float:
        return max(self.linf.values())


def _dot(a: list[np.ndarray], b: list[np.ndarray]):
    return sum(x * y for x, y in zip(a, b))


def separation_residuals(
    sf: SeparationFields,
    E: float,
    total_energy: float,
    hbar: float = 1.0,
    mass: float = 1.0,
    singular_tol: float = 1e-3,
    margin: int = 1,
    phi_derivatives: str = "auto",
) -> SeparationReport:
    """Pointwise residuals of the four real equations for ``rho`` and the phases.

    Derivatives of rho and the phase fields come from second-order finite
    differences on ``sf.grid``; ``grad(phi)`` uses ``sf.phi_gradient`` when
    present (``phi_derivatives="auto"``) and finite differences otherwise.
    Points where ``|cos(Theta)|`` (A16, A18) or ``|sin(Theta)|`` (A17, A19)
    drops below ``singular_tol`` are masked out of the norms.
    """
    g = sf.grid
    h = g.spacing
    phi = sf.phi.z
    if np.min(np.abs(phi[g.interior(margin)])) <= 1e-8 * np.max(np.abs(phi)):
        raise ZeroDivisionError("phi vanishes on the grid")
    rhs = 2.0 * mass / hbar**2 * (E - total_energy)

    if phi_derivatives not in ("auto", "fd"):
        raise ValueError(f"phi_derivatives must be 'auto' or 'fd', got {phi_derivatives!r}")
    if phi_derivatives == "auto" and sf.phi_gradient is not None:
        d_phi = list(sf.phi_gradient)
    else:
        d_phi = gradient_array(phi, h)
    d_rho = gradient_array(sf.rho, h)
    d_th = gradient_array(sf.theta, h)
    d_ga = gradient_array(sf.gamma, h)
    d_om = gradient_array(sf.omega, h)
    lap_rho = laplacian_array(sf.rho, h)
    lap_th = laplacian_array(sf.theta, h)
    lap_ga = laplacian_array(sf.gamma, h)
    lap_om = laplacian_array(sf.omega, h)

    c, s = np.cos(sf.theta), np.sin(sf.theta)
    cos_ok = np.abs(c) >= singular_tol
    sin_ok = np.abs(s) >= singular_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        tan = np.where(cos_ok, s / c, np.nan)
        cot = np.where(sin_ok, c / s, np.nan)

    z0 = (lap_rho + 2.0 / phi * _dot(d_phi, d_rho)) / sf.rho
    # grad(rho phi) / (rho phi)
    log_grad = [dp / phi + dr / sf.rho for dp, dr in zip(d_phi, d_rho)]
    p_over_cos = [-tan * t + 1j * gm for t, gm in zip(d_th, d_ga)]
    q_over_sin = [cot * t + 1j * om for t, om in zip(d_th, d_om)]
    z1 = 2.0 * _dot(log_grad, p_over_cos)
    z2 = 2.0 * _dot(log_grad, q_over_sin)

    grad_th2 = _dot(d_th, d_th)
    res = {
        "A16": (z0 + z1).real - _dot(d_ga, d_ga) - grad_th2 - tan * lap_th - rhs,
        "A17": (z0 + z2).real - _dot(d_om, d_om) - grad_th2 + cot * lap_th - rhs,
        "A18": (z0 + z1).imag + lap_ga - 2.0 * tan * _dot(d_th, d_ga),
        "A19": (z0 + z2).imag + lap_om + 2.0 * cot * _dot(d_th, d_om),
    }
    masks = {"A16": cos_ok, "A18": cos_ok, "A17": sin_ok, "A19": sin_ok}
    inner = np.zeros(g.shape, bool)
    inner[g.interior(margin)] = True
    linf = {}
    for tag in SEPARATION_TAGS:
        use = inner & masks[tag]
        linf[tag] = float(np.max(np.abs(res[tag][use]))) if use.any() else 0.0
    used = inner & cos_ok & sin_ok
    masked_fraction = 1.0 - used.sum() / inner.sum()
    return SeparationReport(res, masks, linf, float(masked_fraction))


# --------------------------------------------------------------------------
# non-linear mixing angle


@dataclass
class ThetaODEReport:
    x: np.ndarray
    theta: np.ndarray
    theta_prime: np.ndarray
    first_lhs: np.ndarray
    variance: float
    steps: int

    @property
    def contradiction(self) -> bool:
        """True when the first equation cannot hold along the trajectory."""
        return self.variance > 0.0


def _rk4(rhs, y0: np.ndarray, h: float, n: int) -> np.ndarray:
    ys = np.empty((n + 1, y0.size))
    ys[0] = y = y0
    for i in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise ODEError(f"integration blew up at step {i}")
        ys[i + 1] = y
    return ys


def no_nontrivial_theta_check(
    gamma_norm: float,
    omega_norm: float,
    theta0: float,
    theta0_prime: float,
    domain: Grid,
    allow_degenerate: bool = False,
) -> ThetaODEReport:
    """Integrate ``Theta'' = (|w|^2 - |g|^2) sin(Theta) cos(Theta)`` and test the first-order condition.

    Along the trajectory we evaluate
    ``Theta'^2 + |w|^2 sin^2(Theta) + |g|^2 cos^2(Theta)``, which would have to
    be the constant ``2m(E' - E)/hbar^2``. A positive variance means no
    non-linear ``Theta`` satisfies both equations. ``allow_degenerate`` admits
    ``|g| = |w|`` (linear ``Theta``) as a control.
    """
    if domain.ndim != 1:
        raise GridError("the mixing-angle check runs on a 1-D grid")
    g2, w2 = gamma_norm**2, omega_norm**2
    if not allow_degenerate:
        if g2 == w2:
            raise ValueError("need |gamma|^2 != |omega|^2")
        if theta0_prime == 0.0:
            raise ValueError("need a nonzero initial slope")
    h = domain.spacing[0]
    length = domain.lengths[0]
    sub = max(1, math.ceil(h / (1e-3 * length) - 1e-9))
    n = (domain.dims[0] - 1) * sub

    def rhs(y):
        return np.array([y[1], (w2 - g2) * math.sin(y[0]) * math.cos(y[0])])

    ys = _rk4(rhs, np.array([theta0, theta0_prime], dtype=float), h / sub, n)[::sub]
    th, dth = ys[:, 0], ys[:, 1]
    lhs = dth**2 + w2 * np.sin(th) ** 2 + g2 * np.cos(th) ** 2
    return ThetaODEReport(domain.axes()[0], th, dth, lhs, float(np.var(lhs)), n)


# --------------------------------------------------------------------------
# random valid parameter sets


def _frame(rng: np.random.Generator, ndim: int):
    """Random orthonormal frame spanning the first ``ndim`` axes (padded to 3-vectors)."""
    m, _ = np.linalg.qr(rng.normal(size=(ndim, ndim)))
    return [_vec3(m[:, a]) for a in range(ndim)]


def random_free_particle_spec(
    rng: np.random.Generator,
    ndim: int = 3,
    scale: float = 1.0,
    branches: int = 4,
    hbar: float = 1.0,
    mass: float = 1.0,
) -> FreeParticleSpec:
    """Draw a spec that satisfies every norm and orthogonality constraint.

    ``k`` takes one frame direction and the phase vectors live in the rest. In
    3-D, a nonzero ``theta`` forces ``gamma`` and ``omega`` onto the single
    remaining direction; otherwise they rotate freely in the transverse plane.
    """
    frame = _frame(rng, ndim)
    k = scale * rng.uniform(0.3, 1.0) * frame[0]
    transverse = frame[1:]
    theta = gamma = omega = np.zeros(3)
    if ndim == 3:
        if rng.random() < 0.5:
            theta = scale * rng.uniform(0.2, 0.8) * transverse[0]
            gm = scale * rng.uniform(0.2, 0.8)
            gamma = gm * transverse[1]
            omega = rng.choice([-1.0, 1.0]) * gamma
        else:
            gm = scale * rng.uniform(0.2, 0.8)
            a, b = rng.uniform(0, 2 * np.pi, size=2)
            gamma = gm * (math.cos(a) * transverse[0] + math.sin(a) * transverse[1])
            omega = gm * (math.cos(b) * transverse[0] + math.sin(b) * transverse[1])
    elif ndim == 2:
        if rng.random() < 0.5:
            theta = scale * rng.uniform(0.2, 0.8) * transverse[0]
        else:
            gm = scale * rng.uniform(0.2, 0.8)
            gamma = gm * transverse[0]
            omega = rng.choice([-1.0, 1.0]) * gamma
    phi = PlaneWaveSpec(
        a1=complex(*rng.normal(size=2)),
        a2=complex(*rng.normal(size=2)) * rng.uniform(0.0, 0.5),
        k=k,
    )
    if branches == 1:
        # complex Q1 keeps the polar split available
        weights = [Quaternion(complex(*rng.normal(size=2)))]
    else:
        weights = [Quaternion(complex(*rng.normal(size=2)), complex(*rng.normal(size=2))) for _ in range(branches)]
    weights += [Quaternion()] * (4 - branches)
    total = phi.energy(hbar, mass) + hbar**2 / (2 * mass) * float(gamma @ gamma + theta @ theta)
    return FreeParticleSpec(
        phi=phi,
        gamma=gamma,
        omega=omega,
        theta=theta,
        total_energy=total,
        gamma0=rng.uniform(-np.pi, np.pi),
        omega0=rng.uniform(-np.pi, np.pi),
        theta0=rng.uniform(0.1, 1.4),
        q_weights=tuple(weights),
        rho=rng.uniform(0.5, 2.0),
        hbar=hbar,
        mass=mass,
    )
