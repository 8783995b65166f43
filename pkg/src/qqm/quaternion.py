"""Quaternions in symplectic form ``q = z + zeta j`` with complex ``z`` and ``zeta``.

The product rule follows from ``i j = -j i`` and ``j**2 = -1``::

    (z1 + w1 j)(z2 + w2 j) = (z1 z2 - w1 conj(w2)) + (z1 w2 + w1 conj(z2)) j

The helpers ending in ``_parts`` apply the same formulas to numpy arrays of
complex components, which is how quaternion-valued fields are stored.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

ATOL = 1e-12


def mul_parts(z1, w1, z2, w2):
    """Symplectic product on raw complex components (scalars or arrays)."""
    return z1 * z2 - w1 * np.conj(w2), z1 * w2 + w1 * np.conj(z2)


def conj_parts(z, w):
    return np.conj(z), -w


def norm2_parts(z, w):
    return np.abs(z) ** 2 + np.abs(w) ** 2


@dataclass(frozen=True)
class Quaternion:
    """Immutable quaternion ``z + zeta j``."""

    z: complex = 0j
    zeta: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "zeta", complex(self.zeta))

    @classmethod
    def from_components(cls, a, b, c, d) -> Quaternion:
        """Build from the real basis ``a + b i + c j + d k``."""
        return cls(complex(a, b), complex(c, d))

    @property
    def components(self) -> tuple[float, float, float, float]:
        return (self.z.real, self.z.imag, self.zeta.real, self.zeta.imag)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return q_mul(self, other)
        if isinstance(other, (int, float)):
            return Quaternion(self.z * other, self.zeta * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(self.z * other, self.zeta * other)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return Quaternion(self.z + other.z, self.zeta + other.zeta)

    def __sub__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return Quaternion(self.z - other.z, self.zeta - other.zeta)

    def __neg__(self):
        return Quaternion(-self.z, -self.zeta)

    def conj(self) -> Quaternion:
        return q_conj(self)

    def norm2(self) -> float:
        return abs(self.z) ** 2 + abs(self.zeta) ** 2

    def norm(self) -> float:
        return math.hypot(abs(self.z), abs(self.zeta))

    def is_complex(self, atol: float = ATOL) -> bool:
        return abs(self.zeta) <= atol

    def isclose(self, other: Quaternion, atol: float = ATOL) -> bool:
        return abs(self.z - other.z) <= atol and abs(self.zeta - other.zeta) <= atol


ONE = Quaternion(1.0, 0.0)
I = Quaternion(1j, 0.0)
J = Quaternion(0.0, 1.0)
K = Quaternion(0.0, 1j)


def q_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    z, w = mul_parts(a.z, a.zeta, b.z, b.zeta)
    return Quaternion(z, w)


def q_conj(a: Quaternion) -> Quaternion:
    return Quaternion(a.z.conjugate(), -a.zeta)


def right_mul_i(a: Quaternion) -> Quaternion:
    """``a * i``; the j-part picks up ``-i`` because ``j i = -i j``."""
    return Quaternion(1j * a.z, -1j * a.zeta)


def left_mul_i(a: Quaternion) -> Quaternion:
    return Quaternion(1j * a.z, 1j * a.zeta)


@dataclass(frozen=True)
class PolarUnitQuaternion:
    """``rho (cos(theta) e^{i gamma} + sin(theta) e^{i omega} j)``."""

    rho: float
    theta: float
    gamma: float
    omega: float

    def compose(self) -> Quaternion:
        return polar_compose(self)


def _principal(angle: float) -> float:
    # keep the (-pi, pi] branch; atan2 returns -pi for a negative-zero imaginary part
    return math.pi if angle <= -math.pi else angle


def polar_decompose(q: Quaternion) -> PolarUnitQuaternion:
    """Split ``q`` into magnitude, mixing angle and the two phases.

    Degenerate branches: a vanishing complex part sets ``gamma = 0``, a
    vanishing j-part sets ``omega = 0``, and ``q = 0`` maps to all zeros.
    """
    az, aw = abs(q.z), abs(q.zeta)
    rho = math.hypot(az, aw)
    if rho == 0.0:
        return PolarUnitQuaternion(0.0, 0.0, 0.0, 0.0)
    theta = math.atan2(aw, az)
    gamma = _principal(cmath.phase(q.z)) if az > 0.0 else 0.0
    omega = _principal(cmath.phase(q.zeta)) if aw > 0.0 else 0.0
    return PolarUnitQuaternion(rho, theta, gamma, omega)


def polar_compose(p: PolarUnitQuaternion) -> Quaternion:
    return Quaternion(
        p.rho * math.cos(p.theta) * cmath.exp(1j * p.gamma),
        p.rho * math.sin(p.theta) * cmath.exp(1j * p.omega),
    )
