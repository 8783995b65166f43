import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import conj4, from_parts, mul4
from qqm.quaternion import (
    I,
    J,
    K,
    ONE,
    PolarUnitQuaternion,
    Quaternion,
    left_mul_i,
    polar_compose,
    polar_decompose,
    q_conj,
    q_mul,
    right_mul_i,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quats = st.builds(Quaternion.from_components, finite, finite, finite, finite)


def as4(q):
    return from_parts(q.z, q.zeta)


def test_basis_products():
    assert q_mul(I, J).isclose(K)
    assert q_mul(J, I).isclose(-K)
    assert q_mul(J, J).isclose(-ONE)
    assert q_mul(K, K).isclose(-ONE)
    assert q_mul(I, I).isclose(-ONE)


def test_mixed_product_against_matrix_oracle():
    a = Quaternion(1 + 1j, 0)
    b = Quaternion(1j, 0)
    assert np.allclose(as4(q_mul(a, b)), mul4(as4(a), as4(b)))
    c = Quaternion(1.0, 1.0)  # 1 + j
    assert np.allclose(as4(q_mul(c, I)), [0, 1, 0, -1])  # i - k


@given(quats, quats)
def test_product_matches_oracle(a, b):
    assert np.allclose(as4(a * b), mul4(as4(a), as4(b)), atol=1e-9)


@given(quats, quats, quats)
def test_associative(a, b, c):
    lhs, rhs = (a * b) * c, a * (b * c)
    assert lhs.isclose(rhs, atol=1e-9 * max(1.0, lhs.norm()))


@given(quats, quats)
def test_norm_multiplicative(a, b):
    assert math.isclose((a * b).norm(), a.norm() * b.norm(), rel_tol=1e-13, abs_tol=1e-300)


def test_conjugation():
    assert q_conj(I).isclose(-I)
    q = Quaternion(0.3 - 0.2j, 1.1 + 0.4j)
    prod = q * q.conj()
    assert prod.isclose(Quaternion(q.norm2()))
    assert np.allclose(as4(q.conj()), conj4(as4(q)))


def test_conjugate_reverses_products(rng):
    for _ in range(100):
        a = Quaternion.from_components(*rng.normal(size=4))
        b = Quaternion.from_components(*rng.normal(size=4))
        assert (a * b).conj().isclose(b.conj() * a.conj())


@given(quats)
def test_unit_times_conjugate_is_one(q):
    if q.norm() < 1e-3:
        return
    u = q * (1.0 / q.norm())
    assert (u * u.conj()).isclose(ONE, atol=1e-14)


def test_right_mul_i_examples():
    assert right_mul_i(ONE).isclose(I)
    assert right_mul_i(J).isclose(Quaternion(0, -1j))
    assert right_mul_i(J).isclose(q_mul(J, I))


@given(quats)
def test_right_and_left_i(q):
    assert right_mul_i(right_mul_i(q)).isclose(-q, atol=1e-12)
    assert right_mul_i(q).isclose(q * I, atol=1e-12)
    assert left_mul_i(q).isclose(I * q, atol=1e-12)
    diff = left_mul_i(q) - right_mul_i(q)
    assert abs(diff.z) == 0.0
    assert abs(diff.zeta - 2j * q.zeta) <= 1e-12


def test_polar_examples():
    assert polar_decompose(ONE) == PolarUnitQuaternion(1.0, 0.0, 0.0, 0.0)
    p = polar_decompose(J)
    assert p.rho == 1.0 and math.isclose(p.theta, math.pi / 2) and p.gamma == 0.0 and p.omega == 0.0
    assert polar_decompose(Quaternion()) == PolarUnitQuaternion(0.0, 0.0, 0.0, 0.0)
    # negative real parts land on +pi, never -pi
    assert polar_decompose(Quaternion(-1.0, -1.0)).gamma == math.pi
    assert polar_decompose(Quaternion(complex(-1.0, -0.0), 0)).gamma == math.pi


def test_polar_round_trip(rng):
    qs = rng.normal(size=(10_000, 4))
    for a, b, c, d in qs:
        q = Quaternion.from_components(a, b, c, d)
        q = q * (1.0 / q.norm())
        p = polar_decompose(q)
        assert 0.0 <= p.theta <= math.pi / 2
        assert -math.pi < p.gamma <= math.pi and -math.pi < p.omega <= math.pi
        assert polar_compose(p).isclose(q, atol=1e-14)
        back = polar_decompose(p.compose())
        assert abs(back.theta - p.theta) < 1e-12


@given(st.floats(0.01, 5), st.floats(0, math.pi / 2), st.floats(-3, 3), st.floats(-3, 3))
def test_compose_has_norm_rho(rho, theta, gamma, omega):
    assert math.isclose(polar_compose(PolarUnitQuaternion(rho, theta, gamma, omega)).norm(), rho, rel_tol=1e-13)


def test_scalar_and_type_errors():
    q = Quaternion(1 + 2j, 3 - 1j)
    assert (2 * q).isclose(q * 2.0)
    with pytest.raises(TypeError):
        q + 1.0
    assert q.components == (1.0, 2.0, 3.0, -1.0)
    assert not q.is_complex() and Quaternion(2j).is_complex()
