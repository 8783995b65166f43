import math

import numpy as np
import pytest

from oracles import current_at, from_parts
from qqm.scattering import (
    EvanescentRegime,
    NoPropagation,
    ScatteringError,
    StepScatteringSpec,
    boundary_residuals,
    current_balance,
    solve_step,
)

SQ2 = math.sqrt(2)


def test_complex_limit():
    spec = StepScatteringSpec(2.0, 1.0)
    r = solve_step(spec)
    assert abs(r.k_mag - 2) < 1e-14 and abs(r.p_mag - SQ2) < 1e-14 and abs(r.q_mag - 2) < 1e-14
    assert abs(r.r_coeff - (2 - SQ2) / (2 + SQ2)) < 1e-14
    assert abs(r.t_coeff - 4 / (2 + SQ2)) < 1e-14
    assert boundary_residuals(spec, r).max_linf() <= 1e-12
    assert abs(r.k_mag * (1 - r.r_coeff**2) - r.p_mag * r.t_coeff**2) < 1e-14
    assert abs(r.k_mag * (1 - r.r_coeff**2) - 1.9411254969542810) < 1e-14


def test_no_step():
    r = solve_step(StepScatteringSpec(1.0, 0.0, 0.4))
    assert r.r_coeff == 0 and r.t_coeff == 1 and r.p_mag == r.k_mag


def test_quarter_ratio_independent_of_angle():
    for th in (0.0, 0.5, 1.1):
        r = solve_step(StepScatteringSpec(4.0, 1.0, th, [0, 0.6, 0], [0, 0, 0.6]))
        assert abs(r.p_mag**2 / r.k_mag**2 - 0.75) < 1e-14
        gp, gk = r.gamma_p_perp @ r.gamma_p_perp, r.gamma_k_perp @ r.gamma_k_perp
        assert abs(gp / gk - 0.75) < 1e-14


def test_quaternionic_boundary_and_tamper():
    spec = StepScatteringSpec(2.0, 1.0, 0.5, [0, 0.3, 0], [0, 0.18, 0.24])
    r = solve_step(spec)
    assert boundary_residuals(spec, r).max_linf() <= 1e-12
    bent = r.__class__(**{**r.__dict__, "t_coeff": r.t_coeff * 1.01})
    val = boundary_residuals(spec, bent).value.linf
    assert math.isclose(val, 0.01 * r.t_coeff, rel_tol=1e-9)


def test_probe_points_must_lie_on_interface():
    spec = StepScatteringSpec(2.0, 1.0)
    r = solve_step(spec)
    # with no transverse phases any interface point works
    pts = np.array([[0, 0.5, -1.0], [0, 2.0, 3.0]])
    assert boundary_residuals(spec, r, pts).max_linf() <= 1e-12
    with pytest.raises(ValueError):
        boundary_residuals(spec, r, [[0.1, 0, 0]])


def test_properties_over_energies():
    for e in np.linspace(1.05, 6.0, 12):
        spec = StepScatteringSpec(e, 1.0, 0.7, [0, 0.2, 0], [0, 0, 0.2])
        r = solve_step(spec)
        assert 0 <= r.r_coeff < 1 and r.t_coeff > 0
        s = [math.sin(t) ** 2 for t in (r.theta_k, r.theta_q, r.theta_p)]
        assert max(s) - min(s) <= 1e-14
        ratio = math.sqrt(r.gamma_p_perp @ r.gamma_p_perp) / math.sqrt(r.gamma_k_perp @ r.gamma_k_perp)
        assert abs(ratio - r.p_mag / r.k_mag) < 1e-14
    near = solve_step(StepScatteringSpec(1.0 + 1e-10, 1.0)).r_coeff
    assert near > 0.999


def test_current_balance_against_oracle():
    spec = StepScatteringSpec(2.0, 1.0, math.pi / 4, [0, 0.3, 0], [0, 0, 0.3])
    r = solve_step(spec)
    bal = current_balance(spec, r)
    assert bal.residual < 1e-8 and bal.closed_form_residual < 1e-12
    # brute-force current of region I at one point via the 4x4 oracle
    x = np.array([[-0.7, 0.4, 1.1]])
    z = w = gz = gw = 0
    for wave in r.region_waves(1):
        vz, vw = wave.value(x)
        dz, dw = wave.gradient(x)
        z, w, gz, gw = z + vz, w + vw, gz + dz, gw + dw
    ref = current_at(from_parts(z[0], w[0]), [from_parts(gz[0, a], gw[0, a]) for a in range(3)])
    assert np.allclose(ref, bal.region1, atol=1e-10)


def test_errors():
    with pytest.raises(EvanescentRegime):
        solve_step(StepScatteringSpec(1.0, 2.0))
    with pytest.raises(NoPropagation):
        solve_step(StepScatteringSpec(1.0, 0.5, 0.3, [0, 2.0, 0], [0, 2.0, 0]))
    with pytest.raises(ScatteringError):
        solve_step(StepScatteringSpec(2.0, 1.0, 0.3, [0, 0.3, 0], [0, 0.1, 0]))
    with pytest.raises(ScatteringError):
        solve_step(StepScatteringSpec(2.0, 1.0, 0.3, [0.1, 0.3, 0], [0, 0.3, 0.1]))
