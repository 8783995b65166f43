"""Declarative scenario files and the runners behind ``qqm run``.

A scenario is an INI-style file with a strict schema::

    [scenario]
    kind = free_particle          ; time_phase | free_particle | separation | step_scattering | current_profile
    output = results/free         ; prefix for <prefix>_summary.csv and friends
    field = false                 ; also write <prefix>_field.csv

    [units]
    hbar = 1.0
    mass = 1.0

    [grid]
    origin = 0 0 0
    length = 6.283185307179586 6.283185307179586 6.283185307179586   ; or: spacing = ...
    dims = 21 21 21

    [parameters]
    ...                           ; kind-specific, see PARAMETERS

Vectors are whitespace-separated reals, complex numbers are ``re im`` pairs
and quaternions are ``a b c d`` for ``a + b i + c j + d k``. Unknown sections
or keys are errors.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import observables as obs
from . import scattering as sc
from . import wavefunction as wf
from .grid import Grid, GridError, QField
from .quaternion import Quaternion
from .schrodinger import hamiltonian_apply, period_samples, stationary_residual, time_dependent_residual

KINDS = ("time_phase", "free_particle", "separation", "step_scattering", "current_profile")
GRID_KINDS = ("free_particle", "separation", "current_profile")
REQUIRED = object()

EXIT_OK, EXIT_THRESHOLD, EXIT_PARSE, EXIT_CONSTRAINT = 0, 1, 2, 3


class ScenarioError(ValueError):
    """Malformed scenario file (exit status 2)."""


# --------------------------------------------------------------------------
# value parsers


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split()]
    except ValueError as exc:
        raise ScenarioError(f"expected numbers, got {text!r}") from exc


def real(text: str) -> float:
    vals = _floats(text)
    if len(vals) != 1:
        raise ScenarioError(f"expected one number, got {text!r}")
    return vals[0]


def integer(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ScenarioError(f"expected an integer, got {text!r}") from exc


def vector(text: str) -> np.ndarray:
    vals = _floats(text)
    if not 1 <= len(vals) <= 3:
        raise ScenarioError(f"expected 1 to 3 components, got {text!r}")
    return np.array(vals)


def integers(text: str) -> tuple[int, ...]:
    return tuple(integer(t) for t in text.split())


def complex_pair(text: str) -> complex:
    vals = _floats(text)
    if len(vals) != 2:
        raise ScenarioError(f"expected 're im', got {text!r}")
    return complex(vals[0], vals[1])


def quaternion(text: str) -> Quaternion:
    vals = _floats(text)
    if len(vals) != 4:
        raise ScenarioError(f"expected 'a b c d', got {text!r}")
    return Quaternion.from_components(*vals)


def boolean(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"expected a boolean, got {text!r}")


def choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ScenarioError(f"expected one of {options}, got {text!r}")
        return text

    return parse


def text(value: str) -> str:
    return value


# --------------------------------------------------------------------------
# schema

ZERO3 = "0 0 0"

FREE_PARTICLE_KEYS = {
    "k": (vector, ZERO3),
    "a1": (complex_pair, "1 0"),
    "a2": (complex_pair, "0 0"),
    "gamma": (vector, ZERO3),
    "omega": (vector, ZERO3),
    "theta": (vector, ZERO3),
    "gamma0": (real, "0"),
    "omega0": (real, "0"),
    "theta0": (real, "0"),
    "q1": (quaternion, "1 0 0 0"),
    "q2": (quaternion, "0 0 0 0"),
    "q3": (quaternion, "0 0 0 0"),
    "q4": (quaternion, "0 0 0 0"),
    "rho": (real, "1"),
    "total_energy": (real, REQUIRED),
}

PARAMETERS: dict[str, dict[str, tuple]] = {
    "time_phase": {
        "lambda0": (quaternion, "1 0 0 0"),
        "xi": (real, "0"),
        "energy": (real, REQUIRED),
        "tau0": (real, "0"),
        "t_start": (real, "0"),
        "t_end": (real, None),
        "samples": (integer, "50"),
        "dt": (real, "1e-4"),
    },
    "free_particle": {
        **FREE_PARTICLE_KEYS,
        "xi": (real, "0"),
        "tau0": (real, "0"),
        "lambda0": (quaternion, "1 0 0 0"),
        "time_samples": (integer, "9"),
        "dt": (real, "1e-4"),
    },
    "separation": {
        **FREE_PARTICLE_KEYS,
        "perturbation": (real, "0.1"),
        "singular_tol": (real, "1e-3"),
        "ode_gamma_norm": (real, "2"),
        "ode_omega_norm": (real, "1"),
        "ode_theta0": (real, "0.3"),
        "ode_theta0_prime": (real, "1"),
        "ode_length": (real, "10"),
        "ode_points": (integer, "10001"),
    },
    "step_scattering": {
        "total_energy": (real, REQUIRED),
        "v0": (real, REQUIRED),
        "theta_k": (real, "0"),
        "gamma_k_perp": (vector, ZERO3),
        "omega_k_perp": (vector, ZERO3),
        "probes": (text, "0 0 0"),
        "current_samples": (integer, "16"),
    },
    "current_profile": {
        "profile": (choice("phi1", "phi2"), "phi2"),
        "k": (vector, REQUIRED),
        "theta_min": (real, "0"),
        "theta_max": (real, repr(math.pi / 2)),
        "steps": (integer, "33"),
    },
}

SECTIONS = {
    "scenario": {"kind": (choice(*KINDS), REQUIRED), "output": (text, REQUIRED), "field": (boolean, "false")},
    "units": {"hbar": (real, "1"), "mass": (real, "1")},
    "grid": {"origin": (vector, None), "length": (vector, None), "spacing": (vector, None), "dims": (integers, REQUIRED)},
}


@dataclass
class Scenario:
    path: Path
    kind: str
    output: str
    write_field: bool
    hbar: float
    mass: float
    grid: Optional[Grid]
    params: dict[str, Any]


def _read_section(parser: configparser.ConfigParser, name: str, schema: dict) -> dict[str, Any]:
    raw = dict(parser[name]) if parser.has_section(name) else {}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ScenarioError(f"[{name}]: unknown key(s) {', '.join(unknown)}")
    out = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                out[key] = parse(raw[key])
            except ScenarioError as exc:
                raise ScenarioError(f"[{name}] {key}: {exc}") from None
        elif default is REQUIRED:
            raise ScenarioError(f"[{name}]: missing required key {key!r}")
        else:
            out[key] = None if default is None else parse(default)
    return out


def _build_grid(g: dict) -> Grid:
    dims = g["dims"]
    if (g["length"] is None) == (g["spacing"] is None):
        raise ScenarioError("[grid]: give exactly one of 'length' or 'spacing'")
    origin = g["origin"] if g["origin"] is not None else np.zeros(len(dims))
    try:
        if g["length"] is not None:
            lengths = g["length"]
            if len(lengths) != len(dims):
                raise ScenarioError("[grid]: length and dims disagree in dimension")
            return Grid.uniform(lengths, dims, origin)
        return Grid(tuple(origin), tuple(g["spacing"]), dims)
    except GridError as exc:
        raise ScenarioError(f"[grid]: {exc}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, UnicodeDecodeError, configparser.Error) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    allowed = {"scenario", "units", "grid", "parameters"}
    unknown = sorted(set(parser.sections()) - allowed)
    if unknown:
        raise ScenarioError(f"unknown section(s) {', '.join(unknown)}")
    if not parser.has_section("scenario"):
        raise ScenarioError("missing [scenario] section")
    head = _read_section(parser, "scenario", SECTIONS["scenario"])
    units = _read_section(parser, "units", SECTIONS["units"])
    kind = head["kind"]
    grid = None
    if kind in GRID_KINDS:
        if not parser.has_section("grid"):
            raise ScenarioError(f"kind {kind!r} needs a [grid] section")
        grid = _build_grid(_read_section(parser, "grid", SECTIONS["grid"]))
    elif parser.has_section("grid"):
        raise ScenarioError(f"kind {kind!r} takes no [grid] section")
    params = _read_section(parser, "parameters", PARAMETERS[kind])
    if units["hbar"] <= 0 or units["mass"] <= 0:
        raise ScenarioError("[units]: hbar and mass must be positive")
    return Scenario(path, kind, head["output"], head["field"], units["hbar"], units["mass"], grid, params)


# --------------------------------------------------------------------------
# results


def fmt(x: float) -> str:
    """17 significant digits, scientific notation."""
    return format(float(x), ".16e")


@dataclass
class Row:
    tag: str
    quantity: str
    value: float
    threshold: Optional[float] = None
    comparison: str = "<="
    note: str = ""

    @property
    def status(self) -> str:
        if self.note:
            return self.note
        if self.threshold is None:
            return "info"
        v = self.value
        if not math.isfinite(v):
            return "fail"
        ok = {"<=": v <= self.threshold, ">=": v >= self.threshold, ">": v > self.threshold}[self.comparison]
        return "pass" if ok else "fail"

    def cells(self) -> list[str]:
        thr = "" if self.threshold is None else fmt(self.threshold)
        cmp_ = "" if self.threshold is None else self.comparison
        return [self.tag, self.quantity, fmt(self.value), cmp_, thr, self.status]


SUMMARY_HEADER = ["tag", "quantity", "value", "comparison", "threshold", "status"]


@dataclass
class RunResult:
    rows: list[Row]
    tables: dict[str, tuple[list[str], list[list[float]]]] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_THRESHOLD if any(r.status == "fail" for r in self.rows) else EXIT_OK


FD_TOL = 1e-2


def _threads() -> int:
    env = os.environ.get("QQM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _map_levels(fn, grids):
    # results are collected in submission order, so output stays deterministic
    with ThreadPoolExecutor(max_workers=min(_threads(), len(grids))) as pool:
        return list(pool.map(fn, grids))


def _levels(grid: Grid, count: int) -> list[Grid]:
    grids = [grid]
    for _ in range(count - 1):
        grids.append(grids[-1].refined())
    return grids


def _order_rows(tag: str, quantity: str, values: list[float]) -> list[Row]:
    rows = []
    for lvl, (a, b) in enumerate(zip(values, values[1:])):
        order = math.log2(a / b) if a > 0 and b > 0 else float("nan")
        rows.append(Row(tag, f"{quantity}_order@level{lvl}-{lvl + 1}", order))
    return rows


# --------------------------------------------------------------------------
# runners


def _free_spec(sc_: Scenario) -> wf.FreeParticleSpec:
    p = sc_.params
    return wf.FreeParticleSpec(
        phi=wf.PlaneWaveSpec(p["a1"], p["a2"], p["k"]),
        gamma=p["gamma"],
        omega=p["omega"],
        theta=p["theta"],
        total_energy=p["total_energy"],
        gamma0=p["gamma0"],
        omega0=p["omega0"],
        theta0=p["theta0"],
        q_weights=(p["q1"], p["q2"], p["q3"], p["q4"]),
        rho=p["rho"],
        hbar=sc_.hbar,
        mass=sc_.mass,
    )


def _constraint_rows(spec: wf.FreeParticleSpec) -> list[Row]:
    report = wf.validate_free_particle(spec)
    report.raise_if_invalid()
    return [
        Row(name.split(":")[0], f"constraint_{name.split(':')[1]}", abs(r), report.tolerance * max(1.0, report.scales[name]))
        for name, r in report.residuals.items()
    ]


def _field_table(f: QField, hbar: float, mass: float):
    pos = f.grid.positions().reshape(-1, 3)
    j = obs.probability_current(f, hbar, mass).vectors.reshape(-1, 3)
    z, w = f.z.ravel(), f.zeta.ravel()
    dens = f.norm2().ravel()
    header = ["x", "y", "z", "q_re", "q_i", "q_j", "q_k", "density", "j_x", "j_y", "j_z"]
    rows = np.column_stack([pos, z.real, z.imag, w.real, w.imag, dens, j]).tolist()
    return header, rows


def run_time_phase(sc_: Scenario) -> RunResult:
    p = sc_.params
    spec = wf.TimePhaseSpec(p["lambda0"], p["xi"], p["energy"], p["tau0"], sc_.hbar)
    t_end = p["t_end"] if p["t_end"] is not None else p["t_start"] + 2 * math.pi * sc_.hbar / abs(p["energy"])
    if p["samples"] < 3:
        raise ScenarioError("[parameters] samples: need at least 3")
    ts = np.linspace(p["t_start"], t_end, p["samples"])
    target = Quaternion(spec.frequency)
    analytic = max((wf.phase_generator(wf.time_phase_derivative(spec, t), wf.time_phase(spec, t)) - target).norm() for t in ts)
    unit = max(abs(wf.time_phase(spec, t).norm() - 1.0) for t in ts)
    fd = wf.time_phase_residual(spec, ts, p["dt"])
    kappa1 = 0.0
    for t in ts:
        series = [wf.time_phase(spec, t + s * p["dt"]) for s in (-1, 0, 1)]
        d = (series[2] - series[0]) * (0.5 / p["dt"])
        kappa1 = max(kappa1, abs(wf.phase_generator(d, series[1]).zeta))
    rows = [
        Row("a10", "analytic_generator_residual_max", analytic, 1e-12),
        Row("a10", "unit_norm_deviation_max", unit, 1e-12),
        Row("a5", "fd_generator_residual_max", fd, 1e-6),
        Row("a5", "fd_generator_jpart_max", kappa1, 1e-6),
        Row("a10", "separation_constant", spec.frequency),
    ]
    return RunResult(rows)


def _free_level(spec: wf.FreeParticleSpec, sc_: Scenario, grid: Grid, phase: wf.TimePhaseSpec, n_time: int, dt: float):
    f = wf.sample_free_particle(spec, grid, check=False)
    hb, m = sc_.hbar, sc_.mass
    out = {}
    out["A8"] = stationary_residual(f, spec.total_energy, None, hb, m).linf
    out["P5"] = obs.continuity_residual(f, hb, m).linf
    psi = wf.separated_solution(f, phase)
    ts = period_samples(spec.total_energy, hb, n_time)
    out["a1"] = time_dependent_residual(psi, None, grid, ts, dt, hb, m).linf
    out["a1_left"] = time_dependent_residual(psi, None, grid, ts, dt, hb, m, order="left").linf
    norm = obs.expectation_value(f, f)
    energy = obs.expectation_value(hamiltonian_apply(f, None, hb, m), f)
    out["Eq1_norm"] = norm
    out["Eq1"] = abs(energy / norm - spec.total_energy) / abs(spec.total_energy)
    j = obs.probability_current(f, hb, m)
    out["P1_mean"] = j.interior().reshape(-1, 3).mean(axis=0)
    if spec.is_single_branch() and spec.q_weights[0].is_complex():
        closed = obs.current_closed_form(spec, grid)
        diff = np.linalg.norm(closed.interior() - j.interior(), axis=-1)
        out["P200"] = float(diff.max() / f.norm2().max())
    return f, out


def run_free_particle(sc_: Scenario, refine: int = 1) -> RunResult:
    p = sc_.params
    spec = _free_spec(sc_)
    rows = _constraint_rows(spec)
    phase = wf.TimePhaseSpec(p["lambda0"], p["xi"], spec.total_energy, p["tau0"], sc_.hbar)
    grids = _levels(sc_.grid, refine)
    levels = _map_levels(lambda g: _free_level(spec, sc_, g, phase, p["time_samples"], p["dt"]), grids)
    field0, first = levels[0]
    tol = FD_TOL
    rows += [
        Row("A8", "stationary_residual_linf", first["A8"], tol),
        Row("a1", "time_dependent_residual_linf", first["a1"], tol),
        Row("a1", "time_dependent_residual_left_i_linf", first["a1_left"]),
        Row("P5", "continuity_residual_linf", first["P5"], tol),
        Row("Eq1", "norm_integral", first["Eq1_norm"]),
        Row("Eq1", "energy_expectation_relative_error", first["Eq1"], tol),
    ]
    for axis, name in enumerate("xyz"):
        rows.append(Row("P1", f"current_mean_{name}", first["P1_mean"][axis]))
    if "P200" in first:
        rows.append(Row("P200", "closed_form_current_deviation_linf", first["P200"], tol))
    if refine > 1:
        for tag, qty in (("A8", "stationary_residual_linf"), ("P5", "continuity_residual_linf"), ("a1", "time_dependent_residual_linf")):
            vals = [lv[1][tag] for lv in levels]
            rows += [Row(tag, f"{qty}@level{i}", v, tol) for i, v in enumerate(vals)]
            rows += _order_rows(tag, qty, vals)
    result = RunResult(rows)
    if sc_.write_field:
        result.tables["field"] = _field_table(field0, sc_.hbar, sc_.mass)
    return result


def _separation_level(spec, sc_: Scenario, grid: Grid):
    p = sc_.params
    hb, m = sc_.hbar, sc_.mass
    f = wf.sample_free_particle(spec, grid, check=False)
    base = stationary_residual(f, spec.total_energy, None, hb, m).linf
    sf = wf.separation_fields(spec, grid)
    E = spec.complex_energy
    rep = wf.separation_residuals(sf, E, spec.total_energy, hb, m, p["singular_tol"])
    rep_fd = wf.separation_residuals(sf, E, spec.total_energy, hb, m, p["singular_tol"], phi_derivatives="fd")
    x = grid.coords()[0]
    bent = dataclasses.replace(sf, theta=sf.theta + p["perturbation"] * np.sin(x))
    rep_bent = wf.separation_residuals(bent, E, spec.total_energy, hb, m, p["singular_tol"])
    return f, base, rep, rep_fd, rep_bent


def run_separation(sc_: Scenario, refine: int = 1) -> RunResult:
    p = sc_.params
    spec = _free_spec(sc_)
    rows = _constraint_rows(spec)
    if not spec.is_single_branch():
        raise wf.ConstraintViolation("A9:single-branch", 1.0, "separation scenarios need q2 = q3 = q4 = 0")
    if not spec.q_weights[0].is_complex():
        raise wf.ConstraintViolation("A9:complex-q1", abs(spec.q_weights[0].zeta), "separation scenarios need a complex q1")
    grids = _levels(sc_.grid, refine)
    levels = _map_levels(lambda g: _separation_level(spec, sc_, g), grids)
    f, base, rep, rep_fd, rep_bent = levels[0]
    rows.append(Row("A8", "stationary_residual_linf", base, FD_TOL))
    for tag in wf.SEPARATION_TAGS:
        rows.append(Row(tag, "separation_residual_linf", rep.linf[tag], 10.0 * base))
        rows.append(Row(tag, "separation_residual_fd_phi_linf", rep_fd.linf[tag]))
    rows.append(Row("A16", "masked_fraction", rep.masked_fraction))
    rows.append(Row("A16", "perturbed_residual_over_baseline", rep_bent.linf["A16"] / base, 10.0, ">="))
    if refine > 1:
        vals = [lv[3].max_linf() for lv in levels]
        rows += [Row("A16", f"separation_residual_fd_phi_max@level{i}", v) for i, v in enumerate(vals)]
        rows += _order_rows("A16", "separation_residual_fd_phi_max", vals)
    domain = Grid.uniform([p["ode_length"]], p["ode_points"])
    try:
        ode = wf.no_nontrivial_theta_check(p["ode_gamma_norm"], p["ode_omega_norm"], p["ode_theta0"], p["ode_theta0_prime"], domain)
    except ValueError as exc:
        raise wf.ConstraintViolation("L11:precondition", 0.0, f"L11 check: {exc}") from None
    control = wf.no_nontrivial_theta_check(p["ode_gamma_norm"], p["ode_gamma_norm"], p["ode_theta0"], p["ode_theta0_prime"], domain, allow_degenerate=True)
    rows.append(Row("L11", "first_equation_variance", ode.variance, 1e-3, ">"))
    rows.append(Row("L11", "linear_control_variance", control.variance, 1e-10))
    result = RunResult(rows)
    if sc_.write_field:
        result.tables["field"] = _field_table(f, sc_.hbar, sc_.mass)
    return result


def _probe_points(text_: str) -> np.ndarray:
    pts = []
    for chunk in text_.split(","):
        vals = _floats(chunk)
        if len(vals) != 3:
            raise ScenarioError(f"[parameters] probes: each point needs 3 coordinates, got {chunk!r}")
        pts.append(vals)
    return np.array(pts)


def run_step_scattering(sc_: Scenario) -> RunResult:
    p = sc_.params
    spec = sc.StepScatteringSpec(p["total_energy"], p["v0"], p["theta_k"], p["gamma_k_perp"], p["omega_k_perp"], sc_.hbar, sc_.mass)
    try:
        res = sc.solve_step(spec)
    except sc.EvanescentRegime as exc:
        raise wf.ConstraintViolation("S2:evanescent", 0.0, str(exc)) from None
    except sc.NoPropagation as exc:
        raise wf.ConstraintViolation("S5:no-propagation", 0.0, str(exc)) from None
    except sc.ScatteringError as exc:
        raise wf.ConstraintViolation("S6:transverse", 0.0, str(exc)) from None
    probes = _probe_points(p["probes"])
    try:
        bnd = sc.boundary_residuals(spec, res, probes)
    except ValueError as exc:
        raise ScenarioError(f"[parameters] probes: {exc}") from None
    bal = sc.current_balance(spec, res, max(1, p["current_samples"]))
    k, q, pm = res.k_mag, res.q_mag, res.p_mag
    budget = spec.wave_budget
    gk2 = float(res.gamma_k_perp @ res.gamma_k_perp)
    gq2 = float(res.gamma_q_perp @ res.gamma_q_perp)
    gp2 = float(res.gamma_p_perp @ res.gamma_p_perp)
    ratio = 1.0 - spec.v0 / spec.total_energy
    exact = 1e-12
    s2 = [math.sin(t) ** 2 for t in (res.theta_k, res.theta_q, res.theta_p)]
    rows = [
        Row("S15", "k", k),
        Row("S15", "p", pm),
        Row("S12", "q", q),
        Row("S9", "R", res.r_coeff),
        Row("S9", "T", res.t_coeff),
        Row("S9", "reflect_prob", res.reflect_prob),
        Row("S9", "transmit_prob", res.transmit_prob),
        Row("S5", "incident_shell_residual", abs(k * k + gk2 - budget), exact * max(1.0, budget)),
        Row("S5", "reflected_shell_residual", abs(q * q + gq2 - budget), exact * max(1.0, budget)),
        Row("S5", "transmitted_shell_residual", abs(pm * pm + gp2 - budget * ratio), exact * max(1.0, budget)),
        Row("S7", "value_continuity_linf", bnd.value.linf, exact),
        Row("S8", "normal_gradient_continuity_linf", bnd.normal_gradient.linf, exact),
        Row("S121", "transverse_gradient_continuity_linf", bnd.transverse_gradient.linf, exact),
        Row("S9", "t_squared_residual", abs(res.t_coeff**2 - (k + q) ** 2 / (pm + q) ** 2), exact),
        Row("S9", "r_squared_residual", abs(res.r_coeff**2 - (k - pm) ** 2 / (pm + q) ** 2), exact),
        Row("S14", "sin2_theta_spread", max(s2) - min(s2), exact),
        Row("S15", "momentum_ratio_residual", abs(pm * pm / (k * k) - ratio), exact),
        Row("P1", "current_balance_residual", bal.residual, 1e-8),
        Row("P1", "partial_current_balance_residual", bal.partial_residual, 1e-8),
        Row("P5", "flux_conservation_residual", abs(res.reflect_prob + res.transmit_prob - 1.0), exact),
    ]
    if gk2 > 0:
        rows.append(Row("S15", "transverse_ratio_residual", abs(gp2 / gk2 - ratio), exact))
        gk = math.sqrt(gk2)
        unit = res.gamma_k_perp / gk
        cos_k = math.cos(res.theta_k)
        sin_k = math.sin(res.theta_k)
        if abs(cos_k) > 1e-12:
            rows.append(Row("S13", "reflected_gamma_ratio_residual", abs((res.gamma_q_perp @ unit) * math.cos(res.theta_q) / (gk * cos_k) + 1.0), exact))
            rows.append(Row("S13", "transmitted_gamma_ratio_residual", abs((res.gamma_p_perp @ unit) * math.cos(res.theta_p) / (gk * cos_k) - pm / k), exact))
        if abs(sin_k) > 1e-12:
            wu = res.omega_k_perp / math.sqrt(float(res.omega_k_perp @ res.omega_k_perp))
            rows.append(Row("S13", "reflected_omega_ratio_residual", abs((res.omega_q_perp @ wu) * math.sin(res.theta_q) / (gk * sin_k) + 1.0), exact))
            rows.append(Row("S13", "transmitted_omega_ratio_residual", abs((res.omega_p_perp @ wu) * math.sin(res.theta_p) / (gk * sin_k) - pm / k), exact))
    else:
        # no transverse vectors: the ratio conditions reduce to the momentum relation
        rows.append(Row("S13", "transmitted_momentum_ratio_residual", abs(res.t_coeff * pm - k * (1.0 - res.r_coeff)), exact))
    for axis, name in enumerate("xyz"):
        rows.append(Row("P1", f"region1_current_{name}", bal.region1[axis]))
        rows.append(Row("P1", f"region2_current_{name}", bal.region2[axis]))
    return RunResult(rows)


def _profile_current(profile: str, grid: Grid, k: np.ndarray, theta: float, hbar: float, mass: float) -> np.ndarray:
    make = wf.counter_propagating_wave if profile == "phi1" else wf.co_propagating_wave
    f, grad = make(grid, k, theta, with_gradient=True)
    return obs.probability_current(f, hbar, mass, gradient=grad).interior().reshape(-1, 3)


def _zero_crossing(thetas: np.ndarray, values: np.ndarray) -> float:
    for a in range(len(values) - 1):
        if values[a] == 0.0:
            return float(thetas[a])
        if values[a] * values[a + 1] < 0:
            t = values[a] / (values[a] - values[a + 1])
            return float(thetas[a] + t * (thetas[a + 1] - thetas[a]))
    return float("nan")


def run_current_profile(sc_: Scenario, refine: int = 1) -> RunResult:
    p = sc_.params
    hb, m = sc_.hbar, sc_.mass
    grid = sc_.grid
    k = wf._vec3(p["k"])
    if np.any(k[grid.ndim:] != 0):
        raise ScenarioError("[parameters] k: components outside the grid dimension")
    if p["steps"] < 2:
        raise ScenarioError("[parameters] steps: need at least 2")
    thetas = np.linspace(p["theta_min"], p["theta_max"], p["steps"])
    table = []
    dev_phi1 = dev_phi2 = 0.0
    for th in thetas:
        j1 = _profile_current("phi1", grid, k, th, hb, m)
        j2 = _profile_current("phi2", grid, k, th, hb, m)
        dev_phi1 = max(dev_phi1, float(np.abs(j1 - hb / m * k).max()))
        dev_phi2 = max(dev_phi2, float(np.abs(j2 - hb / m * math.cos(2 * th) * k).max()))
        chosen = j1 if p["profile"] == "phi1" else j2
        table.append([th, *chosen.mean(axis=0)])
    values = np.array(table)
    axis = int(np.argmax(np.abs(k)))
    step = thetas[1] - thetas[0]
    rows = [
        Row("P7", "phi1_current_deviation_max", dev_phi1, 1e-10),
        Row("P7", "phi2_current_deviation_max", dev_phi2, 1e-10),
    ]
    # report both the quaternion-product value and the reference formula at one angle
    th_ref = thetas[len(thetas) // 4] if len(thetas) > 3 else thetas[0]
    j2_ref = _profile_current("phi2", grid, k, th_ref, hb, m).mean(axis=0)[axis]
    rows += [
        Row("P7", f"phi2_current_numeric@theta={th_ref:.6f}", j2_ref),
        Row("P7", f"phi2_current_hbar_over_m@theta={th_ref:.6f}", hb / m * math.cos(2 * th_ref) * k[axis]),
        Row("P7", f"phi2_current_reference_hbar_over_2m@theta={th_ref:.6f}", hb / (2 * m) * math.cos(2 * th_ref) * k[axis], note="paper-discrepancy"),
    ]
    if p["profile"] == "phi2":
        crossing = _zero_crossing(thetas, values[:, 1 + axis])
        if math.pi / 4 >= thetas[0] and math.pi / 4 <= thetas[-1]:
            rows.append(Row("P7", "phi2_zero_crossing_theta", crossing))
            rows.append(Row("P7", "phi2_zero_crossing_offset", abs(crossing - math.pi / 4), abs(step)))
    # closed form for both examples written as single-branch free particles
    kn = float(np.linalg.norm(k))
    th0 = float(thetas[len(thetas) // 4])
    phi2_spec = wf.FreeParticleSpec(wf.PlaneWaveSpec(1.0, 0.0, k), np.zeros(3), np.zeros(3), np.zeros(3),
                                    hb**2 * kn**2 / (2 * m), theta0=th0, hbar=hb, mass=m)
    phi1_spec = wf.FreeParticleSpec(wf.PlaneWaveSpec(1.0, 0.0, np.zeros(3)), k, -k, np.zeros(3),
                                    hb**2 * kn**2 / (2 * m), theta0=th0, hbar=hb, mass=m)
    for label, spec, expected in (("phi1", phi1_spec, hb / m * k), ("phi2", phi2_spec, hb / m * math.cos(2 * th0) * k)):
        closed = obs.current_closed_form(spec, grid).interior().reshape(-1, 3)
        rows.append(Row("P200", f"{label}_closed_form_deviation_max", float(np.abs(closed - expected).max()), 1e-12))
    # box-normalised momentum expectation over the grid (one period when the grid spans one)
    levels = _levels(grid, refine)

    def momentum_error(g: Grid) -> float:
        f = wf.co_propagating_wave(g, k, th0)
        norm = obs.expectation_value(f, f)
        pk = obs.momentum_apply(f, hb)[axis]
        return abs(obs.expectation_value(pk, f) / norm - hb * math.cos(2 * th0) * k[axis])

    errs = _map_levels(momentum_error, levels)
    rows.append(Row("Eq1", "phi2_momentum_expectation_error", errs[0], 1e-3))
    if refine > 1:
        rows += [Row("Eq1", f"phi2_momentum_expectation_error@level{i}", e) for i, e in enumerate(errs)]
        rows += _order_rows("Eq1", "phi2_momentum_expectation_error", errs)
    result = RunResult(rows)
    result.tables["profile"] = (["theta", "j_x", "j_y", "j_z"], values.tolist())
    return result


RUNNERS = {
    "time_phase": run_time_phase,
    "free_particle": run_free_particle,
    "separation": run_separation,
    "step_scattering": run_step_scattering,
    "current_profile": run_current_profile,
}


def emit_current_profile(sc_: Scenario) -> str:
    """CSV text of the mixing-angle sweep (``theta, j_x, j_y, j_z``)."""
    if sc_.kind != "current_profile":
        raise ScenarioError(f"scenario kind is {sc_.kind!r}, not 'current_profile'")
    header, rows = run_current_profile(sc_).tables["profile"]
    return _csv_text(header, [[fmt(v) for v in r] for r in rows])


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def execute(sc_: Scenario, refine: int = 1, tolerance: Optional[float] = None) -> RunResult:
    runner = RUNNERS[sc_.kind]
    if sc_.kind in GRID_KINDS:
        result = runner(sc_, refine=refine)
    else:
        result = runner(sc_)
    if tolerance is not None:
        for row in result.rows:
            if row.threshold is not None and row.comparison == "<=":
                row.threshold = tolerance
    return result


def output_prefix(sc_: Scenario, out_dir=None) -> Path:
    prefix = Path(sc_.output)
    if out_dir is not None:
        return Path(out_dir) / prefix.name
    return prefix


def write_outputs(sc_: Scenario, result: RunResult, out_dir=None) -> list[Path]:
    prefix = output_prefix(sc_, out_dir)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    summary = Path(f"{prefix}_summary.csv")
    summary.write_text(_csv_text(SUMMARY_HEADER, [r.cells() for r in result.rows]), encoding="utf-8", newline="")
    written.append(summary)
    for name, (header, rows) in result.tables.items():
        path = Path(f"{prefix}_{name}.csv")
        path.write_text(_csv_text(header, [[fmt(v) for v in r] for r in rows]), encoding="utf-8", newline="")
        written.append(path)
    return written


def run_scenario(path, refine: int = 1, tolerance: Optional[float] = None, out_dir=None) -> tuple[int, RunResult | None, str]:
    """Load, run and write one scenario; returns ``(exit status, result, message)``."""
    try:
        sc_ = load_scenario(path)
    except ScenarioError as exc:
        return EXIT_PARSE, None, f"{path}: parse error: {exc}"
    try:
        result = execute(sc_, refine, tolerance)
    except ScenarioError as exc:
        return EXIT_PARSE, None, f"{path}: parse error: {exc}"
    except wf.ConstraintViolation as exc:
        return EXIT_CONSTRAINT, None, f"{path}: constraint violated [{exc.tag}]: {exc}"
    except (GridError, ZeroDivisionError) as exc:
        return EXIT_CONSTRAINT, None, f"{path}: invalid configuration: {exc}"
    write_outputs(sc_, result, out_dir)
    failed = [r for r in result.rows if r.status == "fail"]
    msg = f"{path}: {len(result.rows)} rows, {len(failed)} failed"
    return result.exit_code, result, msg
