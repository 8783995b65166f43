"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import csv
import dataclasses
import math
import time
from pathlib import Path

import numpy as np

from qqm.cli import main as cli_main
from qqm.grid import Grid
from qqm.observables import continuity_residual, probability_current
from qqm.quaternion import Quaternion
from qqm.scattering import StepScatteringSpec, boundary_residuals, current_balance, solve_step
from qqm.schrodinger import period_samples, stationary_residual, time_dependent_residual
from qqm.wavefunction import (
    FreeParticleSpec,
    PlaneWaveSpec,
    TimePhaseSpec,
    co_propagating_wave,
    counter_propagating_wave,
    no_nontrivial_theta_check,
    phase_generator,
    random_free_particle_spec,
    sample_free_particle,
    separated_solution,
    separation_fields,
    separation_residuals,
    time_phase,
    time_phase_derivative,
    time_phase_residual,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
CUBE = 2 * math.pi
RESULTS: list[str] = []


def report(number: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_time_phase(rng) -> TimePhaseSpec:
    lam = Quaternion.from_components(*rng.normal(size=4))
    lam = lam * (1.0 / lam.norm())
    return TimePhaseSpec(lam, rng.uniform(0, math.pi / 2), rng.uniform(0.2, 5.0), rng.uniform(-math.pi, math.pi), rng.uniform(0.5, 2.0))


def test_criterion_01_time_phase():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_exact = worst_fd = 0.0
    for _ in range(50):
        spec = random_time_phase(rng)
        ts = np.linspace(0, 4 * math.pi * spec.hbar / spec.energy, 20)
        target = Quaternion(spec.frequency)
        for t in ts:
            g = phase_generator(time_phase_derivative(spec, t), time_phase(spec, t))
            worst_exact = max(worst_exact, (g - target).norm())
        worst_fd = max(worst_fd, time_phase_residual(spec, ts, 1e-4))
    elapsed = time.perf_counter() - start
    ok = worst_exact <= 1e-13 and worst_fd <= 1e-6 and elapsed < 1.0
    report(1, ok, f"analytic max {worst_exact:.2e} (<=1e-13), FD max {worst_fd:.2e} (<=1e-6), {elapsed:.2f}s (<1s)")


def test_criterion_02_free_particle_convergence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    ratios = []
    for _ in range(20):
        spec = random_free_particle_spec(rng)
        r = [stationary_residual(sample_free_particle(spec, Grid.uniform([CUBE] * 3, n)), spec.total_energy).linf for n in (21, 41)]
        ratios.append(r[0] / r[1])
    elapsed = time.perf_counter() - start
    ok = all(abs(x - 4.0) <= 0.8 for x in ratios) and elapsed < 60
    report(2, ok, f"21^3/41^3 residual ratios in [{min(ratios):.3f}, {max(ratios):.3f}] (4.0 +- 0.8), {elapsed:.1f}s (<60s)")


def test_criterion_03_separation_system():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    grid = Grid.uniform([CUBE] * 3, 41)
    worst_ratio, weakest_control = 0.0, math.inf
    for _ in range(20):
        spec = random_free_particle_spec(rng, branches=1)
        base = stationary_residual(sample_free_particle(spec, grid), spec.total_energy).linf
        sf = separation_fields(spec, grid)
        rep = separation_residuals(sf, spec.complex_energy, spec.total_energy)
        worst_ratio = max(worst_ratio, rep.max_linf() / base)
        bent = dataclasses.replace(sf, theta=sf.theta + 0.1 * np.sin(grid.coords()[0]))
        weakest_control = min(weakest_control, separation_residuals(bent, spec.complex_energy, spec.total_energy).linf["A16"] / base)
    elapsed = time.perf_counter() - start
    ok = worst_ratio <= 10 and weakest_control >= 10 and elapsed < 60
    report(3, ok, f"max A16-A19 / baseline {worst_ratio:.2e} (<=10), perturbed A16 / baseline >= {weakest_control:.1f} (>=10), {elapsed:.1f}s")


def test_criterion_04_currents():
    grid = Grid.uniform([CUBE], 201)
    thetas = np.linspace(0, math.pi / 2, 33)
    dev1 = dev2 = 0.0
    j2 = []
    for th in thetas:
        f1, g1 = counter_propagating_wave(grid, [1.0], th, with_gradient=True)
        f2, g2 = co_propagating_wave(grid, [1.0], th, with_gradient=True)
        a = probability_current(f1, gradient=g1).vectors[..., 0]
        b = probability_current(f2, gradient=g2).vectors[..., 0]
        dev1 = max(dev1, float(np.abs(a - 1.0).max()))
        dev2 = max(dev2, float(np.abs(b - math.cos(2 * th)).max()))
        j2.append(b.mean())
    j2 = np.array(j2)
    idx = int(np.argmax(j2[:-1] * j2[1:] <= 0))
    crossing = thetas[idx] + j2[idx] / (j2[idx] - j2[idx + 1]) * (thetas[1] - thetas[0])
    th_ref = 0.3
    f2, g2 = co_propagating_wave(grid, [1.0], th_ref, with_gradient=True)
    numeric = probability_current(f2, gradient=g2).mean()[0]
    print(f"  j2 at theta=0.3: numeric {numeric:.12f}, hbar/m cos(2 theta) k = {math.cos(0.6):.12f}, "
          f"reference hbar/(2m) cos(2 theta) k = {0.5 * math.cos(0.6):.12f} [paper-discrepancy]")
    ok = dev1 <= 1e-10 and dev2 <= 1e-10 and abs(crossing - math.pi / 4) <= thetas[1] - thetas[0]
    report(
        4,
        ok,
        f"|j1 - hbar k/m| {dev1:.1e}, |j2 - (hbar/m)cos2T k| {dev2:.1e} (<=1e-10); "
        f"j2(0.3) numeric {numeric:.6f} vs reference hbar/2m value {0.5 * math.cos(0.6):.6f} [paper-discrepancy]; "
        f"zero crossing {crossing:.6f} vs pi/4",
    )


def test_criterion_05_continuity_order():
    rng = np.random.default_rng(505)
    orders = []
    for _ in range(20):
        spec = random_free_particle_spec(rng)
        # 41^3 is the default 3-D acceptance grid; 21^3 is pre-asymptotic for the steepest specs
        r = [continuity_residual(sample_free_particle(spec, Grid.uniform([CUBE] * 3, n))).linf for n in (41, 81)]
        orders.append(math.log2(r[0] / r[1]))
    for ndim in (1, 2):
        for _ in range(5):
            spec = random_free_particle_spec(rng, ndim=ndim)
            r = [continuity_residual(sample_free_particle(spec, Grid.uniform([CUBE] * ndim, n))).linf for n in (41, 81)]
            # 1-D specs have no transverse structure: div j vanishes to rounding at every level
            if max(r) > 1e-12:
                orders.append(math.log2(r[0] / r[1]))
    ok = all(abs(o - 2.0) <= 0.3 for o in orders)
    report(5, ok, f"{len(orders)} specs with nonzero div j, order in [{min(orders):.3f}, {max(orders):.3f}] (2.0 +- 0.3)")


def test_criterion_06_complex_step():
    r = solve_step(StepScatteringSpec(2.0, 1.0))
    sq2 = math.sqrt(2)
    errs = [abs(r.r_coeff - (2 - sq2) / (2 + sq2)), abs(r.t_coeff - 4 / (2 + sq2)), abs(r.p_mag - sq2)]
    balance = abs(r.k_mag * (1 - r.r_coeff**2) - r.p_mag * r.t_coeff**2)
    sweep = 0.0
    for e, v in zip(np.linspace(1.5, 6.0, 10), np.linspace(0.2, 1.4, 10)):
        s = solve_step(StepScatteringSpec(float(e), float(v), 0.4, [0, 0.3, 0], [0, 0, 0.3]))
        ratio = 1 - v / e
        gp, gk = s.gamma_p_perp @ s.gamma_p_perp, s.gamma_k_perp @ s.gamma_k_perp
        sweep = max(sweep, abs(s.p_mag**2 / s.k_mag**2 - ratio), abs(gp / gk - ratio))
    ok = max(errs) <= 1e-14 and balance <= 1e-14 and sweep <= 1e-14
    report(6, ok, f"R,T,p errors {max(errs):.1e}, k(1-R^2)-pT^2 {balance:.1e}, S15 sweep {sweep:.1e} (all <=1e-14)")


def test_criterion_07_quaternionic_step():
    worst_b = worst_s = worst_c = 0.0
    for th in (0.3, math.pi / 4, 1.2):
        for gm in (0.0, 0.3):
            spec = StepScatteringSpec(2.0, 1.0, th, [0, gm, 0], [0, 0, gm])
            r = solve_step(spec)
            worst_b = max(worst_b, boundary_residuals(spec, r).max_linf())
            s2 = [math.sin(t) ** 2 for t in (r.theta_k, r.theta_q, r.theta_p)]
            worst_s = max(worst_s, max(s2) - min(s2))
            bal = current_balance(spec, r)
            worst_c = max(worst_c, bal.residual, bal.partial_residual)
    ok = worst_b <= 1e-12 and worst_s <= 1e-14 and worst_c <= 1e-8
    report(7, ok, f"boundary {worst_b:.1e} (<=1e-12), sin^2 spread {worst_s:.1e} (<=1e-14), current balance {worst_c:.1e} (<=1e-8)")


def test_criterion_08_no_nontrivial_theta():
    rng = np.random.default_rng(808)
    start = time.perf_counter()
    domain = Grid.uniform([10.0], 1001)
    variances = []
    for _ in range(10):
        g, w = rng.uniform(0.5, 2.0, size=2)
        while abs(g * g - w * w) < 0.5:
            g, w = rng.uniform(0.5, 2.0, size=2)
        variances.append(no_nontrivial_theta_check(g, w, rng.uniform(0.1, 1.4), rng.uniform(0.3, 1.5), domain).variance)
    control = no_nontrivial_theta_check(1.3, 1.3, 0.2, 0.8, domain, allow_degenerate=True).variance
    elapsed = time.perf_counter() - start
    ok = min(variances) > 1e-3 and control <= 1e-10 and elapsed < 5
    report(8, ok, f"min variance {min(variances):.3e} (>1e-3), linear control {control:.1e} (<=1e-10), {elapsed:.2f}s (<5s)")


def test_criterion_09_ordering():
    k = np.array([1.0, 0, 0])
    gm = np.array([0, 0.5, 0])
    spec = FreeParticleSpec(PlaneWaveSpec(1.0, 0.0, k), gm, -gm, np.zeros(3), 0.5 + 0.125, theta0=math.pi / 4)
    right, left = [], []
    for n in (21, 41):
        grid = Grid.uniform([CUBE] * 3, n)
        f = sample_free_particle(spec, grid)
        psi = separated_solution(f, TimePhaseSpec(energy=spec.total_energy, xi=0.5, tau0=0.3))
        ts = period_samples(spec.total_energy)
        right.append(time_dependent_residual(psi, None, grid, ts).linf)
        left.append(time_dependent_residual(psi, None, grid, ts, order="left").linf)
    order = math.log2(right[0] / right[1])
    threshold = 0.5 * spec.total_energy
    ok = abs(order - 2.0) <= 0.3 and right[1] < 1e-2 and min(left) > threshold
    report(9, ok, f"right-i {right[0]:.2e} -> {right[1]:.2e} (order {order:.2f}), left-i {min(left):.3f} > 0.5 E = {threshold:.3f} (relative to max|Psi|)")


EXPECTED_TAGS = {"a1", "a5", "a10", "A8", "A16", "A17", "A18", "A19", "L6", "L7", "L11", "P1", "P5", "P7", "P200", "S5", "S7", "S8", "S9", "S13", "S14", "S15", "Eq1"}


def test_criterion_10_cli_determinism(tmp_path):
    files = sorted(str(p) for p in SCENARIOS.glob("*.ini"))
    codes = [cli_main(["run", *files, "--out-dir", str(tmp_path / d), "--quiet"]) for d in ("a", "b")]
    outputs_a = sorted((tmp_path / "a").glob("*.csv"))
    identical = bool(outputs_a) and all(p.read_bytes() == (tmp_path / "b" / p.name).read_bytes() for p in outputs_a)
    tags = set()
    for p in outputs_a:
        if p.name.endswith("_summary.csv"):
            with open(p, newline="") as fh:
                tags |= {row["tag"] for row in csv.DictReader(fh)}
    missing = sorted(EXPECTED_TAGS - tags)
    ok = codes == [0, 0] and identical and not missing
    report(10, ok, f"{len(outputs_a)} CSVs byte-identical: {identical}, exit codes {codes}, missing tags: {missing or 'none'}")


if __name__ == "__main__":
    import sys
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
