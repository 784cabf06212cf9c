"""Acceptance criteria on the critical Ising chain at desk scale.

The full run (D = 8..32) is cached in ``.acceptance_run`` at the repository
root; delete that directory to recompute from scratch.  Each test records one
PASS/FAIL line, collected in the terminal summary.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from fesmps.fes import default_s_grid, eigenvalue_ratio_diagnostic, estimate_exponent, ols
from fesmps.isolve import order_parameter_sweep, solve_ground_state
from fesmps.models import ising
from fesmps.observables import half_line_entropy, interval_entropy, ising_operators, two_point, two_point_spectral
from fesmps.pipeline import RunConfig, load_dataset, load_states, run_pipeline, validate_states
from fesmps.umps import UniformMPS, canonicalize, correlation_length, transfer_spectrum

from test_fes import _dataset, power_law

RUN_DIR = Path(__file__).resolve().parent.parent / ".acceptance_run"
E_CRIT = -4 / np.pi

EXACT = {  # exact 2Delta and relative tolerance
    "sigma": (0.25, 0.02),
    "eps": (2.0, 0.05),
    "mu": (0.25, 0.04),
    "psi": (1.0, 0.03),
    "dsigma": (2.25, 0.05),
    "d2sigma": (4.25, 0.06),
    "d3sigma": (6.25, 0.08),
    "deps": (4.0, 0.08),
}

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def desk_run():
    manifest = run_pipeline(RunConfig(out=str(RUN_DIR)))
    report = json.loads((RUN_DIR / "report.json").read_text())
    return manifest, report


@pytest.fixture(scope="module")
def desk_data(desk_run):
    return load_dataset(RUN_DIR / "obs")[0]


def _cc(report, source):
    return next(c for c in report["central_charge"] if c["source"] == source)


def test_1_ground_state_energy(criterion):
    t0 = time.perf_counter()
    _, rep = solve_ground_state(ising(1.0, 1.0), 16, tol=1e-8)
    dt = time.perf_counter() - t0
    err = abs(rep.energy_density - E_CRIT)
    criterion(1, "energy density at D=16", err < 1e-4,
              f"e = {rep.energy_density:.12f}, |e + 4/pi| = {err:.2e} (tol 1e-4), {dt:.1f} s")


def test_2_central_charge_half_line(desk_run, criterion):
    _, report = desk_run
    c = _cc(report, "half_line")["c"]
    criterion(2, "half-line central charge", abs(c - 0.5) <= 0.03, f"c = {c:.5f} (target 0.5 +/- 0.03)")


def test_3_central_charge_interval(desk_run, criterion):
    _, report = desk_run
    iv, half = _cc(report, "interval"), _cc(report, "half_line")
    ok = abs(iv["c"] - 0.5) <= 0.025 and iv["fit"]["r2"] >= half["fit"]["r2"]
    criterion(3, "interval central charge at s=0.1", ok,
              f"c = {iv['c']:.5f} (target 0.5 +/- 0.025), R2 interval {iv['fit']['r2']:.8f} "
              f">= half-line {half['fit']['r2']:.8f}: {iv['fit']['r2'] >= half['fit']['r2']}")


def test_4_exponents(desk_run, criterion):
    _, report = desk_run
    parts, ok = [], True
    for label, (exact, rel) in EXACT.items():
        est = report["exponents"][label]["two_delta"]
        dev = abs(est - exact) / exact
        ok &= dev <= rel
        parts.append(f"{label} {est:.4f} ({100 * dev:.2f}% <= {100 * rel:.0f}%: {dev <= rel})")
    criterion(4, "scaling dimensions", ok, "; ".join(parts))


def test_5_kappa(desk_run, criterion):
    _, report = desk_run
    k = report["kappa"]
    in_range = 1.7 <= k["kappa"] <= 2.1
    # off means outside the band accepted as a good estimate in criterion 2
    off = abs(k["c_from_kappa"] - 0.5) > 0.03
    free = abs(k["c_free"] - 0.5) <= 0.05
    criterion(5, "kappa fit", in_range and off and free,
              f"kappa = {k['kappa']:.4f} in [1.7, 2.1]: {in_range}; c_from_kappa = {k['c_from_kappa']:.4f} "
              f"off 0.5 by > 0.03: {off}; c_free = {k['c_free']:.4f} within 0.5 +/- 0.05: {free}")


def test_6_eigenvalue_ratios(desk_data, criterion):
    assert desk_data.D_range[-2:] == [28, 32]
    diag = eigenvalue_ratio_diagnostic(desk_data, K=6, tol=0.03)
    worst = max(diag.drift.values())
    criterion(6, "eigenvalue ratio drift D=28 -> 32, I <= 6", all(diag.converged.values()),
              ", ".join(f"I={I}: {100 * d:.2f}%" for I, d in sorted(diag.drift.items()))
              + f" (max {100 * worst:.2f}%, tol 3%)")


def test_7_order_parameter(criterion):
    grids = {4: 1.04, 8: 1.03, 16: 1.02}
    h_star = {}
    for D, top in grids.items():
        grid = np.round(np.arange(1.0, top + 1e-9, 0.002), 6)
        h_star[D] = order_parameter_sweep(D, grid, tol=1e-9, stop_after=2)["h_star"]
    ok = None not in h_star.values() and h_star[4] > h_star[8] > h_star[16] > 1.0
    criterion(7, "order parameter transition", ok,
              ", ".join(f"h*({D}) = {h}" for D, h in h_star.items()) + " (want decreasing and > 1)")


def test_8_property_suites(desk_run, criterion):
    checks = {}

    rng = np.random.default_rng(8)
    x = np.log([8, 12, 16, 20, 24, 28, 32.0])
    trials, hits = 10_000, 0
    for _ in range(trials):
        f = ols(x, -0.25 * x + 1.0 + 0.01 * rng.normal(size=x.size))
        hits += abs(f.slope + 0.25) <= f.ci[0.95]
    checks["OLS 95% coverage"] = (abs(hits / trials - 0.95) <= 0.015, f"{hits / trials:.4f}")

    est = estimate_exponent(_dataset(power_law), "op", default_s_grid(160))
    checks["exact power law"] = (abs(est.two_delta - 0.25) <= 1e-10, f"|err| = {abs(est.two_delta - 0.25):.1e}")

    states = load_states(RUN_DIR)
    ops = ising_operators()
    worst = 0.0
    for D in (8,):
        s = states[D][0]
        for label, op in ops.items():
            xs = np.arange(max(op.footprint, 1), 60, 5)
            worst = max(worst, float(np.max(abs(two_point(s, op, xs).G - two_point_spectral(s, op, xs)))))
    checks["spectral sum vs iteration (D=8)"] = (worst <= 1e-8, f"{worst:.1e}")

    s8 = states[8][0]
    mu2 = correlation_length(transfer_spectrum(s8, 2))
    gap = abs(interval_entropy(s8, int(round(20 * mu2))).S - 2 * half_line_entropy(s8).S)
    checks["interval -> 2 x half line at 20 mu2"] = (gap <= 1e-6, f"{gap:.1e}")

    gauge = 0.0
    for mode in ("left-canonical", "right-canonical", "mixed-canonical"):
        c = canonicalize(UniformMPS.from_tensor(s8.A), mode)
        for label in ("sigma", "eps", "mu", "psi"):
            xs = [4, 9, 30]
            gauge = max(gauge, float(np.max(abs(two_point(s8, ops[label], xs).G - two_point(c, ops[label], xs).G))))
        gauge = max(gauge, abs(half_line_entropy(c).S - half_line_entropy(s8).S))
    checks["gauge invariance"] = (gauge <= 1e-9, f"{gauge:.1e}")

    problems = validate_states(RUN_DIR)
    checks["fixed-point residuals and stored-state checks"] = (not problems, f"{len(problems)} violations")

    ok = all(v[0] for v in checks.values())
    criterion(8, "property suites", ok, "; ".join(f"{k} {v[1]} ({'ok' if v[0] else 'FAIL'})" for k, v in checks.items()))
