import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fesmps.errors import InsufficientPoints, InversionOutOfRange, NoCoupling
from fesmps.fes import (
    DRecord,
    ScalingDataset,
    c_of_kappa,
    default_s_grid,
    direct_exponent_curve,
    eigenvalue_ratio_diagnostic,
    estimate_exponent,
    fes_exponent_curve,
    find_s0,
    fit_central_charge,
    fit_kappa,
    infinite_scale_estimate,
    interval_lengths,
    kappa_of_c,
    length_scaling_slopes,
    ols,
    t_quantile,
)
from fesmps.observables import CorrelatorSeries, EntropyRecord, sample_grid

TWO_DELTA = 0.25
KAPPA_ISING = 2.0343  # kappa at c = 1/2, four decimals


def _dataset(profile, mus=(10.0, 20.0, 40.0, 80.0, 160.0), label="op", per_decade=24, s_max=40.0,
             couplings=None, spacing=1.0):
    """Records whose correlator is ``profile(x, mu2)`` on the usual sampling grid."""
    recs = []
    for D, mu2 in enumerate(mus, start=4):
        xs = sample_grid(mu2, 1, per_decade, s_max) * spacing
        m = mu2 * spacing
        G = profile(xs.astype(float), m)
        rec = DRecord(D, m, np.array([np.inf, m]), np.array([0.0, -1.0 / m]))
        rec.correlators[label] = CorrelatorSeries(label, D, xs, G, False, mu2=m)
        if couplings is not None:
            rec.couplings[label] = couplings(m)
        recs.append(rec)
    return ScalingDataset(recs)


def power_law(x, mu2):
    return x ** -TWO_DELTA


def crossover(x, mu2):
    return x ** -TWO_DELTA * np.exp(-x / mu2)


def corrected(x, mu2):
    return x ** -TWO_DELTA * np.exp(-x / mu2) * (1 + 0.3 / x)


# --------------------------------------------------------------------------
# ordinary least squares


def test_ols_exact_line():
    f = ols([0, 1, 2, 3], [1, 3, 5, 7])
    assert f.slope == pytest.approx(2.0, abs=1e-14)
    assert f.intercept == pytest.approx(1.0, abs=1e-14)
    assert f.ci[0.95] == pytest.approx(0.0, abs=1e-13)
    assert f.r2 == pytest.approx(1.0)


def test_ols_needs_three_points():
    with pytest.raises(InsufficientPoints):
        ols([0, 1], [0, 1])
    with pytest.raises(InsufficientPoints):
        ols([1, 1, 1], [0, 1, 2])


def test_ols_matches_scipy():
    rng = np.random.default_rng(1)
    x = rng.normal(size=9)
    y = 0.7 * x + rng.normal(size=9)
    f = ols(x, y)
    ref = stats.linregress(x, y)
    assert f.slope == pytest.approx(ref.slope, rel=1e-12)
    assert f.stderr == pytest.approx(ref.stderr, rel=1e-12)
    assert f.ci[0.95] == pytest.approx(stats.t.ppf(0.975, 7) * ref.stderr, rel=1e-12)


def test_ci_ratio_is_quantile_ratio():
    rng = np.random.default_rng(2)
    for n in (4, 5, 9):
        x = np.arange(n, dtype=float)
        f = ols(x, x + rng.normal(size=n))
        assert f.ci[0.9973] / f.ci[0.95] == pytest.approx(
            t_quantile(0.9973, n - 2) / t_quantile(0.95, n - 2), rel=1e-12)
    assert t_quantile(0.95, 3) == pytest.approx(3.182446305284263, rel=1e-12)


def test_ols_coverage():
    rng = np.random.default_rng(3)
    x = np.log([8, 12, 16, 24, 32.0])
    hits = 0
    trials = 10_000
    for _ in range(trials):
        f = ols(x, -0.25 * x + 1.0 + 0.01 * rng.normal(size=x.size))
        hits += abs(f.slope + 0.25) <= f.ci[0.95]
    assert abs(hits / trials - 0.95) <= 0.015


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3), b=st.floats(-5, 5), c=st.floats(-5, 5),
       seed=st.integers(0, 1000))
def test_ols_affine_equivariance(a, b, c, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 3, 6)) + np.arange(6)
    y = rng.normal(size=6)
    f = ols(x, y)
    g = ols(x, a * y + b * x + c)
    assert g.slope == pytest.approx(a * f.slope + b, rel=1e-9, abs=1e-9)
    assert g.ci[0.95] == pytest.approx(abs(a) * f.ci[0.95], rel=1e-8, abs=1e-12)


# --------------------------------------------------------------------------
# exponent curves


def test_exact_power_law_recovered():
    data = _dataset(power_law)
    grid = default_s_grid(60)
    curve = fes_exponent_curve(data, "op", grid)
    for p in curve:
        if not p.skipped:
            assert -p.fit.slope == pytest.approx(TWO_DELTA, abs=1e-10)
    est = estimate_exponent(data, "op", grid)
    assert est.two_delta == pytest.approx(TWO_DELTA, abs=1e-10)
    # direct and FES agree everywhere: s0 is the last grid point below 1, and
    # with all widths tied the smallest admissible scale wins
    below = grid[grid < 1.0]
    assert est.s0 == pytest.approx(below[-1])
    assert est.s_star == pytest.approx(est.s0)
    assert est.method == "scan"


def test_crossover_scan_falls_back():
    data = _dataset(crossover)
    grid = default_s_grid(60)
    curve = fes_exponent_curve(data, "op", grid)
    for p in curve:
        if not p.skipped:
            # x = s mu2 falls on the sparse integer samples at small s, where the spline is coarse
            tol = 1e-3 if p.s < 0.3 else 1e-5
            assert -p.fit.slope == pytest.approx(TWO_DELTA, abs=tol)
    top = data.records[-1]
    direct = direct_exponent_curve(top.correlators["op"], top.mu2)
    for s in (0.1, 0.5, 2.0, 10.0):
        assert direct(s) == pytest.approx(-TWO_DELTA - s, abs=1e-3)
    s0, method = find_s0(curve, direct)
    assert (s0, method) == (1.0, "s0_fallback_1")
    est = estimate_exponent(data, "op", grid)
    assert est.s0 == 1.0 and est.s_star >= 1.0
    assert est.two_delta == pytest.approx(TWO_DELTA, abs=1e-5)


def test_direct_curve_constant_for_power_law():
    data = _dataset(power_law)
    top = data.records[-1]
    direct = direct_exponent_curve(top.correlators["op"], top.mu2)
    vals = [direct(s) for s in np.logspace(-1.5, 1.5, 25)]
    assert np.allclose(vals, -TWO_DELTA, atol=1e-9)


def test_find_s0_identical_curves():
    data = _dataset(power_law)
    grid = np.array([0.1, 0.3, 0.9, 1.0, 3.0])
    curve = fes_exponent_curve(data, "op", grid)
    s0, method = find_s0(curve, lambda s: -TWO_DELTA)
    assert (s0, method) == (0.9, "scan")


def test_scale_unit_invariance():
    # stop short of s_max, where the range check is decided by roundoff
    grid = default_s_grid(40, s_max=30.0)
    a = estimate_exponent(_dataset(corrected), "op", grid)
    curve_a = fes_exponent_curve(_dataset(corrected), "op", grid)
    # same physics sampled in units where the lattice spacing is 1/3
    prof = lambda x, m: corrected(x / 3.0, m / 3.0)
    curve_b = fes_exponent_curve(_dataset(prof, spacing=3.0), "op", grid)
    for p, q in zip(curve_a, curve_b):
        assert p.skipped == q.skipped
        if not p.skipped:
            assert p.fit.slope == pytest.approx(q.fit.slope, abs=1e-9)
            assert p.fit.ci[0.95] == pytest.approx(q.fit.ci[0.95], rel=1e-6, abs=1e-12)
    b = estimate_exponent(_dataset(prof, spacing=3.0), "op", grid)
    assert b.two_delta == pytest.approx(a.two_delta, abs=1e-9)
    assert b.s_star == a.s_star


def test_out_of_range_scales_are_flagged():
    data = _dataset(power_law, s_max=5.0)
    curve = fes_exponent_curve(data, "op", [0.5, 4.0, 20.0])
    assert [p.skipped for p in curve] == [False, False, True]
    assert curve[2].fit is None and "range" in curve[2].reason


def test_grid_refinement_is_stable():
    data = _dataset(corrected)
    coarse = estimate_exponent(data, "op", default_s_grid(160), use_infinite=False)
    fine = estimate_exponent(data, "op", default_s_grid(320), use_infinite=False)
    assert abs(coarse.two_delta - fine.two_delta) <= max(coarse.ci[0.9973], 1e-9)
    assert abs(np.log(coarse.s_star / fine.s_star)) < 0.1


def test_needs_four_bond_dimensions():
    data = _dataset(power_law, mus=(10.0, 20.0, 40.0))
    with pytest.raises(InsufficientPoints):
        fes_exponent_curve(data, "op")


def test_distinct_bond_dimensions_required():
    r = DRecord(8, 10.0)
    with pytest.raises(ValueError):
        ScalingDataset([r, DRecord(8, 12.0)])


# --------------------------------------------------------------------------
# infinite-scale fits


def test_infinite_scale_fit():
    # dominant coupling |c| = mu2^{-2Delta}; a tiny leading term must be ignored
    cpl = lambda m: [(-1e-12, 1e-14), (-1.0 / m, m ** -TWO_DELTA), (-3.0 / m, 0.2)]
    data = _dataset(crossover, couplings=cpl)
    f = infinite_scale_estimate(data, "op")
    assert -f.slope == pytest.approx(TWO_DELTA, abs=1e-12)
    est = estimate_exponent(data, "op", default_s_grid(40))
    assert est.two_delta == pytest.approx(TWO_DELTA, abs=1e-6)


def test_no_coupling():
    cpl = lambda m: [(-1.0 / m, 1e-15), (-2.0 / m, 0.0)]
    data = _dataset(crossover, couplings=cpl)
    with pytest.raises(NoCoupling):
        infinite_scale_estimate(data, "op")
    # the scan still provides an estimate
    est = estimate_exponent(data, "op", default_s_grid(40))
    assert np.isfinite(est.s_star)


def test_disconnected_term_skipped_for_connected_series():
    cpl = lambda m: [(0.0, 5.0), (-1.0 / m, m ** -TWO_DELTA)]
    data = _dataset(crossover, couplings=cpl)
    for r in data.records:
        r.correlators["op"] = dataclasses.replace(r.correlators["op"], connected=True)
    assert -infinite_scale_estimate(data, "op").slope == pytest.approx(TWO_DELTA, abs=1e-12)
    assert infinite_scale_estimate(data, "op", include_disconnected=True).slope == pytest.approx(0.0, abs=1e-12)


# --------------------------------------------------------------------------
# central charge and kappa


def test_kappa_value():
    assert kappa_of_c(0.5) == pytest.approx(KAPPA_ISING, abs=5e-5)
    assert kappa_of_c(1.0) == pytest.approx(6 / (np.sqrt(12) + 1), rel=1e-15)


@given(c=st.floats(0.06, 9.9))
def test_kappa_round_trip(c):
    assert c_of_kappa(kappa_of_c(c)) == pytest.approx(c, abs=1e-10)


def test_kappa_inversion_range():
    with pytest.raises(InversionOutOfRange):
        c_of_kappa(1e3)
    with pytest.raises(InversionOutOfRange):
        c_of_kappa(1e-3)


def _entropy_dataset(c=0.5, Ds=(8, 12, 16, 24, 32), kappa=None):
    kappa = kappa_of_c(c) if kappa is None else kappa
    recs = []
    for D in Ds:
        mu2 = 0.4 * D**kappa
        rec = DRecord(D, mu2, np.array([np.inf, mu2, mu2 / 3]),
                      np.array([0.0, -1.0 / mu2, -3.0 / mu2]))
        rec.half_line = EntropyRecord(D, "half", c / 6 * np.log(mu2) + 0.4, np.array([1.0]))
        rec.intervals = [EntropyRecord(D, "interval", c / 3 * np.log(x) + 0.7, np.array([1.0]), x)
                         for x in interval_lengths(0.1 * mu2)]
        recs.append(rec)
    return ScalingDataset(recs)


def test_synthetic_central_charge():
    data = _entropy_dataset()
    assert fit_central_charge(data, "half_line").c == pytest.approx(0.5, abs=1e-12)
    assert fit_central_charge(data, "interval", 0.1).c == pytest.approx(0.5, abs=1e-9)
    k = fit_kappa(data)
    assert k.kappa == pytest.approx(kappa_of_c(0.5), abs=1e-12)
    assert k.c_from_kappa == pytest.approx(0.5, abs=1e-10)
    assert k.c_free == pytest.approx(0.5, abs=1e-12)


def test_central_charge_source_validation():
    with pytest.raises(ValueError):
        fit_central_charge(_entropy_dataset(), "bogus")


@given(x0=st.floats(0.5, 500))
def test_interval_lengths_bracket(x0):
    xs = interval_lengths(x0)
    assert xs == sorted(set(xs)) and xs[0] >= 1 and len(xs) >= 3
    assert xs[0] <= max(x0, 1) and xs[-1] >= x0


# --------------------------------------------------------------------------
# spectrum diagnostics


def test_ratio_invariant_under_common_scaling():
    base = np.array([0.0, -0.1, -0.25, -0.3 + 0.05j, -0.3 - 0.05j, -0.5])
    recs = [DRecord(D, 10.0 * f, np.empty(0), base / f) for D, f in ((8, 1.0), (12, 2.7), (16, 9.1))]
    diag = eigenvalue_ratio_diagnostic(ScalingDataset(recs), K=6)
    assert all(v < 1e-14 for v in diag.drift.values())
    assert all(diag.converged.values())
    assert {r["I"] for r in diag.rows} == set(range(2, 7))


def test_length_scaling_slopes_follow_kappa():
    data = _entropy_dataset()
    slopes = length_scaling_slopes(data, K=3)
    for f in slopes.values():
        assert f.slope == pytest.approx(kappa_of_c(0.5), abs=1e-12)
