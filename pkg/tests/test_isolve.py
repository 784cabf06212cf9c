import numpy as np
import pytest

from fesmps.errors import InitDimensionMismatch
from fesmps.isolve import (
    expectation_two_site,
    order_parameter_sweep,
    solve_ground_state,
    sweep_bond_dimensions,
)
from fesmps.models import SX, SZ, ising
from fesmps.observables import onsite_expectation
from fesmps.umps import TransferOperator, correlation_length, product_state, random_state, transfer_spectrum

from oracles import ed_ground_state, free_fermion_energy

# frozen oracle values (see test_oracle_values)
E_CRIT = -1.2732395447351628  # free-fermion quadrature at J = h = 1, equals -4/pi
E_ED12_H10 = -10.025015664215982  # 12-site periodic ED at J = 1, h = 10, per site


def test_oracle_values():
    assert free_fermion_energy(1.0, 1.0) == pytest.approx(E_CRIT, abs=1e-13)
    assert E_CRIT == pytest.approx(-4 / np.pi, abs=1e-15)
    e, _ = ed_ground_state(12, 1.0, 10.0)
    assert e / 12 == pytest.approx(E_ED12_H10, abs=1e-12)


def test_critical_energy_d16(critical_sweep):
    _, rep = critical_sweep[16]
    assert rep.converged
    assert abs(rep.energy_density - E_CRIT) < 1e-4


def test_all_critical_energies_above_exact(critical_sweep):
    for D, (_, rep) in critical_sweep.items():
        assert rep.energy_density > E_CRIT - 1e-12
        assert abs(rep.energy_density - E_CRIT) < 1e-4


def test_sweep_monotone(critical_sweep):
    Ds = sorted(critical_sweep)
    e = [critical_sweep[D][1].energy_density for D in Ds]
    mu = [correlation_length(transfer_spectrum(critical_sweep[D][0], 2)) for D in Ds]
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert all(b > a for a, b in zip(mu, mu[1:]))


def test_report_self_consistency(critical_sweep):
    model = ising(1.0, 1.0)
    for state, rep in critical_sweep.values():
        e = float(np.real(expectation_two_site(state, model.h2)))
        assert abs(e - rep.energy_density) < 1e-12
        assert rep.gradient_norm <= 1e-9


def test_deep_paramagnet_against_ed():
    state, rep = solve_ground_state(ising(1.0, 10.0), 2, tol=1e-10)
    assert abs(rep.energy_density - E_ED12_H10) < 1e-6
    assert abs(onsite_expectation(state, SX)) < 1e-8


def test_disordered_phase_has_no_magnetization():
    state, _ = solve_ground_state(ising(1.0, 2.0), 4, tol=1e-10)
    assert abs(onsite_expectation(state, SX)) < 1e-8


def test_translation_invariance(critical_d8):
    s = critical_d8
    E = TransferOperator(s.A)
    Ez = TransferOperator(s.A, SZ)
    here = np.sum(s.l * Ez.right(s.r))
    shifted = np.sum(s.l * E.right(Ez.right(s.r)))
    assert abs(here - shifted) < 1e-12


def test_deterministic_with_seed():
    a, ra = solve_ground_state(ising(), 6, tol=1e-8, seed=3)
    b, rb = solve_ground_state(ising(), 6, tol=1e-8, seed=3)
    assert np.array_equal(a.A, b.A)
    assert ra.energy_density == rb.energy_density
    assert ra.seed == 3


def test_single_entry_sweep_equals_solve():
    (s1, r1), = sweep_bond_dimensions(ising(), [4], tol=1e-8, seed=5)
    s2, r2 = solve_ground_state(ising(), 4, tol=1e-8, seed=5)
    assert np.array_equal(s1.A, s2.A)
    assert r1.energy_density == r2.energy_density


def test_sweep_rejects_unsorted():
    with pytest.raises(ValueError):
        sweep_bond_dimensions(ising(), [8, 4])


def test_init_dimension_mismatch():
    bad = random_state(2, d=3, seed=0)
    with pytest.raises(InitDimensionMismatch):
        solve_ground_state(ising(), 4, init=bad)
    with pytest.raises(InitDimensionMismatch):
        solve_ground_state(ising(), 2, init=random_state(4, seed=0))


def test_warm_start_beats_cold_start(critical_sweep):
    prev = critical_sweep[12][0]
    for seed in range(5):
        _, cold = solve_ground_state(ising(), 16, tol=1e-7, seed=seed)
        _, warm = solve_ground_state(ising(), 16, tol=1e-7, seed=seed, init=prev)
        assert warm.iterations < cold.iterations


def test_order_parameter_sweep_small_d():
    grid = np.arange(1.0, 1.04, 0.002)
    res = order_parameter_sweep(4, grid, tol=1e-9, stop_after=2)
    assert res["h_star"] is not None and res["h_star"] > 1.0
    assert res["rows"][0]["sx"] > 0.1
