"""Tests for the direct integrator.

Oracle notes:

* Hamiltonian, single excited site of amplitude A on a 1d chain (p = 1,
  beta = 4/3): H = A^2/2 - (beta/4) A^4 + (a/2) * 2 A^2 -- the two bonds
  to the resting neighbours each carry A^2/2 of coupling energy.
* Velocity-Verlet return error after one period scales like dt^2; halving
  dt four times the steps must shrink the error by ~16.
* The continuum reference field seeded into the same integrator must
  return *worse* than the assembled breather: it is not a periodic orbit.
"""
import dataclasses

import numpy as np
import pytest

from kgbreather.breather import (
    PipelineConfig,
    assemble_breather,
    reference_coefficients,
)
from kgbreather.dynamics import integrate_period, lattice_hamiltonian
from kgbreather.errors import ConvergenceError, GuardError


@pytest.fixture(scope="module")
def b_small():
    cfg = PipelineConfig(n=1, p=1.0, coupling=0.25, mu=0.2, r_min=30.0)
    return assemble_breather(cfg)


def test_hamiltonian_single_site_oracle():
    A, a = 0.7, 0.3
    q = np.array([0.0, 0.0, A, 0.0, 0.0])
    qdot = np.zeros_like(q)
    beta = 4.0 / 3.0
    expected = 0.5 * A**2 - (beta / 4.0) * A**4 + 0.5 * a * (2.0 * A**2)
    assert lattice_hamiltonian(q, qdot, a, 1.0) == pytest.approx(
        expected, rel=1e-15
    )


def test_hamiltonian_kinetic_term():
    q = np.zeros(5)
    qdot = np.full(5, 2.0)
    assert lattice_hamiltonian(q, qdot, 0.3, 1.0) == pytest.approx(10.0)


def test_guards(b_small):
    with pytest.raises(GuardError):
        integrate_period(b_small, steps_per_period=8)
    with pytest.raises(GuardError):
        integrate_period(b_small, steps_per_period=64, periods=0)
    with pytest.raises(GuardError):
        integrate_period(b_small, initial_coeffs=np.zeros((3, 7)))


def test_zero_data_returns_zero_error(b_small):
    rep = integrate_period(
        b_small,
        steps_per_period=64,
        initial_coeffs=np.zeros_like(b_small.coeffs),
    )
    assert rep.return_error == 0.0
    assert rep.energy_drift == 0.0
    assert rep.h_initial == 0.0


def test_return_error_second_order_in_dt(b_small):
    e_coarse = integrate_period(b_small, steps_per_period=1024).return_error
    e_fine = integrate_period(b_small, steps_per_period=4096).return_error
    assert e_fine < e_coarse
    assert e_coarse / e_fine == pytest.approx(16.0, rel=0.3)


def test_energy_conservation(b_small):
    # symplectic scheme: the energy oscillates at O(dt^2) around H(0)
    # instead of drifting; halving dt must cut the band by ~4
    coarse = integrate_period(b_small, steps_per_period=2048)
    fine = integrate_period(b_small, steps_per_period=4096)
    assert fine.energy_drift < 1e-7
    assert coarse.energy_drift / fine.energy_drift == pytest.approx(4.0, rel=0.3)
    assert fine.h_final == pytest.approx(fine.h_initial, rel=1e-7)
    assert fine.h_initial == pytest.approx(
        lattice_hamiltonian(
            np.sum(b_small.coeffs, axis=0),
            np.zeros(b_small.grid.shape),
            b_small.coupling,
            b_small.p,
        )
    )


def test_max_drift_guard(b_small):
    with pytest.raises(ConvergenceError):
        integrate_period(b_small, steps_per_period=64, max_drift=1e-30)


def test_multiple_periods_accumulate(b_small):
    one = integrate_period(b_small, steps_per_period=1024, periods=1)
    three = integrate_period(b_small, steps_per_period=1024, periods=3)
    assert three.return_error > one.return_error
    assert three.return_error < 10.0 * 3.0 * one.return_error


def test_reference_seed_returns_worse(b_small):
    breather = integrate_period(b_small, steps_per_period=2048)
    seeded = integrate_period(
        b_small,
        steps_per_period=2048,
        initial_coeffs=reference_coefficients(b_small),
    )
    assert seeded.return_error > breather.return_error


def test_report_dict(b_small):
    rep = integrate_period(b_small, steps_per_period=64)
    d = rep.to_dict()
    assert set(d) >= {"return_error", "energy_drift", "dt", "h_initial"}
    assert all(isinstance(v, float) for v in d.values())
