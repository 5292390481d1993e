import math

import numpy as np
import pytest

from extension import FamilyError
from families import ExponentError
from sogge import (SoggeFamily, SoggeParams, Witness, choose_witness_intervals, convergence_profile,
                   critical_scale, oscillatory_g, oscillatory_sweep, sogge_divergence_scan,
                   stationary_phase_check, stationary_pieces)


@pytest.fixture(scope="module")
def params():
    return SoggeParams()


# ---------- parameters ----------

def test_default_parameters(params):
    assert params.p_conj == pytest.approx(6.0)
    assert params.q == pytest.approx(1.5)
    assert params.q_conj == pytest.approx(3.0)
    assert params.c == pytest.approx(-1.0 / 6.0)
    assert params.curve()(0.0) == 1.0 and params.curve().deriv()(0.0) == 1.0


@pytest.mark.parametrize("kwargs, error", [
    ({"k": 2}, ExponentError),
    ({"p": 1.0}, ExponentError),
    ({"p": 1.5}, ExponentError),                       # q = 3/4
    ({"epsilon": 0.2}, FamilyError),
    ({"delta": 0.0}, FamilyError),
    ({"gamma": (1.0, 1.0, 0.5, -1.0 / 6.0)}, FamilyError),
    ({"gamma": (1.0, 1.0, 0.0, 1.0 / 6.0)}, FamilyError),
])
def test_parameter_validation(kwargs, error):
    with pytest.raises(error):
        SoggeParams(**kwargs)


def test_custom_curve_with_higher_terms():
    sp = SoggeParams(k=4, p=1.1, gamma=(0.5, 2.0, 0.0, 0.0, -0.1, 0.01))
    assert sp.c == pytest.approx(-0.1)
    assert sp.q == pytest.approx(11.0 / 5.0)


# ---------- the family ----------

def test_f_values(params):
    fam = SoggeFamily(params)
    assert float(fam.f(math.exp(-1.0), 1.05)) == pytest.approx(math.exp(1.0 / params.q_conj), rel=1e-14)
    t = math.exp(-3.0)
    expected = math.exp(3.0 / params.q_conj) * 3.0 ** (-1.0 / params.p_conj)
    assert float(fam.f(t, 1.05)) == pytest.approx(expected, rel=1e-14)
    # t beyond δ is still in the domain of f
    assert float(fam.f(0.2, 1.05)) > 0.0
    assert float(fam.f(t, 0.99)) == 0.0
    assert float(fam.f(1.5, 1.05)) == 0.0
    assert float(fam.f(0.0, 1.05)) == 0.0


def test_mass_matches_incomplete_gamma(params):
    fam = SoggeFamily(params)
    res = fam.mass()
    assert res.converged
    assert float(res) == pytest.approx(fam.mass_closed_form(), rel=1e-10)


def test_T_at_zero_frequency_is_epsilon_times_mass(params):
    fam = SoggeFamily(params)
    value = complex(fam.T(0.0, 0.0, 0.0).value)
    assert value.real == pytest.approx(params.epsilon * fam.mass_closed_form(), rel=1e-10)
    assert abs(value.imag) <= 1e-14


def test_phase_polynomial(params):
    fam = SoggeFamily(params)
    psi = fam.phase(100.0, 0.02)
    t = 7.0
    assert psi(t) == pytest.approx(t + 0.02 * 100.0 ** 3 * float(fam.Gamma(t / 100.0)), rel=1e-14)


def test_I_rejects_small_u(params):
    with pytest.raises(FamilyError):
        SoggeFamily(params).I(5.0, 0.02, 1.0)


# ---------- the model integral ----------

def test_critical_scale():
    assert critical_scale(0.05, 3, -1.0 / 6.0) == pytest.approx(math.sqrt(1.0 / (3.0 / 6.0 * 0.05)))


def test_two_regularisations_agree(params):
    val = oscillatory_g(0.05, 1.0, 3, params.q)
    assert val.converged
    assert abs(val.compact_form - val.rotated_form) <= 1e-5 * abs(val.value)
    assert val.t_star == pytest.approx(critical_scale(0.05, 3, params.c))


def test_sign_flip_is_conjugation(params):
    a = oscillatory_g(0.02, 1.1, 3, params.q)
    b = oscillatory_g(0.02, 1.1, 3, params.q, sign=-1)
    assert abs(b.value - a.value.conjugate()) <= 1e-10 * abs(a.value)


def test_oscillatory_domain_checks(params):
    with pytest.raises(FamilyError):
        oscillatory_g(2.0, 1.0, 3, params.q)
    with pytest.raises(FamilyError):
        oscillatory_g(0.05, 1.5, 3, params.q)
    with pytest.raises(FamilyError):
        oscillatory_g(0.05, 1.0, 3, params.q, c=0.1)


def test_sweep_is_worker_independent(params):
    alphas = np.geomspace(1e-3, 1.0, 3)
    serial = oscillatory_sweep(alphas, (1.0, 1.2), 3, params.q)
    pooled = oscillatory_sweep(alphas, (1.0, 1.2), 3, params.q, workers=2)
    assert serial.rows == pooled.rows
    assert serial.exit_code == 0


# ---------- stationary phase ----------

def test_partition_of_unity(params):
    pieces = stationary_pieces(0.03, 1.05, 3, params.q)
    assert pieces.partition_residual <= 1e-8


def test_stationary_pieces_rejects_eta(params):
    with pytest.raises(FamilyError):
        stationary_pieces(0.03, 1.0, 3, params.q, eta=0.5)


def test_stationary_phase_slope(params):
    report = stationary_phase_check(3, params.q)
    assert report.exit_code == 0
    oracle = -(1.0 / 2.0) * (0.5 - (1.0 - 1.0 / params.q))
    assert report.extras["oracle_slope"] == pytest.approx(oracle)
    assert report.extras["slope"] == pytest.approx(oracle, rel=0.15)
    assert report.extras["lower_envelope"] > 0


# ---------- convergence of I to g ----------

def test_I_approaches_g():
    sp = SoggeParams(p=1.1)
    profile = convergence_profile(sp, (0.03,), (1.0,), us=(1e4,))
    assert profile[0][0] == 1e4
    assert profile[0][1] <= 0.05


def test_convergence_profile_is_monotone(params):
    profile = convergence_profile(params, (0.02, 0.03), (1.0, 1.05))
    gaps = [gap for _, gap in profile]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(gaps, gaps[1:]))


# ---------- witnesses and divergence ----------

@pytest.fixture(scope="module")
def witness(params):
    return choose_witness_intervals(params)


def test_witness_is_admissible(params, witness):
    assert 0.005 <= witness.alpha1 < witness.alpha2 <= 0.05 * 1.25
    assert witness.alpha2 / witness.alpha1 == pytest.approx(1.25)
    assert witness.A > 0
    assert 0 < witness.r2 <= 1.0
    assert witness.A == max(score for _, score in witness.scores)


def test_divergence_scan(params, witness):
    report = sogge_divergence_scan(params, (1e4, 1e5), witness=witness)
    assert report.exit_code == 0
    assert report.extras["harness_residual"] <= 1e-8
    masses = report.column("partial_mass")
    assert masses[0] > 0 and masses[1] > masses[0]
    assert report.extras["min_abs_J"] >= 0.5 * witness.A


def test_divergence_scan_grid_validation(params):
    w = Witness(0.02, 0.025, 0.1, 1.0)
    with pytest.raises(FamilyError):
        sogge_divergence_scan(params, (500.0, 1e4), witness=w)
    with pytest.raises(FamilyError):
        sogge_divergence_scan(params, (1e4, 1e7), witness=w)
