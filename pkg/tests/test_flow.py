"""The contraction solver: oracles, certificates, consistency checks."""

from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from torusflow import (AdmissibilityViolation, AdmissibleField, DomainEscape,
                       FourierMap, TimeDependentField, TimeGrid,
                       identity_path, param_lipschitz_check, picard_step,
                       pointwise_solution, restriction_consistency,
                       solve_flow)
from torusflow.flow import contraction_certificate_ok

from conftest import EPS, probe_points, random_admissible, sine_map


def tangent_oracle(y0, t, a=0.02):
    """Closed form of y' = a sin(2 pi y): tan(pi y(t)) = e^{2 pi a t} tan(pi y0)."""
    y = np.arctan(np.exp(2 * np.pi * a * t) * np.tan(np.pi * y0)) / np.pi
    return np.where(np.asarray(y0) % 1.0 > 0.5, y + 1.0, y)


# -- admissibility -------------------------------------------------------------

def test_certificates_computed():
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(sine_map(0.02), 0.2), EPS)
    assert 0 < gamma.theta_hat < 0.5
    assert gamma.l1_nu < gamma.l1_beta


def test_inadmissible_rejected():
    big = TimeDependentField.constant(sine_map(0.2), 0.2)
    with pytest.raises(AdmissibilityViolation):
        AdmissibleField.certify(big, EPS)


def test_chart_certificate():
    gamma = TimeDependentField.constant(FourierMap.constant([0.3], 32), 0.2)
    with pytest.raises(AdmissibilityViolation):
        AdmissibleField.certify(gamma, EPS, chart_delta0=1.0, for_chart=True)
    AdmissibleField.certify(gamma, EPS, chart_delta0=2.0, for_chart=True)


# -- picard step -----------------------------------------------------------------

def test_picard_step_zero_field():
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(32, 1, 1), 0.2), EPS)
    path = picard_step(gamma, identity_path(gamma))
    assert all(np.abs(u.coeffs).max() == 0 for u in path.snapshots)


def test_picard_step_constant_field():
    c = FourierMap.constant([0.1], 32)
    gamma = AdmissibleField.certify(TimeDependentField.constant(c, 0.2), EPS)
    path = picard_step(gamma, identity_path(gamma))
    for t in (0.25, 0.5, 1.0):
        assert np.abs(path.u_at(t).coeffs - t * c.coeffs).max() < 1e-14


def test_picard_first_iterate_is_field_primitive(sine_gamma):
    path = picard_step(sine_gamma, identity_path(sine_gamma))
    t = 0.75
    want = t * sine_gamma.field.value_at(0.0).coeffs
    assert np.abs(path.u_at(t).coeffs - want).max() < 1e-13


# -- solve ------------------------------------------------------------------------

def test_solve_zero_field_one_iteration():
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(32, 1, 1), 0.2), EPS)
    path = solve_flow(gamma)
    assert len(path.iteration_log) == 1
    assert all(np.abs(u.coeffs).max() == 0 for u in path.snapshots)


def test_solve_piecewise_translation():
    c = FourierMap.constant([0.2], 32)
    field = TimeDependentField.step(TimeGrid((0, Fraction(1, 2), 1)),
                                    [c, -1 * c], 0.2)
    path = solve_flow(AdmissibleField.certify(field, EPS))
    assert np.abs(path.snapshots[-1].coeffs).max() < 1e-14
    assert np.abs(path.u_at(0.5).constant_part() - 0.1).max() < 1e-14


def test_solve_matches_tangent_closed_form(sine_flow):
    probes = (np.arange(64) + 0.3) / 64
    got = sine_flow.eval_points(1.0, probes[:, None].astype(complex))[:, 0]
    assert np.abs(got.real - tangent_oracle(probes, 1.0)).max() < 1e-8
    # frozen probe value, recomputed from the closed form
    y_quarter = float(tangent_oracle(0.25, 1.0))
    assert y_quarter == pytest.approx(0.26994756896743394, abs=1e-15)
    got_quarter = sine_flow.eval_points(1.0, np.array([[0.25 + 0j]]))[0, 0]
    assert abs(got_quarter.real - y_quarter) < 1e-10


def test_contraction_certificate(sine_flow, sine_gamma):
    assert contraction_certificate_ok(sine_flow)
    ratios = [r for _, d, r in sine_flow.iteration_log[1:]
              if np.isfinite(r) and d > 1e-13]
    assert max(ratios) <= sine_gamma.theta_hat + 0.05
    assert sine_flow.residual <= 1e-10


def test_solver_uniqueness_from_different_starts(sine_gamma):
    p1 = solve_flow(sine_gamma)
    warm = picard_step(sine_gamma, identity_path(sine_gamma))
    p2 = solve_flow(sine_gamma, start=warm)
    assert p1.sup_distance(p2) <= 2e-10


def test_time_reversal_roundtrip(sine_gamma, sine_flow):
    rev = AdmissibleField.certify(
        -1 * sine_gamma.field.time_reversed(), EPS)
    back = solve_flow(rev)
    pts = probe_points(33)
    fwd_pts = sine_flow.eval_points(1.0, pts)
    assert np.abs(back.eval_points(1.0, fwd_pts) - pts).max() <= 1e-9


def test_strip_invariant_certificate(sine_flow):
    assert sine_flow.check_strip_invariant()


def test_imaginary_growth_sampled(sine_flow):
    rng = np.random.default_rng(5)
    starts = rng.uniform(0, 1, 100) + 1j * rng.uniform(-EPS / 2, EPS / 2, 100)
    ts = sine_flow.grid.floats
    for t in ts[:: len(ts) // 8]:
        vals = sine_flow.eval_points(t, starts[:, None])
        assert np.abs(vals.imag).max() < EPS


# -- parameter dependence ------------------------------------------------------------

def test_lipschitz_identical_fields(sine_gamma):
    rep = param_lipschitz_check(sine_gamma, sine_gamma)
    assert rep.sup_distance == 0 and rep.ratio == 0


def test_lipschitz_translation_pair():
    zero = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(32, 1, 1), 0.2), EPS)
    c = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.constant([0.1], 32), 0.2), EPS)
    rep = param_lipschitz_check(zero, c)
    assert rep.ratio == pytest.approx(1.0, abs=1e-9)
    assert rep.ok()


def test_lipschitz_random_pairs():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(5):
        g1 = random_admissible(rng)
        delta = random_admissible(rng, budget=float(rng.uniform(0.01, 0.05)))
        g2 = AdmissibleField.certify(g1.field + delta.field, EPS)
        rep = param_lipschitz_check(g1, g2)
        worst = max(worst, rep.ratio)
    assert worst <= 2 + 1e-6


# -- pointwise solutions --------------------------------------------------------------

def test_pointwise_zero_field():
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(32, 1, 1), 0.2), EPS)
    traj = pointwise_solution(solve_flow(gamma), 0.0, [0.3])
    assert np.abs(traj.points - 0.3).max() < 1e-15


def test_pointwise_constant_field():
    c = FourierMap.constant([0.15], 32)
    gamma = AdmissibleField.certify(TimeDependentField.constant(c, 0.2), EPS)
    traj = pointwise_solution(solve_flow(gamma), 0.0, [0.2])
    want = 0.2 + 0.15 * traj.times
    assert np.abs(traj.points[:, 0].real - want).max() < 1e-13


def test_pointwise_against_rk_oracle(sine_flow):
    traj = pointwise_solution(sine_flow, 0.0, [0.33])
    sol = solve_ivp(lambda t, y: 0.02 * np.sin(2 * np.pi * y), (0, 1), [0.33],
                    method="DOP853", rtol=1e-10, atol=1e-12,
                    t_eval=traj.times)
    assert np.abs(traj.points[:, 0].real - sol.y[0]).max() <= 1e-8
    assert traj.ok


def test_pointwise_nonzero_base_time(sine_flow):
    traj = pointwise_solution(sine_flow, 0.5, [0.4])
    sol = solve_ivp(lambda t, y: 0.02 * np.sin(2 * np.pi * y), (0.5, 1), [0.4],
                    method="DOP853", rtol=1e-10, atol=1e-12)
    assert abs(traj.points[-1, 0].real - sol.y[0, -1]) <= 1e-8
    assert traj.max_residual <= 1e-8


def test_pointwise_domain_escape(sine_flow):
    with pytest.raises(DomainEscape):
        pointwise_solution(sine_flow, 0.0, [0.3 + 0.9j * EPS])


# -- restriction consistency ------------------------------------------------------------

def test_restriction_zero_and_constant():
    zero = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(32, 1, 1), 0.2), EPS)
    assert restriction_consistency(zero, EPS / 2).discrepancy == 0
    const = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.constant([0.1], 32), 0.2), EPS)
    assert restriction_consistency(const, EPS / 2).discrepancy == 0


def test_restriction_sine_benchmark(sine_gamma):
    rep = restriction_consistency(sine_gamma, EPS / 2)
    assert rep.discrepancy <= 1e-9
    assert rep.ok


# -- two-dimensional torus ----------------------------------------------------------------

def test_solve_m2_against_rk_oracle():
    a, b = 0.02, 0.015
    order = 8
    f = FourierMap.zero(order, 2, 2)
    f.coeffs[order, order + 1] = [-0.5j * a, 0]
    f.coeffs[order, order - 1] = [0.5j * a, 0]
    f.coeffs[order + 1, order] = [0, 0.5 * b]
    f.coeffs[order - 1, order] = [0, 0.5 * b]
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(FourierMap(f.coeffs), 0.2), EPS)
    path = solve_flow(gamma, tol_solve=1e-9, max_step=Fraction(1, 16))

    def rhs(t, y):
        return [a * np.sin(2 * np.pi * y[1]), b * np.cos(2 * np.pi * y[0])]

    sol = solve_ivp(rhs, (0, 1), [0.3, 0.7], method="DOP853",
                    rtol=1e-12, atol=1e-13)
    got = path.eval_points(1.0, np.array([[0.3 + 0j, 0.7 + 0j]]))[0]
    assert np.abs(got.real - sol.y[:, -1]).max() <= 1e-9
    traj = pointwise_solution(path, 0.0, [0.3, 0.7])
    assert traj.ok
    assert path.check_strip_invariant()
