"""Group layer: composition, inversion, evolutions, ⊙, derivatives, Trotter."""

from fractions import Fraction

import numpy as np
import pytest

from torusflow import (AdmissibleField, AnalyticDiffeo, FourierMap,
                       TimeDependentField, adjoint, compose_diffeo,
                       derivative_at_eta, derivative_at_zero, evol_left,
                       evol_left_by_reversal, evol_right, exp_field,
                       flow_two_param, invert_diffeo, odot, solve_flow,
                       trotter_curve, verify_evolution_pointwise)
from torusflow.group import _probe_points, ac_modulus_check

from conftest import EPS, ORDER, random_real_map, sine_map, cosine_map


@pytest.fixture(scope="module")
def gam():
    return AdmissibleField.certify(
        TimeDependentField.constant(sine_map(0.02), 0.2), EPS)


@pytest.fixture(scope="module")
def eta():
    return AdmissibleField.certify(
        TimeDependentField.constant(cosine_map(0.02), 0.2), EPS)


@pytest.fixture(scope="module")
def right_evo(gam):
    return evol_right(gam)


def zero_field(order=ORDER):
    return AdmissibleField.certify(
        TimeDependentField.constant(FourierMap.zero(order, 1, 1), 0.2), EPS)


# -- group arithmetic ----------------------------------------------------------

def test_compose_with_identity():
    phi = AnalyticDiffeo.certify(sine_map(0.02), EPS)
    out = compose_diffeo(phi, AnalyticDiffeo.identity(ORDER, 1, EPS))
    assert np.abs(out.u.coeffs - phi.u.coeffs).max() < 1e-14


def test_translations_add():
    a = AnalyticDiffeo.certify(FourierMap.constant([0.15], ORDER), EPS)
    b = AnalyticDiffeo.certify(FourierMap.constant([0.25], ORDER), EPS)
    assert np.abs(compose_diffeo(a, b).u.constant_part() - 0.4).max() < 1e-14


def test_inverse_roundtrip():
    phi = AnalyticDiffeo.certify(sine_map(0.02), EPS)
    inv = invert_diffeo(phi)
    assert inv.inverse_residual <= 1e-10
    pts = _probe_points(1, 97)
    assert np.abs(phi(inv(pts)) - pts).max() <= 1e-9
    assert np.abs(inv(phi(pts)) - pts).max() <= 1e-9


def test_invert_translation():
    tr = AnalyticDiffeo.certify(FourierMap.constant([0.3], ORDER), EPS)
    assert np.abs(invert_diffeo(tr).u.constant_part() + 0.3).max() < 1e-12


def test_invert_identity():
    out = invert_diffeo(AnalyticDiffeo.identity(ORDER, 1, EPS))
    assert np.abs(out.u.coeffs).max() < 1e-14


def test_group_axioms_sampled():
    rng = np.random.default_rng(0)
    maps = [AnalyticDiffeo.certify(
        0.01 * random_real_map(rng, max_mode=3, decay=1.0), EPS)
        for _ in range(3)]
    pts = _probe_points(1, 64)
    a, b, c = maps
    lhs = compose_diffeo(compose_diffeo(a, b), c)
    rhs = compose_diffeo(a, compose_diffeo(b, c))
    assert np.abs(lhs(pts) - rhs(pts)).max() <= 1e-9
    assert np.abs(compose_diffeo(a, invert_diffeo(a))(pts) - pts).max() <= 1e-9


# -- evolutions ------------------------------------------------------------------

def test_evol_right_zero_is_identity():
    evo = evol_right(zero_field())
    assert all(np.abs(u.coeffs).max() == 0 for u in evo.snapshots)


def test_evol_right_translation():
    c = FourierMap.constant([0.1], ORDER)
    evo = evol_right(AdmissibleField.certify(
        TimeDependentField.constant(c, 0.2), EPS))
    for t in (0.3, 1.0):
        assert np.abs(evo.map_at(t).u.coeffs - t * c.coeffs).max() < 1e-13


def test_evol_right_agrees_with_pointwise(gam, right_evo):
    from torusflow import pointwise_solution
    pts = _probe_points(1, 16)
    for p in pts[:, 0]:
        traj = pointwise_solution(right_evo.flow, 0.0, [p])
        for j in (16, 48, 64):
            t = traj.times[j]
            val = right_evo.eval_at(t, np.array([[p]]))[0, 0]
            assert abs(val - traj.points[j, 0]) < 1e-8


def test_evol_left_translation_matches_right():
    c = FourierMap.constant([0.1], ORDER)
    gamma = AdmissibleField.certify(TimeDependentField.constant(c, 0.2), EPS)
    le = evol_left(gamma)
    for t in (0.5, 1.0):
        assert np.abs(le.eval_at(t, np.array([[0.2 + 0j]]))
                      - (0.2 + t * 0.1)).max() < 1e-11


def test_left_and_right_derivative_conventions(gam):
    r = evol_right(gam)
    l = evol_left(gam)
    assert r.derivative_residual() <= 1e-7
    assert l.derivative_residual() <= 1e-7


def test_left_right_identity_vs_independent_reversal(gam):
    # Evol^r(gamma) = Evol(-gamma)^{-1}, the right side built by
    # time-reversal solves with no inversion shared with the left side
    r = evol_right(gam)
    pts = _probe_points(1, 64)
    worst = 0.0
    for tq in (Fraction(1, 4), Fraction(5, 8), Fraction(1)):
        lhs = r.eval_at(float(tq), pts)
        evol_minus = evol_left_by_reversal(gam.negated(), tq)
        rhs = invert_diffeo(evol_minus)(pts)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    assert worst <= 1e-8


# -- two-parameter flow --------------------------------------------------------------

def test_two_param_identity_at_equal_times(right_evo):
    out = flow_two_param(right_evo, 0.4, 0.4)
    assert np.abs(out.u.coeffs).max() == 0


def test_two_param_translation():
    c = FourierMap.constant([0.1], ORDER)
    evo = evol_right(AdmissibleField.certify(
        TimeDependentField.constant(c, 0.2), EPS))
    out = flow_two_param(evo, 0.8, 0.3)
    assert np.abs(out.u.constant_part() - 0.05).max() < 1e-12


def test_two_param_cocycle(right_evo):
    rng = np.random.default_rng(1)
    pts = _probe_points(1, 64)
    for _ in range(5):
        t, s, t0 = sorted(rng.uniform(0, 1, 3))[::-1]
        lhs = flow_two_param(right_evo, t, t0)
        rhs = compose_diffeo(flow_two_param(right_evo, t, s),
                             flow_two_param(right_evo, s, t0))
        assert np.abs(lhs(pts) - rhs(pts)).max() <= 1e-8


def test_flow_maps_carry_diffeo_certificates(right_evo):
    for j in (16, 32, 64):
        phi = right_evo.snapshot_map(j)
        assert phi.mu < 1.0
        assert invert_diffeo(phi).inverse_residual <= 1e-10
        assert phi.min_real_jacobian() >= 1 - phi.mu > 0


def test_ac_modulus_shadow(right_evo):
    rows = ac_modulus_check(right_evo)
    assert all(ok for *_, ok in rows)


# -- adjoint --------------------------------------------------------------------------

def test_adjoint_identity():
    X = random_real_map(np.random.default_rng(2))
    out = adjoint(AnalyticDiffeo.identity(ORDER, 1, EPS), X)
    assert np.abs(out.coeffs - X.coeffs).max() < 1e-13


def test_adjoint_translation_is_shift():
    X = random_real_map(np.random.default_rng(3))
    tr = AnalyticDiffeo.certify(FourierMap.constant([0.3], ORDER), EPS)
    out = adjoint(tr, X)
    k = np.arange(-ORDER, ORDER + 1)
    want = X.coeffs * np.exp(-2j * np.pi * k * 0.3)[:, None]
    assert np.abs(out.coeffs - want).max() < 1e-12


def test_adjoint_roundtrip():
    rng = np.random.default_rng(4)
    phi = AnalyticDiffeo.certify(
        0.01 * random_real_map(rng, max_mode=3, decay=1.0), EPS)
    X = 0.5 * random_real_map(rng)
    back = adjoint(invert_diffeo(phi), adjoint(phi, X))
    assert np.abs(back.coeffs - X.coeffs).max() <= 1e-8


def test_adjoint_inverse_form_consistent():
    rng = np.random.default_rng(5)
    phi = AnalyticDiffeo.certify(
        0.01 * random_real_map(rng, max_mode=3, decay=1.0), EPS)
    X = 0.5 * random_real_map(rng)
    lhs = adjoint(invert_diffeo(phi), X)
    rhs = adjoint(phi, X, inverse=True)
    assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-9


# -- the field product -----------------------------------------------------------------

def test_odot_neutral_elements(gam, eta):
    z = zero_field()
    p = odot(gam, z)
    t = 0.3
    assert np.abs(p.value_at(t).coeffs - gam.field.value_at(t).coeffs).max() \
        < 1e-12
    q = odot(z, eta)
    assert np.abs(q.value_at(t).coeffs - eta.field.value_at(t).coeffs).max() \
        < 1e-12


def test_odot_translations_commute_to_sum():
    c1 = AdmissibleField.certify(TimeDependentField.constant(
        FourierMap.constant([0.1], ORDER), 0.2), EPS)
    c2 = AdmissibleField.certify(TimeDependentField.constant(
        FourierMap.constant([0.07], ORDER), 0.2), EPS)
    p = odot(c1, c2)
    assert np.abs(p.value_at(0.4).constant_part() - 0.17).max() < 1e-12


def test_odot_homomorphism(gam, eta):
    prod = AdmissibleField.certify(odot(gam, eta), EPS)
    e_prod = evol_left(prod)
    e_g, e_e = evol_left(gam), evol_left(eta)
    pts = _probe_points(1, 64)
    for t in (0.5, 1.0):
        lhs = e_prod.eval_at(t, pts)
        rhs = e_g.eval_at(t, e_e.eval_at(t, pts))
        assert np.abs(lhs - rhs).max() <= 1e-7


def test_odot_affine_in_first_argument(gam, eta):
    g2 = AdmissibleField.certify(
        TimeDependentField.constant(sine_map(0.01, ORDER), 0.2), EPS)
    a = 0.3
    mix = AdmissibleField.certify(
        a * gam.field + (1 - a) * g2.field, EPS)
    lhs = odot(mix, eta)
    p1, p2 = odot(gam, eta), odot(g2, eta)
    t = 0.6
    want = a * p1.value_at(t).coeffs + (1 - a) * p2.value_at(t).coeffs
    assert np.abs(lhs.value_at(t).coeffs - want).max() <= 1e-10


# -- derivative formulas -----------------------------------------------------------------

def test_derivative_at_zero_zero_field():
    rep = derivative_at_zero(zero_field(), 0.5)
    assert rep.discrepancy < 1e-14


def test_derivative_at_zero_translation_exact():
    c = AdmissibleField.certify(TimeDependentField.constant(
        FourierMap.constant([0.1], ORDER), 0.2), EPS)
    rep = derivative_at_zero(c, 0.5)
    assert rep.discrepancy < 1e-10


def test_derivative_at_zero_sine_richardson():
    gamma = AdmissibleField.certify(
        TimeDependentField.constant(sine_map(0.04), 0.2), EPS)
    rep = derivative_at_zero(gamma, 1.0, 1e-3)
    assert rep.discrepancy <= 1e-6
    assert 0.2 <= rep.richardson_ratio <= 0.3


def test_derivative_at_eta_gamma_zero(eta):
    d = derivative_at_eta(eta, zero_field(), 0.6)
    assert d < 1e-12


def test_derivative_at_eta_sine_pair(gam, eta):
    assert derivative_at_eta(eta, gam, 0.6, 1e-3) <= 1e-5


def test_derivative_at_eta_reduces_at_zero_base(gam):
    # with eta = 0 the formula collapses to the primitive of gamma
    d = derivative_at_eta(zero_field(), gam, 0.7, 1e-3)
    assert d <= 1e-6


# -- Trotter ---------------------------------------------------------------------------

def test_trotter_single_factor_is_exact():
    v = sine_map(0.02)
    curve = trotter_curve(v, FourierMap.zero(ORDER, 1, 1), EPS,
                          n_values=(8, 16))
    assert max(d for _, d in curve) <= 1e-9


def test_trotter_commuting_translations():
    c1 = FourierMap.constant([0.05], ORDER)
    c2 = FourierMap.constant([0.08], ORDER)
    curve = trotter_curve(c1, c2, EPS, n_values=(8, 16))
    assert max(d for _, d in curve) <= 1e-12


def test_trotter_first_order_rate():
    curve = trotter_curve(sine_map(0.02), cosine_map(0.02), EPS,
                          n_values=(8, 16, 32))
    ds = [d for _, d in curve]
    for a, b in zip(ds, ds[1:]):
        assert 0.35 <= b / a <= 0.65


def test_exp_field_is_time_one_flow(gam):
    phi = exp_field(gam.field.value_at(0.0), EPS)
    flow = solve_flow(gam)
    assert np.abs(phi.u.coeffs - flow.snapshots[-1].coeffs).max() <= 1e-10


# -- pointwise recognition ----------------------------------------------------------------

def test_verify_pointwise_self_consistency(gam, right_evo):
    probes = (np.arange(8) + 0.37) / 8
    rep = verify_evolution_pointwise(right_evo, gam, probes)
    assert rep.passed


def test_verify_pointwise_left_side(gam):
    probes = (np.arange(6) + 0.21) / 6
    rep = verify_evolution_pointwise(evol_left(gam), gam, probes)
    assert rep.passed


def test_verify_pointwise_identity_fails(gam, right_evo):
    from torusflow.group import EvolutionResult
    fake = EvolutionResult("right", gam, right_evo.flow,
                           [FourierMap.zero(ORDER, 1, 1)]
                           * len(right_evo.grid))
    probes = (np.arange(4) + 0.3) / 4
    rep = verify_evolution_pointwise(fake, gam, probes)
    assert not rep.passed
    # residual at t=1 is about the size of the integral of the field
    assert rep.max_residual > 1e-3


def test_m2_compose_invert_adjoint():
    order = 8
    u = FourierMap.zero(order, 2, 2)
    u.coeffs[order, order + 1] = [-0.5j * 0.01, 0]
    u.coeffs[order, order - 1] = [0.5j * 0.01, 0]
    u.coeffs[order + 1, order] = [0, 0.008]
    u.coeffs[order - 1, order] = [0, 0.008]
    phi = AnalyticDiffeo.certify(FourierMap(u.coeffs), EPS)
    inv = invert_diffeo(phi)
    assert inv.inverse_residual <= 1e-10
    pts = _probe_points(2, 49)
    assert np.abs(compose_diffeo(phi, inv)(pts) - pts).max() <= 1e-9
    X = FourierMap.zero(order, 2, 2)
    X.coeffs[order + 1, order + 1] = [0.1, 0.05j]
    X.coeffs[order - 1, order - 1] = [0.1, -0.05j]
    X = FourierMap(X.coeffs)
    back = adjoint(invert_diffeo(phi), adjoint(phi, X))
    assert np.abs(back.coeffs - X.coeffs).max() <= 1e-8


def test_verify_pointwise_fault_localized(gam, right_evo):
    from torusflow.group import EvolutionResult
    j0 = len(right_evo.grid) // 2
    tampered = list(right_evo.snapshots)
    tampered[j0] = tampered[j0] + FourierMap.constant([1e-4], ORDER)
    faulty = EvolutionResult("right", gam, right_evo.flow, tampered)
    probes = (np.arange(4) + 0.3) / 4
    rep = verify_evolution_pointwise(faulty, gam, probes)
    assert not rep.passed
    bad_times = sorted({t for _, t, r in rep.rows if r > 1e-8})
    assert bad_times == [right_evo.grid.floats[j0]]
