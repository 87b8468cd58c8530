import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from stratwave.symbols import (MultiplierSpec, PhaseSpec, ShellConfig, VectorFieldKind,
                               directional_richardson, eval_multiplier, eval_phase, eval_sigma,
                               fd_crosscheck_suite, phase_vf_closed_form, split_normal_form,
                               standard_multipliers, vf_on_phase)

coord = st.floats(-5, 5, allow_nan=False)
vec = st.tuples(coord, coord)
signs = st.sampled_from([1, -1])
kinds = st.sampled_from(standard_multipliers())


def generic(xi, eta):
    xi, eta = np.array(xi), np.array(eta)
    return min(np.linalg.norm(xi), np.linalg.norm(eta), np.linalg.norm(xi - eta)) > 1e-2


@given(vec, vec)
def test_sigma_symmetries(xi, eta):
    xi, eta = np.array(xi), np.array(eta)
    s = eval_sigma(xi, eta)
    assert eval_sigma(xi, xi - eta) == pytest.approx(-s, abs=1e-12)
    assert eval_sigma(-xi, -eta) == pytest.approx(s, abs=1e-12)
    assert eval_sigma(eta, xi) == pytest.approx(-(xi[1] * eta[0] - xi[0] * eta[1]), abs=1e-12)
    assert s == pytest.approx(xi[1] * eta[0] - xi[0] * eta[1], abs=1e-12)


@given(vec, vec, st.floats(0, 2 * np.pi))
def test_sigma_rotation_invariant(xi, eta, th):
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    xi, eta = np.array(xi), np.array(eta)
    assert eval_sigma(R @ xi, R @ eta) == pytest.approx(eval_sigma(xi, eta), abs=1e-10)


@given(vec, vec, st.floats(0.01, 100), signs, signs, signs)
def test_phase_is_homogeneous_of_degree_zero(xi, eta, c, o, m, n):
    assume(generic(xi, eta))
    ph = PhaseSpec(o, m, n)
    xi, eta = np.array(xi), np.array(eta)
    assert eval_phase(ph, c * xi, c * eta) == pytest.approx(eval_phase(ph, xi, eta), abs=1e-12)


@given(vec, vec, st.floats(0.01, 100), kinds)
def test_multipliers_are_homogeneous_of_degree_one(xi, eta, c, spec):
    assume(generic(xi, eta))
    xi, eta = np.array(xi), np.array(eta)
    m = eval_multiplier(spec, xi, eta)
    assert eval_multiplier(spec, c * xi, c * eta) == pytest.approx(c * m, rel=1e-10, abs=1e-12)


@given(vec, vec, kinds)
def test_multipliers_are_symmetric(xi, eta, spec):
    assume(generic(xi, eta))
    assume(spec.kind != "m_plus_minus")
    xi, eta = np.array(xi), np.array(eta)
    assert eval_multiplier(spec, xi, xi - eta) == pytest.approx(
        eval_multiplier(spec, xi, eta), rel=1e-10, abs=1e-12)


@given(vec, vec, signs, signs)
def test_symmetrized_quadratic_symbol(xi, eta, o, m):
    assume(generic(xi, eta))
    xi, eta = np.array(xi), np.array(eta)
    n = MultiplierSpec("n", o, m, m)
    avg = 0.5 * (eval_multiplier(n, xi, eta) + eval_multiplier(n, xi, xi - eta))
    assert eval_multiplier(MultiplierSpec("m_mu_mu", o, m, m), xi, eta) == pytest.approx(avg, abs=1e-12)


@given(vec, vec, signs)
def test_plus_minus_symbol_combines_the_cross_terms(xi, eta, o):
    assume(generic(xi, eta))
    xi, eta = np.array(xi), np.array(eta)
    pm = eval_multiplier(MultiplierSpec("n", o, 1, -1), xi, eta) + \
        eval_multiplier(MultiplierSpec("n", o, -1, 1), xi, xi - eta)
    assert eval_multiplier(MultiplierSpec("m_plus_minus", o, 1, -1), xi, eta) == pytest.approx(pm, abs=1e-12)


@given(vec, vec)
def test_sqg_symbol_equals_symmetrized_transport(xi, eta):
    assume(generic(xi, eta))
    xi, eta = np.array(xi), np.array(eta)
    a = xi - eta
    # u . grad theta with u_hat(a) = i a_perp / |a| theta_hat(a): symbol -(a_perp . eta)/|a|
    raw = lambda a, e: -(-a[1] * e[0] + a[0] * e[1]) / np.linalg.norm(a)
    sym = 0.5 * (raw(a, eta) + raw(eta, a))
    assert eval_multiplier(MultiplierSpec("m0"), xi, eta) == pytest.approx(-sym, abs=1e-12)


@given(vec, vec, st.floats(0.01, 2), kinds)
def test_normal_form_split_is_exact(xi, eta, lam, spec):
    assume(generic(xi, eta))
    xi, eta = np.array(xi), np.array(eta)
    split = split_normal_form(spec, None, lam)
    m = eval_multiplier(spec, xi, eta)
    assert split.resonant(xi, eta) + split.nonresonant(xi, eta) == pytest.approx(m, abs=1e-14)
    ph = eval_phase(spec.phase, xi, eta)
    if abs(ph) > lam:
        assert split.nonresonant_over_phase(xi, eta) * ph == pytest.approx(
            split.nonresonant(xi, eta), rel=1e-12, abs=1e-14)
    if abs(ph) < 0.8 * lam:
        assert split.nonresonant(xi, eta) == 0


def test_split_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        split_normal_form(MultiplierSpec("m0"), None, 0.0)


@given(vec, vec, signs, signs, signs, st.sampled_from(list(VectorFieldKind)))
@settings(max_examples=200)
def test_closed_form_phase_derivatives(xi, eta, o, m, n, kind):
    assume(generic(xi, eta))
    ph = PhaseSpec(o, m, n)
    xi, eta = np.array(xi), np.array(eta)
    assert phase_vf_closed_form(kind, ph, xi, eta) == pytest.approx(
        vf_on_phase(kind, ph, xi, eta), rel=1e-9, abs=1e-9)


def test_scaling_derivative_of_phase_vanishes():
    rng = np.random.default_rng(1)
    xi, eta = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
    ph = PhaseSpec(1, -1, 1)
    both = (np.asarray(vf_on_phase("S", ph, xi, eta)) + np.asarray(vf_on_phase("S_eta", ph, xi, eta)))
    assert np.max(np.abs(both)) < 1e-12
    fd = directional_richardson(lambda x, e: eval_phase(ph, x, e), "S_eta", xi, eta)
    assert np.max(np.abs(fd - np.asarray(vf_on_phase("S_eta", ph, xi, eta)))) < 1e-8


def test_crosscheck_suite_passes():
    rep = fd_crosscheck_suite(seed=0)
    assert rep.passed, [r for r in rep.rows if not r.passed]


def test_shell_config_validation():
    with pytest.raises(ValueError):
        ShellConfig.make(0, 1)
    s = ShellConfig.make(0, (-3, 0, 0), (None, -1, -2))
    assert not s.has_q and s.q_min == -2 and s.q_max == -1 and s.p_min == -3
    with pytest.raises(ValueError):
        MultiplierSpec("bogus")
    with pytest.raises(ValueError):
        PhaseSpec(2, 1, 1)
