import numpy as np
import pytest
from hypothesis import given, strategies as st

from stratwave.bilinear import (IBP_PROFILES, IBP_SHELLS, BilinearTask, CostGuardError,
                                DivisionHazardError, GaussianRing, QuadratureSpec,
                                gaussian_convolution, ibp_step_check, ibp_weights,
                                ibp_xi_samples, nonresonant_bound_check, q_direct,
                                quad_for_shells, set_size, setsize_check, symmetrization_check)
from stratwave.scans import NULL_REGIMES
from stratwave.symbols import MultiplierSpec, PhaseSpec, ShellConfig


def test_quadrature_guards():
    with pytest.raises(CostGuardError):
        QuadratureSpec(1.0, 256)
    with pytest.raises(ValueError):
        QuadratureSpec(1.0, 16, center="corner")
    q = QuadratureSpec((1.0, 2.0), 8)
    assert q.cell_area == pytest.approx(0.25 * 0.5)
    assert q.coarsened().eta_points == 4


@pytest.mark.parametrize("points, tol", [(48, 1e-12), (96, 1e-14)])
def test_gaussian_convolution_oracle(points, tol):
    a, b = 1.3, 0.7
    task = BilinearTask(None, PhaseSpec(), 0.0, lambda v: np.exp(-a * np.sum(v * v, -1)),
                        lambda v: np.exp(-b * np.sum(v * v, -1)))
    xi = np.array([[0.0, 0.0], [0.5, -0.3], [1.2, 0.9]])
    res = q_direct(task, QuadratureSpec(6.0, points), xi)
    exact = gaussian_convolution(a, b, xi)
    assert np.max(np.abs(res.values - exact)) / np.max(exact) < tol
    assert res.converged or points == 48


def test_q_result_csv(tmp_path):
    task = BilinearTask(None, PhaseSpec(), 1.0, GaussianRing(), GaussianRing())
    res = q_direct(task, QuadratureSpec(3.0, 16), [[0.5, 0.5]])
    res.write_csv(tmp_path / "q.csv")
    assert (tmp_path / "q.csv").read_text().splitlines()[0] == "xi1,xi2,re,im"


def test_profile_derivatives_match_differences():
    f = GaussianRing(3.0, 1.1, 0.7, 2, 0.4)
    v = np.array([[0.8, 0.3], [-0.2, 1.4]])
    h = 1e-5
    s_fd = (f(v * np.exp(h)) - f(v * np.exp(-h))) / (2 * h)
    rot = lambda a: np.stack([np.cos(a) * v[:, 0] - np.sin(a) * v[:, 1],
                              np.sin(a) * v[:, 0] + np.cos(a) * v[:, 1]], -1)
    w_fd = (f(rot(h)) - f(rot(-h))) / (2 * h)
    assert np.allclose(f.s(v), s_fd, atol=1e-8)
    assert np.allclose(f.w(v), w_fd, atol=1e-8)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_ibp_weights_reconstruct_eta(x1, x2, e1, e2):
    xi, eta = np.array([x1, x2]), np.array([e1, e2])
    a = xi - eta
    if np.linalg.norm(a) < 1e-3:
        return
    m1, m2 = ibp_weights(1.0, xi, eta)
    # -eta = m1 a + m2 a_perp: the S_eta flow seen from a = xi - eta
    rec = m1 * a + m2 * np.array([-a[1], a[0]])
    assert np.allclose(rec, -eta, atol=1e-10)


def test_ibp_one_step_identity():
    spec = MultiplierSpec("m0")
    task = BilinearTask(spec, spec.phase, 1.0, *IBP_PROFILES, shells=IBP_SHELLS)
    rep = ibp_step_check(task, quad_for_shells(IBP_SHELLS, 96), ibp_xi_samples())
    assert rep.max_residual <= 1e-6
    assert rep.max_residual_coarse > rep.max_residual


def test_ibp_identity_without_shells():
    spec = MultiplierSpec("m0")
    task = BilinearTask(spec, spec.phase, 1.0, *IBP_PROFILES)
    assert ibp_step_check(task, QuadratureSpec(2.4, 96), ibp_xi_samples()).max_residual <= 1e-6
    with pytest.raises(ValueError):
        ibp_step_check(BilinearTask(spec, spec.phase, 0.0, *IBP_PROFILES),
                       QuadratureSpec(2.4, 32), ibp_xi_samples(2))


def test_ibp_detects_vanishing_derivative():
    spec = MultiplierSpec("m0")
    task = BilinearTask(spec, spec.phase, 1.0, *IBP_PROFILES)
    # lattice step 1/2 puts a row at eta_2 = xi_2, where a_2 = 0 and S_eta Phi = 0
    with pytest.raises(DivisionHazardError):
        ibp_step_check(task, QuadratureSpec(4.25, 17), [[1.0, 0.5]])


def test_symmetrization_identities():
    f, g = GaussianRing(2.0, 1.0, 1.0, 1, 0.3), GaussianRing(3.0, 0.8, 0.5, 2, -0.4)
    xi = np.array([[0.7, 0.2], [-0.4, 0.9]])
    rep = symmetrization_check(f, g, xi, 1.0)
    assert rep.max_residual <= 1e-8
    assert symmetrization_check(f, g, xi, 0.0).max_residual <= 1e-8


def test_set_size_of_shells():
    assert set_size(NULL_REGIMES["unit"]) == 1.0
    assert set_size(ShellConfig.make(0, (0, 0, -2), (None, None, -4))) == pytest.approx(2.0 ** -3)


def test_setsize_zero_profile_gives_zero():
    rep = setsize_check(MultiplierSpec("m0"), NULL_REGIMES["unit"], pairs=2, zero_g=True,
                        eta_points=16, xi_points=8)
    assert rep.max_ratio == 0.0


def test_boundary_term_vanishes_for_huge_lambda():
    rep = nonresonant_bound_check(MultiplierSpec("m_plus_minus", 1, 1, -1), NULL_REGIMES["unit"],
                                  100.0, pairs=2, eta_points=16, xi_points=8)
    assert rep.max_ratio == 0.0
