import math

import numpy as np
import pytest

from stratwave.evolution import (CFLWarning, FlowState, NumericalAbort, StepperConfig,
                                 boussinesq_rhs, divergence, energy_identity_residual,
                                 field_difference, from_profiles, initial_state, omega_rho_to_z,
                                 read_checkpoint, run_simulation, sqg_rhs, sqg_velocity,
                                 to_profiles, write_checkpoint, z_to_omega_rho)
from stratwave.spectral import GridSpec, SpectralField
from stratwave.symbols import MultiplierSpec, eval_multiplier

G = GridSpec(64, 2 * np.pi * 4)


def test_sqg_two_mode_hand_convolution():
    x1, x2 = G.x
    dk = G.dk
    k, m = np.array([2, 1]) * dk, np.array([-1, 3]) * dk
    th = np.cos(k[0] * x1 + k[1] * x2) + np.cos(m[0] * x1 + m[1] * x2)
    st = FlowState("sqg_theta", (SpectralField.from_physical(G, th),))
    cross = k[0] * m[1] - k[1] * m[0]
    exact = (cross * (1 / np.linalg.norm(k) - 1 / np.linalg.norm(m))
             * np.sin(k[0] * x1 + k[1] * x2) * np.sin(m[0] * x1 + m[1] * x2))
    assert np.max(np.abs(sqg_rhs(st, dealias=False).physical() + exact)) < 1e-13


def test_z_form_matches_n_multiplier_sum():
    """N_±(xi) = sum_{mu,nu} sum_eta n^{mu nu}_±(xi, eta) Z_mu(xi - eta) Z_nu(eta)."""
    rng = np.random.default_rng(4)
    modes = {1: [(2, 1), (-1, 3)], -1: [(1, -2), (3, 0)]}
    coeffs = {}
    for s, ms in modes.items():
        c = np.zeros((G.n, G.n), complex)
        for j in ms:
            z = rng.normal() + 1j * rng.normal()
            c[j] += z
            c[(-j[0], -j[1])] += np.conj(z)
        coeffs[s] = c
    st = FlowState("boussinesq_Z", (SpectralField(G, coeffs[1]), SpectralField(G, coeffs[-1])))
    got = [f.coeffs for f in boussinesq_rhs(st, dealias=False)]
    for idx, outer in enumerate((1, -1)):
        want = np.zeros((G.n, G.n), complex)
        for mu in (1, -1):
            for nu in (1, -1):
                spec = MultiplierSpec("n", outer, mu, nu)
                for ja in zip(*np.nonzero(coeffs[mu])):
                    for je in zip(*np.nonzero(coeffs[nu])):
                        a = np.array([(j + G.n // 2) % G.n - G.n // 2 for j in ja])
                        e = np.array([(j + G.n // 2) % G.n - G.n // 2 for j in je])
                        xi = a + e
                        val = eval_multiplier(spec, xi * G.dk, e * G.dk)
                        want[tuple(xi % G.n)] += val * coeffs[mu][ja] * coeffs[nu][je]
        assert np.max(np.abs(got[idx] - want)) < 1e-14


def test_velocity_is_divergence_free():
    st = initial_state("sqg_theta", G, 1.0, seed=3)
    u = sqg_velocity(st.fields[0].coeffs, G)
    assert np.max(np.abs(divergence(*u, G))) < 1e-15


def test_representations_roundtrip():
    wr = initial_state("boussinesq_omega_rho", G, 0.3, seed=1)
    back = z_to_omega_rho(omega_rho_to_z(wr))
    assert all(np.max(np.abs(a.coeffs - b.coeffs)) < 1e-16 for a, b in zip(wr.fields, back.fields))
    assert abs(wr.fields[0].coeffs[0, 0]) == 0
    p = to_profiles(FlowState(wr.representation, wr.fields, 2.5))
    again = from_profiles(p, 2.5, "boussinesq_omega_rho")
    assert field_difference(again, wr) < 1e-15


def test_z_and_omega_rho_rhs_agree():
    wr = initial_state("boussinesq_omega_rho", G, 1.0, seed=2)
    z = omega_rho_to_z(wr)
    n_om, n_rho = boussinesq_rhs(wr)
    n_p, n_m = boussinesq_rhs(z)
    # N_± = |grad|^{-1} N_omega ± N_rho
    assert np.max(np.abs(n_p.coeffs - (G.inv_abs * n_om.coeffs + n_rho.coeffs))) < 1e-17
    assert np.max(np.abs(n_m.coeffs - (G.inv_abs * n_om.coeffs - n_rho.coeffs))) < 1e-17


def test_transport_is_skew():
    st = initial_state("sqg_theta", G, 1.0, seed=5)
    th, n = st.fields[0].coeffs, sqg_rhs(st).coeffs
    assert abs(np.sum(np.conj(th) * n)) < 1e-13 * np.linalg.norm(th) * np.linalg.norm(n)


def test_linear_flow_keeps_profiles():
    for rep in ("sqg_theta", "boussinesq_Z", "boussinesq_omega_rho"):
        st = initial_state(rep, G, 1.0, seed=0)
        traj = run_simulation(st, StepperConfig(0.05, 2.0, nonlinear=False), cfl_guard=False)
        p0, p1 = to_profiles(st), to_profiles(traj.final)
        tol = 1e-14 if rep != "boussinesq_omega_rho" else 1e-6
        assert max(np.max(np.abs(a.coeffs - b.coeffs)) for a, b in zip(p0, p1)) < tol


def test_energy_identity_and_conservation():
    st = initial_state("boussinesq_Z", G, 0.5, seed=1)
    assert energy_identity_residual(st) < 1e-14
    traj = run_simulation(st, StepperConfig(0.02, 1.0))
    assert traj.ledger["max_energy_identity_residual"] < 1e-12
    assert traj.ledger["max_l2_drift"] < 1e-8


@pytest.mark.parametrize("rep", ["sqg_theta", "boussinesq_Z"])
def test_rk4_order(rep):
    st = initial_state(rep, G, 1.0, seed=0)

    def final(dt):
        return run_simulation(st, StepperConfig(dt, 1.0), cfl_guard=False).final

    ref = final(0.0125)
    errs = [max(np.max(np.abs(a.coeffs - b.coeffs)) for a, b in zip(final(dt).fields, ref.fields))
            for dt in (0.1, 0.05)]
    assert math.log2(errs[0] / errs[1]) >= 3.7


def test_checkpoint_roundtrip(tmp_path):
    st = initial_state("boussinesq_Z", G, 0.2, seed=9)
    st = FlowState(st.representation, st.fields, 1.25)
    write_checkpoint(st, tmp_path / "a.ckpt")
    back = read_checkpoint(tmp_path / "a.ckpt")
    assert back.representation == st.representation and back.time == 1.25 and back.grid == G
    assert all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(st.fields, back.fields))
    (tmp_path / "bad.ckpt").write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        read_checkpoint(tmp_path / "bad.ckpt")


def test_blow_up_aborts():
    g = GridSpec(32, 2 * np.pi * 4)
    st = initial_state("sqg_theta", g, 1e6)
    with np.errstate(all="ignore"), pytest.warns(CFLWarning), pytest.raises(NumericalAbort):
        run_simulation(st, StepperConfig(0.5, 20.0))


def test_state_validation():
    f = SpectralField.zeros(G)
    with pytest.raises(ValueError):
        FlowState("sqg_theta", (f, f))
    with pytest.raises(ValueError):
        FlowState("euler", (f,))
    with pytest.raises(ValueError):
        StepperConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        run_simulation(FlowState("sqg_theta", (f,)), StepperConfig(0.1, 0.1), monitors=("energy",))


def test_zero_data_keeps_monitors_constant():
    st = initial_state("sqg_theta", G, 0.0)
    traj = run_simulation(st, StepperConfig(0.1, 1.0), monitors=("l2", "sobolev", "b", "x"))
    assert all(r.l2 == 0 and r.sobolev == 0 and r.b == 0 and r.x == 0 for r in traj.rows)
