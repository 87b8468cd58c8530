import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratwave.spectral import (BoundaryMassWarning, GridSpec, SpectralField, apply_rotation_vf,
                                apply_scaling_vf, apply_semigroup, riesz_symbol, riesz_transform,
                                to_physical, to_spectral)

G = GridSpec(128, 40.0)


def gaussian(g, w=1.0, c=(0.0, 0.0)):
    x1, x2 = g.x
    return np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2) / (2 * w * w))


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        GridSpec(100, 1.0)
    with pytest.raises(ValueError):
        GridSpec(64, 0.0)


def test_roundtrip_and_plancherel():
    f = gaussian(G) * np.cos(2 * G.x[0])
    c = to_spectral(f)
    assert np.max(np.abs(to_physical(c) - f)) < 1e-14
    F = SpectralField(G, c)
    assert F.l2() == pytest.approx(np.sqrt(np.sum(f ** 2)) * G.dx, rel=1e-13)


def test_gaussian_transform_matches_continuum():
    F = SpectralField.from_physical(G, gaussian(G))
    exact = 2 * np.pi * np.exp(-G.xi_abs ** 2 / 2)
    assert np.max(np.abs(F.fourier_values() - exact)) < 1e-12


def test_riesz_symbol_values():
    assert riesz_symbol(1.0, 0.0) == 1.0
    assert riesz_symbol(0.0, 0.0) == 0.0
    assert riesz_symbol(3.0, 4.0) == pytest.approx(0.6)


def test_riesz_transform_keeps_real_fields_real():
    F = SpectralField.from_physical(G, gaussian(G, c=(1.0, -2.0)))
    assert riesz_transform(F).hermitian_defect() < 1e-15
    assert apply_semigroup(F, 3.7).hermitian_defect() < 1e-15


@given(st.floats(-100, 100))
@settings(max_examples=25, deadline=None)
def test_semigroup_is_unitary_group(t):
    F = SpectralField.from_physical(G, gaussian(G))
    Ft = apply_semigroup(F, t)
    assert Ft.l2() == pytest.approx(F.l2(), rel=1e-12)
    back = apply_semigroup(Ft, t, sign=-1)
    assert np.max(np.abs(back.coeffs - F.coeffs)) < 1e-15


def test_scaling_and_rotation_fields_on_gaussian():
    g = GridSpec(256, 40.0)
    f = gaussian(g)
    r2 = g.x[0] ** 2 + g.x[1] ** 2
    assert np.max(np.abs(apply_scaling_vf(f, g) + r2 * f)) < 1e-10
    assert np.max(np.abs(apply_rotation_vf(f, g))) < 1e-10


def test_boundary_mass_warning():
    f = gaussian(G, w=6.0)
    with pytest.warns(BoundaryMassWarning):
        apply_scaling_vf(f, G)
