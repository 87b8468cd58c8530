import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratwave.scans import (MEASURE_CONFIG, NULL_REGIMES, SIGMA_C0, SIGMA_CONFIGS,
                             EmptyRegionError, PreconditionError, calibrate_sigma_c0,
                             derivative_floor, resonant_measure_check, scan_null_structure,
                             scan_sigma_lower_bound, transform_l1, verify_case_organisation,
                             w_norm_estimate, write_scan_csv)
from stratwave.symbols import MultiplierSpec, PhaseSpec, ShellConfig


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=5, deadline=None)
def test_null_scan_is_deterministic_and_worker_independent(seed):
    spec, shells = MultiplierSpec("m0"), NULL_REGIMES["unit"]
    a = scan_null_structure(spec, shells, 2000, seed, workers=1)
    b = scan_null_structure(spec, shells, 2000, seed, workers=4)
    assert a.csv_row() == b.csv_row()


def test_scan_csv_is_byte_identical(tmp_path):
    phase, shells = SIGMA_CONFIGS["no_gap"]
    for name in ("a.csv", "b.csv"):
        write_scan_csv([scan_sigma_lower_bound(phase, shells, 3000, seed=7)], tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_null_ratio_bounded_in_unit_regime():
    for spec in (MultiplierSpec("m0"), MultiplierSpec("m_plus_minus", -1, 1, -1)):
        r = scan_null_structure(spec, NULL_REGIMES["unit"], 5000)
        assert 0 < r.value < 10


def test_degenerate_regime_exhibits_null_structure():
    # xi - eta and eta both nearly horizontal: the outer-minus quadratic symbols vanish
    r = scan_null_structure(MultiplierSpec("m_mu_mu", 1, -1, -1), NULL_REGIMES["degenerate"], 2000)
    assert r.value < 1e-12


def test_empty_region_raises():
    with pytest.raises(EmptyRegionError):
        scan_null_structure(MultiplierSpec("m0"), ShellConfig.make((0, 0, 5), 0), 100)


def test_sigma_scan_needs_q():
    with pytest.raises(ValueError):
        scan_sigma_lower_bound(PhaseSpec(), NULL_REGIMES["unit"], 10)


def test_sigma_scan_small():
    phase, shells = SIGMA_CONFIGS["gap_in_p"]
    r = scan_sigma_lower_bound(phase, shells, 5000, seed=1)
    assert not r.violations and r.value >= SIGMA_C0


def test_calibration_on_a_small_lattice_is_consistent():
    cal = calibrate_sigma_c0(m=16)
    assert cal["overall_min"] >= SIGMA_C0
    assert cal == calibrate_sigma_c0(m=16, workers=4)


def test_case_organisation_small():
    rep = verify_case_organisation(5000, seed=2)
    assert rep.passed
    assert all(v >= 5000 for v in rep.case_counts.values())


def test_resonant_measure_precondition():
    phase, shells = MEASURE_CONFIG
    with pytest.raises(PreconditionError):
        resonant_measure_check(phase, shells, 0.1, 100.0, samples=1000, n_xi=2)
    with pytest.raises(ValueError):
        resonant_measure_check(phase, shells, 0.1, 1.0, direction="zeta")


def test_resonant_measure_saturates_for_large_lambda():
    phase, shells = MEASURE_CONFIG
    K = derivative_floor(phase, shells, "eta1")
    r = resonant_measure_check(phase, shells, 100.0, K, samples=20000, n_xi=4)
    assert r.measure == pytest.approx(r.full_measure)


def test_transform_l1_of_separable_gaussian():
    # g = exp(-|x|^2/2) in 4D has F(g) = (2 pi)^2 exp(-|k|^2/2), L1 norm (2 pi)^4
    n, R = 32, 8.0
    h = 2 * R / n
    c = -R + h * np.arange(n)
    x = np.meshgrid(c, c, c, c, indexing="ij", sparse=True)
    g = np.exp(-sum(xi ** 2 for xi in x) / 2)
    assert transform_l1(g, h) == pytest.approx((2 * np.pi) ** 4, rel=1e-6)


def test_w_norm_oracle():
    shells = ShellConfig.make(2, 0)
    rep = w_norm_estimate(None, shells, 32,
                          symbol=lambda xi, eta: np.exp(-np.sum(xi ** 2, -1) - np.sum(eta ** 2, -1)))
    assert rep.estimate / (16 * np.pi ** 4) == pytest.approx(1.0, rel=1e-4)
    with pytest.raises(ValueError):
        w_norm_estimate(None, shells, 64)
