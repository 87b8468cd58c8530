"""Acceptance criteria 1-14.

Each test records one PASS/FAIL line; the lines are printed together at the end of
the session (see conftest.py).  Constants named ``*_C`` are measured values frozen
with a small margin; the measurements are listed next to them.
"""
import math
import time
import warnings

import numpy as np

from stratwave.bilinear import (IBP_PROFILES, IBP_SHELLS, BilinearTask, GaussianRing,
                                ibp_step_check, ibp_xi_samples, nonresonant_bound_check,
                                quad_for_shells, setsize_check, symmetrization_check)
from stratwave.evolution import (StepperConfig, field_difference, initial_state,
                                 omega_rho_to_z, run_simulation)
from stratwave.localization import angular_invariant_check, band_limited_field
from stratwave.norms import (decay_experiment, decomposition_rows,
                             fourier_sup_family_ratios, small_p_ratios)
from stratwave.scans import (MEASURE_CONFIG, NULL_REGIMES, SIGMA_C0, SIGMA_CONFIGS,
                             derivative_floor, resonant_measure_check, scan_null_structure,
                             scan_sigma_lower_bound, verify_case_organisation, w_norm_estimate)
from stratwave.spectral import GridSpec, SpectralField
from stratwave.symbols import MultiplierSpec, fd_crosscheck_suite, standard_multipliers

RESULTS: dict[int, str] = {}

SMALL_P_C = 1.5e-4      # measured 1.35e-4, 1.33e-4, 1.31e-4
DECOMPOSITION_C = 6e-3  # measured max 5.05e-3
SETSIZE_C = 0.1         # measured 0.0405
BOUNDARY_C = 0.02       # measured 0.0101 at lambda = 1
FOURIER_SUP_C = 1.5     # measured 1.454
MEASURE_RATIO_MAX = 1.0  # measured about 0.21


def record(n: int, passed: bool, detail: str, soft: bool = False) -> None:
    tag = "REPORT" if soft else ("PASS" if passed else "FAIL")
    RESULTS[n] = f"criterion {n:2d}: {tag} {detail}"


def within_factor_two(values) -> bool:
    lo, hi = min(values), max(values)
    return hi <= 2 * lo if lo > 0 else hi == 0


def gaussian(g: GridSpec, w: float = 1.0) -> SpectralField:
    x1, x2 = g.x
    return SpectralField.from_physical(g, np.exp(-(x1 ** 2 + x2 ** 2) / (2 * w * w)))


def test_criterion_01_linear_decay():
    start = time.perf_counter()
    curve = decay_experiment(gaussian(GridSpec(1024, 160.0)), 0, [4, 8, 16, 32, 64, 128, 256, 512])
    elapsed = time.perf_counter() - start
    ok = abs(curve.slope + 0.5) <= 0.07 and elapsed <= 120
    record(1, ok, f"slope {curve.slope:.4f} (target -0.5 +- 0.07), {elapsed:.1f} s")
    assert ok


def test_criterion_02_small_p_regime():
    rows = small_p_ratios(gaussian(GridSpec(256, 80.0)), 0, [(-2, 4.0), (-3, 16.0), (-4, 64.0)])
    ratios = [r.ratio for r in rows]
    ok = max(ratios) <= SMALL_P_C and within_factor_two(ratios)
    record(2, ok, "ratios " + ", ".join(f"{r:.3g}" for r in ratios) + f" (C {SMALL_P_C:g})")
    assert ok


def test_criterion_03_decay_decomposition():
    g = GridSpec(256, 40.0)
    f = SpectralField.from_physical(g, band_limited_field(g, 24, 1.5, 3))
    rows = decomposition_rows(f, 1, -2, [8.0, 16.0, 32.0, 64.0, 128.0])
    split = max(r.split_residual for r in rows)
    ratios = [r.ratio for r in rows]
    growth = max(b / a for a, b in zip(ratios, ratios[1:]))
    ok = split <= 1e-10 and max(ratios) <= DECOMPOSITION_C and growth <= 2
    record(3, ok, f"split residual {split:.2e}, max ratio {max(ratios):.3g} (C {DECOMPOSITION_C:g}), "
                  f"max growth per doubling {growth:.2f}")
    assert ok


def test_criterion_04_exact_identities():
    start = time.perf_counter()
    rep = fd_crosscheck_suite(seed=0)
    elapsed = time.perf_counter() - start
    worst = max(r.max_rel_error for r in rep.rows)
    orders = [r.order for r in rep.rows if r.order is not None]
    ok = rep.passed and all(o >= 1.8 for o in orders)
    record(4, ok, f"{len(rep.rows)} rows, worst residual {worst:.2e}, "
                  f"min fd order {min(orders):.2f}, {elapsed:.1f} s")
    assert ok, [r for r in rep.rows if not r.passed]


def test_criterion_05_null_structure():
    start = time.perf_counter()
    worst, unstable = 0.0, []
    for name, shells in NULL_REGIMES.items():
        for spec in standard_multipliers():
            small = scan_null_structure(spec, shells, 10_000).value
            big = scan_null_structure(spec, shells, 100_000).value
            # values at round-off level (the degenerate regime) count as zero
            if max(small, big) > 1e-12:
                change = max(small, big) / min(small, big) if min(small, big) > 0 else math.inf
                worst = max(worst, change)
                if change > 2:
                    unstable.append(f"{spec.label}|{name}")
    elapsed = time.perf_counter() - start
    ok = not unstable and elapsed <= 60
    record(5, ok, f"21 scans, worst 1e4->1e5 change x{worst:.2f}, {elapsed:.1f} s")
    assert ok, unstable


def test_criterion_06_sigma_dichotomy():
    start = time.perf_counter()
    reports = [scan_sigma_lower_bound(phase, shells, 100_000, 0, SIGMA_C0)
               for phase, shells in SIGMA_CONFIGS.values()]
    elapsed = time.perf_counter() - start
    violations = sum(len(r.violations) for r in reports)
    ok = violations == 0 and min(r.value for r in reports) >= SIGMA_C0 and elapsed <= 120
    record(6, ok, f"min ratio {min(r.value for r in reports):.3f} >= c0 {SIGMA_C0}, "
                  f"{violations} violations, {elapsed:.1f} s")
    assert ok


def test_criterion_07_case_organisation():
    rep = verify_case_organisation(100_000, seed=0)
    gating = [r for r in rep.rows if r.gating]
    ok = rep.passed and all(v >= 100_000 for v in rep.case_counts.values())
    record(7, ok, f"{sum(r.violations for r in gating)} violations over {len(gating)} gating clauses, "
                  f"min case count {min(rep.case_counts.values())}")
    assert ok


def test_criterion_08_ibp_and_symmetrization():
    start = time.perf_counter()
    spec = MultiplierSpec("m0")
    task = BilinearTask(spec, spec.phase, 1.0, *IBP_PROFILES, shells=IBP_SHELLS)
    ibp = ibp_step_check(task, quad_for_shells(IBP_SHELLS, 96), ibp_xi_samples())
    f, g = GaussianRing(2.0, 1.0, 1.0, 1, 0.3), GaussianRing(3.0, 0.8, 0.5, 2, -0.4)
    xi = np.array([[0.7, 0.2], [-0.4, 0.9], [1.1, -0.5], [0.2, -0.3]])
    sym = symmetrization_check(f, g, xi, 1.0).max_residual
    elapsed = time.perf_counter() - start
    ok = ibp.max_residual <= 1e-6 and sym <= 1e-8 and elapsed <= 300
    record(8, ok, f"IBP residual {ibp.max_residual:.2e} (coarse {ibp.max_residual_coarse:.2e}), "
                  f"symmetrization {sym:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_09_set_size_and_normal_forms():
    spec, shells = MultiplierSpec("m_plus_minus", 1, 1, -1), NULL_REGIMES["unit"]
    size = setsize_check(MultiplierSpec("m0"), shells, 30)
    bounds = [nonresonant_bound_check(spec, shells, lam) for lam in (1.0, 0.5, 0.25)]
    phase, mshells = MEASURE_CONFIG
    K = derivative_floor(phase, mshells, "eta1")
    measures = [resonant_measure_check(phase, mshells, lam, K, "eta1", 100_000)
                for lam in (0.1, 0.05, 0.025)]
    halving = [a.measure / b.measure for a, b in zip(measures, measures[1:])]
    ok = (size.max_ratio <= SETSIZE_C and size.stable
          and all(b.max_ratio <= BOUNDARY_C and b.stable for b in bounds)
          and all(m.ratio <= MEASURE_RATIO_MAX for m in measures)
          and all(1.5 <= h <= 2.5 for h in halving))
    record(9, ok, f"set size {size.max_ratio:.3g}; boundary "
                  + "/".join(f"{b.max_ratio:.3g}" for b in bounds)
                  + "; measure ratios " + "/".join(f"{m.ratio:.3g}" for m in measures)
                  + " halving " + "/".join(f"{h:.2f}" for h in halving))
    assert ok


def test_criterion_10_w_norm():
    shells = NULL_REGIMES["unit"]
    reps = {s.label: w_norm_estimate(s, shells, 32)
            for s in (MultiplierSpec("m0"), MultiplierSpec("m_plus_minus", 1, 1, -1))}
    ok = all(math.isfinite(r.ratio) and r.relative_change < 0.5 for r in reps.values())
    record(10, ok, "; ".join(f"{k} ratio {r.ratio:.3g} change {100 * r.relative_change:.1f}% (16->32)"
                             for k, r in reps.items()))
    assert ok


def test_criterion_11_angular_machinery():
    rep = angular_invariant_check()
    ok = (rep.partition <= 1e-4 and rep.parseval <= 1e-6
          and all(0.25 <= v <= 4 for v in rep.bernstein.values())
          and all(v <= 1e-4 for v in rep.commutator.values()))
    record(11, ok, f"partition {rep.partition:.2e}, Parseval {rep.parseval:.2e}, Bernstein "
                   f"{min(rep.bernstein.values()):.3f}..{max(rep.bernstein.values()):.3f}, "
                   f"[S,R_l] max {max(rep.commutator.values()):.2e}")
    assert ok


def test_criterion_12_fourier_sup():
    ratios = fourier_sup_family_ratios(GridSpec(256, 40.0))
    ok = max(ratios) <= FOURIER_SUP_C and max(ratios) <= 2 * max(ratios[:3])
    record(12, ok, "ratios " + ", ".join(f"{r:.3g}" for r in ratios) + f" (C {FOURIER_SUP_C})")
    assert ok


def test_criterion_13_solver():
    start = time.perf_counter()
    sqg = run_simulation(initial_state("sqg_theta", GridSpec(256, 40.0), 0.05),
                         StepperConfig(2e-3, 10.0))
    drift = sqg.ledger["max_l2_drift"]
    g = GridSpec(128, 40.0)
    wr = initial_state("boussinesq_omega_rho", g, 0.01)
    cfg = StepperConfig(2e-3, 1.0)
    a, b = run_simulation(wr, cfg), run_simulation(omega_rho_to_z(wr), cfg, cadence=1)
    energy = b.ledger["max_energy_identity_residual"]
    cross = field_difference(a.final, b.final)
    st = initial_state("sqg_theta", GridSpec(64, 2 * np.pi * 4), 1.0)

    def final(dt):
        return run_simulation(st, StepperConfig(dt, 1.0), cfl_guard=False).final.fields[0].coeffs

    ref = final(0.0125)
    e1, e2 = (np.max(np.abs(final(dt) - ref)) for dt in (0.1, 0.05))
    order = math.log2(e1 / e2)
    elapsed = time.perf_counter() - start
    ok = drift <= 1e-8 and energy <= 1e-10 and cross <= 1e-5 and order >= 3.7 and elapsed <= 600
    record(13, ok, f"SQG drift {drift:.2e}, energy identity {energy:.2e}, cross-form {cross:.2e} "
                   f"(n=128), RK4 order {order:.2f}, {elapsed:.0f} s")
    assert ok


def test_criterion_14_norm_trajectory():
    """Soft: reported, never asserted."""
    st = initial_state("sqg_theta", GridSpec(512, 80.0), 0.02)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        traj = run_simulation(st, StepperConfig(0.1, 200.0), ("b", "x"), cadence=50)
    b0, x0 = traj.rows[0].b, traj.rows[0].x
    gb = max(r.b for r in traj.rows) / b0
    gx = max(r.x for r in traj.rows) / x0
    within = gb <= 3 and gx <= 3
    record(14, within, f"max B/B0 {gb:.3f}, max X/X0 {gx:.3f} over T=200 "
                       f"({'within' if within else 'exceeds'} 3x; soft, not asserted)", soft=True)
