"""Sampling scans over shell-localized frequency configurations.

Every scan is deterministic given ``(seed, samples)``: the seed is split into a fixed
number of independent substreams (``numpy.random.SeedSequence.spawn``), each substream
produces its share of accepted samples, and the reduction runs over substreams in
order.  Worker count therefore never changes a result.

Shell membership means chi > 1/2 (the bump-product of the three localizations), which
matches the "comparable to 2^k" reading of the dyadic conventions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .localization import phi, psi
from .parallel import parallel_map
from .symbols import (MultiplierSpec, PhaseSpec, ShellConfig, _norm, eval_multiplier,
                      eval_phase, eval_sigma, grad_lam)

N_STREAMS = 16
MAX_ROUNDS = 400

# Calibrated lower-bound constant for |sigma| / 2^{k_min+k_max+p_max+q_max} on
# near-resonant samples.  Produced by ``calibrate_sigma_c0`` on a 64^4 lattice over
# the configurations in ``SIGMA_CONFIGS`` (minimum 0.3899 on gap_in_p), halved for safety.
SIGMA_C0 = 0.19
SIGMA_C0_LATTICE = 64


class EmptyRegionError(ValueError):
    """Rejection sampling found (almost) no points in the requested shell region."""


class PreconditionError(ValueError):
    """A scan's hypothesis does not hold on the region."""


# ---------------------------------------------------------------- sampling

# phi(x) > 1/2 exactly on [0.6, 1.2] and 1 - psi(2x) > 1/2 exactly on x > 0.6, so
# these windows tile the half-line and each vector has at most one index per quantity.
HALF_LO, HALF_HI = 0.6, 1.2


def _s_interval(p: int, q: int | None) -> tuple[float, float]:
    lo, hi = HALF_LO * 2.0 ** p, min(1.0, HALF_HI * 2.0 ** p)
    if p == 0:
        hi = 1.0
    if q is not None:
        c_lo, c_hi = HALF_LO * 2.0 ** q, (1.0 if q == 0 else min(1.0, HALF_HI * 2.0 ** q))
        lo = max(lo, np.sqrt(max(0.0, 1 - c_hi ** 2)))
        hi = min(hi, np.sqrt(max(0.0, 1 - c_lo ** 2)))
    if not hi > lo:
        raise EmptyRegionError(f"p={p}, q={q}: incompatible angular localizations")
    return lo, hi


def shell_vectors(rng: np.random.Generator, n: int, k: int, p: int,
                  q: int | None = None) -> np.ndarray:
    """Random vectors with |v| and s = |v_2|/|v| log-uniform on the half-level windows."""
    lo, hi = _s_interval(p, q)
    r = 2.0 ** k * np.exp(rng.uniform(np.log(HALF_LO), np.log(HALF_HI), n))
    s = np.exp(rng.uniform(np.log(max(lo, 1e-300)), np.log(hi), n))
    c = np.sqrt(np.clip(1 - s * s, 0, 1))
    sx = rng.choice([-1.0, 1.0], n)
    sy = rng.choice([-1.0, 1.0], n)
    return np.stack([sx * r * c, sy * r * s], axis=-1)


_PAIRINGS = ("xi_eta", "xi_a", "a_eta")


def _draw_pairs(rng, n, shells: ShellConfig, pairing: str):
    if pairing == "xi_eta":
        xi = shell_vectors(rng, n, *shells.xi)
        eta = shell_vectors(rng, n, *shells.eta)
    elif pairing == "xi_a":
        xi = shell_vectors(rng, n, *shells.xi)
        eta = xi - shell_vectors(rng, n, *shells.xi_minus_eta)
    else:
        a = shell_vectors(rng, n, *shells.xi_minus_eta)
        eta = shell_vectors(rng, n, *shells.eta)
        xi = a + eta
    return xi, eta


def _best_pairing(shells: ShellConfig, seed: int) -> str:
    """Pick the pairing with the highest pilot acceptance (deterministic)."""
    best, rate = "xi_eta", -1.0
    for pairing in _PAIRINGS:
        rng = np.random.default_rng([seed, 7919, _PAIRINGS.index(pairing)])
        try:
            xi, eta = _draw_pairs(rng, 4000, shells, pairing)
        except EmptyRegionError:
            continue
        acc = float(np.mean(shells.chi(xi, eta) > 0.5))
        if acc > rate:
            best, rate = pairing, acc
    if rate <= 0:
        raise EmptyRegionError(f"no pilot sample landed in shell region {shells}")
    return best


def _streams(seed: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(N_STREAMS)


def _quota(samples: int) -> list[int]:
    base, extra = divmod(samples, N_STREAMS)
    return [base + (i < extra) for i in range(N_STREAMS)]


def _accepted_pairs(ss, want, shells, pairing, transform=None):
    """Draw until ``want`` samples satisfy chi > 1/2 (after an optional transform)."""
    rng = np.random.default_rng(ss)
    got_xi, got_eta, drawn = [], [], 0
    have = 0
    batch = max(256, 2 * want)
    for _ in range(MAX_ROUNDS):
        xi, eta = _draw_pairs(rng, batch, shells, pairing)
        drawn += batch
        if transform is not None:
            xi, eta = transform(xi, eta)
        keep = shells.chi(xi, eta) > 0.5
        got_xi.append(xi[keep])
        got_eta.append(eta[keep])
        have += int(keep.sum())
        if have >= want:
            break
    else:
        raise EmptyRegionError(f"only {have} of {want} samples accepted in {shells}")
    return np.concatenate(got_xi)[:want], np.concatenate(got_eta)[:want], drawn


# ---------------------------------------------------------------- null structure

@dataclass
class ScanReport:
    config_id: str
    samples: int
    statistic: str
    value: float
    argmax_xi: tuple[float, float]
    argmax_eta: tuple[float, float]
    extra: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        return [self.config_id, self.samples, self.statistic, f"{self.value:.17g}",
                *(f"{v:.17g}" for v in self.argmax_xi), *(f"{v:.17g}" for v in self.argmax_eta)]


CSV_HEADER = ["config_id", "samples", "statistic", "value",
              "argmax_xi1", "argmax_xi2", "argmax_eta1", "argmax_eta2"]


def write_scan_csv(reports: list[ScanReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in reports:
            w.writerow(r.csv_row())


def null_bound_scale(shells: ShellConfig) -> float:
    """2^k 2^{p_max}, times 2^{q_max} for q-localized shells."""
    e = shells.xi[0] + shells.p_max + (shells.q_max if shells.has_q else 0)
    return 2.0 ** e


def scan_null_structure(spec: MultiplierSpec, shells: ShellConfig, samples: int,
                        seed: int = 0, workers: int | None = 1) -> ScanReport:
    """sup over shell samples of |m| / (2^k 2^{p_max} [2^{q_max}])."""
    pairing = _best_pairing(shells, seed)
    scale = null_bound_scale(shells)

    def run(args):
        ss, want = args
        xi, eta, drawn = _accepted_pairs(ss, want, shells, pairing)
        ratio = np.abs(np.asarray(eval_multiplier(spec, xi, eta))) / scale
        i = int(np.argmax(ratio))
        return float(ratio[i]), xi[i], eta[i], drawn

    parts = parallel_map(run, list(zip(_streams(seed), _quota(samples))), workers)
    best = max(range(len(parts)), key=lambda j: (parts[j][0], -j))
    v, x, e, _ = parts[best]
    return ScanReport(f"{spec.label}|{shells.name}", samples, "sup_ratio", v,
                      tuple(map(float, x)), tuple(map(float, e)),
                      {"pairing": pairing, "drawn": sum(p[3] for p in parts)})


NULL_REGIMES = {
    "unit": ShellConfig.make(0, 0, name="unit"),
    "degenerate": ShellConfig.make((1, 0, 0), -20, name="degenerate"),
    "gap": ShellConfig.make((0, 1, 1), (-12, 0, 0), name="gap"),
}


# ---------------------------------------------------------------- sigma lower bound

def sigma_bound_scale(shells: ShellConfig) -> float:
    return 2.0 ** (shells.k_min + shells.k_max + shells.p_max + shells.q_max)


def _unit_directions(s: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    return np.stack([sx * np.sqrt(np.clip(1 - s * s, 0, 1)), sy * s], axis=-1)


def _resonant_triangles(phase: PhaseSpec, shells: ShellConfig, s_xi, s_eta, signs, target, scale_u):
    """Triangles xi = a + eta with Phi(xi, eta) = target.

    The directions of xi and eta are given (through s = |v_2|/|v| and sign arrays);
    Lambda(a) is then fixed by the level condition, which fixes the direction of a up to
    the sign of a_2, and xi = t e_a + rho e_eta determines the triangle's shape.  The
    overall scale is placed at fraction ``scale_u`` of the interval allowed by the three
    radius windows.  Returns (xi, eta, ok).
    """
    e_xi = _unit_directions(s_xi, signs[0], signs[1])
    e_eta = _unit_directions(s_eta, signs[2], signs[3])
    c = (phase.outer * e_xi[..., 0] - phase.nu * e_eta[..., 0] - target) / phase.mu
    ok = np.abs(c) <= 1
    c = np.clip(c, -1, 1)
    e_a = np.stack([c, signs[4] * np.sqrt(1 - c * c)], axis=-1)
    det = e_a[..., 0] * e_eta[..., 1] - e_a[..., 1] * e_eta[..., 0]
    ok &= np.abs(det) > 1e-12
    det = np.where(ok, det, 1.0)
    t = (e_xi[..., 0] * e_eta[..., 1] - e_xi[..., 1] * e_eta[..., 0]) / det
    rho = (e_a[..., 0] * e_xi[..., 1] - e_a[..., 1] * e_xi[..., 0]) / det
    ok &= (t > 0) & (rho > 0)
    t, rho = np.where(ok, t, 1.0), np.where(ok, rho, 1.0)
    (k, _, _), (k1, _, _), (k2, _, _) = shells.triples
    lo = np.maximum.reduce([np.full_like(t, HALF_LO * 2.0 ** k), HALF_LO * 2.0 ** k1 / t,
                            HALF_LO * 2.0 ** k2 / rho])
    hi = np.minimum.reduce([np.full_like(t, HALF_HI * 2.0 ** k), HALF_HI * 2.0 ** k1 / t,
                            HALF_HI * 2.0 ** k2 / rho])
    ok &= hi > lo
    R = np.exp(np.log(lo) + scale_u * (np.log(np.maximum(hi, lo)) - np.log(lo)))
    xi = R[..., None] * e_xi
    eta = (R * rho)[..., None] * e_eta
    ok &= shells.chi(xi, eta) > 0.5
    return xi, eta, ok


def _log_uniform(rng, lo, hi, n):
    return np.exp(rng.uniform(np.log(max(lo, 1e-300)), np.log(hi), n))


@dataclass
class SigmaScanReport(ScanReport):
    violations: list = field(default_factory=list)
    near_raw: int = 0
    far_raw: int = 0


def scan_sigma_lower_bound(phase: PhaseSpec, shells: ShellConfig, samples: int,
                           seed: int = 0, c0: float = SIGMA_C0,
                           workers: int | None = 1) -> SigmaScanReport:
    """min of |sigma| / 2^{k_min+k_max+p_max+q_max} over near-resonant shell samples.

    Near-resonant means |Phi| < 2^{q_max - 10}.  That set is thin, so samples are drawn
    on level sets Phi = T with T uniform below the threshold (see
    ``_resonant_triangles``).  Independently, plain shell samples are classified near/far
    to document how the dichotomy excludes the rest.
    """
    if not shells.has_q:
        raise ValueError("the sigma dichotomy needs q-localized shells")
    thr = 2.0 ** (shells.q_max - 10)
    scale = sigma_bound_scale(shells)
    s_xi_win = _s_interval(*shells.xi[1:])
    s_eta_win = _s_interval(*shells.eta[1:])
    try:
        pairing = _best_pairing(shells, seed)
    except EmptyRegionError:
        pairing = None

    def run(args):
        ss, want = args
        rng = np.random.default_rng(ss)
        xs, es, have = [], [], 0
        batch = max(1024, 4 * want)
        for _ in range(MAX_ROUNDS):
            signs = rng.choice([-1.0, 1.0], size=(5, batch))
            xi, eta, ok = _resonant_triangles(
                phase, shells, _log_uniform(rng, *s_xi_win, batch), _log_uniform(rng, *s_eta_win, batch),
                signs, 0.99 * thr * rng.uniform(-1, 1, batch), rng.random(batch))
            xs.append(xi[ok])
            es.append(eta[ok])
            have += int(ok.sum())
            if have >= want:
                break
        else:
            raise EmptyRegionError(f"only {have} of {want} near-resonant samples in {shells}")
        xi, eta = np.concatenate(xs)[:want], np.concatenate(es)[:want]
        assert np.all(np.abs(np.asarray(eval_phase(phase, xi, eta))) < thr)
        ratio = np.abs(np.asarray(eval_sigma(xi, eta))) / scale
        i = int(np.argmin(ratio))
        viol = [(float(ratio[j]), tuple(xi[j]), tuple(eta[j])) for j in np.flatnonzero(ratio < c0)]
        counts = [0, 0]
        if pairing is not None:
            rx, re_ = _draw_pairs(rng, 4 * want, shells, pairing)
            inside = shells.chi(rx, re_) > 0.5
            near = np.abs(np.asarray(eval_phase(phase, rx, re_))) < thr
            counts = [int(np.sum(inside & near)), int(np.sum(inside & ~near))]
        return float(ratio[i]), xi[i], eta[i], viol, counts

    parts = parallel_map(run, list(zip(_streams(seed), _quota(samples))), workers)
    best = min(range(len(parts)), key=lambda j: (parts[j][0], j))
    v, x, e = parts[best][:3]
    return SigmaScanReport(f"{phase.label}|{shells.name}", samples, "min_ratio", v,
                           tuple(map(float, x)), tuple(map(float, e)),
                           {"c0": c0, "threshold": thr},
                           violations=[item for p in parts for item in p[3]],
                           near_raw=sum(p[4][0] for p in parts),
                           far_raw=sum(p[4][1] for p in parts))


SIGMA_CONFIGS = {
    "gap_in_p": (PhaseSpec(1, 1, 1),
                 ShellConfig.make(0, (-12, 0, 0), (0, -1, -1), name="gap_in_p")),
    "gap_in_p_mixed": (PhaseSpec(-1, 1, -1),
                       ShellConfig.make((0, 1, 1), (-12, 0, 0), (0, -1, 0), name="gap_in_p_mixed")),
    "no_gap": (PhaseSpec(1, 1, 1),
               ShellConfig.make((1, 1, 0), 0, (0, -1, -1), name="no_gap")),
    "no_gap_b": (PhaseSpec(1, 1, 1),
                 ShellConfig.make((0, 1, 1), 0, (-1, -1, 0), name="no_gap_b")),
}


def calibrate_sigma_c0(m: int = SIGMA_C0_LATTICE, configs: dict | None = None,
                       workers: int | None = 1) -> dict:
    """Deterministic lattice scan over m^4 resonant configurations per setting.

    Lattice axes: direction of xi (m values of s times the four sign quadrants folded
    into m), direction of eta (m), the level T (m/2 values in the near-resonant band)
    with both signs of a_2, and the scale (m values across the admissible interval).
    Returns the minimum ratio per configuration and overall.
    """
    configs = SIGMA_CONFIGS if configs is None else configs
    out = {}
    for name, (phase, shells) in configs.items():
        thr = 2.0 ** (shells.q_max - 10)
        scale = sigma_bound_scale(shells)

        def axis(win, quads):
            s = np.exp(np.linspace(np.log(max(win[0], 1e-300)), np.log(win[1]), m // 4 + 2)[1:-1])
            sx = np.repeat([-1.0, -1.0, 1.0, 1.0], len(s))
            sy = np.repeat([-1.0, 1.0, -1.0, 1.0], len(s))
            return np.tile(s, 4), sx, sy

        sxi, sx1, sy1 = axis(_s_interval(*shells.xi[1:]), 4)
        seta, sx2, sy2 = axis(_s_interval(*shells.eta[1:]), 4)
        levels = 0.99 * thr * np.linspace(-1, 1, m // 2)
        us = np.linspace(0, 1, m)

        def block(i):
            # one xi direction against the full eta x level x sign x scale lattice
            J, T, A, U = np.meshgrid(np.arange(len(seta)), levels, [-1.0, 1.0], us, indexing="ij")
            J, T, A, U = J.ravel(), T.ravel(), A.ravel(), U.ravel()
            n = len(J)
            signs = np.stack([np.full(n, sx1[i]), np.full(n, sy1[i]), sx2[J], sy2[J], A])
            xi, eta, ok = _resonant_triangles(phase, shells, np.full(n, sxi[i]), seta[J], signs, T, U)
            if not np.any(ok):
                return np.inf, 0
            ratio = np.abs(np.asarray(eval_sigma(xi[ok], eta[ok]))) / scale
            return float(ratio.min()), int(ok.sum())

        parts = parallel_map(block, list(range(len(sxi))), workers)
        out[name] = {"min_ratio": min(p[0] for p in parts),
                     "accepted": sum(p[1] for p in parts),
                     "lattice_points": len(sxi) * len(seta) * len(levels) * 2 * len(us)}
    out["overall_min"] = min(v["min_ratio"] for k, v in out.items())
    return out


# ---------------------------------------------------------------- case organisation

def _index_of(v, top_zero: bool) -> np.ndarray:
    """The unique index whose bump exceeds 1/2 at v, or a large sentinel if none does."""
    v = np.asarray(v, float)
    base = np.floor(np.log2(np.maximum(v, 1e-300) / 1.6)).astype(int) + 1
    out = np.full(v.shape, 10 ** 6)
    for c in (base, base + 1):
        if top_zero:
            w = np.where(c < 0, phi(np.ldexp(v, -np.minimum(c, 0))), 0.0)
        else:
            w = phi(np.ldexp(v, -c))
        out = np.where(w > 0.5, c, out)
    if top_zero:
        out = np.where(1 - psi(2 * v) > 0.5, 0, out)
    return out


def kp_indices(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, float)
    r = _norm(v)
    s = np.abs(v[..., 1]) / np.where(r > 0, r, 1.0)
    return _index_of(r, False), _index_of(s, True)


CASE_CLAUSES = (
    "case1: p <= min(p1,p2)-3",
    "case1: |p1-p2| <= 5",
    "case2: |k-k2| <= 2",
    "case2: p_max = p1",
    "case2: alternatives",
    "case3: |k-k1| <= 2",
    "case3: p_max = p2",
    "case3: alternatives (|p-p1| <= 10)",
)
LITERAL_CLAUSE = "case3: alternatives as printed (|p-p1| <= 2)"


@dataclass
class CaseRow:
    clause: str
    samples: int
    violations: int
    gating: bool = True

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class CaseReport:
    rows: list[CaseRow]
    case_counts: dict
    skipped: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.gating)


def _case_family(rng, n, fam):
    def polar(n, klo, khi, plo, phi_):
        r = 2.0 ** rng.uniform(klo, khi, n)
        s = np.minimum(2.0 ** rng.uniform(plo, phi_, n), 1.0)
        th = np.arcsin(s) * rng.choice([-1, 1], n)
        th = np.where(rng.random(n) < 0.5, th, np.pi - th)
        return np.stack([r * np.cos(th), r * np.sin(th)], 1)

    xi = polar(n, -3, 3, -22, -8)
    if fam == 0:
        eta = polar(n, -3, 3, -8, 0)
    elif fam == 1:
        eta = xi - polar(n, -9, -1, -8, 0)
    else:
        eta = polar(n, -9, -1, -8, 0)
    return xi, eta


def _case_checks(xi, eta):
    (k, p), (k1, p1), (k2, p2) = kp_indices(xi), kp_indices(xi - eta), kp_indices(eta)
    valid = np.all([x < 10 ** 5 for x in (k, p, k1, p1, k2, p2)], axis=0)
    pmax = np.maximum(p, np.maximum(p1, p2))
    pmin = np.minimum(p, np.minimum(p1, p2))
    hyp = valid & (p == pmin) & (p <= pmax - 10)
    c1 = hyp & (np.abs(k1 - k2) <= 4)
    c2 = hyp & (k1 < k2 - 4)
    c3 = hyp & (k2 < k1 - 4)
    alt2 = (((p <= p2 - 10) & (p2 - 10 <= p1 - 12) & (p2 + k2 - 2 <= p1 + k1) & (p1 + k1 <= p2 + k2 + 2))
            | ((np.abs(p - p2) <= 10) & (p1 + k1 <= p2 + k2 + 3)))
    first3 = (p <= p1 - 10) & (p1 - 10 <= p2 - 12) & (p2 + k2 - 2 <= p1 + k1) & (p1 + k1 <= p2 + k2 + 2)
    alt3 = first3 | ((np.abs(p - p1) <= 10) & (p2 + k2 <= p1 + k1 + 3))
    alt3_lit = first3 | ((np.abs(p - p1) <= 2) & (p2 + k2 <= p1 + k1 + 3))
    checks = [
        (c1, p <= np.minimum(p1, p2) - 3),
        (c1, np.abs(p1 - p2) <= 5),
        (c2, np.abs(k - k2) <= 2),
        (c2, pmax == p1),
        (c2, alt2),
        (c3, np.abs(k - k1) <= 2),
        (c3, pmax == p2),
        (c3, alt3),
        (c3, alt3_lit),
    ]
    counts = np.array([c1.sum(), c2.sum(), c3.sum()])
    viol = np.array([np.sum(m & ~ok) for m, ok in checks])
    return counts, viol, int(np.sum(~hyp))


def verify_case_organisation(samples: int = 100_000, seed: int = 0,
                             workers: int | None = 1) -> CaseReport:
    """Sample until each of the three cases holds ``samples`` hypothesis-satisfying points."""
    counts = np.zeros(3, int)
    viol = np.zeros(len(CASE_CLAUSES) + 1, int)
    skipped = 0
    streams = _streams(seed)
    rngs = [np.random.default_rng(s) for s in streams]
    batch = max(2000, samples // 4)
    for _ in range(200):
        need = [f for f in range(3) if counts[f] < samples]
        if not need:
            break

        def run(i):
            xi, eta = _case_family(rngs[i], batch // N_STREAMS + 1, need[i % len(need)])
            return _case_checks(xi, eta)

        for c, v, s in parallel_map(run, list(range(N_STREAMS)), workers):
            counts += c
            viol += v
            skipped += s
    else:
        raise EmptyRegionError("case organisation sampler did not fill every case")
    rows = [CaseRow(name, int(counts[0 if name.startswith("case1") else
                                     1 if name.startswith("case2") else 2]), int(v))
            for name, v in zip(CASE_CLAUSES, viol[:-1])]
    rows.append(CaseRow(LITERAL_CLAUSE, int(counts[2]), int(viol[-1]), gating=False))
    return CaseReport(rows, {"case1": int(counts[0]), "case2": int(counts[1]),
                             "case3": int(counts[2])}, skipped)


# ---------------------------------------------------------------- resonant measure

@dataclass
class MeasureReport:
    lam: float
    K: float
    direction: str
    measure: float
    bound_scale: float
    ratio: float
    full_measure: float
    min_derivative: float


def _phase_partial(phase: PhaseSpec, xi, eta, direction: str) -> np.ndarray:
    a = xi - eta
    if direction.startswith("eta"):
        g = phase.mu * grad_lam(a) - phase.nu * grad_lam(eta)
    else:
        g = phase.outer * grad_lam(xi) - phase.mu * grad_lam(a)
    return g[..., 0] if direction.endswith("1") else g[..., 1]


def derivative_floor(phase: PhaseSpec, shells: ShellConfig, direction: str,
                     samples: int = 20_000, seed: int = 0) -> float:
    """min |d Phi| over shell samples (chi > 1/2); used to choose K."""
    pairing = _best_pairing(shells, seed)
    xi, eta, _ = _accepted_pairs(_streams(seed)[0], samples, shells, pairing)
    return float(np.min(np.abs(_phase_partial(phase, xi, eta, direction))))


def resonant_measure_check(phase: PhaseSpec, shells: ShellConfig, lam_: float, K: float,
                           direction: str = "eta1", samples: int = 200_000, n_xi: int = 16,
                           seed: int = 0) -> MeasureReport:
    """Monte Carlo sup over xi of int |chi psi(Phi/lambda)|^2 d eta against 2^{k2+p2} lambda / K.

    The xi-variants use the symmetric bound 2^{k+p} lambda / K.
    """
    if direction not in ("eta1", "eta2", "xi1", "xi2"):
        raise ValueError(f"unknown direction {direction!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    pairing = _best_pairing(shells, seed)
    xs, es, _ = _accepted_pairs(_streams(seed)[1], max(20_000, n_xi), shells, pairing)
    dmin = float(np.min(np.abs(_phase_partial(phase, xs, es, direction))))
    if dmin < K / 2:
        raise PreconditionError(f"|d_{direction} Phi| reaches {dmin:.3g} < K/2 = {K / 2:.3g}")
    xis = xs[:n_xi]
    k2 = shells.eta[0]
    R = 1.6 * 2.0 ** k2
    area = (2 * R) ** 2
    best, full = 0.0, 0.0
    for x in xis:
        eta = rng.uniform(-R, R, size=(samples, 2))
        xx = np.broadcast_to(x, eta.shape)
        chi2 = shells.chi(xx, eta) ** 2
        cut = psi(np.asarray(eval_phase(phase, xx, eta)) / lam_) ** 2
        best = max(best, float(area * np.mean(chi2 * cut)))
        full = max(full, float(area * np.mean(chi2)))
    kk, pp = (shells.eta[0], shells.eta[1]) if direction.startswith("eta") else (shells.xi[0], shells.xi[1])
    scale = 2.0 ** (kk + pp) * lam_ / K
    return MeasureReport(lam_, K, direction, best, scale, best / scale, full, dmin)


# ---------------------------------------------------------------- W norm

@dataclass
class WNormReport:
    estimate: float
    coarse_estimate: float
    reference: float
    ratio: float
    relative_change: float

    @property
    def resolved(self) -> bool:
        return self.relative_change < 0.5


def transform_l1(values: np.ndarray, h: float) -> float:
    """Approximate ||F(g)||_{L^1} from samples of g on a d-dimensional lattice of spacing h.

    With N points per axis the continuum transform on the dual lattice is
    h^d fftn(g) at spacing 2 pi/(N h), so the L^1 norm is (2 pi)^d sum|fftn(g)| / N^d.
    """
    d = values.ndim
    n = values.shape[0]
    return float((2 * np.pi) ** d * np.sum(np.abs(np.fft.fftn(values))) / n ** d)


def _symbol_on_lattice(fn, shells: ShellConfig, n: int) -> tuple[np.ndarray, float]:
    Rx = 1.6 * 2.0 ** shells.xi[0]
    Re = 1.6 * 2.0 ** shells.eta[0]
    # one common spacing keeps the lattice a cube; the box covers both supports
    R = max(Rx, Re)
    h = 2 * R / n
    c = -R + h * np.arange(n)
    x1, x2, e1, e2 = np.meshgrid(c, c, c, c, indexing="ij", sparse=True)
    xi = np.stack(np.broadcast_arrays(x1, x2, e1, e2)[:2], axis=-1)
    eta = np.stack(np.broadcast_arrays(x1, x2, e1, e2)[2:], axis=-1)
    return fn(xi, eta), h


def w_norm_estimate(spec: MultiplierSpec | None, shells: ShellConfig, grid_size: int = 32,
                    lam_: float | None = None, symbol=None) -> WNormReport:
    """||F(m chi)||_{L^1} on a grid_size^4 lattice, with a half-resolution rerun.

    With ``lam_`` set the symbol is (1 - psi(Phi/lambda)) chi / Phi and the reference
    scale is 1/lambda; otherwise the symbol is m chi against 2^{k + p_max}.  A custom
    ``symbol(xi, eta)`` overrides both (reference 1).
    """
    if grid_size > 32:
        raise ValueError("grid_size is capped at 32 (the 4D transform is O(N^4 log N))")
    if symbol is not None:
        fn, ref = symbol, 1.0
    elif lam_ is not None:
        phase = spec.phase if spec is not None else PhaseSpec()

        def fn(xi, eta):
            ph = np.asarray(eval_phase(phase, xi, eta))
            nr = (1 - psi(ph / lam_)) * shells.chi(xi, eta)
            out = np.zeros_like(nr)
            np.divide(nr, ph, out=out, where=np.abs(ph) > 0.5 * lam_)
            return out
        ref = 1.0 / lam_
    else:
        def fn(xi, eta):
            return np.asarray(eval_multiplier(spec, xi, eta)) * shells.chi(xi, eta)
        ref = 2.0 ** (shells.xi[0] + shells.p_max)
    vals, h = _symbol_on_lattice(fn, shells, grid_size)
    est = transform_l1(vals, h)
    vals_c, h_c = _symbol_on_lattice(fn, shells, grid_size // 2)
    coarse = transform_l1(vals_c, h_c)
    # change relative to the coarse value: the percentage change under one doubling
    change = abs(est - coarse) / coarse if coarse > 0 else 0.0
    return WNormReport(est, coarse, ref, est / ref, change)


# Configuration for the resonant-measure check: d_{eta_1} Phi^{+-}_+ equals
# a_2^2/|a|^3 + eta_2^2/|eta|^3, which is bounded below on unit shells.
MEASURE_CONFIG = (PhaseSpec(1, 1, -1), ShellConfig.make(0, 0, name="unit"))
