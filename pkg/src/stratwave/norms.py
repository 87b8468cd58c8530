"""B, X and D norms, Sobolev and S-tower energies, Fourier sup control and linear decay runs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .localization import (OUTER, AngularProjector, DyadicFamily, angular_weights,
                           default_family, dyadic_bucket, p_adjusted_mode, projector_for)
from .parallel import parallel_map
from .spectral import GridSpec, SpectralField, apply_semigroup, scaling_tower, to_physical


@dataclass(frozen=True)
class NormConfig:
    beta: float = 1e-2
    beta_prime: float = 5e-3
    kappa: float | None = None
    n0: int = 8
    s_tower_depth: int = 4
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.beta_prime < self.beta:
            raise ValueError("need 0 < beta_prime < beta")
        if self.kappa is not None and not 0 < self.kappa < self.kappa_max:
            raise ValueError(f"kappa must lie in (0, {self.kappa_max:.3g})")

    @property
    def kappa_max(self) -> float:
        return (self.beta - self.beta_prime) / (1 + self.beta)

    @property
    def kappa_value(self) -> float:
        return self.kappa if self.kappa is not None else 0.5 * self.kappa_max


@dataclass(frozen=True)
class ShellRow:
    k: int
    p: int
    q: int | None
    l: int | None
    weight: float
    l2: float
    weighted: float


@dataclass
class NormReport:
    b: float = 0.0
    x: float = 0.0
    d: float = 0.0
    sobolev: float = 0.0
    s_energies: list[float] = field(default_factory=list)
    table: list[ShellRow] = field(default_factory=list)


def _l2_on(coeffs: np.ndarray, idx: np.ndarray, w: np.ndarray, box_length: float) -> float:
    return float(box_length * np.sqrt(np.sum(np.abs(w * coeffs[idx]) ** 2)))


def b_weight(k: int, p: int) -> float:
    return 2.0 ** (4 * max(k, 0)) * 2.0 ** (-min(k, 0) / 2) * 2.0 ** (-p / 2)


def x_weight(k: int, p: int, l: int, beta: float) -> float:
    return 2.0 ** (4 * max(k, 0)) * 2.0 ** ((1 + beta) * l) * 2.0 ** ((0.5 + beta) * p)


def b_table(f: SpectralField, family: DyadicFamily | None = None) -> list[ShellRow]:
    family = family or default_family(f.grid)
    c = f.coeffs.ravel()
    rows = []
    for k, p, idx, w in family.kp_shells:
        l2 = _l2_on(c, idx, w, f.grid.box_length)
        wt = b_weight(k, p)
        rows.append(ShellRow(k, p, None, None, wt, l2, wt * l2))
    return rows


def b_norm(f: SpectralField, cfg: NormConfig | None = None,
           family: DyadicFamily | None = None) -> float:
    """sup over (k, p) of 2^{4k+} 2^{-k-/2} 2^{-p/2} ||P_{k,p} f||_2."""
    return max((r.weighted for r in b_table(f, family)), default=0.0)


def _angular_top(proj: AngularProjector) -> int:
    """Smallest l whose shell lies beyond every angular order on the polar grid."""
    return int(math.ceil(math.log2(proj.polar.n_tau / 2 / 0.4)))


def x_table(f: SpectralField, cfg: NormConfig | None = None,
            family: DyadicFamily | None = None,
            projector: AngularProjector | None = None) -> list[ShellRow]:
    """Rows (k, p, l) of 2^{4k+} 2^{(1+beta) l} 2^{(1/2+beta) p} ||P_{k,p} R_l^p f||_2.

    R_l^p acts on the coefficients as a function of xi.  Angular shells beyond
    the polar grid are exact: R_bar_l = 0 and R_bar_{<=l} = Id there.
    """
    cfg = cfg or NormConfig()
    family = family or default_family(f.grid)
    proj = projector or projector_for(f.grid.n, f.grid.dk)
    l_top = _angular_top(proj)
    arr = np.fft.fftshift(f.coeffs)
    polar = proj.decompose(arr)

    def project(l, mode):
        w = angular_weights(proj.orders, l, mode)
        fill = np.zeros_like(arr) if (mode == "shell" and l > 0) else arr
        return np.fft.ifftshift(proj.synthesize(polar, w, fill)).ravel()

    ls = range(0, l_top + 1)
    shells = dict(zip(ls, parallel_map(lambda l: project(l, "shell"), ls, cfg.workers)))
    leqs = dict(zip(ls, parallel_map(lambda l: project(l, "leq"), ls, cfg.workers)))
    identity = f.coeffs.ravel()

    rows = []
    for k, p, idx, w in family.kp_shells:
        for l in range(max(0, -p), max(l_top, -p) + 1):
            mode = p_adjusted_mode(l, p)
            if mode == "leq":
                g = leqs[l] if l <= l_top else identity
            else:
                g = shells[l]
            l2 = _l2_on(g, idx, w, f.grid.box_length)
            wt = x_weight(k, p, l, cfg.beta)
            rows.append(ShellRow(k, p, None, l, wt, l2, wt * l2))
    return rows


def x_norm(f: SpectralField, cfg: NormConfig | None = None,
           family: DyadicFamily | None = None) -> float:
    return max((r.weighted for r in x_table(f, cfg, family)), default=0.0)


def d_norm(f: SpectralField, sf: SpectralField, s2f: SpectralField,
           cfg: NormConfig | None = None, family: DyadicFamily | None = None) -> float:
    """sup over n <= 2 of ||S^n f||_B + ||S^n f||_X."""
    return max(b_norm(g, cfg, family) + x_norm(g, cfg, family) for g in (f, sf, s2f))


def sobolev_norm(f: SpectralField, order: int) -> float:
    """||(1 + |xi|^2)^{order/2} f||_2."""
    w = (1.0 + f.grid.xi_abs ** 2) ** (order / 2)
    return f.with_coeffs(w * f.coeffs).l2()


def s_tower(f: SpectralField, depth: int) -> list[float]:
    """[||S^j f||_2 for j = 0..depth] with the physical scaling field."""
    g = f.grid
    return [float(np.sqrt(np.sum(h ** 2)) * g.dx)
            for h in scaling_tower(f.physical(), g, depth)]


def s_derivatives(f: SpectralField, depth: int = 2) -> list[SpectralField]:
    g = f.grid
    return [SpectralField.from_physical(g, h) for h in scaling_tower(f.physical(), g, depth)]


def norm_report(f: SpectralField, cfg: NormConfig | None = None,
                monitors: tuple[str, ...] = ("l2", "sobolev", "s_tower", "b", "x", "d"),
                family: DyadicFamily | None = None) -> NormReport:
    cfg = cfg or NormConfig()
    rep = NormReport()
    if "sobolev" in monitors:
        rep.sobolev = sobolev_norm(f, cfg.n0)
    if "s_tower" in monitors:
        rep.s_energies = s_tower(f, cfg.s_tower_depth)
    if "b" in monitors:
        rep.table += b_table(f, family)
        rep.b = max((r.weighted for r in rep.table), default=0.0)
    if "x" in monitors:
        xt = x_table(f, cfg, family)
        rep.table += xt
        rep.x = max((r.weighted for r in xt), default=0.0)
    if "d" in monitors:
        derivs = s_derivatives(f, 2)
        rep.d = d_norm(*derivs, cfg=cfg, family=family)
    return rep


def write_shell_table(rows: list[ShellRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "p", "q", "l", "weight", "l2", "weighted"])
        for r in sorted(rows, key=lambda r: (r.k, r.p, -1 if r.q is None else r.q,
                                             -1 if r.l is None else r.l)):
            w.writerow([r.k, r.p, "" if r.q is None else r.q, "" if r.l is None else r.l,
                        f"{r.weight:.17g}", f"{r.l2:.17g}", f"{r.weighted:.17g}"])


# ---------------------------------------------------------------------------
# Fourier sup control


@dataclass
class FourierSupReport:
    rows: list[tuple[int, int, float, float, float]]  # k, p, lhs, rhs, ratio
    bracket: float
    max_ratio: float


def fourier_sup_check(f: SpectralField, sf: SpectralField, cfg: NormConfig | None = None,
                      family: DyadicFamily | None = None) -> FourierSupReport:
    """Per (k, p): sup |phi_{k,p} f_hat| against 2^{-4k+} 2^{-k} (B + X of f and S f)."""
    cfg = cfg or NormConfig()
    family = family or default_family(f.grid)
    bracket = (b_norm(f, cfg, family) + b_norm(sf, cfg, family)
               + x_norm(f, cfg, family) + x_norm(sf, cfg, family))
    fhat = f.fourier_values().ravel()
    rows = []
    for k, p, idx, w in family.kp_shells:
        lhs = float(np.max(np.abs(w * fhat[idx])))
        rhs = 2.0 ** (-4 * max(k, 0)) * 2.0 ** (-k) * bracket
        rows.append((k, p, lhs, rhs, lhs / rhs if rhs > 0 else 0.0))
    return FourierSupReport(rows, bracket, max((r[4] for r in rows), default=0.0))


# ---------------------------------------------------------------------------
# linear decay


class ContaminationError(RuntimeError):
    """Wrap-around mass reached the box boundary."""


DECAY_THRESHOLD = 1e-6


@dataclass
class DecayCurve:
    times: np.ndarray
    sup: np.ndarray
    boundary_fraction: np.ndarray
    usable: np.ndarray
    fit_times: np.ndarray
    slope: float
    contaminated_from: float | None
    box_length: float
    n_eval: int


def _bucket_weight_band(r, s, k, p, k_floor, p_floor):
    w = dyadic_bucket(k, r, k_floor, 10 ** 6)
    if p is not None:
        w = w * dyadic_bucket(p, s, p_floor, 0)
    return w


def _band_transform(f0: SpectralField, dk: float, band: float) -> tuple[np.ndarray, np.ndarray]:
    """Continuum transform of the sampled f0 on the lattice dk * Z^2 inside |xi_i| <= band.

    Rows and columns where f0 is zero to double precision are skipped.
    """
    g = f0.grid
    f = f0.physical()
    m = int(math.ceil(band / dk))
    axis = np.arange(-m, m + 1) * dk
    x = (np.arange(g.n) - g.n // 2) * g.dx
    keep1 = np.max(np.abs(f), axis=1) > 1e-17 * np.max(np.abs(f), initial=0.0)
    keep2 = np.max(np.abs(f), axis=0) > 1e-17 * np.max(np.abs(f), initial=0.0)
    e1 = np.exp(-1j * np.outer(axis, x[keep1]))
    e2 = np.exp(-1j * np.outer(axis, x[keep2]))
    vals = g.dx ** 2 * (e1 @ f[np.ix_(keep1, keep2)] @ e2.T)
    return axis, vals


def _half_box_mass(h: np.ndarray) -> float:
    """Mass fraction outside the central half box for an unshifted (origin at 0) array."""
    n = h.shape[0]
    i = np.arange(n)
    far = np.minimum(i, n - i) >= n // 4
    total = np.sum(np.square(h), dtype=np.float64)
    if total == 0:
        return 0.0
    inner = np.sum(np.square(h[np.ix_(~far, ~far)]), dtype=np.float64)
    return float(1 - inner / total)


def decay_experiment(f0: SpectralField, k: int, times, cfg: NormConfig | None = None,
                     p: int | None = None, box_factor: int | str = "auto",
                     threshold: float = DECAY_THRESHOLD, oversample: float = 4.0) -> DecayCurve:
    """sup_x |P_k e^{it Lambda} f0| (or P_{k,p}) at each t, with a log-log tail fit.

    ``box_factor`` enlarges the evaluation box to ``box_factor * L`` while f0 stays
    defined on its own grid: only the band of P_k is needed, so the transform of
    the samples is evaluated on the finer frequency lattice directly.  ``'auto'``
    picks the smallest power of two keeping the fastest group velocity of the
    shell, 1 / (0.4 * 2^k), inside the central half box up to max(times).
    ``box_factor = 1`` is the plain periodic computation on f0's own grid.

    A time whose boundary mass fraction exceeds ``threshold`` is contaminated;
    it and all later times are dropped from the fit.  The fit uses the later half
    of the usable positive times.
    """
    times = np.asarray(sorted(times), dtype=float)
    g = f0.grid
    band = OUTER * 2.0 ** k
    t_max = float(times.max()) if times.size else 0.0
    if box_factor == "auto":
        need = 4 * t_max / (0.4 * 2.0 ** k)
        box_factor = max(1, 2 ** int(math.ceil(math.log2(max(need / g.box_length, 1.0)))))
    box_factor = int(box_factor)

    if box_factor == 1:
        fam = default_family(g)
        w = fam.k_weight(k) * (fam.p_weight(k, p) if p is not None else 1.0)
        base = f0.coeffs * w
        lam = g.lam
        n_eval, length = g.n, g.box_length

        def field_at(t):
            return np.fft.ifft2(base * np.exp(1j * t * lam)).real * g.n ** 2
    else:
        length = box_factor * g.box_length
        dk = 2 * np.pi / length
        axis, vals = _band_transform(f0, dk, band)
        m = (axis.size - 1) // 2
        n_eval = 1 << int(math.ceil(math.log2(max(oversample * band / dk, 2 * m + 2))))
        k1, k2 = np.meshgrid(axis, axis, indexing="ij")
        r = np.hypot(k1, k2)
        lam = np.divide(k1, r, out=np.zeros_like(r), where=r > 0)
        s = np.sqrt(np.clip(1 - lam ** 2, 0, 1))
        k_floor = int(np.floor(np.log2(dk / 1.6)))
        p_floor = int(np.clip(np.floor(np.log2(dk / (2.56 * 2.0 ** k))), -40, -1))
        base = vals / length ** 2 * _bucket_weight_band(r, s, k, p, k_floor, p_floor)
        rows = np.arange(-m, m + 1) % n_eval

        def field_at(t):
            half = np.zeros((n_eval, n_eval // 2 + 1), dtype=np.complex64)
            half[rows, : m + 1] = (base * np.exp(1j * t * lam))[:, m:] * n_eval ** 2
            return scipy.fft.irfft2(half, s=(n_eval, n_eval), overwrite_x=True)

    sups, fracs = [], []
    for t in times:
        h = field_at(t)
        sups.append(float(np.max(np.abs(h))))
        fracs.append(_half_box_mass(h))
    sups, fracs = np.array(sups), np.array(fracs)
    bad = np.flatnonzero(fracs > threshold)
    usable = np.ones(times.size, dtype=bool)
    contaminated_from = None
    if bad.size:
        usable[bad[0]:] = False
        contaminated_from = float(times[bad[0]])
    cand = np.flatnonzero(usable & (times > 0))
    fit = cand[cand.size // 2:] if cand.size >= 4 else cand
    slope = float(np.polyfit(np.log(times[fit]), np.log(sups[fit]), 1)[0]) if fit.size >= 2 else float("nan")
    return DecayCurve(times, sups, fracs, usable, times[fit], slope, contaminated_from,
                      length, n_eval)



@dataclass
class DecayDecomposition:
    i_part: SpectralField
    ii_part: SpectralField
    l0: int
    total: SpectralField


def decay_l0(t: float, p: int, kappa: float) -> int:
    """Largest integer l0 with 2^{l0} <= t 2^p (t 2^{2p})^{-kappa}."""
    v = math.log2(t) + p - kappa * (math.log2(t) + 2 * p)
    return int(math.floor(v + 1e-12))


def decay_decomposition(f: SpectralField, k: int, p: int, t: float,
                        cfg: NormConfig | None = None,
                        family: DyadicFamily | None = None) -> DecayDecomposition:
    """P_{k,p} e^{it Lambda} f = I + II with the angular cut R_{<=l0} applied to f.

    I = P_{k,p} e^{it Lambda} R_{<=l0} f and II = P_{k,p} e^{it Lambda} (Id - R_{<=l0}) f;
    for l0 < 0 the whole field is I.
    """
    cfg = cfg or NormConfig()
    family = family or default_family(f.grid)
    w = family.k_weight(k) * family.p_weight(k, p)
    total = apply_semigroup(f.with_coeffs(w * f.coeffs), t)
    l0 = decay_l0(t, p, cfg.kappa_value)
    if l0 < 0:
        return DecayDecomposition(total, f * 0.0, l0, total)
    proj = projector_for(f.grid.n, f.grid.dk)
    arr = np.fft.fftshift(f.coeffs)
    low = np.fft.ifftshift(proj.synthesize(proj.decompose(arr),
                                           angular_weights(proj.orders, l0, "leq"), arr))
    i_part = apply_semigroup(f.with_coeffs(w * low), t)
    ii_part = apply_semigroup(f.with_coeffs(w * (f.coeffs - low)), t)
    return DecayDecomposition(i_part, ii_part, l0, total)


def ii_bound(k: int, p: int, l0: int, x: float, beta: float) -> float:
    """2^{-4k+} 2^{-(1+beta)(l0+1)} 2^{-p/2 - beta p} ||f||_X."""
    return 2.0 ** (-4 * max(k, 0)) * 2.0 ** (-(1 + beta) * (l0 + 1)) * 2.0 ** (-p / 2 - beta * p) * x


def sup_norm(f: SpectralField) -> float:
    return float(np.max(np.abs(to_physical(f.coeffs))))


# ---------------------------------------------------------------------------
# desk-scale experiments built on the pieces above


@dataclass
class SmallPRow:
    k: int
    p: int
    t: float
    sup: float
    bound: float
    ratio: float
    boundary_fraction: float


def small_p_ratios(f0: SpectralField, k: int, pairs, cfg: NormConfig | None = None,
                   box_factor: int = 64) -> list[SmallPRow]:
    """||P_{k,p} e^{it Lambda} f||_inf / (2^p 2^{k - 4k+} ||f||_D) for (p, t) with 2^p <= t^{-1/2}."""
    cfg = cfg or NormConfig()
    d = d_norm(*s_derivatives(f0, 2), cfg=cfg)
    rows = []
    for p, t in pairs:
        if 2.0 ** p > t ** -0.5:
            raise ValueError(f"(p, t) = ({p}, {t}) is outside the small-p regime")
        c = decay_experiment(f0, k, [t], cfg, p=p, box_factor=box_factor)
        bound = 2.0 ** p * 2.0 ** (k - 4 * max(k, 0)) * d
        rows.append(SmallPRow(k, p, float(t), float(c.sup[0]), bound, float(c.sup[0]) / bound,
                              float(c.boundary_fraction[0])))
    return rows


@dataclass
class DecompositionRow:
    t: float
    l0: int
    split_residual: float
    ii_l2: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.ii_l2 / self.bound


def decomposition_rows(f: SpectralField, k: int, p: int, times,
                       cfg: NormConfig | None = None) -> list[DecompositionRow]:
    """Split residual and ||II||_2 against the angular-tail bound at each time."""
    cfg = cfg or NormConfig()
    x = x_norm(f, cfg)
    rows = []
    for t in times:
        d = decay_decomposition(f, k, p, t, cfg)
        res = np.linalg.norm((d.total - d.i_part - d.ii_part).coeffs)
        scale = np.linalg.norm(d.total.coeffs)
        rows.append(DecompositionRow(float(t), d.l0, float(res / scale) if scale > 0 else float(res),
                                     d.ii_part.l2(), ii_bound(k, p, d.l0, x, cfg.beta)))
    return rows


def fourier_sup_family(grid: GridSpec) -> list[SpectralField]:
    """Six fields of different shape: isotropic, wide, anisotropic, modulated,
    angularly band-limited and ring-shaped."""
    from .localization import band_limited_field
    x1, x2 = grid.x
    r2 = x1 ** 2 + x2 ** 2
    fields = [np.exp(-r2 / 2), np.exp(-r2 / 8), np.exp(-(x1 ** 2 / 2 + 2 * x2 ** 2) / 2),
              np.exp(-r2 / 2) * np.cos(3 * x1), band_limited_field(grid, 8, 1.5, 1),
              np.exp(-(np.sqrt(r2) - 4) ** 2 / 2) * np.cos(2 * x2)]
    return [SpectralField.from_physical(grid, f) for f in fields]


def fourier_sup_family_ratios(grid: GridSpec, cfg: NormConfig | None = None) -> list[float]:
    """max_{k,p} ratio of the Fourier sup bound for each member of the family."""
    return [fourier_sup_check(f, s_derivatives(f, 1)[1], cfg).max_ratio
            for f in fourier_sup_family(grid)]
