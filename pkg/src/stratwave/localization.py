"""Bump functions, anisotropic dyadic projections P_{k,p,q} and angular projections R_l.

Shell weights in |xi|, s = sqrt(1 - Lambda^2) and |Lambda| are built from

    psi  smooth, even, 1 on [-4/5, 4/5], supported in [-8/5, 8/5]
    phi  phi(x) = psi(x) - psi(2x)

and bucketized so every family sums to exactly one on the grid: the top index
uses 1 - psi(2 s), the floor index uses psi(2^{-p_floor} s), interior indices use
phi(2^{-p} s).  The same construction is used for k (floor holds the zero mode,
ceiling sits above the grid corner) and for q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import ndimage

from .spectral import GridSpec, SpectralField, apply_rotation_vf, apply_scaling_vf

INNER, OUTER = 0.8, 1.6


def _smooth_step(t):
    """0 for t <= 0, 1 for t >= 1, C-infinity in between (e^{-1/x} glue)."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 1e-300, 1 - 1e-16)
    a = np.where(t > 0, np.exp(-1.0 / tc), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / (1.0 - tc)), 0.0)
    return a / (a + b)


def psi(x):
    """Smooth even cutoff: 1 on |x| <= 4/5, 0 on |x| >= 8/5, monotone between."""
    a = np.abs(np.asarray(x, dtype=float))
    return _smooth_step((OUTER - a) / (OUTER - INNER))


def phi(x):
    return psi(x) - psi(2 * np.asarray(x, dtype=float))


def dyadic_bucket(idx: int, v, floor: int, top: int):
    """Bucketized weight of index ``idx`` in the family floor..top at values v >= 0."""
    if idx < floor or idx > top:
        return np.zeros_like(np.asarray(v, dtype=float))
    if idx == floor:
        return psi(np.ldexp(v, -floor))
    if idx == top:
        return 1.0 - psi(np.ldexp(v, -(top - 1)))
    return phi(np.ldexp(v, -idx))


def dyadic_support(v, lo: float = 0.4, hi: float = 1.6) -> tuple[np.ndarray, np.ndarray]:
    """The (at most two) integers k with phi(2^{-k} v) possibly nonzero."""
    v = np.asarray(v, dtype=float)
    k_lo = np.floor(np.log2(v / hi)) + 1
    return k_lo.astype(int), (k_lo + 1).astype(int)


@dataclass(frozen=True)
class DyadicIndex:
    k: int
    p: int = 0
    q: int | None = None
    l: int | None = None

    def __post_init__(self):
        if self.p > 0:
            raise ValueError("p must be <= 0")
        if self.q is not None and self.q > 0:
            raise ValueError("q must be <= 0")
        if self.l is not None:
            if self.l < 0:
                raise ValueError("l must be >= 0")
            if self.l + self.p < 0:
                raise ValueError(f"l + p must be >= 0, got l={self.l}, p={self.p}")


class DyadicFamily:
    """Exact (k, p[, q]) partition of unity on a grid.

    ``p_floor`` / ``q_floor`` may be an integer (the same floor for every k) or
    None, in which case the floor follows the grid resolution:
    ``floor(log2(dk / (2.56 * 2^k)))`` so the floor bucket holds the axis modes
    of shell k and nothing else, clipped to [-40, -1].
    """

    def __init__(self, grid: GridSpec, p_floor: int | None = None,
                 q_floor: int | None = None):
        self.grid = grid
        self.k_floor = int(np.floor(np.log2(grid.dk / OUTER)))
        corner = np.sqrt(2) * (grid.n / 2) * grid.dk
        self.k_ceil = int(np.ceil(np.log2(corner / INNER))) + 1
        self._p_floor = p_floor
        self._q_floor = q_floor

    def p_floor(self, k: int) -> int:
        return self._resolved_floor(k, self._p_floor)

    def q_floor(self, k: int) -> int:
        return self._resolved_floor(k, self._q_floor)

    def _resolved_floor(self, k, fixed):
        if fixed is not None:
            return int(fixed)
        return int(np.clip(np.floor(np.log2(self.grid.dk / (2.56 * 2.0 ** k))), -40, -1))

    @property
    def k_values(self) -> range:
        return range(self.k_floor, self.k_ceil + 1)

    def k_weight(self, k: int, r=None):
        r = self.grid.xi_abs if r is None else r
        return dyadic_bucket(k, r, self.k_floor, self.k_ceil)

    def p_weight(self, k: int, p: int, s=None):
        s = self.grid.s if s is None else s
        return dyadic_bucket(p, s, self.p_floor(k), 0)

    def q_weight(self, k: int, q: int, a=None):
        a = np.abs(self.grid.lam) if a is None else a
        return dyadic_bucket(q, a, self.q_floor(k), 0)

    def weight(self, idx: DyadicIndex) -> np.ndarray:
        w = self.k_weight(idx.k) * self.p_weight(idx.k, idx.p)
        if idx.q is not None:
            w = w * self.q_weight(idx.k, idx.q)
        return w

    @cached_property
    def kp_shells(self) -> list[tuple[int, int, np.ndarray, np.ndarray]]:
        """Sparse (k, p, flat indices, weights) for every nonempty (k, p) shell."""
        r = self.grid.xi_abs.ravel()
        s = self.grid.s.ravel()
        out = []
        for k in self.k_values:
            wk = self.k_weight(k, r)
            idx = np.flatnonzero(wk)
            if idx.size == 0:
                continue
            for p in range(self.p_floor(k), 1):
                wp = self.p_weight(k, p, s[idx])
                nz = wp > 0
                if nz.any():
                    out.append((k, p, idx[nz], wk[idx[nz]] * wp[nz]))
        return out


@lru_cache(maxsize=8)
def default_family(grid: GridSpec) -> DyadicFamily:
    return DyadicFamily(grid)


def project_kpq(f: SpectralField, idx: DyadicIndex,
                family: DyadicFamily | None = None) -> SpectralField:
    """P_{k,p} f or P_{k,p,q} f as a mode-wise multiplier."""
    if idx.l is not None:
        raise ValueError("project_kpq takes an index without l; use angular_project")
    family = family or default_family(f.grid)
    return f.with_coeffs(family.weight(idx) * f.coeffs)


# ---------------------------------------------------------------------------
# angular localization


class ResolutionError(ValueError):
    """Requested angular shell is not resolved by the polar grid."""


@dataclass(frozen=True)
class PolarGrid:
    n_rho: int
    n_tau: int
    rho_max: float

    def __post_init__(self):
        if self.n_tau < 8 or self.n_tau & (self.n_tau - 1):
            raise ValueError("n_tau must be a power of two >= 8")
        if self.n_rho < 4 or not self.rho_max > 0:
            raise ValueError("need n_rho >= 4 and rho_max > 0")

    @property
    def max_order(self) -> int:
        """Largest angular frequency counted as resolved (n_tau / 4)."""
        return self.n_tau // 4

    @property
    def dr(self) -> float:
        return self.rho_max / (self.n_rho - 1)


def angular_weights(orders: np.ndarray, l: int, mode: str = "shell") -> np.ndarray:
    """Weights on angular frequencies n for R_bar_l (shell) or R_bar_{<=l} (leq).

    The shell family uses psi(n) at l = 0 so that sum_{l >= 0} R_bar_l = Id
    (phi(n) alone would miss n = 0).
    """
    a = np.abs(orders).astype(float)
    if mode == "leq" or (mode == "shell" and l == 0):
        return psi(np.ldexp(a, -l))
    if mode == "shell":
        return phi(np.ldexp(a, -l))
    raise ValueError(f"unknown angular mode {mode!r}")


def p_adjusted_mode(l: int, p: int) -> str | None:
    """Case split of R_l^p: None (zero operator), 'leq' or 'shell'."""
    if p + l < 0:
        return None
    return "leq" if p + l == 0 else "shell"


_PAD = 16


class AngularProjector:
    """Polar resampling tables for a centred n x n array with sample spacing h.

    Works for physical fields (h = dx) and for fftshifted spectral coefficients
    (h = dk).  Interpolation is cubic B-spline in both directions.
    """

    def __init__(self, n: int, h: float, polar: PolarGrid | None = None):
        self.n = n
        self.h = h
        self.polar = polar or PolarGrid(n, 4 * n, (n // 2 - 1) * h)
        pg = self.polar
        self.radii = (np.arange(-_PAD, pg.n_rho + _PAD)) * pg.dr
        self.tau = 2 * np.pi * np.arange(pg.n_tau) / pg.n_tau
        self.orders = np.fft.fftfreq(pg.n_tau, 1.0 / pg.n_tau)
        rr, tt = np.meshgrid(self.radii, self.tau, indexing="ij")
        c = n // 2
        self._polar_coords = np.array([c + rr * np.cos(tt) / h, c + rr * np.sin(tt) / h])
        idx = np.arange(n) - c
        y1, y2 = np.meshgrid(idx * h, idx * h, indexing="ij")
        r = np.hypot(y1, y2)
        th = np.mod(np.arctan2(y2, y1), 2 * np.pi)
        self.inside = r <= pg.rho_max
        self._cart_coords = np.array([
            r[self.inside] / pg.dr + _PAD,
            th[self.inside] / (2 * np.pi) * pg.n_tau + _PAD,
        ])

    def resolved(self, l: int) -> bool:
        return OUTER * 2.0 ** l <= self.polar.max_order

    @staticmethod
    def _interp(a: np.ndarray, coords: np.ndarray, mode: str) -> np.ndarray:
        def one(x):
            return ndimage.map_coordinates(x, coords, order=3, mode=mode)
        if np.iscomplexobj(a):
            return one(a.real) + 1j * one(a.imag)
        return one(a)

    def ring_samples(self, f: np.ndarray) -> np.ndarray:
        """f on the (radius, angle) grid, shape (n_rho + 2 pad, n_tau)."""
        return self._interp(f, self._polar_coords, "grid-wrap")

    def decompose(self, f: np.ndarray) -> np.ndarray:
        """Angular Fourier coefficients f_n(r_j), in FFT order along axis 1."""
        return np.fft.fft(self.ring_samples(f), axis=1) / self.polar.n_tau

    def synthesize(self, coeffs: np.ndarray, weights: np.ndarray, fill: np.ndarray) -> np.ndarray:
        """Weighted angular series resampled back to the Cartesian grid.

        Points outside rho_max take their value from ``fill``.
        """
        g = np.fft.ifft(coeffs * weights, axis=1) * self.polar.n_tau
        g = np.concatenate([g[:, -_PAD:], g, g[:, :_PAD]], axis=1)
        if not np.iscomplexobj(fill):
            g = g.real
        out = np.array(fill, copy=True)
        out[self.inside] = self._interp(g, self._cart_coords, "nearest")
        return out


@lru_cache(maxsize=8)
def projector_for(n: int, h: float) -> AngularProjector:
    return AngularProjector(n, h)


def _as_array(f, grid):
    """Centred array view of a field plus the sample spacing."""
    if isinstance(f, SpectralField):
        return np.fft.fftshift(f.coeffs), f.grid.dk
    if grid is None:
        raise ValueError("physical fields need the grid")
    return np.asarray(f), grid.dx


def angular_project(f, l: int, mode: str = "shell", p: int | None = None,
                    grid: GridSpec | None = None, strict: bool = True,
                    projector: AngularProjector | None = None):
    """R_bar_l f (mode='shell'), R_bar_{<=l} f (mode='leq') or R_l^p f (mode='p_adjusted').

    Accepts a SpectralField (projection acts on its coefficients as a function
    of xi) or a physical array together with its grid, and returns the same kind.
    """
    if l < 0:
        raise ValueError("l must be >= 0")
    if mode == "p_adjusted":
        if p is None:
            raise ValueError("p_adjusted mode needs p")
        mode = p_adjusted_mode(l, p)
        if mode is None:
            return f * 0.0 if isinstance(f, SpectralField) else np.zeros_like(f)
    arr, h = _as_array(f, grid)
    proj = projector or projector_for(arr.shape[0], h)
    if strict and not proj.resolved(l):
        raise ResolutionError(
            f"l={l} needs angular orders up to {OUTER * 2 ** l:.0f}, "
            f"polar grid resolves {proj.polar.max_order}")
    w = angular_weights(proj.orders, l, mode)
    zero_outside = mode == "shell" and l > 0
    fill = np.zeros_like(arr) if zero_outside else arr
    out = proj.synthesize(proj.decompose(arr), w, fill)
    if isinstance(f, SpectralField):
        return f.with_coeffs(np.fft.ifftshift(out))
    return out


def angular_coeffs(f, r, grid: GridSpec | None = None, n_tau: int | None = None):
    """Angular Fourier coefficients f_n(r) on rings of radius r.

    Returns ``(orders, coeffs)`` with coeffs of shape (len(r), n_tau), FFT order.
    """
    arr, h = _as_array(f, grid)
    n = arr.shape[0]
    n_tau = n_tau or 4 * n
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r > (n // 2 - 1) * h):
        raise ValueError("ring radius beyond the polar grid")
    tau = 2 * np.pi * np.arange(n_tau) / n_tau
    rr, tt = np.meshgrid(r, tau, indexing="ij")
    c = n // 2
    coords = np.array([c + rr * np.cos(tt) / h, c + rr * np.sin(tt) / h])
    samples = AngularProjector._interp(arr, coords, "grid-wrap")
    return np.fft.fftfreq(n_tau, 1.0 / n_tau), np.fft.fft(samples, axis=1) / n_tau


def angular_parseval(f, grid: GridSpec | None = None, n_nodes: int = 256,
                     n_tau: int | None = None) -> tuple[float, float]:
    """(||f||^2 from the Cartesian grid, 2 pi sum_n ||f_n||^2_{L2(r dr)}).

    The radial integral uses Gauss-Legendre nodes on [0, rho_max].
    """
    arr, h = _as_array(f, grid)
    n = arr.shape[0]
    rho_max = (n // 2 - 1) * h
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    r = 0.5 * rho_max * (x + 1)
    w = 0.5 * rho_max * w
    _, c = angular_coeffs(f, r, grid=grid, n_tau=n_tau)
    polar = 2 * np.pi * np.sum(w * r * np.sum(np.abs(c) ** 2, axis=1))
    cart = float(np.sum(np.abs(arr) ** 2) * h * h)
    return cart, float(polar)


# ---------------------------------------------------------------------------
# invariants of the angular family

ANGULAR_CHECK_GRID = GridSpec(1024, 64.0)


def band_limited_field(grid: GridSpec, order: int = 12, width: float = 2.0,
                       seed: int = 0) -> np.ndarray:
    """exp(-|z|^2/2) sum_{n <= order} Re(c_n z^n / sqrt(n!)) with z = (x1 + i x2)/width.

    Only angular orders up to ``order`` occur, in x and in xi alike.
    """
    rng = np.random.default_rng(seed)
    x1, x2 = grid.x
    z = (x1 + 1j * x2) / width
    poly = sum((rng.normal() + 1j * rng.normal()) * z ** n / math.sqrt(math.factorial(n))
               for n in range(order + 1))
    return np.exp(-np.abs(z) ** 2 / 2) * poly.real


def ring_field(grid: GridSpec, radius: float = 10.0, wavenumber: float = 8.0,
               waves: int = 3, seed: int = 0) -> np.ndarray:
    """Plane waves of one wavenumber under a Gaussian ring.

    Angular orders up to about radius * wavenumber carry mass, so every shell
    l <= log2(radius * wavenumber) is populated.
    """
    rng = np.random.default_rng(seed)
    x1, x2 = grid.x
    r = np.hypot(x1, x2)
    waves_sum = sum(np.cos(wavenumber * (np.cos(a) * x1 + np.sin(a) * x2) + b)
                    for a, b in rng.uniform(0, 2 * np.pi, (waves, 2)))
    return np.exp(-(r - radius) ** 2 / 4.5) * waves_sum


@dataclass
class AngularReport:
    partition: float
    parseval: float
    bernstein: dict = field(default_factory=dict)
    commutator: dict = field(default_factory=dict)


def angular_invariant_check(grid: GridSpec = ANGULAR_CHECK_GRID, shells=range(2, 7),
                            seed: int = 0, vf_threshold: float = 1e-3) -> AngularReport:
    """Relative residuals of sum_l R_bar_l f = f and of Parseval in polar form on a
    band-limited field; ||W R_bar_l f|| / (2^l ||R_bar_l f||) and
    ||[S, R_bar_l] f|| / ||S R_bar_l f|| on a ring field.
    """
    f = band_limited_field(grid, seed=seed)
    top = int(math.ceil(math.log2(12 / INNER)))
    rec = sum(angular_project(f, l, grid=grid) for l in range(top + 1))
    partition = float(np.linalg.norm(rec - f) / np.linalg.norm(f))
    cart, polar = angular_parseval(f, grid=grid)
    h = ring_field(grid, seed=seed)
    sh = apply_scaling_vf(h, grid, vf_threshold)
    bern, comm = {}, {}
    for l in shells:
        r = angular_project(h, l, grid=grid)
        norm_r = np.linalg.norm(r)
        bern[l] = float(np.linalg.norm(apply_rotation_vf(r, grid, vf_threshold)) / (2.0 ** l * norm_r))
        sr = apply_scaling_vf(r, grid, vf_threshold)
        comm[l] = float(np.linalg.norm(sr - angular_project(sh, l, grid=grid)) / np.linalg.norm(sr))
    return AngularReport(partition, abs(cart - polar) / cart, bern, comm)
