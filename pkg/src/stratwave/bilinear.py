"""Direct quadrature of the bilinear forms

    F(Q_m(f, g))(t, xi) = int e^{i t Phi(xi, eta)} m(xi, eta) f^(xi - eta) g^(eta) d eta

on small tensor grids, and exact-identity checks built on it (one-step integration
by parts in S_eta, symmetrization of the n-multipliers, set-size and normal-form
boundary bounds).

Profiles are given on the frequency side.  Norms of profiles are L^2 norms of the
frequency functions, ||f|| := ||f^||_{L^2(d xi)}.  The vector fields in the
integration-by-parts identity act on frequency functions too:
S F^(v) = v . grad F^(v) and W F^(v) = v_perp . grad F^(v).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import numpy as np

from .localization import psi
from .parallel import parallel_map
from .symbols import (MultiplierSpec, PhaseSpec, ShellConfig, _norm, _safe_div,
                      eval_multiplier, eval_phase, kpq_weight, phase_vf_closed_form,
                      s_eta_flow_derivative)

MAX_ETA_POINTS = 128
DIVISION_HAZARD = 1e-8
XI_CHUNK = 8


class CostGuardError(ValueError):
    """The requested quadrature exceeds the O(N^4) cost guard."""


class DivisionHazardError(ValueError):
    """S_eta Phi comes too close to zero on the quadrature nodes."""


# ---------------------------------------------------------------- profiles

class Profile(Protocol):
    def __call__(self, v: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class GaussianRing:
    """f^(v) = exp(-alpha (|v| - radius)^2 + beta (cos(order (theta - theta0)) - 1)).

    Real valued; with an even ``order`` it is even in v, so it is the transform of a
    real field.  S and W act analytically.
    """

    alpha: float = 4.0
    radius: float = 1.0
    beta: float = 0.0
    order: int = 2
    theta0: float = 0.0

    def _parts(self, v):
        v = np.asarray(v, float)
        r = _norm(v)
        th = np.arctan2(v[..., 1], v[..., 0])
        return r, th

    def __call__(self, v):
        r, th = self._parts(v)
        return np.exp(-self.alpha * (r - self.radius) ** 2
                      + self.beta * (np.cos(self.order * (th - self.theta0)) - 1))

    def s(self, v):
        r, _ = self._parts(v)
        return -2 * self.alpha * r * (r - self.radius) * self(v)

    def w(self, v):
        _, th = self._parts(v)
        return -self.beta * self.order * np.sin(self.order * (th - self.theta0)) * self(v)


@dataclass(frozen=True)
class LocalizedProfile:
    """A base profile multiplied by the shell weight phi_{k,p,q}."""

    base: Callable
    shell: tuple

    def __call__(self, v):
        return kpq_weight(v, *self.shell) * self.base(v)


def random_localized_profile(rng: np.random.Generator, shell: tuple) -> LocalizedProfile:
    k = shell[0]
    ring = GaussianRing(alpha=float(rng.uniform(1, 6)) * 4.0 ** (-k),
                        radius=float(2.0 ** k * rng.uniform(0.6, 1.2)),
                        beta=float(rng.uniform(0, 1.5)), order=2 * int(rng.integers(1, 4)),
                        theta0=float(rng.uniform(0, np.pi)))
    return LocalizedProfile(ring, shell)


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    """Cell-centred eta lattice of ``eta_points``^2 nodes on a rectangle of half widths
    ``half_width`` (a number, or one per axis) centred at the origin or at xi/2.

    Centring at xi/2 makes the lattice invariant under eta -> xi - eta, so the
    symmetrization identities hold node by node.
    """

    half_width: float | tuple[float, float]
    eta_points: int = 96
    center: str = "origin"
    tol: float = 1e-8

    def __post_init__(self):
        if self.eta_points > MAX_ETA_POINTS:
            raise CostGuardError(f"eta_points={self.eta_points} exceeds the guard {MAX_ETA_POINTS}")
        if self.eta_points < 2 or min(self.half_widths) <= 0:
            raise ValueError("need eta_points >= 2 and positive half widths")
        if self.center not in ("origin", "half_xi"):
            raise ValueError(f"unknown lattice centre {self.center!r}")

    @property
    def half_widths(self) -> tuple[float, float]:
        hw = self.half_width
        return (float(hw[0]), float(hw[1])) if isinstance(hw, (tuple, list)) else (float(hw),) * 2

    @property
    def steps(self) -> tuple[float, float]:
        return tuple(2 * w / self.eta_points for w in self.half_widths)

    @property
    def cell_area(self) -> float:
        h1, h2 = self.steps
        return h1 * h2

    def offsets(self) -> np.ndarray:
        j = np.arange(self.eta_points) - (self.eta_points - 1) / 2
        h1, h2 = self.steps
        g1, g2 = np.meshgrid(h1 * j, h2 * j, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=-1)

    def nodes(self, xi: np.ndarray) -> np.ndarray:
        """Nodes for each xi, shape (len(xi), eta_points^2, 2)."""
        off = self.offsets()
        base = 0.5 * xi[:, None, :] if self.center == "half_xi" else np.zeros((len(xi), 1, 2))
        return base + off[None]

    def coarsened(self) -> "QuadratureSpec":
        return QuadratureSpec(self.half_width, self.eta_points // 2, self.center, self.tol)


def quad_for_shells(shells: ShellConfig, eta_points: int = 96, dilation: float = 1.5,
                    center: str = "origin", tol: float = 1e-8) -> QuadratureSpec:
    """Rectangle covering the eta shell, dilated.

    |eta| <= 1.6 2^{k_2} always; a q localization of eta also gives
    |eta_1| <= 1.6 2^{k_2} * 1.6 2^{q_2}, which narrows the first axis.
    """
    k2, _, q2 = shells.eta
    r = 1.6 * 2.0 ** k2
    w1 = r if q2 is None else min(r, r * 1.6 * 2.0 ** q2)
    return QuadratureSpec((dilation * w1, dilation * r), eta_points, center, tol)


Symbol = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class BilinearTask:
    """F(Q_{m chi}(f, g))(t, .) with closed-form or callable symbol and profiles."""

    multiplier: MultiplierSpec | None
    phase: PhaseSpec
    time: float
    f: Callable
    g: Callable
    shells: ShellConfig | None = None
    symbol: Symbol | None = None

    def amplitude(self, xi, eta) -> np.ndarray:
        """m chi (or the custom symbol) without the oscillating factor."""
        if self.symbol is not None:
            m = np.asarray(self.symbol(xi, eta), float)
        elif self.multiplier is None:
            m = np.ones(np.broadcast_shapes(xi.shape, eta.shape)[:-1])
        else:
            m = np.asarray(eval_multiplier(self.multiplier, xi, eta), float)
        if self.shells is not None:
            m = m * self.shells.chi(xi, eta)
        return m


def _integrate(task: BilinearTask, quad: QuadratureSpec, xi: np.ndarray,
               workers: int = 1) -> np.ndarray:
    chunks = [xi[i:i + XI_CHUNK] for i in range(0, len(xi), XI_CHUNK)]
    h2 = quad.cell_area

    def run(x):
        eta = quad.nodes(x)
        xx = np.broadcast_to(x[:, None, :], eta.shape)
        amp = task.amplitude(xx, eta)
        vals = amp * np.asarray(task.f(xx - eta)) * np.asarray(task.g(eta))
        if task.time != 0:
            vals = vals * np.exp(1j * task.time * np.asarray(eval_phase(task.phase, xx, eta)))
        return h2 * vals.sum(axis=1)

    if not chunks:
        return np.zeros(0, complex)
    return np.concatenate(parallel_map(run, chunks, workers)).astype(complex)


@dataclass
class QResult:
    xi: np.ndarray
    values: np.ndarray
    coarse: np.ndarray
    converged: bool

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["xi1", "xi2", "re", "im"])
            for (a, b), v in zip(self.xi, self.values):
                w.writerow([f"{a:.17g}", f"{b:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def q_direct(task: BilinearTask, quad: QuadratureSpec, xi, workers: int = 1) -> QResult:
    """Tensor trapezoid rule for the eta integral at each requested xi.

    The integral is also evaluated with the eta step doubled; ``converged`` is False
    when the two differ by more than 10 tol (relative to the largest value).
    """
    xi = np.atleast_2d(np.asarray(xi, float))
    vals = _integrate(task, quad, xi, workers)
    coarse = _integrate(task, quad.coarsened(), xi, workers)
    scale = max(float(np.max(np.abs(vals), initial=0.0)), 1e-300)
    converged = bool(np.max(np.abs(vals - coarse), initial=0.0) <= 10 * quad.tol * scale)
    return QResult(xi, vals, coarse, converged)


def gaussian_convolution(alpha: float, beta: float, xi) -> np.ndarray:
    """int exp(-alpha |xi - eta|^2 - beta |eta|^2) d eta."""
    xi = np.asarray(xi, float)
    return np.pi / (alpha + beta) * np.exp(-alpha * beta / (alpha + beta) * np.sum(xi * xi, -1))


# ---------------------------------------------------------------- xi lattices and norms

def xi_lattice(shell: tuple, points: int) -> tuple[np.ndarray, float]:
    """Cell-centred lattice on the square |xi_i| <= 1.6 2^k; returns (nodes, step)."""
    R = 1.6 * 2.0 ** shell[0]
    h = 2 * R / points
    c = h * (np.arange(points) - (points - 1) / 2)
    g1, g2 = np.meshgrid(c, c, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], -1), h


def profile_l2(fn: Callable, shell: tuple, points: int = 128) -> float:
    nodes, h = xi_lattice(shell, points)
    return float(np.sqrt(h * h * np.sum(np.abs(fn(nodes)) ** 2)))


def set_size(shells: ShellConfig) -> float:
    """|S| = min_j 2^{k_j/2 + p_j/2} * min_j 2^{k_j/2 + q_j/2} (q = 0 when absent)."""
    trip = shells.triples
    a = min(0.5 * (k + p) for k, p, _ in trip)
    b = min(0.5 * (k + (q or 0)) for k, _, q in trip)
    return 2.0 ** (a + b)


# ---------------------------------------------------------------- set size

@dataclass
class RatioReport:
    ratios: list[float]
    max_ratio: float
    max_ratio_half: float

    @property
    def stable(self) -> bool:
        lo, hi = sorted([self.max_ratio_half, self.max_ratio])
        return hi <= 2 * lo if lo > 0 else hi == 0


def _kernel_on_lattice(task: BilinearTask, quad: QuadratureSpec, xi: np.ndarray):
    eta = quad.nodes(xi)
    xx = np.broadcast_to(xi[:, None, :], eta.shape)
    amp = task.amplitude(xx, eta)
    ker = amp * np.exp(1j * task.time * np.asarray(eval_phase(task.phase, xx, eta)))
    return xx, eta, amp, ker


def setsize_check(multiplier: MultiplierSpec, shells: ShellConfig, pairs: int = 30,
                  seed: int = 0, time: float = 1.0, eta_points: int = 48,
                  xi_points: int = 24, zero_g: bool = False) -> RatioReport:
    """||Q_{m chi}(f, g)||_2 / (|S| ||m chi||_inf ||f|| ||g||) for random localized pairs.

    The kernel e^{i t Phi} m chi is tabulated once on the (xi, eta) lattices and
    reused for every pair.  ``max_ratio_half`` is the maximum over the first half of
    the pairs, so ``stable`` compares the maximum across one doubling of the sample.
    """
    quad = quad_for_shells(shells, eta_points)
    xi, hx = xi_lattice(shells.xi, xi_points)
    task = BilinearTask(multiplier, multiplier.phase, time, None, None, shells)
    xx, eta, amp, ker = _kernel_on_lattice(task, quad, xi)
    m_inf = float(np.max(np.abs(amp)))
    S = set_size(shells)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(pairs):
        f = random_localized_profile(rng, shells.xi_minus_eta)
        g = random_localized_profile(rng, shells.eta)
        gv = np.zeros(eta.shape[:-1]) if zero_g else g(eta)
        q = quad.cell_area * np.sum(ker * f(xx - eta) * gv, axis=1)
        qn = float(np.sqrt(hx * hx * np.sum(np.abs(q) ** 2)))
        fn, gn = profile_l2(f, shells.xi_minus_eta), (0.0 if zero_g else profile_l2(g, shells.eta))
        denom = S * m_inf * fn * gn
        ratios.append(qn / denom if denom > 0 else 0.0)
    half = ratios[: max(1, pairs // 2)]
    return RatioReport(ratios, max(ratios), max(half))


# ---------------------------------------------------------------- one-step IBP

def ibp_weights(multiplier_values, xi, eta) -> tuple[np.ndarray, np.ndarray]:
    """m_1 = -m (eta . a)/|a|^2 and m_2 = -m (eta . a_perp)/|a|^2, a = xi - eta.

    They come from S_eta[F^(xi - eta)] = -(eta . grad F^)(a) written in the frame
    (a, a_perp): eta = (eta.a) a/|a|^2 + (eta.a_perp) a_perp/|a|^2.
    """
    a = np.asarray(xi, float) - np.asarray(eta, float)
    ra2 = np.sum(a * a, -1)
    a_perp = np.stack([-a[..., 1], a[..., 0]], -1)
    m = np.asarray(multiplier_values)
    return (-m * _safe_div(np.sum(eta * a, -1), ra2),
            -m * _safe_div(np.sum(eta * a_perp, -1), ra2))


@dataclass
class IBPReport:
    time: float
    max_residual: float
    max_residual_coarse: float
    min_s_eta_phi: float
    lhs_norm: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _s_eta_phi(phase: PhaseSpec, xi, eta):
    return np.asarray(phase_vf_closed_form("S_eta", phase, xi, eta))


def _ibp_residual(task: BilinearTask, quad: QuadratureSpec, xi: np.ndarray):
    """max_xi |LHS - RHS| / max|LHS| for the one-step identity on one lattice."""
    phase, t = task.phase, task.time
    base = BilinearTask(task.multiplier, phase, 0.0, None, None, task.shells, task.symbol)
    F, G = task.f, task.g
    eta = quad.nodes(xi)
    xx = np.broadcast_to(xi[:, None, :], eta.shape)
    amp = base.amplitude(xx, eta)
    sphi = _s_eta_phi(phase, xx, eta)
    support = amp != 0
    min_sphi = float(np.min(np.abs(sphi[support]))) if np.any(support) else np.inf
    if min_sphi < DIVISION_HAZARD:
        raise DivisionHazardError(f"min |S_eta Phi| = {min_sphi:.3g} on the support")

    def ratio(x, e):
        s = _s_eta_phi(phase, x, e)
        return _safe_div(base.amplitude(x, e), s)

    r = ratio(xx, eta)
    div_term = 2 * r + s_eta_flow_derivative(ratio, xx, eta)
    m_vals = _safe_div(amp, sphi)
    m1, m2 = ibp_weights(m_vals, xx, eta)
    a = xx - eta
    Fa, Ge = F(a), G(eta)
    osc = np.exp(1j * t * np.asarray(eval_phase(phase, xx, eta)))
    lhs = np.sum(osc * amp * Fa * Ge, axis=1)
    rhs_integrand = div_term * Fa * Ge + m1 * F.s(a) * Ge + m2 * F.w(a) * Ge + r * Fa * G.s(eta)
    rhs = 1j / t * np.sum(osc * rhs_integrand, axis=1)
    h2 = quad.cell_area
    lhs, rhs = h2 * lhs, h2 * rhs
    scale = max(float(np.max(np.abs(lhs))), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale), min_sphi, scale


def ibp_step_check(task: BilinearTask, quad: QuadratureSpec, xi, workers: int = 1) -> IBPReport:
    """Exact one-step integration by parts along S_eta, both sides by quadrature:

        Q_{m chi}(F, G) = i t^{-1} [ Q_{(2 + S_eta)(m chi / S_eta Phi)}(F, G)
                                     + Q_{m_1 chi / S_eta Phi}(S F, G)
                                     + Q_{m_2 chi / S_eta Phi}(W F, G)
                                     + Q_{m chi / S_eta Phi}(F, S G) ].

    The 2 is the divergence of eta -> eta in the plane.  S_eta of the symbol is taken
    by Richardson differences along the ray eta -> e^s eta; the profile derivatives
    are analytic.  Reports the residual at ``quad`` and at the doubled step.
    """
    if task.time == 0:
        raise ValueError("the identity divides by t")
    xi = np.atleast_2d(np.asarray(xi, float))
    chunks = [xi[i:i + XI_CHUNK] for i in range(0, len(xi), XI_CHUNK)]
    fine = parallel_map(lambda x: _ibp_residual(task, quad, x), chunks, workers)
    coarse = parallel_map(lambda x: _ibp_residual(task, quad.coarsened(), x), chunks, workers)
    lhs_norm = max(p[2] for p in fine)
    res = max(p[0] * p[2] for p in fine) / lhs_norm
    res_c = max(p[0] * p[2] for p in coarse) / max(p[2] for p in coarse)
    return IBPReport(task.time, res, res_c, min(p[1] for p in fine), lhs_norm)


# Shells for the one-step identity: xi nearly horizontal, xi - eta and eta not, so
# sigma and (xi - eta)_2 stay away from zero and S_eta Phi = mu a_2 sigma/|a|^3 does too.
IBP_SHELLS = ShellConfig.make(0, (-12, 0, 0), name="gap_in_p")


# Profiles for the identity.  Radius 1.2 sits in the middle of the outer transition
# [0.8, 1.6] of phi and the angular payload peaks at the vertical, so both profiles
# are negligible where the bumps glue (|v| = 0.8, s = 0.8), which keeps the
# trapezoid rule spectrally accurate on the gated integrand.
IBP_PROFILES = (GaussianRing(80.0, 1.2, 16.0, 2, np.pi / 2),
                GaussianRing(72.0, 1.18, 14.4, 2, np.pi / 2 + 0.05))


def ibp_xi_samples(n: int = 8, shells: ShellConfig = IBP_SHELLS) -> np.ndarray:
    """Deterministic xi points in the xi shell (radius and angle on the half windows)."""
    k, p, _ = shells.xi
    r = 2.0 ** k * np.linspace(0.7, 1.1, n)
    s = 2.0 ** p * np.linspace(0.7, 1.1, n)[::-1]
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return np.stack([sign * r * np.sqrt(1 - s * s), r * s], -1)


# ---------------------------------------------------------------- symmetrization

@dataclass
class SymmetrizationReport:
    time: float
    residual_mumu: dict
    residual_plus_minus: dict

    @property
    def max_residual(self) -> float:
        return max([*self.residual_mumu.values(), *self.residual_plus_minus.values()], default=0.0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _rel_residual(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else 0.0


def symmetrization_check(f: Callable, g: Callable, xi, time: float = 1.0,
                         half_width: float = 4.0, eta_points: int = 96,
                         workers: int = 1) -> SymmetrizationReport:
    """Q_{n^{mu mu}_±}(f, f) = Q_{m^{mu mu}_±}(f, f) and
    Q_{n^{+-}_±}(f, g) + Q_{n^{-+}_±}(g, f) = Q_{m^{+-}_±}(f, g).

    The lattice is centred at xi/2, so eta -> xi - eta permutes its nodes and the two
    sides agree up to rounding.
    """
    xi = np.atleast_2d(np.asarray(xi, float))
    quad = QuadratureSpec(half_width, eta_points, center="half_xi")

    def q(kind, outer, mu, nu, a, b):
        spec = MultiplierSpec(kind, outer, mu, nu)
        return _integrate(BilinearTask(spec, spec.phase, time, a, b), quad, xi, workers)

    mumu, pm = {}, {}
    for outer in (1, -1):
        for mu in (1, -1):
            lab = MultiplierSpec("m_mu_mu", outer, mu, mu).label
            mumu[lab] = _rel_residual(q("n", outer, mu, mu, f, f), q("m_mu_mu", outer, mu, mu, f, f))
        lab = MultiplierSpec("m_plus_minus", outer, 1, -1).label
        lhs = q("n", outer, 1, -1, f, g) + q("n", outer, -1, 1, g, f)
        pm[lab] = _rel_residual(lhs, q("m_plus_minus", outer, 1, -1, f, g))
    return SymmetrizationReport(time, mumu, pm)


# ---------------------------------------------------------------- normal-form boundary term

def nonresonant_symbol(multiplier: MultiplierSpec, phase: PhaseSpec, lam: float) -> Symbol:
    """m^nr / Phi with m^nr = (1 - psi(Phi/lambda)) m."""
    if not lam > 0:
        raise ValueError("lambda must be positive")

    def sym(xi, eta):
        ph = np.asarray(eval_phase(phase, xi, eta))
        nr = (1 - psi(ph / lam)) * np.asarray(eval_multiplier(multiplier, xi, eta))
        out = np.zeros(np.broadcast(ph, nr).shape)
        np.divide(nr, ph, out=out, where=np.abs(ph) > 0.5 * lam)
        return out

    return sym


def nonresonant_boundary_eval(multiplier: MultiplierSpec, phase: PhaseSpec, lam: float,
                              f: Callable, g: Callable, shells: ShellConfig, xi,
                              quad: QuadratureSpec, time: float = 1.0,
                              workers: int = 1) -> np.ndarray:
    """F(Q_{m^nr chi / Phi}(f, g))(t, xi) by direct quadrature."""
    task = BilinearTask(None, phase, time, f, g, shells, nonresonant_symbol(multiplier, phase, lam))
    return _integrate(task, quad, np.atleast_2d(np.asarray(xi, float)), workers)


@dataclass
class BoundaryReport(RatioReport):
    lam: float = 0.0


def nonresonant_bound_check(multiplier: MultiplierSpec, shells: ShellConfig, lam: float,
                            pairs: int = 12, seed: int = 0, time: float = 1.0,
                            eta_points: int = 48, xi_points: int = 24) -> BoundaryReport:
    """||Q_{m^nr chi/Phi}(f,g)||_2 / (2^{k+p_max} lambda^{-1} |S| ||f|| ||g||) for random pairs."""
    quad = quad_for_shells(shells, eta_points)
    xi, hx = xi_lattice(shells.xi, xi_points)
    sym = nonresonant_symbol(multiplier, multiplier.phase, lam)
    task = BilinearTask(None, multiplier.phase, time, None, None, shells, sym)
    xx, eta, _, ker = _kernel_on_lattice(task, quad, xi)
    scale = 2.0 ** (shells.xi[0] + shells.p_max) / lam * set_size(shells)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(pairs):
        f = random_localized_profile(rng, shells.xi_minus_eta)
        g = random_localized_profile(rng, shells.eta)
        q = quad.cell_area * np.sum(ker * f(xx - eta) * g(eta), axis=1)
        qn = float(np.sqrt(hx * hx * np.sum(np.abs(q) ** 2)))
        ratios.append(qn / (scale * profile_l2(f, shells.xi_minus_eta) * profile_l2(g, shells.eta)))
    return BoundaryReport(ratios, max(ratios), max(ratios[: max(1, pairs // 2)]), lam=lam)
