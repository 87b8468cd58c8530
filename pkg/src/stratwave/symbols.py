"""Closed-form bilinear symbols: sigma, the phases Phi, the multipliers m0, m, n and
the action of the frequency-space vector fields on them.

Frequencies are arrays whose last axis has length 2, so ``xi[..., 0]`` is xi_1.
Every evaluator broadcasts over the leading axes.  The perpendicular convention is
v_perp = (-v_2, v_1), so

    sigma(xi, eta) = (xi - eta) . eta_perp = a_2 eta_1 - a_1 eta_2,   a = xi - eta.

Vector fields act on functions g(xi, eta) as directional derivatives in R^4:

    S        xi . grad_xi            (eta held fixed)
    W        eta_perp . grad_eta     (xi held fixed)
    S_eta    eta . grad_eta
    S_xi_minus_eta   scaling in the variable xi - eta at fixed xi, i.e. -(xi - eta) . grad_eta
    W_xi     xi_perp . grad_xi
    D_eta    |eta| d/d eta_1
    D_xi_minus_eta   |xi - eta| d/d(xi - eta)_1 at fixed xi, i.e. -|xi - eta| d/d eta_1

With these conventions S_xi_minus_eta [F(xi - eta)] = (S F)(xi - eta), which is how
the field enters integration by parts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .localization import phi, psi

SYMBOL_TOL = 1e-14


def _vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 2:
        raise ValueError("frequency arrays need a trailing axis of length 2")
    return v


def _norm(v: np.ndarray) -> np.ndarray:
    return np.hypot(v[..., 0], v[..., 1])


def _safe_div(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=np.abs(den) > SYMBOL_TOL)
    return out


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def lam(v) -> np.ndarray:
    """Lambda(v) = v_1/|v| with Lambda(0) = 0."""
    v = _vec(v)
    return _scalar(_safe_div(v[..., 0], _norm(v)))


def grad_lam(v) -> np.ndarray:
    """grad Lambda(v) = -(v_2/|v|^3) v_perp = (v_2^2, -v_1 v_2)/|v|^3."""
    v = _vec(v)
    r3 = _norm(v) ** 3
    return np.stack([_safe_div(v[..., 1] ** 2, r3),
                     _safe_div(-v[..., 0] * v[..., 1], r3)], axis=-1)


def eval_sigma(xi, eta):
    xi, eta = _vec(xi), _vec(eta)
    a = xi - eta
    return _scalar(a[..., 1] * eta[..., 0] - a[..., 0] * eta[..., 1])


def _check_sign(s: int, name: str):
    if s not in (1, -1):
        raise ValueError(f"{name} must be +1 or -1, got {s!r}")


def _sign_char(s: int) -> str:
    return "+" if s > 0 else "-"


@dataclass(frozen=True)
class PhaseSpec:
    """Phi_outer^{mu nu}(xi, eta) = outer Lambda(xi) - mu Lambda(xi - eta) - nu Lambda(eta)."""

    outer: int = 1
    mu: int = 1
    nu: int = 1

    def __post_init__(self):
        for name in ("outer", "mu", "nu"):
            _check_sign(getattr(self, name), name)

    @property
    def label(self) -> str:
        return f"Phi_{_sign_char(self.outer)}^{_sign_char(self.mu)}{_sign_char(self.nu)}"

    def __call__(self, xi, eta):
        return eval_phase(self, xi, eta)


def eval_phase(spec: PhaseSpec, xi, eta):
    xi, eta = _vec(xi), _vec(eta)
    out = spec.outer * lam(xi) - spec.mu * lam(xi - eta) - spec.nu * lam(eta)
    return _scalar(out)


MULTIPLIER_KINDS = ("m0", "m_mu_mu", "m_plus_minus", "n", "m_mu_mu_literal")


@dataclass(frozen=True)
class MultiplierSpec:
    """One of the bilinear symbols.

    ``m_mu_mu`` is the exact symmetrization (n(xi, eta) + n(xi, xi - eta))/2 of the
    quadratic Z-terms.  ``m_mu_mu_literal`` keeps the printed formula whose second term
    carries the opposite sign; it is provided only for comparison.
    """

    kind: str
    outer: int = 1
    mu: int = 1
    nu: int = 1

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        for name in ("outer", "mu", "nu"):
            _check_sign(getattr(self, name), name)

    @property
    def phase(self) -> PhaseSpec:
        if self.kind == "m0":
            return PhaseSpec(1, 1, 1)
        if self.kind in ("m_mu_mu", "m_mu_mu_literal"):
            return PhaseSpec(self.outer, self.mu, self.mu)
        if self.kind == "m_plus_minus":
            return PhaseSpec(self.outer, 1, -1)
        return PhaseSpec(self.outer, self.mu, self.nu)

    @property
    def label(self) -> str:
        o, m, n = map(_sign_char, (self.outer, self.mu, self.nu))
        return {
            "m0": "m0",
            "m_mu_mu": f"m_{o}^{m}{m}",
            "m_mu_mu_literal": f"m_{o}^{m}{m}(literal)",
            "m_plus_minus": f"m_{o}^+-",
            "n": f"n_{o}^{m}{n}",
        }[self.kind]

    def __call__(self, xi, eta):
        return eval_multiplier(self, xi, eta)


def standard_multipliers() -> list[MultiplierSpec]:
    """The seven symbols of the two nonlinearities: m0, four m^{mu mu}, two m^{+-}."""
    out = [MultiplierSpec("m0")]
    out += [MultiplierSpec("m_mu_mu", o, m, m) for o in (1, -1) for m in (1, -1)]
    out += [MultiplierSpec("m_plus_minus", o, 1, -1) for o in (1, -1)]
    return out


def eval_multiplier(spec: MultiplierSpec, xi, eta):
    """Evaluate a symbol; zero wherever |xi|, |xi - eta| or |eta| is below 1e-14."""
    xi, eta = _vec(xi), _vec(eta)
    a = xi - eta
    r, ra, re = _norm(xi), _norm(a), _norm(eta)
    sig = a[..., 1] * eta[..., 0] - a[..., 0] * eta[..., 1]
    ok = (ra > SYMBOL_TOL) & (re > SYMBOL_TOL)
    if spec.kind == "m0":
        out = 0.5 * _safe_div(sig * (ra - re), ra * re)
    else:
        ok &= r > SYMBOL_TOL
        sym = _safe_div(sig * (re ** 2 - ra ** 2), r * ra * re)
        if spec.kind == "m_mu_mu":
            out = sym / 8 + spec.outer * spec.mu / 8 * _safe_div(sig * (re - ra), ra * re)
        elif spec.kind == "m_mu_mu_literal":
            out = sym / 8 + spec.outer * spec.mu / 8 * _safe_div(sig * (ra - re), ra * re)
        elif spec.kind == "m_plus_minus":
            out = sym / 4 - spec.outer / 4 * _safe_div(sig * (ra + re), ra * re)
        else:
            out = 0.25 * _safe_div(sig * re, r * ra) + spec.outer * spec.nu / 4 * _safe_div(sig, ra)
    return _scalar(np.where(ok, out, 0.0))


# ---------------------------------------------------------------- vector fields

class VectorFieldKind(str, Enum):
    S = "S"
    W = "W"
    S_ETA = "S_eta"
    S_XI_MINUS_ETA = "S_xi_minus_eta"
    W_XI = "W_xi"
    D_ETA = "D_eta"
    D_XI_MINUS_ETA = "D_xi_minus_eta"


def vf_direction(kind: VectorFieldKind | str, xi, eta) -> tuple[np.ndarray, np.ndarray]:
    """The (d_xi, d_eta) components of the field at (xi, eta)."""
    kind = VectorFieldKind(kind)
    xi, eta = np.broadcast_arrays(_vec(xi), _vec(eta))
    zero = np.zeros_like(xi)
    a = xi - eta
    e1 = np.zeros_like(xi)
    e1[..., 0] = 1.0
    if kind is VectorFieldKind.S:
        return xi, zero
    if kind is VectorFieldKind.W:
        return zero, np.stack([-eta[..., 1], eta[..., 0]], axis=-1)
    if kind is VectorFieldKind.S_ETA:
        return zero, eta
    if kind is VectorFieldKind.S_XI_MINUS_ETA:
        return zero, -a
    if kind is VectorFieldKind.W_XI:
        return np.stack([-xi[..., 1], xi[..., 0]], axis=-1), zero
    if kind is VectorFieldKind.D_ETA:
        return zero, _norm(eta)[..., None] * e1
    return zero, -_norm(a)[..., None] * e1


def vf_on_lambda(kind: VectorFieldKind | str, which: str, xi, eta):
    """Analytic action of a field on Lambda(xi), Lambda(xi - eta) or Lambda(eta).

    ``which`` is one of ``"xi"``, ``"xi_minus_eta"``, ``"eta"``.
    """
    xi, eta = _vec(xi), _vec(eta)
    dxi, deta = vf_direction(kind, xi, eta)
    if which == "xi":
        v, dv = xi, dxi
    elif which == "xi_minus_eta":
        v, dv = xi - eta, dxi - deta
    elif which == "eta":
        v, dv = eta, deta
    else:
        raise ValueError(f"unknown argument {which!r}")
    return _scalar(np.sum(grad_lam(v) * dv, axis=-1))


def vf_on_phase(kind: VectorFieldKind | str, spec: PhaseSpec, xi, eta):
    """Analytic action of a field on Phi, assembled from the Lambda building blocks."""
    return _scalar(spec.outer * np.asarray(vf_on_lambda(kind, "xi", xi, eta))
                   - spec.mu * np.asarray(vf_on_lambda(kind, "xi_minus_eta", xi, eta))
                   - spec.nu * np.asarray(vf_on_lambda(kind, "eta", xi, eta)))


def phase_vf_closed_form(kind: VectorFieldKind | str, spec: PhaseSpec, xi, eta):
    """Closed forms of the phase derivatives written in terms of sigma.

    S_eta Phi          =  mu a_2 sigma / |a|^3
    S_xi_minus_eta Phi = -nu eta_2 sigma / |eta|^3
    S Phi              = -S_eta Phi
    W_xi Phi           = -outer xi_2/|xi| + mu a_2 (xi . a) / |a|^3
    W Phi              = -mu a_2 (a . eta) / |a|^3 + nu eta_2 / |eta|
    D_eta Phi          =  mu |eta| a_2^2 / |a|^3 - nu eta_2^2 / |eta|^2
    D_xi_minus_eta Phi = -mu a_2^2 / |a|^2 + nu |a| eta_2^2 / |eta|^3
    """
    kind = VectorFieldKind(kind)
    xi, eta = _vec(xi), _vec(eta)
    a = xi - eta
    r, ra, re = _norm(xi), _norm(a), _norm(eta)
    sig = np.asarray(eval_sigma(xi, eta))
    mu, nu = spec.mu, spec.nu
    if kind is VectorFieldKind.S_ETA:
        out = mu * _safe_div(a[..., 1] * sig, ra ** 3)
    elif kind is VectorFieldKind.S:
        out = -mu * _safe_div(a[..., 1] * sig, ra ** 3)
    elif kind is VectorFieldKind.S_XI_MINUS_ETA:
        out = -nu * _safe_div(eta[..., 1] * sig, re ** 3)
    elif kind is VectorFieldKind.W_XI:
        out = (-spec.outer * _safe_div(xi[..., 1], r)
               + mu * _safe_div(a[..., 1] * np.sum(xi * a, axis=-1), ra ** 3))
    elif kind is VectorFieldKind.W:
        out = (-mu * _safe_div(a[..., 1] * np.sum(a * eta, axis=-1), ra ** 3)
               + nu * _safe_div(eta[..., 1], re))
    elif kind is VectorFieldKind.D_ETA:
        out = mu * _safe_div(re * a[..., 1] ** 2, ra ** 3) - nu * _safe_div(eta[..., 1] ** 2, re ** 2)
    else:
        out = -mu * _safe_div(a[..., 1] ** 2, ra ** 2) + nu * _safe_div(ra * eta[..., 1] ** 2, re ** 3)
    return _scalar(out)


def directional_fd(g: Callable, kind: VectorFieldKind | str, xi, eta, h: float):
    """Second-order central difference of g along the field, step h relative to the field."""
    xi, eta = _vec(xi), _vec(eta)
    dxi, deta = vf_direction(kind, xi, eta)
    return (np.asarray(g(xi + h * dxi, eta + h * deta))
            - np.asarray(g(xi - h * dxi, eta - h * deta))) / (2 * h)


def directional_richardson(g: Callable, kind: VectorFieldKind | str, xi, eta, h: float = 1e-3):
    """Fourth-order Richardson combination of two central differences."""
    d1 = directional_fd(g, kind, xi, eta, h)
    d2 = directional_fd(g, kind, xi, eta, h / 2)
    return (4 * d2 - d1) / 3


def s_eta_flow_derivative(g: Callable, xi, eta, h: float = 1e-3):
    """S_eta g by Richardson-extrapolated differences along eta -> e^s eta.

    Unlike differences along eta + h eta this keeps the sample on the ray, so shell
    cutoffs in the angle are never crossed.
    """
    xi, eta = _vec(xi), _vec(eta)

    def diff(step):
        return (np.asarray(g(xi, np.exp(step) * eta))
                - np.asarray(g(xi, np.exp(-step) * eta))) / (2 * step)

    return (4 * diff(h / 2) - diff(h)) / 3


# ---------------------------------------------------------------- shells

def _shell_index_weight(v, idx: int, top_is_zero: bool) -> np.ndarray:
    """phi(2^{-idx} v), except that idx = 0 of a bounded quantity uses 1 - psi(2 v)."""
    if top_is_zero and idx == 0:
        return 1.0 - psi(2 * np.asarray(v, float))
    return phi(np.ldexp(np.asarray(v, float), -idx))


def kpq_weight(v, k: int, p: int, q: int | None = None) -> np.ndarray:
    """phi_{k,p,q}(v): phi(2^{-k}|v|) phi_p(sqrt(1 - Lambda^2)) [phi_q(|Lambda|)]."""
    v = _vec(v)
    r = _norm(v)
    s = _safe_div(np.abs(v[..., 1]), r)
    w = phi(np.ldexp(r, -k)) * _shell_index_weight(s, p, True)
    if q is not None:
        w = w * _shell_index_weight(_safe_div(np.abs(v[..., 0]), r), q, True)
    return np.where(r > SYMBOL_TOL, w, 0.0)


Triple = tuple[int, int, "int | None"]


@dataclass(frozen=True)
class ShellConfig:
    """(k, p, q) localizations of xi, xi - eta and eta."""

    xi: Triple
    xi_minus_eta: Triple
    eta: Triple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for t in (self.xi, self.xi_minus_eta, self.eta):
            if len(t) != 3:
                raise ValueError("each shell is a (k, p, q) triple; use q=None to omit q")
            if t[1] > 0 or (t[2] is not None and t[2] > 0):
                raise ValueError("p and q entries must be <= 0")

    @classmethod
    def make(cls, k, p, q=None, name: str = "") -> "ShellConfig":
        """Build from three-element sequences (or scalars broadcast to all vectors)."""
        def three(x):
            return tuple(x) if isinstance(x, (tuple, list)) else (x, x, x)
        k, p, q = three(k), three(p), three(q)
        return cls(*[(k[i], p[i], q[i]) for i in range(3)], name=name)

    @property
    def triples(self) -> tuple[Triple, Triple, Triple]:
        return self.xi, self.xi_minus_eta, self.eta

    @property
    def has_q(self) -> bool:
        """True when every vector carries a q localization."""
        return all(t[2] is not None for t in self.triples)

    @property
    def k_min(self) -> int:
        return min(t[0] for t in self.triples)

    @property
    def k_max(self) -> int:
        return max(t[0] for t in self.triples)

    @property
    def p_min(self) -> int:
        return min(t[1] for t in self.triples)

    @property
    def p_max(self) -> int:
        return max(t[1] for t in self.triples)

    @property
    def q_min(self) -> int | None:
        qs = [t[2] for t in self.triples if t[2] is not None]
        return min(qs) if qs else None

    @property
    def q_max(self) -> int | None:
        qs = [t[2] for t in self.triples if t[2] is not None]
        return max(qs) if qs else None

    def chi(self, xi, eta) -> np.ndarray:
        xi, eta = _vec(xi), _vec(eta)
        return (kpq_weight(xi, *self.xi) * kpq_weight(xi - eta, *self.xi_minus_eta)
                * kpq_weight(eta, *self.eta))


# ---------------------------------------------------------------- normal forms

@dataclass(frozen=True)
class NormalFormSplit:
    """m = psi(Phi/lambda) m + (1 - psi(Phi/lambda)) m."""

    multiplier: MultiplierSpec
    phase: PhaseSpec
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def cutoff(self, xi, eta):
        return psi(np.asarray(eval_phase(self.phase, xi, eta)) / self.lam)

    def resonant(self, xi, eta):
        return self.cutoff(xi, eta) * eval_multiplier(self.multiplier, xi, eta)

    def nonresonant(self, xi, eta):
        m = np.asarray(eval_multiplier(self.multiplier, xi, eta))
        return m - self.resonant(xi, eta)

    def nonresonant_over_phase(self, xi, eta):
        """m^nr / Phi; finite because |Phi| >= (4/5) lambda wherever m^nr is nonzero."""
        ph = np.asarray(eval_phase(self.phase, xi, eta))
        nr = np.asarray(self.nonresonant(xi, eta))
        out = np.zeros(np.broadcast(ph, nr).shape)
        np.divide(nr, ph, out=out, where=np.abs(ph) > 0.5 * self.lam)
        return out


def split_normal_form(spec: MultiplierSpec, phase: PhaseSpec | None, lam: float) -> NormalFormSplit:
    return NormalFormSplit(spec, phase if phase is not None else spec.phase, float(lam))


# ---------------------------------------------------------------- finite-difference suite

@dataclass
class CheckRow:
    name: str
    kind: str           # "analytic" or "fd"
    max_rel_error: float
    order: float | None
    tolerance: float

    @property
    def passed(self) -> bool:
        ok = self.max_rel_error <= self.tolerance
        if self.order is not None:
            ok &= self.order >= 1.8
        return bool(ok)


@dataclass
class CrosscheckReport:
    rows: list[CheckRow]
    samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> CheckRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def _draw_points(rng: np.random.Generator, n: int, min_norm: float = 0.3,
                 min_sin: float = 0.05):
    """Random (xi, eta) pairs away from every degenerate configuration."""
    xi = np.empty((0, 2))
    eta = np.empty((0, 2))
    while len(xi) < n:
        x = rng.uniform(-2, 2, size=(2 * n, 2))
        e = rng.uniform(-2, 2, size=(2 * n, 2))
        a = x - e
        r, ra, re = _norm(x), _norm(a), _norm(e)
        sig = np.abs(eval_sigma(x, e))
        good = ((r > min_norm) & (ra > min_norm) & (re > min_norm)
                & (sig > min_sin * ra * re)
                & (np.abs(x[:, 1]) > min_sin * r) & (np.abs(a[:, 1]) > min_sin * ra)
                & (np.abs(e[:, 1]) > min_sin * re) & (np.abs(ra - re) > 0.05))
        xi = np.concatenate([xi, x[good]])
        eta = np.concatenate([eta, e[good]])
    return xi[:n], eta[:n]


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(np.abs(b), 1.0)
    return float(np.max(np.abs(a - b) / scale))


def _fd_row(name, g, kind, xi, eta, exact, h=1e-4, tol=1e-6) -> CheckRow:
    e1 = np.abs(directional_fd(g, kind, xi, eta, h) - exact)
    e2 = np.abs(directional_fd(g, kind, xi, eta, h / 2) - exact)
    err = float(np.max(e1 / np.maximum(np.abs(exact), 1.0)))
    # order from the aggregate error, ignoring points already at round-off
    big = e1 > 1e-9
    order = float(np.log2(np.sum(e1[big]) / np.sum(e2[big]))) if np.any(big) else 2.0
    return CheckRow(name, "fd", err, order, tol)


def fd_crosscheck_suite(seed: int = 0, sample_count: int = 200) -> CrosscheckReport:
    """Compare every analytic derivative formula with finite differences.

    Finite-difference rows use central differences at h = 1e-4 and h/2 and report the
    observed order.  Analytic rows compare two exact expressions (tolerance 1e-12).
    """
    rng = np.random.default_rng(seed)
    xi, eta = _draw_points(rng, sample_count)
    rows: list[CheckRow] = []
    phases = [PhaseSpec(o, m, n) for o in (1, -1) for m in (1, -1) for n in (1, -1)]

    # sigma antisymmetries
    s = eval_sigma(xi, eta)
    rows.append(CheckRow("sigma(xi,eta)=sigma(xi-eta,eta)", "analytic",
                         _rel(eval_sigma(xi - eta, eta), s), None, 1e-12))
    rows.append(CheckRow("sigma(xi,xi-eta)=-sigma(xi,eta)", "analytic",
                         _rel(eval_sigma(xi, xi - eta), -s), None, 1e-12))

    # phase derivatives: analytic building blocks vs closed forms vs finite differences
    for kind in VectorFieldKind:
        worst_cf, worst_fd, orders = 0.0, 0.0, []
        for ph in phases:
            assembled = vf_on_phase(kind, ph, xi, eta)
            closed = phase_vf_closed_form(kind, ph, xi, eta)
            worst_cf = max(worst_cf, _rel(assembled, closed))
            r = _fd_row("", ph, kind, xi, eta, closed)
            worst_fd = max(worst_fd, r.max_rel_error)
            orders.append(r.order)
        rows.append(CheckRow(f"{kind.value} Phi closed form", "analytic", worst_cf, None, 1e-12))
        rows.append(CheckRow(f"{kind.value} Phi", "fd", worst_fd, min(orders), 1e-6))

    # (S_xi + S_eta) Phi = 0 and the degree-one homogeneity of the multipliers
    worst = 0.0
    for ph in phases:
        tot = (np.asarray(vf_on_phase("S", ph, xi, eta)) + np.asarray(vf_on_phase("S_eta", ph, xi, eta)))
        worst = max(worst, float(np.max(np.abs(tot))))
    rows.append(CheckRow("(S_xi+S_eta)Phi=0", "analytic", worst, None, 1e-12))

    worst_fd = 0.0
    orders = []
    for spec in standard_multipliers() + [MultiplierSpec("n", o, m, n) for o in (1, -1)
                                          for m in (1, -1) for n in (1, -1)]:
        m = np.asarray(spec(xi, eta))
        h = 1e-4
        d1 = (np.asarray(spec((1 + h) * xi, (1 + h) * eta)) - np.asarray(spec((1 - h) * xi, (1 - h) * eta))) / (2 * h)
        worst_fd = max(worst_fd, _rel(d1, m))
        # exact scaling: m(lambda xi, lambda eta) = lambda m(xi, eta)
        worst = max(worst, _rel(np.asarray(spec(3.0 * xi, 3.0 * eta)), 3.0 * m))
    rows.append(CheckRow("(S_xi+S_eta)m=m (Euler, degree 1)", "fd", worst_fd, None, 1e-6))
    rows.append(CheckRow("m(c xi,c eta)=c m(xi,eta)", "analytic", worst, None, 1e-12))

    # D_eta Lambda formulas
    re = _norm(eta)
    a = xi - eta
    ra = _norm(a)
    rows.append(_fd_row("D_eta Lambda(eta)=eta_2^2/|eta|^2", lambda x, e: lam(e), "D_eta",
                        xi, eta, eta[:, 1] ** 2 / re ** 2))
    rows.append(_fd_row("D_eta Lambda(xi-eta)=-(|eta|/|a|)(1-Lambda(a)^2)", lambda x, e: lam(x - e),
                        "D_eta", xi, eta, -(re / ra) * (1 - lam(a) ** 2)))
    rows.append(CheckRow("D_eta Lambda(xi)=0", "analytic",
                         float(np.max(np.abs(vf_on_lambda("D_eta", "xi", xi, eta)))), None, 0.0))
    rows.append(_fd_row("S_eta Lambda(xi-eta)", lambda x, e: lam(x - e), "S_eta", xi, eta,
                        -a[:, 1] * s / ra ** 3))
    rows.append(_fd_row("S_eta sigma=-eta.xi_perp", eval_sigma, "S_eta", xi, eta,
                        -(eta[:, 0] * xi[:, 1] * -1 + eta[:, 1] * xi[:, 0])))

    # resolution identity y.grad f = (y.x/|x|^2) S f + (y.x_perp/|x|^2) W f, f = Lambda
    x, y = xi, eta
    r2 = np.sum(x ** 2, axis=1)
    g = grad_lam(x)
    xp = np.stack([-x[:, 1], x[:, 0]], axis=1)
    lhs = np.sum(y * g, axis=1)
    rhs = (np.sum(y * x, axis=1) / r2 * np.sum(x * g, axis=1)
           + np.sum(y * xp, axis=1) / r2 * np.sum(xp * g, axis=1))
    rows.append(CheckRow("y.grad=(y.x)S/|x|^2+(y.x_perp)W/|x|^2", "analytic", _rel(lhs, rhs), None, 1e-10))

    # decompositions of the frequency fields, applied to a generic smooth test symbol
    def test_symbol(x, e):
        return np.sin(x[..., 0] * e[..., 1]) + np.cos(0.7 * e[..., 0] - 0.3 * x[..., 1]) * np.exp(-0.1 * np.sum(e * e, axis=-1))

    def vf(kind):
        return directional_richardson(test_symbol, kind, xi, eta, 1e-3)

    ap = np.stack([-a[:, 1], a[:, 0]], axis=1)
    ep = np.stack([-eta[:, 1], eta[:, 0]], axis=1)
    # W_{xi-eta} at fixed xi: rotation in the variable xi - eta, i.e. -(xi-eta)_perp . grad_eta
    w_a = -_fd_dir(test_symbol, xi, eta, ap)
    s_a = vf("S_xi_minus_eta")
    s_e, w_e = vf("S_eta"), vf("W")
    rhs1 = -(np.sum(eta * a, 1) / ra ** 2) * s_a - (np.sum(eta * ap, 1) / ra ** 2) * w_a
    rows.append(CheckRow("S_eta=-(eta.a)S_a/|a|^2-(eta.a_perp)W_a/|a|^2", "fd", _rel(s_e, rhs1), None, 1e-6))
    rhs2 = -(np.sum(a * eta, 1) / re ** 2) * s_e - (np.sum(a * ep, 1) / re ** 2) * w_e
    rows.append(CheckRow("S_a=-(a.eta)S_eta/|eta|^2-(a.eta_perp)W_eta/|eta|^2", "fd", _rel(s_a, rhs2), None, 1e-6))
    # W_xi with eta fixed, resolved along a = xi - eta (gradient in a equals gradient in xi)
    wxi = vf("W_xi")
    s_ax = _fd_dir_xi(test_symbol, xi, eta, a)
    w_ax = _fd_dir_xi(test_symbol, xi, eta, ap)
    rhs3 = (np.sum(a * xi, 1) / ra ** 2) * w_ax - (np.sum(ap * xi, 1) / ra ** 2) * s_ax
    rows.append(CheckRow("W_xi=(a.xi)W_a/|a|^2-(a_perp.xi)S_a/|a|^2", "fd", _rel(wxi, rhs3), None, 1e-6))
    return CrosscheckReport(rows, sample_count, seed)


def _fd_dir(g, xi, eta, d, h=1e-3):
    def c(step):
        return (g(xi, eta + step * d) - g(xi, eta - step * d)) / (2 * step)
    return (4 * c(h / 2) - c(h)) / 3


def _fd_dir_xi(g, xi, eta, d, h=1e-3):
    def c(step):
        return (g(xi + step * d, eta) - g(xi - step * d, eta)) / (2 * step)
    return (4 * c(h / 2) - c(h)) / 3
