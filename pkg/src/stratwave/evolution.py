"""Time integration of dispersive SQG and of the stratified Boussinesq system.

Equations (R_1 has symbol -i Lambda, v_perp = (-v_2, v_1)):

    SQG          theta_t + u . grad theta = R_1 theta,   u = grad_perp |grad|^{-1} theta
    Boussinesq   omega_t + u . grad omega = -d_1 rho,
                 rho_t + u . grad rho = d_1 Delta^{-1} omega,  u = grad_perp Delta^{-1} omega
    Z form       (d_t -+ R_1) Z_± = -|grad|^{-1}(u . grad omega) -+ u . grad rho,
                 Z_± = |grad|^{-1} omega ± rho,  u = -1/2 grad_perp |grad|^{-1}(Z_+ + Z_-),
                 rho = 1/2 (Z_+ - Z_-)

Profiles are e^{i t Lambda} theta and e^{± i t Lambda} Z_±; they are constant under
the linear flow.  Nonlinear terms are pseudospectral with the two-thirds rule.
The theta and Z forms are stepped by classical RK4 on the profile (exact
integrating factor); the (omega, rho) form by plain RK4 with the bounded linear
coupling inside the stages.
"""
from __future__ import annotations

import csv
import json
import math
import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .norms import NormConfig, b_norm, d_norm, s_derivatives, s_tower, sobolev_norm, x_norm
from .spectral import GridSpec, SpectralField, dealias_mask, to_physical, to_spectral

REPRESENTATIONS = ("sqg_theta", "boussinesq_omega_rho", "boussinesq_Z")
MONITORS = ("l2", "sobolev", "s_tower", "b", "x", "d")
CHECKPOINT_MAGIC = b"STRATWAVE-CKPT\n"
CHECKPOINT_VERSION = 1


class NumericalAbort(RuntimeError):
    """Non-finite values appeared during time stepping."""


class CFLWarning(UserWarning):
    """dt * max|u| * max|xi| exceeds the advisory bound 0.5."""


# ---------------------------------------------------------------- state

@dataclass(frozen=True)
class FlowState:
    representation: str
    fields: tuple[SpectralField, ...]
    time: float = 0.0

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")
        want = 1 if self.representation == "sqg_theta" else 2
        if len(self.fields) != want:
            raise ValueError(f"{self.representation} needs {want} field(s)")

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    def coeffs(self) -> tuple[np.ndarray, ...]:
        return tuple(f.coeffs for f in self.fields)

    def with_coeffs(self, cs, time: float | None = None) -> "FlowState":
        g = self.grid
        return FlowState(self.representation, tuple(SpectralField(g, c) for c in cs),
                         self.time if time is None else time)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    end_time: float
    dealias: bool = True
    nonlinear: bool = True
    scheme: str = "rk4-integrating-factor"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.end_time < 0:
            raise ValueError("end_time must be >= 0")

    @property
    def steps(self) -> int:
        return int(round(self.end_time / self.dt))


# ---------------------------------------------------------------- spectral helpers

def _symbols(grid: GridSpec):
    k1, k2 = grid.xi_odd
    return 1j * k1, 1j * k2, grid.inv_abs, grid.xi_abs


def _velocity_from_stream(grid: GridSpec, stream: np.ndarray):
    """u = grad_perp chi for a stream function chi given by its coefficients."""
    d1, d2, _, _ = _symbols(grid)
    return -d2 * stream, d1 * stream


def sqg_velocity(theta: np.ndarray, grid: GridSpec):
    """Coefficients of u = grad_perp |grad|^{-1} theta."""
    return _velocity_from_stream(grid, grid.inv_abs * theta)


def boussinesq_velocity(omega: np.ndarray, grid: GridSpec):
    """Coefficients of u = grad_perp Delta^{-1} omega = -grad_perp |grad|^{-2} omega."""
    return _velocity_from_stream(grid, -grid.inv_abs ** 2 * omega)


def divergence(u1: np.ndarray, u2: np.ndarray, grid: GridSpec) -> np.ndarray:
    d1, d2, _, _ = _symbols(grid)
    return d1 * u1 + d2 * u2


def _advect(u: tuple[np.ndarray, np.ndarray], c: np.ndarray, grid: GridSpec,
            mask: np.ndarray | None) -> np.ndarray:
    """Coefficients of u . grad f, products formed in physical space."""
    d1, d2, _, _ = _symbols(grid)
    prod = (to_physical(u[0]) * to_physical(d1 * c) + to_physical(u[1]) * to_physical(d2 * c))
    out = to_spectral(prod)
    return out * mask if mask is not None else out


def _mask(grid: GridSpec, on: bool) -> np.ndarray | None:
    return dealias_mask(grid) if on else None


def sqg_rhs(state: FlowState, dealias: bool = True) -> SpectralField:
    """-F(u . grad theta); the linear term R_1 theta is handled by the integrating factor."""
    if state.representation != "sqg_theta":
        raise ValueError("sqg_rhs needs the sqg_theta representation")
    g, th = state.grid, state.fields[0].coeffs
    return SpectralField(g, -_advect(sqg_velocity(th, g), th, g, _mask(g, dealias)))


def boussinesq_rhs(state: FlowState, dealias: bool = True) -> tuple[SpectralField, SpectralField]:
    """Nonlinear right-hand sides in the state's own representation.

    (omega, rho): (-F(u . grad omega), -F(u . grad rho)).
    Z form: -|grad|^{-1} F(u . grad omega) -+ F(u . grad rho).
    """
    g = state.grid
    m = _mask(g, dealias)
    if state.representation == "boussinesq_omega_rho":
        om, rho = state.coeffs()
        u = boussinesq_velocity(om, g)
        return (SpectralField(g, -_advect(u, om, g, m)), SpectralField(g, -_advect(u, rho, g, m)))
    if state.representation == "boussinesq_Z":
        zp, zm = state.coeffs()
        psi, rho = 0.5 * (zp + zm), 0.5 * (zp - zm)
        om = g.xi_abs * psi
        u = boussinesq_velocity(om, g)
        a = -g.inv_abs * _advect(u, om, g, m)
        b = _advect(u, rho, g, m)
        return SpectralField(g, a - b), SpectralField(g, a + b)
    raise ValueError("boussinesq_rhs needs a Boussinesq representation")


def boussinesq_linear(state: FlowState) -> tuple[np.ndarray, np.ndarray]:
    """(-d_1 rho, d_1 Delta^{-1} omega) for the (omega, rho) form."""
    g = state.grid
    om, rho = state.coeffs()
    d1, _, inv, _ = _symbols(g)
    return -d1 * rho, -d1 * inv ** 2 * om


# ---------------------------------------------------------------- representations and profiles

def omega_rho_to_z(state: FlowState) -> FlowState:
    g = state.grid
    om, rho = state.coeffs()
    psi = g.inv_abs * om
    return FlowState("boussinesq_Z", (SpectralField(g, psi + rho), SpectralField(g, psi - rho)),
                     state.time)


def z_to_omega_rho(state: FlowState) -> FlowState:
    g = state.grid
    zp, zm = state.coeffs()
    om = g.xi_abs * 0.5 * (zp + zm)
    return FlowState("boussinesq_omega_rho",
                     (SpectralField(g, om), SpectralField(g, 0.5 * (zp - zm))), state.time)


def _profile_signs(representation: str) -> tuple[int, ...]:
    return (1,) if representation == "sqg_theta" else (1, -1)


def to_profiles(state: FlowState) -> tuple[SpectralField, ...]:
    """e^{i t Lambda} theta, or (e^{i t Lambda} Z_+, e^{-i t Lambda} Z_-).

    The (omega, rho) representation is converted to Z first.
    """
    if state.representation == "boussinesq_omega_rho":
        state = omega_rho_to_z(state)
    g, t = state.grid, state.time
    return tuple(SpectralField(g, np.exp(1j * s * t * g.lam) * c)
                 for s, c in zip(_profile_signs(state.representation), state.coeffs()))


def from_profiles(profiles, t: float, representation: str) -> FlowState:
    rep = "boussinesq_Z" if representation == "boussinesq_omega_rho" else representation
    g = profiles[0].grid
    fields = tuple(SpectralField(g, np.exp(-1j * s * t * g.lam) * p.coeffs)
                   for s, p in zip(_profile_signs(rep), profiles))
    state = FlowState(rep, fields, t)
    return z_to_omega_rho(state) if representation == "boussinesq_omega_rho" else state


# ---------------------------------------------------------------- stepping

def _nonlinear(state: FlowState, dealias: bool) -> tuple[np.ndarray, ...]:
    if state.representation == "sqg_theta":
        return (sqg_rhs(state, dealias).coeffs,)
    return tuple(f.coeffs for f in boussinesq_rhs(state, dealias))


def _check_finite(cs, time: float) -> None:
    for c in cs:
        if not np.all(np.isfinite(c)):
            raise NumericalAbort(f"non-finite coefficients at t={time:.6g}")


def max_speed(state: FlowState) -> float:
    g = state.grid
    if state.representation == "sqg_theta":
        u = sqg_velocity(state.fields[0].coeffs, g)
    else:
        om = state.fields[0].coeffs if state.representation == "boussinesq_omega_rho" \
            else g.xi_abs * 0.5 * (state.fields[0].coeffs + state.fields[1].coeffs)
        u = boussinesq_velocity(om, g)
    return float(np.max(np.hypot(to_physical(u[0]), to_physical(u[1]))))


def cfl_number(state: FlowState, dt: float) -> float:
    return dt * max_speed(state) * float(np.max(state.grid.xi_abs))


def step(state: FlowState, cfg: StepperConfig) -> FlowState:
    """One classical RK4 step of size cfg.dt."""
    dt, t0 = cfg.dt, state.time
    if state.representation == "boussinesq_omega_rho":
        def f(s: FlowState):
            lin = boussinesq_linear(s)
            if not cfg.nonlinear:
                return lin
            return tuple(a + b for a, b in zip(lin, _nonlinear(s, cfg.dealias)))

        y = state.coeffs()
        k1 = f(state)
        k2 = f(state.with_coeffs([a + 0.5 * dt * b for a, b in zip(y, k1)], t0 + 0.5 * dt))
        k3 = f(state.with_coeffs([a + 0.5 * dt * b for a, b in zip(y, k2)], t0 + 0.5 * dt))
        k4 = f(state.with_coeffs([a + dt * b for a, b in zip(y, k3)], t0 + dt))
        new = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        _check_finite(new, t0 + dt)
        return state.with_coeffs(new, t0 + dt)

    g = state.grid
    signs = _profile_signs(state.representation)
    rep = state.representation

    def factor(t, s):
        return np.exp(1j * s * t * g.lam)

    def F(t, P):
        if not cfg.nonlinear:
            return [np.zeros_like(p) for p in P]
        s = FlowState(rep, tuple(SpectralField(g, factor(-t, sg) * p) for sg, p in zip(signs, P)), t)
        return [factor(t, sg) * n for sg, n in zip(signs, _nonlinear(s, cfg.dealias))]

    P = [factor(t0, sg) * c for sg, c in zip(signs, state.coeffs())]
    k1 = F(t0, P)
    k2 = F(t0 + 0.5 * dt, [p + 0.5 * dt * k for p, k in zip(P, k1)])
    k3 = F(t0 + 0.5 * dt, [p + 0.5 * dt * k for p, k in zip(P, k2)])
    k4 = F(t0 + dt, [p + dt * k for p, k in zip(P, k3)])
    P = [p + dt / 6 * (a + 2 * b + 2 * c + d) for p, a, b, c, d in zip(P, k1, k2, k3, k4)]
    _check_finite(P, t0 + dt)
    return state.with_coeffs([factor(-(t0 + dt), sg) * p for sg, p in zip(signs, P)], t0 + dt)


# ---------------------------------------------------------------- initial data

def _random_smooth(grid: GridSpec, rng: np.random.Generator, width: float) -> np.ndarray:
    """Real random field: band-limited noise under a Gaussian envelope, sup-normalized."""
    c = (rng.standard_normal((grid.n, grid.n)) + 1j * rng.standard_normal((grid.n, grid.n)))
    c *= np.exp(-0.5 * grid.xi_abs ** 2)
    f = to_physical(c) * np.exp(-(grid.x[0] ** 2 + grid.x[1] ** 2) / (2 * width ** 2))
    return f / np.max(np.abs(f))


def initial_state(representation: str, grid: GridSpec, eps: float, seed: int = 0,
                  width: float | None = None) -> FlowState:
    """Deterministic smooth localized data of sup norm eps (per component).

    Boussinesq data are drawn as (omega, rho) with mean-free omega and converted when
    the Z form is requested, so both forms start from the same physical state.
    """
    rng = np.random.default_rng(seed)
    width = grid.box_length / 16 if width is None else width
    mask = dealias_mask(grid)
    if representation == "sqg_theta":
        th = to_spectral(eps * _random_smooth(grid, rng, width)) * mask
        return FlowState(representation, (SpectralField(grid, th),))
    om = to_spectral(eps * _random_smooth(grid, rng, width)) * mask
    om[0, 0] = 0.0
    rho = to_spectral(eps * _random_smooth(grid, rng, width)) * mask
    st = FlowState("boussinesq_omega_rho", (SpectralField(grid, om), SpectralField(grid, rho)))
    return omega_rho_to_z(st) if representation == "boussinesq_Z" else st


# ---------------------------------------------------------------- monitoring

def conserved_l2(state: FlowState) -> float:
    """||theta||_2, or sqrt((||Z_+||^2 + ||Z_-||^2)/2) for Boussinesq."""
    if state.representation == "sqg_theta":
        return state.fields[0].l2()
    z = omega_rho_to_z(state) if state.representation == "boussinesq_omega_rho" else state
    return math.sqrt(0.5 * (z.fields[0].l2() ** 2 + z.fields[1].l2() ** 2))


def energy_identity_residual(state: FlowState) -> float:
    """| ||u||^2 + ||rho||^2 - (||Z_+||^2 + ||Z_-||^2)/2 | relative to the energy."""
    if state.representation == "sqg_theta":
        return 0.0
    g = state.grid
    z = omega_rho_to_z(state) if state.representation == "boussinesq_omega_rho" else state
    wr = z_to_omega_rho(z)
    u1, u2 = boussinesq_velocity(wr.fields[0].coeffs, g)
    lhs = (SpectralField(g, u1).l2() ** 2 + SpectralField(g, u2).l2() ** 2 + wr.fields[1].l2() ** 2)
    rhs = 0.5 * (z.fields[0].l2() ** 2 + z.fields[1].l2() ** 2)
    return abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)


@dataclass
class TrajectoryRow:
    t: float
    l2: float
    energy_identity_residual: float
    sobolev: float = float("nan")
    s_energies: list[float] = field(default_factory=list)
    b: float = float("nan")
    x: float = float("nan")
    d: float = float("nan")


@dataclass
class Trajectory:
    rows: list[TrajectoryRow]
    final: FlowState
    ledger: dict

    def write_csv(self, path, s_depth: int | None = None) -> None:
        depth = s_depth if s_depth is not None else max((len(r.s_energies) for r in self.rows), default=0)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "l2", "energy_identity_residual", "sobolev",
                        *[f"s{j}" for j in range(1, depth + 1)], "b", "x", "d"])
            for r in self.rows:
                s = (r.s_energies[1:] + [float("nan")] * depth)[:depth]
                w.writerow([f"{v:.17g}" for v in (r.t, r.l2, r.energy_identity_residual, r.sobolev,
                                                   *s, r.b, r.x, r.d)])


def _monitor_row(state: FlowState, monitors, cfg: NormConfig) -> TrajectoryRow:
    row = TrajectoryRow(state.time, conserved_l2(state), energy_identity_residual(state))
    profiles = to_profiles(state)
    if "sobolev" in monitors:
        row.sobolev = math.sqrt(sum(sobolev_norm(f, cfg.n0) ** 2 for f in state.fields))
    if "s_tower" in monitors:
        towers = [s_tower(p, cfg.s_tower_depth) for p in profiles]
        row.s_energies = [math.sqrt(sum(t[j] ** 2 for t in towers)) for j in range(len(towers[0]))]
    if "b" in monitors:
        row.b = max(b_norm(p, cfg) for p in profiles)
    if "x" in monitors:
        row.x = max(x_norm(p, cfg) for p in profiles)
    if "d" in monitors:
        row.d = max(d_norm(*s_derivatives(p, 2), cfg=cfg) for p in profiles)
    return row


def default_cadence(cfg: StepperConfig) -> int:
    return max(1, math.floor(cfg.end_time / (100 * cfg.dt)))


def run_simulation(initial: FlowState, cfg: StepperConfig, monitors=("l2",),
                   cadence: int | None = None, norm_cfg: NormConfig | None = None,
                   cfl_guard: bool = True) -> Trajectory:
    """Step to end_time, sampling monitors every ``cadence`` steps (and at the end).

    The ledger records the maximal relative drift of the conserved L2 quantity and
    the maximal energy-identity residual.
    """
    bad = set(monitors) - set(MONITORS)
    if bad:
        raise ValueError(f"unknown monitors {sorted(bad)}")
    norm_cfg = norm_cfg or NormConfig()
    cadence = cadence or default_cadence(cfg)
    state = initial
    if cfg.dealias:
        m = dealias_mask(state.grid)
        state = state.with_coeffs([c * m for c in state.coeffs()])
    if cfl_guard and cfl_number(state, cfg.dt) > 0.5:
        warnings.warn(f"CFL number {cfl_number(state, cfg.dt):.3g} exceeds 0.5", CFLWarning)
    rows = [_monitor_row(state, monitors, norm_cfg)]
    n = cfg.steps
    for i in range(1, n + 1):
        state = step(state, cfg)
        if i % cadence == 0 or i == n:
            rows.append(_monitor_row(state, monitors, norm_cfg))
    l0 = rows[0].l2
    ledger = {
        "max_l2_drift": max(abs(r.l2 - l0) / l0 for r in rows) if l0 > 0 else 0.0,
        "max_energy_identity_residual": max(r.energy_identity_residual for r in rows),
        "samples": len(rows),
        "steps": n,
    }
    return Trajectory(rows, state, ledger)


def field_difference(a: FlowState, b: FlowState) -> float:
    """sup over x of the difference of the physical (omega, rho) fields."""
    wa = a if a.representation == "boussinesq_omega_rho" else z_to_omega_rho(a)
    wb = b if b.representation == "boussinesq_omega_rho" else z_to_omega_rho(b)
    return max(float(np.max(np.abs(fa.physical() - fb.physical())))
               for fa, fb in zip(wa.fields, wb.fields))


# ---------------------------------------------------------------- checkpoints

def write_checkpoint(state: FlowState, path) -> None:
    """Byte layout:

        CHECKPOINT_MAGIC
        u32 little-endian header length H, then H bytes of UTF-8 JSON
            {"version", "n", "box_length", "representation", "time", "fields"}
        for each field: n*n complex128 little-endian values, C order (index [j1, j2]
            in FFT order, normalization of ``spectral``)
    """
    g = state.grid
    header = json.dumps({"version": CHECKPOINT_VERSION, "n": g.n, "box_length": g.box_length,
                         "representation": state.representation, "time": state.time,
                         "fields": len(state.fields)}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for f in state.fields:
            fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())


def read_checkpoint(path) -> FlowState:
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        (h,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(h).decode("utf-8"))
        g = GridSpec(meta["n"], meta["box_length"])
        size = g.n * g.n * 16
        fields = tuple(SpectralField(g, np.frombuffer(fh.read(size), dtype="<c16")
                                     .reshape(g.n, g.n).astype(complex))
                       for _ in range(meta["fields"]))
    return FlowState(meta["representation"], fields, meta["time"])


def with_time(state: FlowState, t: float) -> FlowState:
    return replace(state, time=t)
