"""Frequency grid, transforms, the Riesz dispersion symbol and the vector fields S, W.

The plane is approximated by a periodic box [-L/2, L/2)^2 sampled at n points per
axis.  Physical arrays are indexed ``f[i1, i2]`` with ``x = (i - n/2) * L / n`` so the
origin sits at index ``n // 2``.

Transform normalization (used everywhere in the package)::

    coeffs = fft2(ifftshift(f)) / n**2

so ``coeffs[j]`` is the Fourier-series coefficient of mode ``xi = (2 pi / L) j``
with the phase referred to the box centre.  Consequences:

* ``L**2 * coeffs`` approximates the continuum transform ``int f(x) e^{-i x.xi} dx``;
* Plancherel reads ``int |f|^2 dx = L**2 * sum |coeffs|^2``;
* products of fields become plain discrete convolutions of coefficients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SYMBOL_TOL = 1e-14
BOUNDARY_MASS_THRESHOLD = 1e-10


class BoundaryMassWarning(UserWarning):
    """Field mass near the box edge makes centred coordinates x unreliable."""


def perp(v1, v2):
    """Return the components of v_perp = (-v2, v1)."""
    return -v2, v1


def riesz_symbol(xi1, xi2):
    """Lambda(xi) = xi1 / |xi|, with Lambda(0) = 0."""
    xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, float), np.asarray(xi2, float))
    r = np.hypot(xi1, xi2)
    out = np.divide(xi1, r, out=np.zeros_like(r), where=r > SYMBOL_TOL)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GridSpec:
    """Square periodic box of side ``box_length`` centred at the origin."""

    n: int = 256
    box_length: float = 40.0

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def dk(self) -> float:
        """Frequency spacing 2 pi / L."""
        return 2 * np.pi / self.box_length

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.n) - self.n // 2) * self.dx
        return tuple(np.meshgrid(c, c, indexing="ij"))

    @cached_property
    def j(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer mode indices in FFT order, each in [-n/2, n/2)."""
        m = np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)
        return tuple(np.meshgrid(m, m, indexing="ij"))

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray]:
        j1, j2 = self.j
        return j1 * self.dk, j2 * self.dk

    @cached_property
    def xi_odd(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers for odd symbols: the Nyquist line of each axis is zeroed.

        Mode -n/2 is its own mirror image, so an odd symbol must vanish there
        for real fields to stay real.
        """
        j1, j2 = self.j
        nyq = -self.n // 2
        return (np.where(j1 == nyq, 0, j1) * self.dk,
                np.where(j2 == nyq, 0, j2) * self.dk)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.hypot(*self.xi)

    @cached_property
    def lam(self) -> np.ndarray:
        """Lambda on the grid (odd-safe, zero at the origin)."""
        out = np.zeros_like(self.xi_abs)
        np.divide(self.xi_odd[0], self.xi_abs, out=out, where=self.xi_abs > 0)
        return out

    @cached_property
    def s(self) -> np.ndarray:
        """sqrt(1 - Lambda^2) = |xi2| / |xi|; equals 1 at the origin."""
        return np.sqrt(np.clip(1.0 - self.lam ** 2, 0.0, 1.0))

    @cached_property
    def inv_abs(self) -> np.ndarray:
        """|xi|^{-1} with the zero mode mapped to 0."""
        out = np.zeros_like(self.xi_abs)
        np.divide(1.0, self.xi_abs, out=out, where=self.xi_abs > 0)
        return out

    @cached_property
    def mirror(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping mode j to mode -j (mod n)."""
        idx = (-np.arange(self.n)) % self.n
        return np.ix_(idx, idx)


def to_spectral(f: np.ndarray) -> np.ndarray:
    n = f.shape[0]
    return np.fft.fft2(np.fft.ifftshift(f)) / n ** 2


def to_physical(c: np.ndarray, real: bool = True) -> np.ndarray:
    n = c.shape[0]
    f = np.fft.fftshift(np.fft.ifft2(c)) * n ** 2
    return f.real if real else f


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a field on ``grid`` (normalization in module docstring)."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_physical(cls, grid: GridSpec, f: np.ndarray) -> "SpectralField":
        return cls(grid, to_spectral(np.asarray(f)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    def physical(self, real: bool = True) -> np.ndarray:
        return to_physical(self.coeffs, real=real)

    def with_coeffs(self, c: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, c)

    def l2(self) -> float:
        """Continuum-consistent L2 norm, L * sqrt(sum |c|^2)."""
        return float(self.grid.box_length * np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def hermitian_defect(self) -> float:
        """max |c(-xi) - conj c(xi)|, zero for real fields."""
        c = self.coeffs
        return float(np.max(np.abs(c[self.grid.mirror] - np.conj(c)), initial=0.0))

    def fourier_values(self) -> np.ndarray:
        """Approximation of the continuum transform, L^2 * coeffs."""
        return self.grid.box_length ** 2 * self.coeffs

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: complex) -> "SpectralField":
        return SpectralField(self.grid, a * self.coeffs)

    __rmul__ = __mul__


def physical_l2(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2)) * grid.dx)


def apply_semigroup(f: SpectralField, t: float, sign: int = 1) -> SpectralField:
    """Multiply each mode by exp(sign * i t Lambda(xi))."""
    if t == 0:
        return f
    return f.with_coeffs(f.coeffs * np.exp(1j * sign * t * f.grid.lam))


def riesz_transform(f: SpectralField) -> SpectralField:
    """R_1 f, i.e. multiplication by -i Lambda."""
    return f.with_coeffs(-1j * f.grid.lam * f.coeffs)


def dealias(f: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with max(|j1|, |j2|) > n/3."""
    return f.with_coeffs(f.coeffs * dealias_mask(f.grid))


def dealias_mask(grid: GridSpec) -> np.ndarray:
    j1, j2 = grid.j
    return (np.maximum(np.abs(j1), np.abs(j2)) <= grid.n / 3).astype(float)


def gradient(f: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Spectral gradient of a real physical field."""
    c = to_spectral(f)
    k1, k2 = grid.xi_odd
    return to_physical(1j * k1 * c), to_physical(1j * k2 * c)


def boundary_mass_fraction(f: np.ndarray, grid: GridSpec) -> float:
    """Fraction of L2 mass lying outside the central half-box |x_i| < L/4."""
    x1, x2 = grid.x
    w = np.abs(f) ** 2
    total = w.sum()
    if total == 0:
        return 0.0
    outside = (np.abs(x1) >= grid.box_length / 4) | (np.abs(x2) >= grid.box_length / 4)
    return float(w[outside].sum() / total)


def _check_boundary(f, grid, threshold):
    frac = boundary_mass_fraction(f, grid)
    if frac > threshold:
        warnings.warn(
            f"boundary mass fraction {frac:.3e} exceeds {threshold:.1e}; "
            "centred coordinates x are unreliable for this field",
            BoundaryMassWarning, stacklevel=3)


def apply_scaling_vf(f: np.ndarray, grid: GridSpec,
                     threshold: float = BOUNDARY_MASS_THRESHOLD) -> np.ndarray:
    """S f = x . grad f with a spectral gradient and centred coordinates."""
    _check_boundary(f, grid, threshold)
    g1, g2 = gradient(f, grid)
    x1, x2 = grid.x
    return x1 * g1 + x2 * g2


def apply_rotation_vf(f: np.ndarray, grid: GridSpec,
                      threshold: float = BOUNDARY_MASS_THRESHOLD) -> np.ndarray:
    """W f = x_perp . grad f = -x2 d1 f + x1 d2 f."""
    _check_boundary(f, grid, threshold)
    g1, g2 = gradient(f, grid)
    x1, x2 = grid.x
    return -x2 * g1 + x1 * g2


def scaling_tower(f: np.ndarray, grid: GridSpec, depth: int,
                  threshold: float = BOUNDARY_MASS_THRESHOLD) -> list[np.ndarray]:
    """[f, S f, ..., S^depth f]."""
    out = [f]
    for _ in range(depth):
        out.append(apply_scaling_vf(out[-1], grid, threshold))
    return out
