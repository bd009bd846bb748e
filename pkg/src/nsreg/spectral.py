"""Fields on the periodic box [0, 2pi)^3 and their spectral calculus.

Real fields are stored as ``(n, n, n)`` arrays indexed ``[ix, iy, iz]`` in C
order (z fastest).  Spectral coefficients use the real-input half-space layout
of ``scipy.fft.rfftn`` with ``norm="forward"``, so that a field is recovered as
``f(x) = sum_k F_k exp(i k.x)`` and ``cos(x)`` has coefficients 1/2 at
``k = (+-1, 0, 0)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "SpectralField",
    "GridMismatchError",
    "NonFiniteError",
    "transform_forward",
    "transform_inverse",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "leray_project",
    "dealias",
    "velocity_gradient",
    "divergence_l2",
    "spectral_l2_norm",
    "grid_l2_norm",
    "random_band_field",
]

BOX_LENGTH = 2.0 * np.pi


class GridMismatchError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by ``NSREG_THREADS`` when set."""
    value = os.environ.get("NSREG_THREADS")
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform ``n^3`` grid on the 2pi-periodic box."""

    n: int
    dealias_fraction: float = 2.0 / 3.0
    box_length: float = field(default=BOX_LENGTH, init=False)

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 4 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 4, got {n!r}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(
                f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}"
            )

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def volume(self) -> float:
        return self.box_length**3

    @property
    def real_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def cutoff(self) -> float:
        """Largest retained |k_i| is ``floor(cutoff)``."""
        return self.dealias_fraction * self.n / 2

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.spacing * np.arange(self.n)
        return tuple(np.meshgrid(x, x, x, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavenumbers broadcastable against the spectral shape."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        kz = np.arange(self.n // 2 + 1, dtype=float)
        return (k[:, None, None], k[None, :, None], kz[None, None, :])

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # Nyquist modes carry no odd derivative on a real grid.
        out = []
        for k in self.wavenumbers:
            k = k.copy()
            k[np.abs(k) == self.n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        c = self.cutoff
        return (np.abs(kx) <= c) & (np.abs(ky) <= c) & (np.abs(kz) <= c)

    @cached_property
    def half_space_weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]


def _check_finite(values: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteError(f"{what} has a non-finite value at index {index}")


def _frozen(values, dtype, shape, what) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {arr.shape}")
    _check_finite(arr, what)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self,
            "values",
            _frozen(self.values, np.float64, self.grid.real_shape, "scalar field"),
        )

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.real_shape))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three components stacked as a ``(3, n, n, n)`` array."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        shape = (3,) + self.grid.real_shape
        object.__setattr__(
            self, "values", _frozen(self.values, np.float64, shape, "vector field")
        )

    @classmethod
    def from_components(cls, components) -> "VectorField":
        components = list(components)
        if len(components) != 3:
            raise ValueError("a vector field needs exactly three components")
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise GridMismatchError("vector components live on different grids")
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3,) + grid.real_shape))

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.einsum("i...,i...->...", self.values, self.values))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Half-space Fourier coefficients of a real scalar or vector field.

    ``coefficients`` has the grid's spectral shape, optionally with a leading
    component axis of length 3.
    """

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coefficients, dtype=np.complex128, copy=True)
        if arr.shape[-3:] != self.grid.spectral_shape or arr.ndim not in (3, 4):
            raise ValueError(
                f"coefficients must end in {self.grid.spectral_shape}, got {arr.shape}"
            )
        _check_finite(arr, "spectral field")
        arr.setflags(write=False)
        object.__setattr__(self, "coefficients", arr)

    @property
    def is_vector(self) -> bool:
        return self.coefficients.ndim == 4


def _same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


# Array-level transforms; the field-level API wraps these.


def rfft3(values: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(values, axes=(-3, -2, -1), norm="forward", workers=fft_workers())


def irfft3(coefficients: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.irfftn(
        coefficients, s=(n, n, n), axes=(-3, -2, -1), norm="forward", workers=fft_workers()
    )


def transform_forward(f: ScalarField | VectorField) -> SpectralField:
    _check_finite(f.values, "transform input")
    return SpectralField(f.grid, rfft3(f.values))


def transform_inverse(F: SpectralField) -> ScalarField | VectorField:
    values = irfft3(F.coefficients, F.grid.n)
    if F.is_vector:
        return VectorField(F.grid, values)
    return ScalarField(F.grid, values)


def spectral_gradient(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    """``(3, ...)`` spectral gradient of scalar coefficients."""
    return np.stack([1j * k * coefficients for k in grid.derivative_wavenumbers])


def spectral_divergence(coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    kx, ky, kz = grid.derivative_wavenumbers
    c = coefficients
    return 1j * (kx * c[0] + ky * c[1] + kz * c[2])


def gradient(f: ScalarField) -> VectorField:
    F = rfft3(f.values)
    return VectorField(f.grid, irfft3(spectral_gradient(F, f.grid), f.grid.n))


def divergence(v: VectorField) -> ScalarField:
    V = rfft3(v.values)
    return ScalarField(v.grid, irfft3(spectral_divergence(V, v.grid), v.grid.n))


def curl(v: VectorField) -> VectorField:
    kx, ky, kz = v.grid.derivative_wavenumbers
    a, b, c = rfft3(v.values)
    W = 1j * np.stack([ky * c - kz * b, kz * a - kx * c, kx * b - ky * a])
    return VectorField(v.grid, irfft3(W, v.grid.n))


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian, consistent with ``divergence(gradient(f))``."""
    kx, ky, kz = f.grid.derivative_wavenumbers
    F = rfft3(f.values)
    return ScalarField(f.grid, irfft3(-(kx**2 + ky**2 + kz**2) * F, f.grid.n))


def project_coefficients(V: np.ndarray, grid: Grid) -> np.ndarray:
    """Remove the longitudinal part of vector coefficients; k = 0 is kept."""
    k = grid.derivative_wavenumbers
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    k2 = np.where(k2 == 0.0, 1.0, k2)
    kdotv = (k[0] * V[0] + k[1] * V[1] + k[2] * V[2]) / k2
    return np.stack([V[i] - k[i] * kdotv for i in range(3)])


def leray_project(v: VectorField) -> VectorField:
    V = project_coefficients(rfft3(v.values), v.grid)
    return VectorField(v.grid, irfft3(V, v.grid.n))


def dealias(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, F.coefficients * F.grid.dealias_mask)


def velocity_gradient(u: VectorField) -> np.ndarray:
    """Array ``G[i, j] = d_j u_i`` of shape ``(3, 3, n, n, n)``."""
    U = rfft3(u.values)
    dU = np.stack([spectral_gradient(U[i], u.grid) for i in range(3)])
    return irfft3(dU, u.grid.n)


def spectral_l2_norm(F: SpectralField) -> float:
    """L2 norm over the box from Parseval's identity."""
    w = F.grid.half_space_weights
    power = np.abs(F.coefficients) ** 2 * w
    return float(np.sqrt(F.grid.volume * power.sum()))


def grid_l2_norm(f: ScalarField | VectorField) -> float:
    return float(np.sqrt(f.grid.cell_volume * np.sum(f.values**2)))


def divergence_l2(v: VectorField) -> float:
    """L2 norm of the spectral divergence of ``v``."""
    D = spectral_divergence(rfft3(v.values), v.grid)
    return spectral_l2_norm(SpectralField(v.grid, D))


def random_band_field(
    grid: Grid,
    rng: np.random.Generator,
    spectrum_peak: int,
    components: int,
) -> np.ndarray:
    """Real-space samples of a random band-limited field.

    Complex Gaussian coefficients are drawn on the cube ``|k_i| <= K`` with
    ``K = 3 * spectrum_peak`` (clipped to the dealias cutoff), weighted by the
    envelope ``(k/kp)^2 exp(-(k/kp)^2)`` and restricted to ``0 < |k| <= K``.
    The draw does not depend on ``grid.n`` except through the clipping, so
    one seed names the same continuum field on every grid that resolves it.
    Returns spectral coefficients of shape ``(components,) + spectral_shape``.
    """
    if spectrum_peak < 1:
        raise ValueError(f"spectrum_peak must be >= 1, got {spectrum_peak}")
    if spectrum_peak > grid.cutoff:
        raise ValueError(
            f"spectrum_peak {spectrum_peak} lies beyond the dealias cutoff "
            f"{grid.cutoff:.3f} of an n={grid.n} grid"
        )
    K = 3 * spectrum_peak
    shape = (components, 2 * K + 1, 2 * K + 1, 2 * K + 1)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    band = min(K, int(np.floor(grid.cutoff)))

    ks = np.arange(-K, K + 1)
    kx, ky, kz = np.meshgrid(ks, ks, ks, indexing="ij")
    kmag = np.sqrt(kx**2 + ky**2 + kz**2)
    x = kmag / spectrum_peak
    envelope = x**2 * np.exp(-(x**2))
    keep = (kmag > 0) & (kmag <= band)
    keep &= (np.abs(kx) <= band) & (np.abs(ky) <= band) & (np.abs(kz) <= band)
    c = c * np.where(keep, envelope, 0.0)
    # Coefficients of Re(sum_k c_k e^{ikx}); reversing the cube maps k -> -k.
    hermitian = 0.5 * (c + np.conj(c[:, ::-1, ::-1, ::-1]))

    out = np.zeros((components,) + grid.spectral_shape, dtype=np.complex128)
    half = kz >= 0
    ix = np.mod(kx[half], grid.n)
    iy = np.mod(ky[half], grid.n)
    iz = kz[half]
    for comp in range(components):
        out[comp, ix, iy, iz] = hermitian[comp][half]
    return out
