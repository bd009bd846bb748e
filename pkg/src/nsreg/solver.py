"""Pseudo-spectral incompressible Navier-Stokes on the periodic box.

The velocity is advanced with a four-stage integrating-factor Runge-Kutta
scheme (Lawson RK4): viscosity is integrated exactly through
``exp(-nu |k|^2 t)`` and the Leray-projected, 2/3-dealiased advection term is
handled explicitly.  Pressure never enters the time loop; it is recovered on
demand from the Poisson equation ``-lap P = d_i d_j (u_i u_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    irfft3,
    project_coefficients,
    rfft3,
    random_band_field,
    spectral_l2_norm,
    SpectralField,
)

__all__ = [
    "SolverConfig",
    "SolverState",
    "NumericalFailure",
    "CFLViolation",
    "nonlinear_term",
    "step",
    "cfl_number",
    "recover_pressure",
    "initial_taylor_green",
    "initial_random_divfree",
]


class NumericalFailure(RuntimeError):
    """The integration produced non-finite values."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class CFLViolation(NumericalFailure):
    def __init__(self, cfl: float, limit: float, step_index: int | None = None):
        super().__init__(
            f"CFL number {cfl:.6g} exceeds limit {limit:.6g}", step_index
        )
        self.cfl = cfl
        self.limit = limit


@dataclass(frozen=True)
class SolverConfig:
    viscosity: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    cfl_limit: float = 0.5

    def __post_init__(self):
        if not self.viscosity > 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.cfl_limit > 0:
            raise ValueError(f"cfl_limit must be positive, got {self.cfl_limit}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class SolverState:
    time: float
    velocity: VectorField
    step_index: int = 0


def _advection_coefficients(u_values: np.ndarray, grid: Grid) -> np.ndarray:
    """Dealiased spectral coefficients of div(u (x) u) for real-space u."""
    kx, ky, kz = grid.derivative_wavenumbers
    mask = grid.dealias_mask
    u0, u1, u2 = u_values
    uu = rfft3(np.stack([u0 * u0, u0 * u1, u0 * u2, u1 * u1, u1 * u2, u2 * u2]))
    uu *= mask
    xx, xy, xz, yy, yz, zz = uu
    return 1j * np.stack(
        [
            kx * xx + ky * xy + kz * xz,
            kx * xy + ky * yy + kz * yz,
            kx * xz + ky * yz + kz * zz,
        ]
    )


def nonlinear_term(u: VectorField) -> VectorField:
    """div(u (x) u), products in real space, derivatives spectral, 2/3-dealiased."""
    N = _advection_coefficients(u.values, u.grid)
    return VectorField(u.grid, irfft3(N, u.grid.n))


def _rhs(U: np.ndarray, grid: Grid) -> np.ndarray:
    u = irfft3(U, grid.n)
    return -project_coefficients(_advection_coefficients(u, grid), grid)


def cfl_number(u: VectorField, dt: float) -> float:
    return dt * float(np.max(u.magnitude())) / u.grid.spacing


def step(state: SolverState, cfg: SolverConfig) -> SolverState:
    """Advance one step of size ``cfg.dt``.

    Raises CFLViolation before stepping when ``dt max|u| / dx`` exceeds the
    limit, and NumericalFailure if the new velocity is not finite.
    """
    grid = state.velocity.grid
    cfl = cfl_number(state.velocity, cfg.dt)
    if cfl > cfg.cfl_limit:
        raise CFLViolation(cfl, cfg.cfl_limit, state.step_index)

    dt = cfg.dt
    k2 = grid.k_squared
    e_half = np.exp(-0.5 * cfg.viscosity * dt * k2)
    e_full = e_half * e_half

    # Overflow surfaces as the non-finite check below, not as warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        U = rfft3(state.velocity.values) * grid.dealias_mask
        k1 = _rhs(U, grid)
        k2_ = _rhs(e_half * (U + 0.5 * dt * k1), grid)
        k3 = _rhs(e_half * U + 0.5 * dt * k2_, grid)
        k4 = _rhs(e_full * U + dt * e_half * k3, grid)
        U_new = e_full * U + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2_ + k3) + k4)
        u_new = irfft3(U_new, grid.n)

    index = state.step_index + 1
    if not np.isfinite(u_new).all():
        raise NumericalFailure(f"non-finite velocity after step {index}", index)
    return SolverState(state.time + dt, VectorField(grid, u_new), index)


def recover_pressure(u: VectorField) -> ScalarField:
    """Zero-mean pressure solving ``-lap P = sum_ij d_i d_j (u_i u_j)``."""
    grid = u.grid
    kx, ky, kz = grid.derivative_wavenumbers
    k2 = kx**2 + ky**2 + kz**2
    u0, u1, u2 = u.values
    xx, xy, xz, yy, yz, zz = rfft3(
        np.stack([u0 * u0, u0 * u1, u0 * u2, u1 * u1, u1 * u2, u2 * u2])
    ) * grid.dealias_mask
    # d_i d_j -> -k_i k_j; -lap -> |k|^2
    source = -(
        kx * kx * xx + ky * ky * yy + kz * kz * zz
        + 2.0 * (kx * ky * xy + kx * kz * xz + ky * kz * yz)
    )
    P = np.where(k2 == 0.0, 0.0, source / np.where(k2 == 0.0, 1.0, k2))
    return ScalarField(grid, irfft3(P, grid.n))


def initial_taylor_green(grid: Grid) -> VectorField:
    x, y, z = grid.coordinates()
    return VectorField(
        grid,
        np.stack(
            [
                np.sin(x) * np.cos(y) * np.cos(z),
                -np.cos(x) * np.sin(y) * np.cos(z),
                np.zeros_like(x),
            ]
        ),
    )


def initial_random_divfree(
    grid: Grid, seed: int, spectrum_peak: int = 2, amplitude: float = 1.0
) -> VectorField:
    """Random solenoidal field with ``||u||_L2 = amplitude``.

    The coefficients are drawn in a band fixed by ``spectrum_peak``, so the
    same seed gives the same continuum field on every grid resolving it.
    """
    rng = np.random.default_rng(seed)
    U = random_band_field(grid, rng, spectrum_peak, components=3)
    U = project_coefficients(U, grid)
    U[:, 0, 0, 0] = 0.0
    if amplitude == 0.0:
        return VectorField.zeros(grid)
    norm = spectral_l2_norm(SpectralField(grid, U))
    return VectorField(grid, irfft3(U * (amplitude / norm), grid.n))
