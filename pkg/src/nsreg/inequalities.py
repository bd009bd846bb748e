"""Numerical checks of the interpolation lemma behind the L^3 estimate.

For ``2 <= r < 6`` and ``theta = 3/r - 1/2`` the lemma claims a constant C with

    beta ||f||_r^2 <= 1/4 ||grad f||_2^2 + C beta^(1/theta) ||f||_2^2

for every beta > 0.  Its proof chains the Sobolev bound
``||f||_6 <= C ||grad f||_2``, Holder interpolation between L^2 and L^6, and
the weighted product inequality ``ab <= theta a^(1/theta) + (1-theta) b^(1/(1-theta))``.
Constants reported here are constants of the periodic box, not of R^3; the
mean-zero restriction replaces decay at infinity.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .diagnostics import lq_norm
from .spectral import (
    Grid,
    ScalarField,
    SpectralField,
    irfft3,
    random_band_field,
    rfft3,
    spectral_gradient,
    spectral_l2_norm,
)

__all__ = [
    "LemmaReport",
    "default_beta_grid",
    "gradient_l2_squared",
    "random_mean_zero_field",
    "sobolev_ratio",
    "interpolation_check",
    "young_split",
    "lemma_constant",
    "lemma1_verify",
]


def default_beta_grid(points: int = 9) -> np.ndarray:
    return np.logspace(-2, 2, points)


def _theta(r: float) -> float:
    if not 2 <= r < 6:
        raise ValueError(f"r must lie in [2, 6), got {r}")
    return 3.0 / r - 0.5


def gradient_l2_squared(f: ScalarField) -> float:
    """``||grad f||_2^2`` by Parseval."""
    G = spectral_gradient(rfft3(f.values), f.grid)
    return spectral_l2_norm(SpectralField(f.grid, G)) ** 2


def random_mean_zero_field(grid: Grid, seed: int, spectrum_peak: int = 2) -> ScalarField:
    rng = np.random.default_rng(seed)
    F = random_band_field(grid, rng, spectrum_peak, components=1)[0]
    F[0, 0, 0] = 0.0
    return ScalarField(grid, irfft3(F, grid.n))


def _check_mean_zero(f: ScalarField) -> None:
    scale = float(np.max(np.abs(f.values)))
    if abs(float(f.values.mean())) > 1e-10 * max(scale, 1e-300):
        raise ValueError("field must have zero mean on the box")


def sobolev_ratio(f: ScalarField) -> float:
    """``||f||_6 / ||grad f||_2`` for a mean-zero, nonconstant f."""
    _check_mean_zero(f)
    grad = gradient_l2_squared(f)
    if grad == 0.0:
        raise ValueError("constant field: the gradient vanishes")
    return lq_norm(f, 6) / np.sqrt(grad)


def interpolation_check(f: ScalarField, r: float) -> float:
    """``||f||_r^2 / ((||f||_2^2)^theta (||f||_6^2)^(1-theta))``; Holder makes it <= 1."""
    theta = _theta(r)
    n2 = lq_norm(f, 2)
    if n2 == 0.0:
        raise ValueError("field must be nonzero")
    n6 = lq_norm(f, 6)
    nr = lq_norm(f, r)
    return nr**2 / ((n2**2) ** theta * (n6**2) ** (1.0 - theta))


def young_split(a: float, b: float, theta: float) -> tuple[float, float]:
    """``(ab, theta a^(1/theta) + (1-theta) b^(1/(1-theta)))``."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if a < 0 or b < 0:
        raise ValueError("a and b must be non-negative")
    return a * b, theta * a ** (1.0 / theta) + (1.0 - theta) * b ** (1.0 / (1.0 - theta))


def lemma_constant(lr_sq: float, grad_sq: float, l2_sq: float, beta: float, theta: float) -> float:
    """Smallest C >= 0 making the lemma hold for one field and one beta."""
    excess = beta * lr_sq - 0.25 * grad_sq
    if excess <= 0:
        return 0.0
    return excess / (beta ** (1.0 / theta) * l2_sq)


@dataclass
class LemmaReport:
    r: float
    theta: float
    beta_grid: list[float]
    fitted_C: float
    worst_case: dict
    holds: bool
    members: int
    constants: list[list[float]] = field(repr=False, default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def lemma1_verify(
    ensemble: Sequence[ScalarField],
    r: float,
    beta_grid: Sequence[float] | None = None,
    names: Sequence[str] | None = None,
) -> LemmaReport:
    """Fit the minimal lemma constant over an ensemble and a beta grid.

    Every member must be mean-zero.  After the fit the inequality is
    re-evaluated for every (field, beta) pair with the fitted constant; a
    relative round-off allowance of 1e-12 is used for the re-check only.
    """
    if len(ensemble) == 0:
        raise ValueError("ensemble is empty")
    theta = _theta(r)
    betas = default_beta_grid() if beta_grid is None else np.asarray(beta_grid, float)
    if np.any(betas <= 0):
        raise ValueError("beta values must be positive")
    names = list(names) if names is not None else [f"field-{i}" for i in range(len(ensemble))]

    norms = []
    for f in ensemble:
        _check_mean_zero(f)
        norms.append((lq_norm(f, r) ** 2, gradient_l2_squared(f), lq_norm(f, 2) ** 2))

    table = [[lemma_constant(lr, g, l2, float(b), theta) for b in betas] for lr, g, l2 in norms]
    C = np.asarray(table)
    i, j = np.unravel_index(int(np.argmax(C)), C.shape)
    fitted = float(C[i, j])

    holds = True
    for lr, g, l2 in norms:
        for b in betas:
            lhs = b * lr
            rhs = 0.25 * g + fitted * b ** (1.0 / theta) * l2
            if lhs > rhs * (1 + 1e-12):
                holds = False
    return LemmaReport(
        r=float(r),
        theta=theta,
        beta_grid=[float(b) for b in betas],
        fitted_C=fitted,
        worst_case={"field": names[i], "beta": float(betas[j])},
        holds=holds,
        members=len(ensemble),
        constants=C.tolist(),
    )
