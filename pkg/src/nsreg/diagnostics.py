"""Velocity-direction diagnostics along Navier-Stokes flows.

The central quantity is ``div(u/|u|)``.  Where the flow is incompressible it
satisfies ``|u| div(u/|u|) = -(u/|u|) . grad|u|``, it depends only on the
symmetric part of ``grad u``, and it controls the growth of ``int |u|^3`` in a
Gronwall estimate.  This module evaluates those quantities on sampled fields
and accumulates their space-time norms along a run.

Near zeros of ``u`` the magnitude is floored, ``m = max(|u|, eps)``, and
norm/residual reporting is restricted to the mask ``{|u| >= delta max|u|}``.
Derivatives of ``m`` and ``u/m`` are taken by the chain rule from the
spectral velocity gradient; ``u/m`` itself is not smooth at zeros of ``u``,
so differentiating it spectrally would only measure Gibbs oscillations.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .solver import recover_pressure
from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    irfft3,
    rfft3,
    spectral_gradient,
    velocity_gradient,
)

__all__ = [
    "CriterionSpec",
    "ExponentBudget",
    "InadmissibleCriterion",
    "DegenerateFieldWarning",
    "DirectionDivergence",
    "DiagnosticsRecord",
    "GronwallReport",
    "TimeAccumulator",
    "RunMonitor",
    "parse_exponent",
    "exponent_budget",
    "direction_divergence",
    "identity_residual",
    "symmetric_part_check",
    "lq_norm",
    "mixed_norm_accumulate",
    "pressure_bound_probe",
    "gronwall_check",
    "serrin_monitor",
    "flux_identity",
    "diagnose",
]

INF = math.inf


class InadmissibleCriterion(ValueError):
    def __init__(self, message: str, violated: list[str]):
        super().__init__(message)
        self.violated = violated


class DegenerateFieldWarning(UserWarning):
    """The velocity vanishes (or the mask is empty); results are set to zero."""


# ---------------------------------------------------------------------------
# exponent arithmetic


def parse_exponent(value) -> float:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞", "+inf"):
            return INF
        value = float(text)
    value = float(value)
    if math.isnan(value):
        raise ValueError("exponent is NaN")
    return value


def _recip(x: float) -> Fraction:
    """Exact reciprocal of an exponent; 1/inf = 0."""
    if x == INF:
        return Fraction(0)
    return 1 / Fraction(x)


def _from_recip(r: Fraction) -> float:
    return INF if r == 0 else float(1 / r)


def _fmt(r: Fraction) -> str:
    return str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"


@dataclass(frozen=True)
class CriterionSpec:
    """Time exponent ``p`` and space exponent ``q`` for ``div(u/|u|)``."""

    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = parse_exponent(getattr(self, name))
            if v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
            object.__setattr__(self, name, v)

    def constraints(self) -> list[tuple[str, bool, str]]:
        """Each admissibility condition as ``(name, holds, evaluation)``."""
        s = 2 * _recip(self.p) + 3 * _recip(self.q)
        rel = "<=" if s <= Fraction(1, 2) else ">"
        return [
            ("2/p+3/q <= 1/2", s <= Fraction(1, 2), f"2/p+3/q = {_fmt(s)} {rel} 1/2"),
            ("q >= 6", self.q >= 6, f"q = {self.q:g}"),
            ("p >= 4", self.p >= 4, f"p = {self.p:g}"),
        ]

    @property
    def admissible(self) -> bool:
        return all(ok for _, ok, _ in self.constraints())

    def violations(self) -> list[str]:
        return [detail for _, ok, detail in self.constraints() if not ok]


@dataclass(frozen=True)
class ExponentBudget:
    """Exponents threaded through the L^3 estimate.

    Reciprocals are kept as exact fractions (``1/inf = 0``); the float
    properties convert them back.
    """

    p: float
    q: float
    b: float
    inv_a: Fraction
    inv_pbar: Fraction
    inv_qbar: Fraction
    inv_r: Fraction
    theta_exact: Fraction
    checks: tuple[tuple[str, bool], ...]

    @property
    def a(self) -> float:
        return _from_recip(self.inv_a)

    @property
    def pbar(self) -> float:
        return _from_recip(self.inv_pbar)

    @property
    def qbar(self) -> float:
        return _from_recip(self.inv_qbar)

    @property
    def r(self) -> float:
        return _from_recip(self.inv_r)

    @property
    def theta(self) -> float:
        return float(self.theta_exact)

    @property
    def ok(self) -> bool:
        return all(ok for _, ok in self.checks)

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "b": self.b,
            "a": self.a,
            "pbar": self.pbar,
            "qbar": self.qbar,
            "r": self.r,
            "theta": self.theta,
            "checks": {name: ok for name, ok in self.checks},
        }


def exponent_budget(p, q, b, require_admissible: bool = True) -> ExponentBudget:
    """Derive ``(a, pbar, qbar, r, theta)`` from the criterion ``(p, q)`` and ``b``.

    ``a`` is fixed by ``2/a + 3/b = 3/2``; then ``1/pbar = 1/p + 1/a``,
    ``1/qbar = 1/q + 1/b``, ``2/r + 1/qbar = 1`` and ``theta = 3/r - 1/2``.
    Raises InadmissibleCriterion naming the violated constraint when
    ``require_admissible`` and ``(p, q)`` fails the criterion.
    """
    spec = CriterionSpec(p, q)
    if require_admissible and not spec.admissible:
        violated = spec.violations()
        raise InadmissibleCriterion(
            f"criterion (p, q) = ({spec.p:g}, {spec.q:g}) is inadmissible: "
            + "; ".join(violated),
            violated,
        )
    b = parse_exponent(b)
    if not 2 <= b <= 6:
        raise ValueError(f"b must lie in [2, 6], got {b}")
    inv_b = _recip(b)
    inv_a = (Fraction(3, 2) - 3 * inv_b) / 2
    inv_pbar = _recip(spec.p) + inv_a
    inv_qbar = _recip(spec.q) + inv_b
    inv_r = (1 - inv_qbar) / 2
    theta = 3 * inv_r - Fraction(1, 2)
    theta_alt = (2 - 3 * inv_qbar) / 2
    checks = (
        ("2/a+3/b = 3/2", 2 * inv_a + 3 * inv_b == Fraction(3, 2)),
        ("2 <= qbar < 6", Fraction(1, 6) < inv_qbar <= Fraction(1, 2)),
        ("pbar > 1", inv_pbar < 1),
        ("2/pbar+3/qbar <= 2", 2 * inv_pbar + 3 * inv_qbar <= 2),
        ("2/r+1/qbar = 1", 2 * inv_r + inv_qbar == 1),
        ("theta = (2-3/qbar)/2", theta == theta_alt),
        ("0 < theta <= 1", 0 < theta <= 1),
        ("1/theta <= pbar", theta > 0 and inv_pbar <= theta),
    )
    return ExponentBudget(
        p=spec.p,
        q=spec.q,
        b=b,
        inv_a=inv_a,
        inv_pbar=inv_pbar,
        inv_qbar=inv_qbar,
        inv_r=inv_r,
        theta_exact=theta,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# norms and time accumulation


def _lq(values: np.ndarray, q: float, cell_volume: float, mask=None) -> float:
    a = np.abs(values)
    if mask is not None:
        a = np.where(mask, a, 0.0)
    if q == INF:
        return float(a.max()) if a.size else 0.0
    return float((cell_volume * np.sum(a**q)) ** (1.0 / q))


def lq_norm(f: ScalarField | VectorField, q, mask: np.ndarray | None = None) -> float:
    """Grid-quadrature ``L^q`` norm over the box; vectors use the pointwise magnitude."""
    q = parse_exponent(q)
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    values = f.magnitude() if isinstance(f, VectorField) else f.values
    return _lq(values, q, f.grid.cell_volume, mask)


class TimeAccumulator:
    """Running ``int_t0^t g(s)^p ds`` by the trapezoid rule (running max for p = inf).

    ``value`` is the raw integral, additive over abutting windows;
    ``norm`` applies the final ``1/p`` power.
    """

    def __init__(self, p=1.0):
        self.p = parse_exponent(p)
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        self.value = 0.0
        self.last_time: float | None = None
        self.last_sample: float | None = None

    def add(self, t: float, sample: float) -> float:
        if sample < 0 or not math.isfinite(sample):
            raise ValueError(f"sample must be finite and non-negative, got {sample}")
        if self.last_time is not None and not t > self.last_time:
            raise ValueError(f"time samples must increase: {t} after {self.last_time}")
        if self.p == INF:
            self.value = max(self.value, sample)
        elif self.last_time is not None:
            h = t - self.last_time
            self.value += 0.5 * h * (self.last_sample**self.p + sample**self.p)
        self.last_time = t
        self.last_sample = sample
        return self.value

    @property
    def norm(self) -> float:
        if self.p == INF:
            return self.value
        return self.value ** (1.0 / self.p)

    def state(self) -> dict:
        return {"p": self.p, "value": self.value, "last_time": self.last_time,
                "last_sample": self.last_sample}

    @classmethod
    def from_state(cls, state: dict) -> "TimeAccumulator":
        acc = cls(state["p"])
        acc.value = state["value"]
        acc.last_time = state["last_time"]
        acc.last_sample = state["last_sample"]
        return acc


def mixed_norm_accumulate(times: Sequence[float], norms: Sequence[float], p) -> float:
    """``(int ||.||_q^p dt)^(1/p)`` over sampled times; ``p = inf`` gives the max."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("time samples must be strictly increasing")
    acc = TimeAccumulator(p)
    for t, v in zip(times, norms):
        acc.add(float(t), float(v))
    return acc.norm


# ---------------------------------------------------------------------------
# pointwise direction calculus


@dataclass
class _Kinematics:
    """Velocity gradient, floored magnitude and derived pointwise fields."""

    grid: Grid
    u: np.ndarray
    G: np.ndarray  # G[i, j] = d_j u_i
    speed: np.ndarray
    m: np.ndarray
    grad_m: np.ndarray
    dirdiv: np.ndarray  # div(u/m)
    mask: np.ndarray
    degenerate: bool


def _kinematics(
    u: VectorField,
    epsilon: float | None = None,
    epsilon_rel: float = 1e-12,
    mask_delta: float = 1e-2,
) -> _Kinematics:
    grid = u.grid
    speed = u.magnitude()
    umax = float(speed.max())
    G = velocity_gradient(u)
    if umax == 0.0:
        zero = np.zeros_like(speed)
        return _Kinematics(grid, u.values, G, speed, zero, np.zeros_like(u.values),
                           zero, np.zeros(speed.shape, bool), True)
    eps = epsilon_rel * umax if epsilon is None else epsilon
    if not eps > 0:
        raise ValueError(f"floor epsilon must be positive, got {eps}")
    m = np.maximum(speed, eps)
    active = speed >= eps
    # grad|u| = (grad u)^T u / |u|; zero where the floor is active.
    grad_m = np.where(active, np.einsum("i...,ij...->j...", u.values, G) / m, 0.0)
    divu = G[0, 0] + G[1, 1] + G[2, 2]
    u_dot_grad_m = np.einsum("i...,i...->...", u.values, grad_m)
    dirdiv = divu / m - u_dot_grad_m / m**2
    mask = speed >= mask_delta * umax
    return _Kinematics(grid, u.values, G, speed, m, grad_m, dirdiv, mask,
                       not mask.any())


@dataclass(frozen=True, eq=False)
class DirectionDivergence:
    field: ScalarField
    mask: np.ndarray
    degenerate: bool


def direction_divergence(
    u: VectorField,
    epsilon: float | None = None,
    epsilon_rel: float = 1e-12,
    mask_delta: float = 1e-2,
) -> DirectionDivergence:
    """``div(u/m)`` with ``m = max(|u|, epsilon)``, plus the mask ``|u| >= delta max|u|``.

    ``epsilon`` defaults to ``epsilon_rel * max|u|``.  A vanishing field yields
    a zero result flagged ``degenerate``.
    """
    kin = _kinematics(u, epsilon, epsilon_rel, mask_delta)
    if kin.degenerate:
        warnings.warn("direction of a vanishing field is undefined", DegenerateFieldWarning)
    return DirectionDivergence(ScalarField(u.grid, kin.dirdiv), kin.mask, kin.degenerate)


def _identity_residual(kin: _Kinematics) -> float:
    if kin.degenerate:
        return 0.0
    lhs = kin.m * kin.dirdiv
    rhs = -np.einsum("i...,i...->...", kin.u / kin.m, kin.grad_m)
    return float(np.abs(lhs - rhs)[kin.mask].max())


def identity_residual(
    u: VectorField,
    epsilon: float | None = None,
    mask_delta: float = 1e-2,
    epsilon_rel: float = 1e-12,
) -> float:
    """Masked sup of ``| m div(u/m) + (u/m) . grad m |``.

    For smooth ``u`` this equals ``sup_mask |div u|``, so it vanishes for
    solenoidal fields up to round-off.  An empty mask warns and returns 0.
    """
    if not 0 < mask_delta < 1:
        raise ValueError(f"mask_delta must lie in (0, 1), got {mask_delta}")
    kin = _kinematics(u, epsilon, epsilon_rel, mask_delta)
    if kin.degenerate:
        warnings.warn("identity residual over an empty mask", DegenerateFieldWarning)
    return _identity_residual(kin)


def symmetric_part_check(u: VectorField) -> float:
    """``sup |u^T Omega u|`` with ``Omega`` the antisymmetric part of ``grad u``."""
    G = velocity_gradient(u)
    omega = 0.5 * (G - np.swapaxes(G, 0, 1))
    form = np.einsum("i...,ij...,j...->...", u.values, omega, u.values)
    return float(np.abs(form).max())


def flux_identity(u: VectorField, epsilon_rel: float = 1e-12) -> tuple[float, float]:
    """``int |u| |grad|u||^2`` by two routes.

    The first uses the chain rule on the spectral velocity gradient.  The
    second is ``(4/9) int |grad |u|^(3/2)|^2`` with ``grad |u|^2`` taken
    spectrally from the alias-free product on a doubled grid.
    """
    kin = _kinematics(u, None, epsilon_rel)
    cell = u.grid.cell_volume
    if kin.degenerate:
        return 0.0, 0.0
    flux = cell * float(np.sum(kin.m * np.einsum("i...,i...->...", kin.grad_m, kin.grad_m)))

    grid = u.grid
    fine = Grid(2 * grid.n, grid.dealias_fraction)
    U = rfft3(u.values)
    Uf = np.zeros((3,) + fine.spectral_shape, dtype=complex)
    h = grid.n // 2
    # Copy every stored mode except Nyquist planes into the padded layout.
    for sx, dx in ((slice(0, h), slice(0, h)), (slice(h + 1, None), slice(fine.n - h + 1, None))):
        for sy, dy in ((slice(0, h), slice(0, h)), (slice(h + 1, None), slice(fine.n - h + 1, None))):
            Uf[:, dx, dy, :h] = U[:, sx, sy, :h]
    uf = irfft3(Uf, fine.n)
    sq = np.einsum("i...,i...->...", uf, uf)
    grad_sq = irfft3(spectral_gradient(rfft3(sq), fine), fine.n)[:, ::2, ::2, ::2]
    active = kin.speed >= kin.m  # floor inactive
    s = np.where(active, kin.speed**2, 1.0)
    grad_f = np.where(active, 0.75 * s**-0.25 * grad_sq, 0.0)
    alt = (4.0 / 9.0) * cell * float(np.sum(grad_f**2))
    return flux, alt


# ---------------------------------------------------------------------------
# pressure and Serrin probes


def pressure_bound_probe(u: VectorField, r: float) -> float:
    """``||P||_{3r/4} / ||u||_{3r/2}^2`` with P the zero-mean pressure of u."""
    r = float(r)
    if not r > 4.0 / 3.0:
        raise ValueError(f"r must exceed 4/3, got {r}")
    denom = lq_norm(u, 1.5 * r) ** 2
    if denom == 0.0:
        return 0.0
    return lq_norm(recover_pressure(u), 0.75 * r) / denom


def serrin_monitor(u: VectorField) -> float:
    """``||u||_{L^9}``; integrate its cube in time with ``TimeAccumulator(3)``."""
    return lq_norm(u, 9)


# ---------------------------------------------------------------------------
# per-step records and the Gronwall tracker

CSV_FIELDS = (
    "time",
    "energy",
    "grad_sq",
    "l3_cubed",
    "flux",
    "dirdiv_Lq",
    "weighted_dirdiv",
    "serrin_l9",
    "criterion_accum",
    "serrin_accum",
    "identity_residual",
    "gronwall_margin",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    energy: float
    grad_sq: float
    l3_cubed: float
    flux: float
    dirdiv_Lq: float
    weighted_dirdiv: float
    serrin_l9: float
    criterion_accum: float = 0.0
    serrin_accum: float = 0.0
    identity_residual: float = 0.0
    gronwall_margin: float = 0.0

    def row(self) -> list[float]:
        return [getattr(self, name) for name in CSV_FIELDS]


def diagnose(
    u: VectorField,
    time: float,
    budget: ExponentBudget,
    epsilon_rel: float = 1e-12,
    mask_delta: float = 1e-2,
) -> DiagnosticsRecord:
    """Instantaneous part of a record; accumulators and margin are left at 0."""
    kin = _kinematics(u, None, epsilon_rel, mask_delta)
    cell = u.grid.cell_volume
    grad_sq = cell * float(np.sum(kin.G**2))
    if kin.degenerate:
        return DiagnosticsRecord(time, 0.5 * cell * float(np.sum(u.values**2)),
                                 grad_sq, 0.0, 0.0, 0.0, 0.0, 0.0)
    speed = kin.speed
    flux = cell * float(np.sum(kin.m * np.einsum("i...,i...->...", kin.grad_m, kin.grad_m)))
    return DiagnosticsRecord(
        time=time,
        energy=0.5 * cell * float(np.sum(speed**2)),
        grad_sq=grad_sq,
        l3_cubed=cell * float(np.sum(speed**3)) / 3.0,
        flux=flux,
        dirdiv_Lq=_lq(kin.dirdiv, budget.q, cell, kin.mask),
        weighted_dirdiv=_lq(kin.m * kin.dirdiv, budget.qbar, cell),
        serrin_l9=_lq(speed, 9.0, cell),
        identity_residual=_identity_residual(kin),
    )


def _interval_terms(prev, cur, theta: float, viscosity: float) -> tuple[float, float]:
    """Trapezoid ``(a, d)`` on one interval: the margin is ``C a - d``."""
    h = cur.time - prev.time
    e = 1.0 / theta
    a = 0.5 * (prev.weighted_dirdiv**e * prev.l3_cubed + cur.weighted_dirdiv**e * cur.l3_cubed)
    d = (cur.l3_cubed - prev.l3_cubed) / h + (7.0 / 16.0) * viscosity * 0.5 * (prev.flux + cur.flux)
    return a, d


def _required_constant(a: float, d: float, slack: float) -> float:
    need = d - slack
    if need <= 0:
        return 0.0
    if a <= 0:
        return INF
    return need / a


@dataclass
class GronwallReport:
    constant: float
    margins: np.ndarray
    envelope: np.ndarray
    l3_cubed: np.ndarray
    dominated: bool

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.constant)

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else 0.0


def gronwall_check(
    records: Sequence,
    budget: ExponentBudget,
    slack: float = 1e-8,
    constant: float | None = None,
    viscosity: float = 1.0,
) -> GronwallReport:
    """Discrete form of ``dG/dt + (7/16) nu F <= C ||m div(u/m)||^(1/theta) G``.

    ``G = l3_cubed``, ``F = flux``.  On each interval the margin is
    ``C a - d`` with trapezoid averages; with ``constant=None`` the minimal C
    keeping every margin >= -slack is fitted.  The envelope is
    ``G(t0) exp(C int ||.||^(1/theta) dt)``.
    """
    times = np.array([r.time for r in records], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("record times must be strictly increasing")
    theta = budget.theta
    terms = [_interval_terms(p, c, theta, viscosity) for p, c in zip(records[:-1], records[1:])]
    if constant is None:
        constant = max((_required_constant(a, d, slack) for a, d in terms), default=0.0)
    margins = np.array([_margin(constant, a, d) for a, d in terms])

    G = np.array([r.l3_cubed for r in records], dtype=float)
    w = np.array([r.weighted_dirdiv ** (1.0 / theta) for r in records], dtype=float)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (w[1:] + w[:-1]))])
    envelope = np.array([_envelope(G[0], constant, s) for s in integral]) if G.size else G
    dominated = bool(np.all(G <= envelope))
    return GronwallReport(constant, margins, envelope, G, dominated)


def _envelope(g0: float, constant: float, integral: float) -> float:
    if not g0:
        return 0.0
    exponent = constant * integral if integral else 0.0
    return g0 * math.exp(exponent) if exponent < 700 else INF


def _margin(constant: float, a: float, d: float) -> float:
    if a == 0.0:
        return -d
    return constant * a - d


class RunMonitor:
    """Turns a stream of instantaneous records into complete CSV rows.

    Keeps the criterion and Serrin accumulators, the running Gronwall fit and
    the energy ledger.  Its state serialises to plain JSON so that a run
    restarted from a snapshot reproduces the rows of the uninterrupted run.
    """

    def __init__(self, budget: ExponentBudget, viscosity: float, slack: float = 1e-8,
                 constant: float | None = None):
        self.budget = budget
        self.viscosity = viscosity
        self.slack = slack
        self.fixed_constant = constant
        self.constant = 0.0 if constant is None else constant
        self.criterion = TimeAccumulator(budget.p)
        self.serrin = TimeAccumulator(3)
        self.envelope_integral = 0.0
        self.g0: float | None = None
        self.e0: float | None = None
        self.max_balance = 0.0
        self.energy_decreasing = True
        self.envelope_dominated = True
        self.min_margin = INF
        self.max_identity_residual = 0.0
        self.prev: DiagnosticsRecord | None = None

    def start(self, rec: DiagnosticsRecord) -> None:
        """Register the initial sample (not emitted as a row)."""
        if self.prev is None:
            self.g0 = rec.l3_cubed
            self.e0 = rec.energy
            self.criterion.add(rec.time, rec.dirdiv_Lq)
            self.serrin.add(rec.time, rec.serrin_l9)
        self.prev = rec

    def update(self, rec: DiagnosticsRecord) -> DiagnosticsRecord:
        prev = self.prev
        h = rec.time - prev.time
        theta = self.budget.theta
        a, d = _interval_terms(prev, rec, theta, self.viscosity)
        if self.fixed_constant is None:
            self.constant = max(self.constant, _required_constant(a, d, self.slack))
        margin = _margin(self.constant, a, d)
        self.min_margin = min(self.min_margin, margin)

        e = 1.0 / theta
        self.envelope_integral += 0.5 * h * (prev.weighted_dirdiv**e + rec.weighted_dirdiv**e)
        env = _envelope(self.g0, self.constant, self.envelope_integral)
        if rec.l3_cubed > env:
            self.envelope_dominated = False

        balance = rec.energy - prev.energy + self.viscosity * 0.5 * h * (prev.grad_sq + rec.grad_sq)
        if self.e0:
            self.max_balance = max(self.max_balance, abs(balance) / self.e0)
        if not rec.energy < prev.energy:
            self.energy_decreasing = False
        self.max_identity_residual = max(self.max_identity_residual, rec.identity_residual)

        out = DiagnosticsRecord(
            **{
                **asdict(rec),
                "criterion_accum": self.criterion.add(rec.time, rec.dirdiv_Lq),
                "serrin_accum": self.serrin.add(rec.time, rec.serrin_l9),
                "gronwall_margin": margin,
            }
        )
        self.prev = rec
        return out

    def summary(self) -> dict:
        return {
            "criterion_accum": self.criterion.value,
            "criterion_mixed_norm": self.criterion.norm,
            "serrin_accum": self.serrin.value,
            "serrin_mixed_norm": self.serrin.norm,
            "gronwall": {
                "constant": self.constant,
                "fitted": self.fixed_constant is None,
                "min_margin": self.min_margin if math.isfinite(self.min_margin) else None,
                "envelope_dominates": self.envelope_dominated,
            },
            "energy": {
                "initial": self.e0,
                "final": self.prev.energy if self.prev else None,
                "max_balance_residual_rel": self.max_balance,
                "strictly_decreasing": self.energy_decreasing,
            },
            "max_identity_residual": self.max_identity_residual,
        }

    def state(self) -> dict:
        return {
            "constant": self.constant,
            "criterion": self.criterion.state(),
            "serrin": self.serrin.state(),
            "envelope_integral": self.envelope_integral,
            "g0": self.g0,
            "e0": self.e0,
            "max_balance": self.max_balance,
            "energy_decreasing": self.energy_decreasing,
            "envelope_dominated": self.envelope_dominated,
            "min_margin": self.min_margin,
            "max_identity_residual": self.max_identity_residual,
            "prev": asdict(self.prev) if self.prev else None,
        }

    def restore(self, state: dict) -> None:
        self.constant = state["constant"]
        self.criterion = TimeAccumulator.from_state(state["criterion"])
        self.serrin = TimeAccumulator.from_state(state["serrin"])
        for key in ("envelope_integral", "g0", "e0", "max_balance", "energy_decreasing",
                    "envelope_dominated", "min_margin", "max_identity_residual"):
            setattr(self, key, state[key])
        self.prev = DiagnosticsRecord(**state["prev"]) if state["prev"] else None
