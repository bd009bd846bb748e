import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nsreg.diagnostics import lq_norm
from nsreg.inequalities import (
    default_beta_grid,
    gradient_l2_squared,
    interpolation_check,
    lemma1_verify,
    lemma_constant,
    random_mean_zero_field,
    sobolev_ratio,
    young_split,
)
from nsreg.spectral import Grid, ScalarField

from test_spectral import X, Y, Z, sample

BOX = 2 * np.pi


def box_norm_of_sin(q):
    line, _ = integrate.quad(lambda x: abs(math.sin(x)) ** q, 0, BOX, limit=200)
    return (line * BOX**2) ** (1 / q)


def sin_field(grid, k=1):
    return ScalarField(grid, sample(sp.sin(k * X), grid))


# --- Sobolev ratio -----------------------------------------------------------------


def test_sobolev_ratio_sin(grid16):
    # ||cos||_2 = ||sin||_2 on the box.
    oracle = box_norm_of_sin(6) / box_norm_of_sin(2)
    assert sobolev_ratio(sin_field(grid16)) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_sobolev_ratio_scales_inverse_k(grid32, k):
    base = sobolev_ratio(sin_field(grid32))
    assert sobolev_ratio(sin_field(grid32, k)) * k == pytest.approx(base, rel=1e-8)


def test_sobolev_ratio_ensemble_stable_under_refinement():
    coarse = max(sobolev_ratio(random_mean_zero_field(Grid(32), s)) for s in range(20))
    fine = max(sobolev_ratio(random_mean_zero_field(Grid(64), s)) for s in range(20))
    assert math.isfinite(coarse)
    assert abs(fine - coarse) < 0.05 * coarse


def test_sobolev_ratio_rejects_constant_and_nonzero_mean(grid16):
    with pytest.raises(ValueError):
        sobolev_ratio(ScalarField.zeros(grid16))
    with pytest.raises(ValueError):
        sobolev_ratio(ScalarField(grid16, 1 + sample(sp.sin(X), grid16)))


def test_gradient_l2_squared_sin(grid16):
    assert gradient_l2_squared(sin_field(grid16, 2)) == pytest.approx(4 * BOX**3 / 2, rel=1e-13)


# --- interpolation ------------------------------------------------------------------


def test_interpolation_endpoint_is_one(grid16):
    f = random_mean_zero_field(grid16, 3)
    assert interpolation_check(f, 2) == pytest.approx(1.0, rel=1e-13)


def test_interpolation_sin_r3(grid16):
    assert interpolation_check(sin_field(grid16), 3) <= 1 + 1e-10


def test_interpolation_bump_strictly_below_one():
    g = Grid(32)
    x, y, z = (c - np.pi for c in g.coordinates())
    bump = ScalarField(g, np.exp(-(x**2 + y**2 + z**2) / 0.5))
    assert interpolation_check(bump, 4) < 0.99


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.floats(2.0, 5.99))
def test_interpolation_never_exceeds_one(seed, r):
    g = Grid(8)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.real_shape))
    assert interpolation_check(f, r) <= 1 + 1e-10


def test_interpolation_rejects_r_out_of_range(grid16):
    for r in (1.5, 6.0):
        with pytest.raises(ValueError):
            interpolation_check(sin_field(grid16), r)


# --- weighted product inequality ---------------------------------------------------


def test_young_examples():
    assert young_split(1.0, 1.0, 0.3) == pytest.approx((1.0, 1.0))
    assert young_split(2.0, 1.0, 0.5) == (2.0, 2.5)


def test_young_sweep():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 5, 100_000)
    b = rng.uniform(0, 5, 100_000)
    theta = rng.uniform(0.01, 0.99, 100_000)
    lhs, rhs = np.vectorize(young_split)(a, b, theta)
    assert np.all(lhs <= rhs * (1 + 1e-12))


@settings(max_examples=200)
@given(a=st.floats(0, 1e3), b=st.floats(0, 1e3), theta=st.floats(0.05, 0.95))
def test_young_property(a, b, theta):
    lhs, rhs = young_split(a, b, theta)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@settings(max_examples=100)
@given(b=st.floats(0.1, 10), theta=st.floats(0.05, 0.95))
def test_young_equality_case(b, theta):
    a = b ** (theta / (1 - theta))  # a^(1/theta) = b^(1/(1-theta))
    lhs, rhs = young_split(a, b, theta)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_young_rejects_bad_input():
    with pytest.raises(ValueError):
        young_split(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        young_split(-1.0, 1.0, 0.5)


# --- lemma constant -------------------------------------------------------------------


def test_lemma_constant_closed_form_sin_r3():
    g = Grid(64)
    f = sin_field(g)
    A = box_norm_of_sin(3) ** 2
    B = box_norm_of_sin(2) ** 2  # equals ||grad f||^2
    for beta in (0.1, 1.0, 10.0):
        oracle = max(0.0, A / (beta * B) - 1 / (4 * beta**2))
        value = lemma_constant(lq_norm(f, 3) ** 2, gradient_l2_squared(f),
                               lq_norm(f, 2) ** 2, beta, 0.5)
        assert value == pytest.approx(oracle, rel=1e-6, abs=1e-15)


def test_lemma_endpoint_constant_at_most_one(grid16):
    ensemble = [random_mean_zero_field(grid16, s) for s in range(10)]
    rep = lemma1_verify(ensemble, 2)
    assert rep.theta == 1.0
    assert rep.fitted_C <= 1.0
    assert rep.holds


def test_lemma_homogeneity(grid16):
    ensemble = [random_mean_zero_field(grid16, s) for s in range(5)]
    scaled = [ScalarField(grid16, 7.5 * f.values) for f in ensemble]
    a = lemma1_verify(ensemble, 4)
    b = lemma1_verify(scaled, 4)
    assert b.fitted_C == pytest.approx(a.fitted_C, rel=1e-10)
    assert a.worst_case == b.worst_case


def test_lemma_beta_grid_refinement(grid16):
    ensemble = [random_mean_zero_field(grid16, s) for s in range(5)]
    coarse = lemma1_verify(ensemble, 3, default_beta_grid(9))
    fine = lemma1_verify(ensemble, 3, default_beta_grid(33))
    # the 9-point grid is a subset of the 33-point grid
    assert fine.fitted_C >= coarse.fitted_C
    assert fine.fitted_C <= 1.5 * coarse.fitted_C


def test_lemma_report_names_worst_case(grid16):
    ensemble = [random_mean_zero_field(grid16, s) for s in range(3)]
    rep = lemma1_verify(ensemble, 5, names=["a", "b", "c"])
    assert rep.worst_case["field"] in {"a", "b", "c"}
    assert rep.worst_case["beta"] in rep.beta_grid
    assert rep.members == 3
    assert set(rep.as_dict()) >= {"r", "theta", "fitted_C", "worst_case", "holds"}


def test_lemma_rejects_bad_input(grid16):
    with pytest.raises(ValueError):
        lemma1_verify([], 3)
    with pytest.raises(ValueError):
        lemma1_verify([sin_field(grid16)], 6)
    with pytest.raises(ValueError):
        lemma1_verify([sin_field(grid16)], 3, beta_grid=[0.0, 1.0])
    with pytest.raises(ValueError):
        lemma1_verify([ScalarField(grid16, np.ones(grid16.real_shape))], 3)
