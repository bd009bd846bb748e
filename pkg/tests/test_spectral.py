import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from nsreg.spectral import (
    Grid,
    GridMismatchError,
    NonFiniteError,
    ScalarField,
    SpectralField,
    VectorField,
    curl,
    dealias,
    divergence,
    divergence_l2,
    gradient,
    irfft3,
    grid_l2_norm,
    laplacian,
    leray_project,
    random_band_field,
    rfft3,
    spectral_l2_norm,
    transform_forward,
    transform_inverse,
    velocity_gradient,
)

X, Y, Z = sp.symbols("x y z", real=True)


def sample(expr, grid):
    """Evaluate a sympy expression in x, y, z on the grid."""
    f = sp.lambdify((X, Y, Z), expr, "numpy")
    x, y, z = grid.coordinates()
    return np.broadcast_to(f(x, y, z), grid.real_shape).astype(float)


def sample_vec(exprs, grid):
    return VectorField(grid, np.stack([sample(e, grid) for e in exprs]))


# --- grid --------------------------------------------------------------------


@pytest.mark.parametrize("n", [3, 6, 24, 0, -8])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_grid_geometry():
    g = Grid(16)
    assert g.spacing == pytest.approx(2 * np.pi / 16)
    assert g.volume == pytest.approx((2 * np.pi) ** 3)
    assert g.real_shape == (16, 16, 16)
    assert g.spectral_shape == (16, 16, 9)
    assert g.cutoff == pytest.approx(16 / 3)


def test_grid_rejects_bad_dealias_fraction():
    with pytest.raises(ValueError):
        Grid(16, dealias_fraction=0.0)
    with pytest.raises(ValueError):
        Grid(16, dealias_fraction=1.5)


# --- fields --------------------------------------------------------------------


def test_fields_are_immutable_copies(grid16):
    raw = np.zeros(grid16.real_shape)
    f = ScalarField(grid16, raw)
    raw[0, 0, 0] = 5.0
    assert f.values[0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0


def test_nan_rejected_with_first_index(grid16):
    raw = np.zeros((3,) + grid16.real_shape)
    raw[1, 2, 3, 4] = np.nan
    raw[2, 0, 0, 0] = np.inf
    with pytest.raises(NonFiniteError, match=r"\(1, 2, 3, 4\)"):
        VectorField(grid16, raw)


def test_shape_mismatch_rejected(grid16):
    with pytest.raises(ValueError):
        ScalarField(grid16, np.zeros((8, 8, 8)))


def test_from_components_requires_one_grid():
    a = ScalarField.zeros(Grid(8))
    b = ScalarField.zeros(Grid(16))
    with pytest.raises(GridMismatchError):
        VectorField.from_components([a, a, b])


# --- transforms ------------------------------------------------------------------


def test_cos_x_coefficients(grid16):
    f = ScalarField(grid16, sample(sp.cos(X), grid16))
    F = transform_forward(f).coefficients
    assert F[1, 0, 0] == pytest.approx(0.5, abs=1e-14)
    assert F[-1, 0, 0] == pytest.approx(0.5, abs=1e-14)
    F2 = F.copy()
    F2[1, 0, 0] = F2[-1, 0, 0] = 0
    assert np.abs(F2).max() < 1e-14


def test_round_trip_random(grid32, rng):
    v = VectorField(grid32, rng.standard_normal((3,) + grid32.real_shape))
    back = transform_inverse(transform_forward(v))
    assert np.abs(back.values - v.values).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([4, 8, 16]))
def test_round_trip_property(seed, n):
    g = Grid(n)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.real_shape) * 10)
    back = transform_inverse(transform_forward(f))
    assert np.abs(back.values - f.values).max() <= 1e-12 * max(1.0, np.abs(f.values).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([4, 8, 16]))
def test_parseval_property(seed, n):
    g = Grid(n)
    f = ScalarField(g, np.random.default_rng(seed).standard_normal(g.real_shape))
    spectral = spectral_l2_norm(transform_forward(f))
    assert spectral == pytest.approx(grid_l2_norm(f), rel=1e-12)


def test_spectral_field_shape_validation(grid16):
    with pytest.raises(ValueError):
        SpectralField(grid16, np.zeros((16, 16, 16), complex))


# --- calculus --------------------------------------------------------------------


def test_gradient_matches_sympy(grid16):
    expr = sp.sin(X) * sp.cos(2 * Y) + sp.cos(3 * Z)
    g = gradient(ScalarField(grid16, sample(expr, grid16)))
    for i, s in enumerate((X, Y, Z)):
        assert np.abs(g.values[i] - sample(sp.diff(expr, s), grid16)).max() < 1e-12


def test_laplacian_eigenfunction(grid16):
    expr = sp.sin(X + 2 * Y) * sp.cos(3 * Z)
    lap = laplacian(ScalarField(grid16, sample(expr, grid16)))
    assert np.abs(lap.values + 14 * sample(expr, grid16)).max() < 1e-11


def test_curl_example(grid16):
    v = sample_vec([-sp.sin(Y), sp.sin(X), 0 * X], grid16)
    c = curl(v)
    assert np.abs(c.values[:2]).max() < 1e-13
    assert np.abs(c.values[2] - sample(sp.cos(X) + sp.cos(Y), grid16)).max() < 1e-13


def test_divergence_matches_sympy(grid16):
    exprs = [sp.sin(X) * sp.cos(Y), sp.cos(Z) * sp.sin(2 * Y), sp.sin(X + Z)]
    d = divergence(sample_vec(exprs, grid16))
    oracle = sum(sp.diff(e, s) for e, s in zip(exprs, (X, Y, Z)))
    assert np.abs(d.values - sample(oracle, grid16)).max() < 1e-12


def test_velocity_gradient_layout(grid16):
    exprs = [sp.sin(Y), 0 * X, sp.cos(X)]
    G = velocity_gradient(sample_vec(exprs, grid16))
    assert G.shape == (3, 3, 16, 16, 16)
    for i, e in enumerate(exprs):
        for j, s in enumerate((X, Y, Z)):
            assert np.abs(G[i, j] - sample(sp.diff(e, s), grid16)).max() < 1e-13


def test_curl_of_gradient_vanishes(grid32, rng):
    F = random_band_field(grid32, rng, 3, components=1)[0]
    f = ScalarField(grid32, irfft3(F, 32))
    assert np.abs(curl(gradient(f)).values).max() < 1e-11


# --- projection and dealiasing --------------------------------------------------


def test_leray_helmholtz_example(grid16):
    # (sin y, 0, 0) is solenoidal, grad cos x = (-sin x, 0, 0) is a gradient.
    v = sample_vec([sp.sin(Y) - sp.sin(X), 0 * X, 0 * X], grid16)
    p = leray_project(v)
    assert np.abs(p.values - sample_vec([sp.sin(Y), 0 * X, 0 * X], grid16).values).max() < 1e-14


def test_leray_keeps_mean_flow(grid16):
    v = VectorField(grid16, np.ones((3,) + grid16.real_shape))
    assert np.abs(leray_project(v).values - 1.0).max() < 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_leray_idempotent_and_solenoidal(seed):
    g = Grid(16)
    v = VectorField(g, np.random.default_rng(seed).standard_normal((3,) + g.real_shape))
    p = leray_project(v)
    assert divergence_l2(p) <= 1e-11 * max(1.0, grid_l2_norm(v))
    pp = leray_project(p)
    assert np.abs(pp.values - p.values).max() < 1e-12


def test_dealias_rule(grid16):
    # cutoff 16/3: |k| = 5 survives, |k| = 6 is removed.
    keep = ScalarField(grid16, sample(sp.cos(5 * X) * sp.sin(5 * Z), grid16))
    drop = ScalarField(grid16, sample(sp.cos(6 * Y), grid16))
    out_keep = transform_inverse(dealias(transform_forward(keep)))
    out_drop = transform_inverse(dealias(transform_forward(drop)))
    assert np.abs(out_keep.values - keep.values).max() < 1e-13
    assert np.abs(out_drop.values).max() < 1e-13


# --- random band fields ------------------------------------------------------------


def test_random_band_field_is_hermitian_and_band_limited(grid32):
    F = random_band_field(grid32, np.random.default_rng(3), 2, components=3)
    kx, ky, kz = grid32.wavenumbers
    outside = (np.abs(kx) > 6) | (np.abs(ky) > 6) | (np.abs(kz) > 6)
    assert np.abs(F[:, outside]).max() == 0.0
    # irfft of the coefficients followed by rfft must return them unchanged.
    u = irfft3(F, 32)
    again = rfft3(u)
    assert np.abs(again - F).max() < 1e-14


def test_random_band_field_same_continuum_field_across_grids():
    a = random_band_field(Grid(32), np.random.default_rng(5), 2, components=1)[0]
    b = random_band_field(Grid(64), np.random.default_rng(5), 2, components=1)[0]
    fa = irfft3(a, 32)
    fb = irfft3(b, 64)
    assert np.abs(fb[::2, ::2, ::2] - fa).max() < 1e-13


def test_random_band_field_rejects_unresolved_peak():
    with pytest.raises(ValueError):
        random_band_field(Grid(8), np.random.default_rng(0), 4, components=1)
