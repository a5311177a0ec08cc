"""Samplers and dense helpers: exact contracts, Monte-Carlo laws, determinism."""

import numpy as np
import pytest

from noisereg import linalg


# ---------------------------------------------------------------------------
# sphere sampler
# ---------------------------------------------------------------------------


def test_sphere_zero_radius_is_zero_matrix():
    rng = linalg.make_rng(0)
    w = linalg.sample_sphere_columns(3, 2, 0.0, rng)
    assert w.shape == (3, 2)
    assert np.all(w == 0.0)


def test_sphere_column_norms_exact():
    rng = linalg.make_rng(1)
    w = linalg.sample_sphere_columns(5, 5, 2.0, rng)
    norms = np.sqrt(np.sum(w * w, axis=0))
    assert np.all(np.abs(norms - 2.0) < 1e-12)
    assert abs(np.sum(w * w) - 20.0) < 1e-10


def test_sphere_isotropy_monte_carlo():
    # E[w w^T] = (nu^2/d) I for a uniform sphere column; 1e6 draws at d=4.
    rng = linalg.make_rng(2)
    n = 1_000_000
    w = rng.standard_normal((n, 4))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    cov = (w[:, :, None] * w[:, None, :]).mean(axis=0)
    assert np.max(np.abs(cov - np.eye(4) / 4.0)) < 5e-3


def test_sphere_matches_batch_convention():
    # The sampler consumes one standard_normal((d, k)) block, column-normalized.
    rng1 = linalg.make_rng(3)
    rng2 = linalg.make_rng(3)
    w = linalg.sample_sphere_columns(6, 4, 1.5, rng1)
    g = rng2.standard_normal((6, 4))
    expected = g * (1.5 / np.sqrt(np.sum(g * g, axis=0)))
    assert np.array_equal(w, expected)


@pytest.mark.parametrize("d,k", [(0, 1), (1, 0), (-2, 3)])
def test_sphere_rejects_bad_dimensions(d, k):
    with pytest.raises(ValueError):
        linalg.sample_sphere_columns(d, k, 1.0, linalg.make_rng(0))


def test_sphere_rejects_negative_radius():
    with pytest.raises(ValueError):
        linalg.sample_sphere_columns(2, 2, -0.1, linalg.make_rng(0))


# ---------------------------------------------------------------------------
# gaussian sampler
# ---------------------------------------------------------------------------


def test_gaussian_zero_sigma():
    w = linalg.sample_gaussian_matrix(2, 2, 0.0, linalg.make_rng(0))
    assert np.all(w == 0.0)


def test_gaussian_law_of_large_numbers():
    rng = linalg.make_rng(4)
    sigma = 0.316
    w = linalg.sample_gaussian_matrix(100, 100, sigma, rng)
    assert abs(w.mean()) < 0.01
    assert abs(w.var() - sigma**2) < 0.1 * sigma**2


def test_gaussian_spectral_concentration():
    # ||G||_2 <= 3 sqrt(d) sigma should hold essentially always at d=30.
    rng = linalg.make_rng(5)
    d, sigma = 30, np.sqrt(0.1)
    hits = 0
    for _ in range(100):
        g = linalg.sample_gaussian_matrix(d, d, sigma, rng)
        hits += np.linalg.norm(g, 2) <= 3.0 * np.sqrt(d) * sigma
    assert hits >= 99


def test_gaussian_rejects_negative_sigma():
    with pytest.raises(ValueError):
        linalg.sample_gaussian_matrix(2, 2, -1.0, linalg.make_rng(0))


# ---------------------------------------------------------------------------
# orthogonal sampler
# ---------------------------------------------------------------------------


def test_orthogonal_one_dimensional():
    vals = {linalg.sample_orthogonal(1, linalg.make_rng(s))[0, 0] for s in range(8)}
    assert vals <= {1.0, -1.0}
    assert len(vals) == 2  # sign correction keeps both signs reachable


def test_orthogonal_defining_property():
    a = linalg.sample_orthogonal(5, linalg.make_rng(6))
    assert np.max(np.abs(a.T @ a - np.eye(5))) < 1e-10


def test_orthogonal_determinant_is_unit():
    a = linalg.sample_orthogonal(5, linalg.make_rng(7))
    assert abs(abs(np.linalg.det(a)) - 1.0) < 1e-10


def test_orthogonal_preserves_norms():
    rng = linalg.make_rng(8)
    a = linalg.sample_orthogonal(6, rng)
    for _ in range(10):
        x = rng.standard_normal(6)
        assert abs(np.linalg.norm(a @ x) - np.linalg.norm(x)) < 1e-10


# ---------------------------------------------------------------------------
# dense helpers
# ---------------------------------------------------------------------------


def test_inner_product_identity():
    assert linalg.inner_product(np.eye(2), np.eye(2)) == 2.0


def test_inner_product_shape_mismatch():
    with pytest.raises(ValueError):
        linalg.inner_product(np.eye(2), np.eye(3))


def test_matmul_and_transpose_roundtrip():
    rng = linalg.make_rng(9)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 2))
    assert np.allclose(linalg.matmul(a, b), a @ b)
    assert np.array_equal(linalg.transpose(a), a.T)
    with pytest.raises(ValueError):
        linalg.matmul(a, a)


def test_frobenius_norm_brute_force():
    rng = linalg.make_rng(10)
    a = rng.standard_normal((4, 4))
    brute = np.sqrt(sum(a[i, j] ** 2 for i in range(4) for j in range(4)))
    assert abs(linalg.frobenius_norm(a) - brute) < 1e-12


def test_spectral_norm_diagonal():
    assert abs(linalg.spectral_norm(np.diag([3.0, 1.0])) - 3.0) < 1e-8


def test_spectral_norm_zero_matrix():
    assert linalg.spectral_norm(np.zeros((4, 4))) == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_spectral_norm_matches_svd(seed):
    rng = linalg.make_rng(100 + seed)
    a = rng.standard_normal((7, 7))
    if seed % 2:
        a = (a + a.T) / 2  # symmetric indefinite case (paired +/- eigenvalues)
    ref = np.linalg.norm(a, 2)
    assert abs(linalg.spectral_norm(a) - ref) < 1e-7 * max(1.0, ref)


@pytest.mark.parametrize("seed", range(5))
def test_spectral_at_most_frobenius(seed):
    rng = linalg.make_rng(200 + seed)
    a = rng.standard_normal((6, 6))
    assert linalg.spectral_norm(a) <= linalg.frobenius_norm(a) + 1e-10


# ---------------------------------------------------------------------------
# determinism and stream splitting
# ---------------------------------------------------------------------------


def test_equal_seeds_bit_identical():
    for fn in (
        lambda r: linalg.sample_sphere_columns(5, 3, 1.0, r),
        lambda r: linalg.sample_gaussian_matrix(4, 4, 0.5, r),
        lambda r: linalg.sample_orthogonal(4, r),
    ):
        a = fn(linalg.make_rng(123))
        b = fn(linalg.make_rng(123))
        assert np.array_equal(a, b)


def test_child_streams_are_independent_and_stable():
    a = linalg.child_rng(7, 0).standard_normal(4)
    b = linalg.child_rng(7, 1).standard_normal(4)
    a2 = linalg.child_rng(7, 0).standard_normal(4)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)
    assert linalg.child_seed(7, 3) == linalg.child_seed(7, 3)
    assert linalg.child_seed(7, 3) != linalg.child_seed(7, 4)
