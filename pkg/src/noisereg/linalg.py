"""Dense float64 linear algebra and the seeded random samplers.

Matrices are plain ``numpy.ndarray`` values in row-major order.  Every
sampler takes an explicit ``numpy.random.Generator`` so that a fixed seed
plus a fixed call sequence reproduces bit-identical output.  Parallel
workers must each own their own generator; use :func:`child_rng` to derive
independent streams from a base seed and a trial index.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "make_rng",
    "child_rng",
    "child_seed",
    "sample_sphere_columns",
    "sample_gaussian_matrix",
    "sample_orthogonal",
    "matmul",
    "transpose",
    "frobenius_norm",
    "inner_product",
    "spectral_norm",
    "require_finite",
]

# Fixed entropy for the deterministic start vector of the power iteration.
_POWER_ITERATION_SEED = 0x9E3779B97F4A7C15


def make_rng(seed: int) -> np.random.Generator:
    """Create a PCG64 generator from a 64-bit seed."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def child_seed(seed: int, *key: int) -> int:
    """Derive a 64-bit child seed from ``(seed, *key)``, stable across runs."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in key]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in key]]))


def require_finite(a: np.ndarray, context: str = "matrix") -> np.ndarray:
    """Raise ``ValueError`` if ``a`` contains NaN or Inf."""
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite entries in {context}")
    return a


def sample_sphere_columns(d: int, k: int, nu: float, rng: np.random.Generator) -> np.ndarray:
    """Draw a ``d x k`` matrix whose columns are i.i.d. uniform on the radius-``nu`` sphere.

    Columns are generated as normalized Gaussian vectors scaled to ``nu``,
    which yields the exact uniform law on the sphere and column norms equal
    to ``nu`` up to machine precision.  The squared Frobenius norm is then
    ``k * nu**2`` by construction.  With ``nu == 0`` the zero matrix is
    returned without consuming the generator.
    """
    if d < 1 or k < 1:
        raise ValueError(f"dimensions must be positive, got d={d}, k={k}")
    if nu < 0:
        raise ValueError(f"radius must be nonnegative, got nu={nu}")
    if nu == 0.0:
        return np.zeros((d, k))
    w = rng.standard_normal((d, k))
    norms = np.sqrt(np.sum(w * w, axis=0))
    # A zero Gaussian column has probability zero; resample defensively.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        w[:, bad] = rng.standard_normal((d, int(bad.sum())))
        norms = np.sqrt(np.sum(w * w, axis=0))
    w *= nu / norms
    return require_finite(w, "sphere sample")


def sample_gaussian_matrix(rows: int, cols: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Matrix with i.i.d. ``N(0, sigma**2)`` entries.

    ``sigma == 0`` returns the zero matrix without consuming the generator.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}")
    if sigma < 0:
        raise ValueError(f"standard deviation must be nonnegative, got {sigma}")
    if sigma == 0.0:
        return np.zeros((rows, cols))
    return require_finite(sigma * rng.standard_normal((rows, cols)), "gaussian sample")


def sample_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed random orthogonal ``d x d`` matrix.

    QR decomposition of a Gaussian matrix with the R-diagonal sign
    correction (Mezzadri 2007), so the result is uniform over O(d).
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got d={d}")
    h = rng.standard_normal((d, d))
    q, r = np.linalg.qr(h)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    return require_finite(q * sign[np.newaxis, :], "orthogonal sample")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with shape validation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"non-conformal shapes {a.shape} x {b.shape}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    """Transposed copy of a 2-d array."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    return a.T.copy()


def frobenius_norm(a: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product ``tr(a^T b)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def spectral_norm(a: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value via power iteration on ``a^T a``.

    Iterates until the singular-value estimate changes by less than ``tol``
    in relative terms, or ``max_iter`` sweeps.  The start vector comes from
    a fixed-seed generator, so the result is reproducible.  Intended for
    the small dense matrices used here (d <= 64).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    if not np.any(a):
        return 0.0
    rng = np.random.default_rng(_POWER_ITERATION_SEED)
    v = rng.standard_normal(a.shape[1])
    v /= np.sqrt(v @ v)
    sigma_prev = 0.0
    sigma = 0.0
    for _ in range(max_iter):
        u = a @ v
        sigma = np.sqrt(u @ u)
        if sigma == 0.0:
            # v landed in the null space; restart from a fresh direction.
            v = rng.standard_normal(a.shape[1])
            v /= np.sqrt(v @ v)
            continue
        w = a.T @ u
        v = w / np.sqrt(w @ w)
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1e-300):
            break
        sigma_prev = sigma
    return float(sigma)
