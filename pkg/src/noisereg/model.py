"""Synthetic noisy low-rank recovery problems and their objectives.

A problem bundles the planted matrix ``Y* = F F^T`` (PSD kind) or
``Y* = U* V*^T`` (rectangular kind), the Gaussian noise ``gamma``, the
observation ``Y = Y* + gamma`` and its symmetrization ``Y_sym``.  The PSD
objective is ``F(X) = 1/4 ||X X^T - Y||_F^2`` whose exact gradient is
``(X X^T - Y_sym) X``; the rectangular objective is
``1/2 ||U V^T - Y||_F^2``.

Averaging the gradient over a perturbation ``W`` with columns uniform on
the radius-``nu`` sphere adds an exact ridge term::

    E_W grad(X + W) = (X X^T - Y_sym) X + (2d + 1) (nu^2 / d) X

which :func:`smoothed_gradient_exact` evaluates in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import require_finite, sample_gaussian_matrix

__all__ = [
    "RecoveryProblem",
    "RectFactorPair",
    "make_rank_one_problem",
    "make_rank_r_problem",
    "make_rectangular_problem",
    "loss",
    "gradient",
    "smoothed_gradient_exact",
    "rect_loss",
    "rect_gradients",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RecoveryProblem:
    """Immutable recovery instance; safe to share across trial workers."""

    kind: str  # 'psd' or 'rectangular'
    d: int
    rank: int
    sigma: float
    ground_truth_factor: np.ndarray  # d x r; the planted vector x* as a column when rank == 1
    gamma: np.ndarray
    y_star: np.ndarray
    y_observed: np.ndarray
    y_sym: np.ndarray
    ground_truth_factor_right: Optional[np.ndarray] = None  # V* for the rectangular kind
    seed: Optional[int] = None

    @property
    def x_star(self) -> np.ndarray:
        """Planted vector of a rank-one PSD instance."""
        if self.kind != "psd" or self.rank != 1:
            raise ValueError("x_star is only defined for rank-one PSD problems")
        return self.ground_truth_factor[:, 0]

    @property
    def signal_scale(self) -> float:
        """Euclidean norm of the planted vector (rank-one PSD only)."""
        x = self.x_star
        return float(np.sqrt(x @ x))

    @property
    def u_star(self) -> np.ndarray:
        """Unit-norm direction of the planted vector."""
        x = self.x_star
        return x / np.sqrt(x @ x)

    @property
    def gamma_sym(self) -> np.ndarray:
        """Symmetrized noise ``(gamma + gamma^T) / 2``."""
        return (self.gamma + self.gamma.T) / 2.0

    def to_json_dict(self) -> dict:
        payload = {
            "kind": self.kind,
            "d": self.d,
            "r": self.rank,
            "sigma": self.sigma,
            "seed": self.seed,
            "factor": self.ground_truth_factor.tolist(),
            "gamma": self.gamma.tolist(),
        }
        if self.ground_truth_factor_right is not None:
            payload["factor_right"] = self.ground_truth_factor_right.tolist()
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @staticmethod
    def from_json_dict(payload: dict) -> "RecoveryProblem":
        factor = np.asarray(payload["factor"], dtype=np.float64)
        right = payload.get("factor_right")
        right = None if right is None else np.asarray(right, dtype=np.float64)
        gamma = np.asarray(payload["gamma"], dtype=np.float64)
        if factor.shape != (int(payload["d"]), int(payload["r"])):
            raise ValueError(
                f"factor shape {factor.shape} contradicts the declared d={payload['d']}, r={payload['r']}"
            )
        return _assemble(
            kind=payload["kind"],
            factor=factor,
            factor_right=right,
            gamma=gamma,
            sigma=float(payload["sigma"]),
            seed=payload.get("seed"),
        )

    @staticmethod
    def from_json(text: str) -> "RecoveryProblem":
        return RecoveryProblem.from_json_dict(json.loads(text))


@dataclass
class RectFactorPair:
    """Factor iterate ``(U, V)`` of the rectangular problem."""

    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "RectFactorPair":
        return RectFactorPair(self.u.copy(), self.v.copy())


def _assemble(kind, factor, factor_right, gamma, sigma, seed) -> RecoveryProblem:
    d, r = factor.shape
    if kind == "psd":
        y_star = factor @ factor.T
    elif kind == "rectangular":
        if factor_right is None:
            raise ValueError("rectangular problems need both factors")
        y_star = factor @ factor_right.T
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if gamma.shape != (d, d):
        raise ValueError(f"noise shape {gamma.shape} does not match d={d}")
    y_observed = y_star + gamma
    y_sym = (y_observed + y_observed.T) / 2.0
    require_finite(y_observed, "observation")
    return RecoveryProblem(
        kind=kind,
        d=d,
        rank=r,
        sigma=float(sigma),
        ground_truth_factor=_frozen(factor),
        ground_truth_factor_right=None if factor_right is None else _frozen(factor_right),
        gamma=_frozen(gamma),
        y_star=_frozen(y_star),
        y_observed=_frozen(y_observed),
        y_sym=_frozen(y_sym),
        seed=seed,
    )


def make_rank_one_problem(
    d: int,
    x_star: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> RecoveryProblem:
    """Plant ``Y* = x* x*^T`` and observe it through Gaussian noise of level ``sigma``."""
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    x_star = np.asarray(x_star, dtype=np.float64).reshape(-1)
    if x_star.shape[0] != d:
        raise ValueError(f"x_star has length {x_star.shape[0]}, expected {d}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    gamma = sample_gaussian_matrix(d, d, sigma, rng)
    return _assemble("psd", x_star[:, None], None, gamma, sigma, seed)


def make_rank_r_problem(
    d: int,
    r: int,
    sigma: float,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> RecoveryProblem:
    """Rank-``r`` PSD instance with a standard-Gaussian ``d x r`` factor."""
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    factor = rng.standard_normal((d, r))
    gamma = sample_gaussian_matrix(d, d, sigma, rng)
    return _assemble("psd", factor, None, gamma, sigma, seed)


def make_rectangular_problem(
    d: int,
    r: int,
    sigma: float,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> RecoveryProblem:
    """Rank-``r`` rectangular instance ``Y* = U* V*^T`` with Gaussian factors."""
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    u = rng.standard_normal((d, r))
    v = rng.standard_normal((d, r))
    gamma = sample_gaussian_matrix(d, d, sigma, rng)
    return _assemble("rectangular", u, v, gamma, sigma, seed)


def _check_iterate(x: np.ndarray, problem: RecoveryProblem) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.d, problem.d):
        raise ValueError(f"iterate shape {x.shape} does not match d={problem.d}")
    return x


def loss(x: np.ndarray, problem: RecoveryProblem) -> float:
    """Objective ``1/4 ||X X^T - Y||_F^2`` against the raw observation."""
    x = _check_iterate(x, problem)
    resid = x @ x.T - problem.y_observed
    return 0.25 * float(np.sum(resid * resid))


def gradient(x: np.ndarray, problem: RecoveryProblem) -> np.ndarray:
    """Exact gradient ``(X X^T - Y_sym) X`` of :func:`loss`."""
    x = _check_iterate(x, problem)
    return (x @ x.T - problem.y_sym) @ x


def smoothed_gradient_exact(x: np.ndarray, problem: RecoveryProblem, nu: float) -> np.ndarray:
    """Closed form of the gradient averaged over sphere perturbations.

    Equals ``gradient(x) + (2d + 1) (nu^2 / d) x``, the expectation of
    ``gradient(x + W)`` when each column of ``W`` is uniform on the
    radius-``nu`` sphere.
    """
    if nu < 0:
        raise ValueError(f"radius must be nonnegative, got nu={nu}")
    x = _check_iterate(x, problem)
    ridge = (2.0 * problem.d + 1.0) * (nu * nu / problem.d)
    return gradient(x, problem) + ridge * x


def _check_pair(pair: RectFactorPair, problem: RecoveryProblem) -> RectFactorPair:
    if problem.kind != "rectangular":
        raise ValueError(f"expected a rectangular problem, got kind={problem.kind!r}")
    u = np.asarray(pair.u, dtype=np.float64)
    v = np.asarray(pair.v, dtype=np.float64)
    if u.shape != (problem.d, problem.d) or v.shape != (problem.d, problem.d):
        raise ValueError(f"factor shapes {u.shape}, {v.shape} do not match d={problem.d}")
    return RectFactorPair(u, v)


def rect_loss(pair: RectFactorPair, problem: RecoveryProblem) -> float:
    """Rectangular objective ``1/2 ||U V^T - Y||_F^2``."""
    p = _check_pair(pair, problem)
    resid = p.u @ p.v.T - problem.y_observed
    return 0.5 * float(np.sum(resid * resid))


def rect_gradients(pair: RectFactorPair, problem: RecoveryProblem) -> tuple[np.ndarray, np.ndarray]:
    """Gradients ``((U V^T - Y) V, (U V^T - Y)^T U)`` of :func:`rect_loss`."""
    p = _check_pair(pair, problem)
    resid = p.u @ p.v.T - problem.y_observed
    return resid @ p.v, resid.T @ p.u
