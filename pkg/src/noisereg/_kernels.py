"""Numba-compiled inner loops for the long gradient-descent runs.

The loops mutate the iterate in place, record snapshots at the requested
sample times, and track the running minimum of the recovery error
``||X X^T - Y*||_F^2`` at every step.  ``numba``'s ``np.random.Generator``
support draws bit-identical streams to NumPy, so the pure-NumPy twin
engines in :mod:`noisereg.optimize` reproduce these loops exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["psd_loop", "rect_loop"]


@njit(cache=True)
def _sample_sphere_inplace(w, nu):
    d, k = w.shape
    for j in range(k):
        nrm = 0.0
        for i in range(d):
            nrm += w[i, j] * w[i, j]
        sc = nu / np.sqrt(nrm)
        for i in range(d):
            w[i, j] *= sc


@njit(cache=True)
def psd_loop(x, y_sym, y_star, eta, nu, n_steps, sample_ts, snaps, x_min, rng):
    """Run ``n_steps`` of the PSD update, starting from ``x`` (mutated).

    ``sample_ts`` must be strictly increasing step indices in ``[1, n_steps]``;
    the iterate after step ``t`` is copied into ``snaps[k]`` when
    ``t == sample_ts[k]``.  Returns ``(min_err, min_t, diverged_t, recorded)``
    where ``diverged_t`` is ``-1`` for a clean run and ``recorded`` counts
    filled snapshot slots.  ``x_min`` receives the iterate with the smallest
    recovery error seen at any step (including step 0).
    """
    d = x.shape[0]
    s = x @ x.T
    min_err = 0.0
    for i in range(d):
        for j in range(d):
            dv = s[i, j] - y_star[i, j]
            min_err += dv * dv
    min_t = 0
    for i in range(d):
        for j in range(d):
            x_min[i, j] = x[i, j]
    ptr = 0
    diverged_t = -1
    for t in range(1, n_steps + 1):
        if nu > 0.0:
            w = rng.standard_normal((d, d))
            _sample_sphere_inplace(w, nu)
            for i in range(d):
                for j in range(d):
                    w[i, j] += x[i, j]
            m = w @ w.T
            m -= y_sym
            g = m @ w
        else:
            # s already holds x @ x.T from the previous error pass
            m = s - y_sym
            g = m @ x
        for i in range(d):
            for j in range(d):
                x[i, j] -= eta * g[i, j]
        s = x @ x.T
        err = 0.0
        for i in range(d):
            for j in range(d):
                dv = s[i, j] - y_star[i, j]
                err += dv * dv
        if not (err < np.inf):
            diverged_t = t
            break
        if err < min_err:
            min_err = err
            min_t = t
            for i in range(d):
                for j in range(d):
                    x_min[i, j] = x[i, j]
        if ptr < sample_ts.shape[0] and t == sample_ts[ptr]:
            for i in range(d):
                for j in range(d):
                    snaps[ptr, i, j] = x[i, j]
            ptr += 1
    return min_err, min_t, diverged_t, ptr


@njit(cache=True)
def rect_loop(u, v, y, y_star, eta, nu, n_steps, sample_ts, snaps_u, snaps_v, u_min, v_min, rng):
    """Simultaneous rectangular update; mirrors :func:`psd_loop`.

    Per step the two perturbations are drawn in order (W for U, then Z
    for V), both with columns uniform on the radius-``nu`` sphere.
    """
    d = u.shape[0]
    p = u @ v.T
    min_err = 0.0
    for i in range(d):
        for j in range(d):
            dv = p[i, j] - y_star[i, j]
            min_err += dv * dv
    min_t = 0
    for i in range(d):
        for j in range(d):
            u_min[i, j] = u[i, j]
            v_min[i, j] = v[i, j]
    ptr = 0
    diverged_t = -1
    for t in range(1, n_steps + 1):
        if nu > 0.0:
            w = rng.standard_normal((d, d))
            _sample_sphere_inplace(w, nu)
            z = rng.standard_normal((d, d))
            _sample_sphere_inplace(z, nu)
            for i in range(d):
                for j in range(d):
                    w[i, j] += u[i, j]
                    z[i, j] += v[i, j]
            resid = w @ z.T
            resid -= y
            gu = resid @ z
            gv = resid.T @ w
        else:
            resid = p - y
            gu = resid @ v
            gv = resid.T @ u
        for i in range(d):
            for j in range(d):
                u[i, j] -= eta * gu[i, j]
                v[i, j] -= eta * gv[i, j]
        p = u @ v.T
        err = 0.0
        for i in range(d):
            for j in range(d):
                dv = p[i, j] - y_star[i, j]
                err += dv * dv
        if not (err < np.inf):
            diverged_t = t
            break
        if err < min_err:
            min_err = err
            min_t = t
            for i in range(d):
                for j in range(d):
                    u_min[i, j] = u[i, j]
                    v_min[i, j] = v[i, j]
        if ptr < sample_ts.shape[0] and t == sample_ts[ptr]:
            for i in range(d):
                for j in range(d):
                    snaps_u[ptr, i, j] = u[i, j]
                    snaps_v[ptr, i, j] = v[i, j]
            ptr += 1
    return min_err, min_t, diverged_t, ptr
