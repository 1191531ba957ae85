"""Finite-difference derivatives with penalty-aware fallbacks.

Objectives here return ``+inf`` outside the valid parameter region, so the
central stencils fall back to one-sided differences whenever one probe side
is invalid.  Steps are per-coordinate: ``step_scale * max(|x_i|, 1e-4)``.
"""

from __future__ import annotations

import numpy as np

from .errors import GradientAtInvalidPoint


def fd_steps(x: np.ndarray, step_scale: float) -> np.ndarray:
    return step_scale * np.maximum(np.abs(x), 1e-4)


def central_gradient(fun, x, steps, f0=None) -> np.ndarray:
    """Gradient of a scalar function; one-sided where a probe is invalid."""
    x = np.asarray(x, float)
    g = np.empty(x.size)
    for i in range(x.size):
        h = steps[i]
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = fun(xp)
        fm = fun(xm)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * h)
        else:
            if f0 is None or not np.isfinite(f0):
                raise GradientAtInvalidPoint(f"objective invalid around coordinate {i}")
            if np.isfinite(fp):
                g[i] = (fp - f0) / h
            elif np.isfinite(fm):
                g[i] = (f0 - fm) / h
            else:
                raise GradientAtInvalidPoint(f"objective invalid on both sides of coordinate {i}")
    return g


def per_observation_jacobian(fun_vec, x, steps) -> np.ndarray:
    """Stack of per-observation gradients, shape (n, len(x)).

    ``fun_vec`` returns the length-n vector of per-observation values or
    ``None`` when the point is invalid.
    """
    x = np.asarray(x, float)
    cols = []
    f0 = None
    for i in range(x.size):
        h = steps[i]
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = fun_vec(xp)
        fm = fun_vec(xm)
        if fp is not None and fm is not None:
            cols.append((fp - fm) / (2.0 * h))
        else:
            if f0 is None:
                f0 = fun_vec(x)
                if f0 is None:
                    raise GradientAtInvalidPoint("objective invalid at the expansion point")
            if fp is not None:
                cols.append((fp - f0) / h)
            elif fm is not None:
                cols.append((f0 - fm) / h)
            else:
                raise GradientAtInvalidPoint(f"objective invalid on both sides of coordinate {i}")
    return np.column_stack(cols)


def central_hessian(fun, x, steps, f0=None) -> np.ndarray:
    """Second-difference Hessian, central where possible.

    Coordinates whose minus (plus) probe lands in the invalid region switch
    to forward (backward) differences, so the Hessian stays defined when the
    expansion point sits on a boundary of the valid region (for example a
    coefficient estimated at exactly zero).  Off-diagonal entries use the
    matching two-sided or one-sided four-point stencils.
    """
    x = np.asarray(x, float)
    k = x.size
    if f0 is None:
        f0 = fun(x)
    if not np.isfinite(f0):
        raise GradientAtInvalidPoint("objective invalid at the expansion point")

    cache = {(): f0}

    def value(offsets):
        key = tuple(sorted(offsets.items()))
        if key not in cache:
            xs = x.copy()
            for idx, shift in offsets.items():
                xs[idx] += shift
            cache[key] = fun(xs)
        return cache[key]

    # Per-coordinate difference weights on shifts of size steps[i]:
    # central {+1: 1/2, -1: -1/2}, forward {+1: 1, 0: -1}, backward {0: 1, -1: -1}.
    weights = []
    hess = np.empty((k, k))
    for i in range(k):
        h = steps[i]
        fp = value({i: h})
        fm = value({i: -h})
        if np.isfinite(fp) and np.isfinite(fm):
            weights.append({1: 0.5, -1: -0.5})
            hess[i, i] = (fp + fm - 2.0 * f0) / h**2
        elif np.isfinite(fp):
            f2 = value({i: 2.0 * h})
            if not np.isfinite(f2):
                raise GradientAtInvalidPoint(f"objective invalid around coordinate {i}")
            weights.append({1: 1.0, 0: -1.0})
            hess[i, i] = (f2 - 2.0 * fp + f0) / h**2
        elif np.isfinite(fm):
            f2 = value({i: -2.0 * h})
            if not np.isfinite(f2):
                raise GradientAtInvalidPoint(f"objective invalid around coordinate {i}")
            weights.append({-1: -1.0, 0: 1.0})
            hess[i, i] = (f2 - 2.0 * fm + f0) / h**2
        else:
            raise GradientAtInvalidPoint(f"objective invalid on both sides of coordinate {i}")

    for i in range(k):
        for j in range(i + 1, k):
            val = 0.0
            for si, wi in weights[i].items():
                for sj, wj in weights[j].items():
                    offsets = {}
                    if si:
                        offsets[i] = si * steps[i]
                    if sj:
                        offsets[j] = sj * steps[j]
                    val += wi * wj * value(offsets)
            hess[i, j] = hess[j, i] = val / (steps[i] * steps[j])
    if not np.all(np.isfinite(hess)):
        raise GradientAtInvalidPoint("Hessian stencil crossed into the invalid region")
    return (hess + hess.T) / 2.0
