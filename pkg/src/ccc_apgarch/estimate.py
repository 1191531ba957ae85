"""Quasi-maximum-likelihood fitting by box-constrained minimization.

The driver is two-phase: a bounded Nelder-Mead search from each start
(derivative-free, tolerant of the +inf penalty used for invalid parameter
points), then an L-BFGS-B polish of the best point using the package's own
central-difference gradient.  The compactness assumption on the parameter
space is realized as explicit box bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from . import _numdiff
from .errors import AllStartsInvalid, GradientAtInvalidPoint, NotEnoughData
from .likelihood import QuasiLikelihood
from .params import (
    DeltaEstimated,
    DeltaKnown,
    EstimationMode,
    ModelOrders,
    ParamVector,
    param_count,
)
from .volatility import InitPolicy, ZERO_OMEGA, as_returns

__all__ = ["FitOptions", "FitResult", "default_bounds", "fit_qmle", "minimize_box"]

GRAD_STEP_SCALE = 1e-5


@dataclass
class FitOptions:
    """Options for :func:`fit_qmle`.

    ``starts`` is the multistart count: start 1 is a moment-flavored
    heuristic, the rest jitter it multiplicatively by U[0.5, 1.5] factors
    drawn under ``seed``.
    """

    mode: EstimationMode
    bounds: Optional[np.ndarray] = None  # (s0, 2), defaults to default_bounds
    starts: int = 1
    max_iterations: int = 5000
    tolerance: float = 1e-10
    seed: int = 0
    init: InitPolicy = ZERO_OMEGA
    polish: bool = True


@dataclass
class FitResult:
    v_hat: ParamVector
    objective: float
    converged: bool
    iterations: int
    start_index: int
    n: int
    boundary_active: list = field(default_factory=list)
    message: str = ""


def default_bounds(orders: ModelOrders, mode: EstimationMode) -> np.ndarray:
    """Box bounds enclosing every parameter region used in practice.

    omega in [1e-6, 1e3]; coefficient-matrix entries in [0, 10]; powers in
    [0.05, 4] when estimated; correlations in [-0.999, 0.999].
    """
    m, p, q = orders.m, orders.p, orders.q
    rows = [(1e-6, 1e3)] * m
    rows += [(0.0, 10.0)] * (m * m * (2 * q + p))
    if isinstance(mode, DeltaEstimated):
        rows += [(0.05, 4.0)] * m
    rows += [(-0.999, 0.999)] * (m * (m - 1) // 2)
    return np.asarray(rows, dtype=float)


def minimize_box(fun, x0, bounds, max_iterations: int = 5000, tolerance: float = 1e-10,
                 gradient=None, polish: bool = True):
    """Two-phase bounded minimization of a penalty-style objective.

    Returns ``(x, f, iterations, simplex_converged)``.  ``gradient`` is the
    callable used by the polish phase; when the polish fails (for example a
    derivative requested at an invalid point) the simplex result stands.
    """
    bounds = np.asarray(bounds, float)
    x0 = np.clip(np.asarray(x0, float), bounds[:, 0], bounds[:, 1])
    nm = scipy.optimize.minimize(
        fun,
        x0,
        method="Nelder-Mead",
        bounds=[tuple(b) for b in bounds],
        options={
            "maxiter": max_iterations,
            "maxfev": max_iterations,
            "xatol": 1e-4,
            "fatol": 1e-8,
            "adaptive": x0.size >= 6,
        },
    )
    best_x, best_f = nm.x, float(nm.fun)
    iterations = int(nm.nit)
    if polish and np.isfinite(best_f):
        try:
            lb = scipy.optimize.minimize(
                fun,
                best_x,
                jac=gradient,
                method="L-BFGS-B",
                bounds=[tuple(b) for b in bounds],
                options={"maxiter": 200, "ftol": max(tolerance, 1e-14), "gtol": 1e-7},
            )
            iterations += int(lb.nit)
            f_lb = fun(lb.x)
            if np.isfinite(f_lb) and f_lb <= best_f:
                best_x, best_f = lb.x, float(f_lb)
        except GradientAtInvalidPoint:
            pass
    return np.clip(best_x, bounds[:, 0], bounds[:, 1]), best_f, iterations, bool(nm.success)


def heuristic_start(eps: np.ndarray, orders: ModelOrders, mode: EstimationMode) -> np.ndarray:
    """Moment-flavored starting point in the packed layout."""
    m, p, q = orders.m, orders.p, orders.q
    delta0 = mode.delta if isinstance(mode, DeltaKnown) else 1.5 * np.ones(m)
    omega0 = 0.5 * np.mean(np.abs(eps) ** delta0, axis=0)
    omega0 = np.maximum(omega0, 1e-4)
    parts = [omega0]
    diag = 0.05 * np.eye(m)
    parts += [diag.ravel(order="F")] * (2 * q)
    parts += [(0.8 * np.eye(m)).ravel(order="F")] * p
    if isinstance(mode, DeltaEstimated):
        parts.append(1.5 * np.ones(m))
    if m > 1:
        corr = np.corrcoef(eps.T)
        rho = np.array([corr[i, j] for j in range(m) for i in range(j + 1, m)])
        parts.append(np.clip(np.nan_to_num(rho), -0.95, 0.95))
    return np.concatenate(parts)


def fit_qmle(returns, orders: ModelOrders, options: FitOptions) -> FitResult:
    """Fit the model by minimizing the quasi-log-likelihood criterion.

    Multistart; the reported point is the best final point across starts,
    with the objective recomputed at it.  ``converged`` holds when the
    bound-projected gradient is small (scaled 1e-4) or the simplex
    terminated successfully at an interior point.
    """
    eps = as_returns(returns, orders.m)
    n = eps.shape[0]
    s0 = param_count(orders, options.mode)
    if n <= s0:
        raise NotEnoughData(f"n={n} observations for {s0} parameters")
    bounds = np.asarray(options.bounds, float) if options.bounds is not None \
        else default_bounds(orders, options.mode)
    if bounds.shape != (s0, 2):
        raise ValueError(f"bounds must have shape ({s0}, 2)")
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise ValueError("each bound must satisfy lo < hi")

    ql = QuasiLikelihood(eps, orders, options.mode, options.init)
    fun = ql.total

    base = heuristic_start(eps, orders, options.mode)
    rng = np.random.default_rng(options.seed)
    starts = [np.clip(base, bounds[:, 0], bounds[:, 1])]
    for _ in range(options.starts - 1):
        jitter = rng.uniform(0.5, 1.5, size=s0)
        starts.append(np.clip(base * jitter, bounds[:, 0], bounds[:, 1]))
    usable = [(k, x) for k, x in enumerate(starts) if np.isfinite(fun(x))]
    if not usable:
        raise AllStartsInvalid("no start point yields a finite objective")

    def gradient(x):
        return _numdiff.central_gradient(fun, x, _numdiff.fd_steps(x, GRAD_STEP_SCALE), f0=fun(x))

    candidates = []
    iterations = 0
    for k, x in usable:
        xk, fk, itk, nm_ok = minimize_box(
            fun, x, bounds,
            max_iterations=options.max_iterations,
            tolerance=options.tolerance,
            gradient=gradient,
            polish=options.polish,
        )
        iterations += itk
        candidates.append((fk, k, xk, nm_ok))
    candidates.sort(key=lambda c: c[0])
    f_best, start_index, x_best, nm_ok = candidates[0]

    def assess(x, f):
        atol = 1e-9
        active_lo = x - bounds[:, 0] < atol
        active_hi = bounds[:, 1] - x < atol
        active = sorted(np.flatnonzero(active_lo | active_hi).tolist())
        try:
            g = gradient(x)
        except GradientAtInvalidPoint:
            return active, False, "gradient unavailable at the final point"
        g_proj = g.copy()
        g_proj[active_lo & (g > 0)] = 0.0
        g_proj[active_hi & (g < 0)] = 0.0
        ok = bool(np.max(np.abs(g_proj)) < 1e-4 * max(1.0, abs(f)))
        return active, ok, "" if ok else f"projected gradient norm {np.max(np.abs(g_proj)):.3e}"

    f_best = fun(x_best)  # recomputed at the reported point
    boundary_active, converged, message = assess(x_best, f_best)
    if not converged:
        # one simplex restart from the stalled point often finishes the job
        x2, f2, it2, nm_ok2 = minimize_box(
            fun, x_best, bounds,
            max_iterations=options.max_iterations,
            tolerance=options.tolerance,
            gradient=gradient,
            polish=options.polish,
        )
        iterations += it2
        if f2 <= f_best:
            x_best, f_best, nm_ok = x2, fun(x2), nm_ok2
            boundary_active, converged, message = assess(x_best, f_best)
    if not converged and nm_ok and not boundary_active:
        converged = True
        message = "simplex converged at an interior point"

    return FitResult(
        v_hat=ParamVector(x_best, options.mode, orders),
        objective=float(f_best),
        converged=converged,
        iterations=iterations,
        start_index=start_index,
        n=n,
        boundary_active=boundary_active,
        message=message,
    )
