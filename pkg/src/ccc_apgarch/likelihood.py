"""Gaussian quasi-log-likelihood criterion.

The per-observation term is

    l_t = eps_t' H_t^{-1} eps_t + log|H_t|,   H_t = D_t R D_t,

evaluated through the factorized identity
``l_t = sum_i log h_{i,t} + log|R| + z_t' R^{-1} z_t`` with
``z_t = eps_t / sqrt(h_t)``; the criterion is the n-normalized mean.  The
additive Gaussian constant ``m log(2 pi)`` is dropped, matching the
minimized form of the criterion (it shifts reported values, not
estimates).  Invalid parameter points are not failures: they evaluate to a
``+inf`` penalty so derivative-free and line-search optimizers can probe
freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import _numdiff
from .errors import ExplosivePath, GradientAtInvalidPoint
from .params import EstimationMode, ModelOrders, ParamVector, unpack
from .volatility import (
    InitPolicy,
    ZERO_OMEGA,
    as_returns,
    garch_filter,
    rows_times_matrix,
    stable_pow,
)

__all__ = ["ObjectiveValue", "QuasiLikelihood", "neg_quasi_loglik", "loglik_gradient"]


@dataclass(frozen=True)
class ObjectiveValue:
    """Objective evaluation: mean criterion, per-observation terms, validity."""

    total: float
    per_obs: Optional[np.ndarray]
    valid: bool


_INVALID = ObjectiveValue(total=np.inf, per_obs=None, valid=False)


class QuasiLikelihood:
    """Prepared evaluator of the criterion for one data window.

    Caches the powered-return lags, which are constant across evaluations
    when the power vector is known, and recomputes them only when a probed
    power vector changes.  Instances are cheap to call thousands of times
    inside an optimizer.
    """

    def __init__(self, returns, orders: ModelOrders, mode: EstimationMode,
                 init: InitPolicy = ZERO_OMEGA):
        self.eps = as_returns(returns, orders.m)
        self.orders = orders
        self.mode = mode
        self.init = init
        self.n = self.eps.shape[0]
        self._eps_pos = np.maximum(self.eps, 0.0)
        self._eps_neg = np.maximum(-self.eps, 0.0)
        self._cached_delta: Optional[bytes] = None
        self._cached: Optional[tuple] = None

    def _prepared_lags(self, spec):
        key = spec.delta.tobytes()
        if self._cached_delta != key:
            plus = stable_pow(self._eps_pos, spec.delta)
            minus = stable_pow(self._eps_neg, spec.delta)
            q, m, n = self.orders.q, self.orders.m, self.n
            if self.init.kind == "zero_omega":
                pre_plus = np.zeros((q, m))
                pre_minus = np.zeros((q, m))
            elif self.init.kind == "sample_mean":
                pre_plus = np.tile(plus.mean(axis=0), (q, 1))
                pre_minus = np.tile(minus.mean(axis=0), (q, 1))
            elif self.init.kind == "presample":
                pre_plus = np.asarray(self.init.plus, float).reshape(q, m)
                pre_minus = np.asarray(self.init.minus, float).reshape(q, m)
            else:
                raise ValueError(f"unknown init policy {self.init.kind!r}")
            lag_plus, lag_minus = [], []
            for i in range(1, q + 1):
                prefix_p = pre_plus[:i][::-1]
                prefix_m = pre_minus[:i][::-1]
                if i >= n:
                    lag_plus.append(prefix_p[:n])
                    lag_minus.append(prefix_m[:n])
                else:
                    lag_plus.append(np.vstack([prefix_p, plus[: n - i]]))
                    lag_minus.append(np.vstack([prefix_m, minus[: n - i]]))
            self._cached = (lag_plus, lag_minus)
            self._cached_delta = key
        return self._cached

    def _quick_violations(self, spec) -> bool:
        if np.any(spec.omega <= 0) or np.any(spec.delta <= 0):
            return True
        if np.any(spec.a_plus < 0) or np.any(spec.a_minus < 0) or np.any(spec.b < 0):
            return True
        if not (np.all(np.isfinite(spec.omega)) and np.all(np.isfinite(spec.delta))):
            return True
        m = self.orders.m
        if m > 1:
            off = spec.r[~np.eye(m, dtype=bool)]
            if np.any(np.abs(off) >= 1.0) or not np.all(np.isfinite(off)):
                return True
        return False

    def value(self, values: np.ndarray) -> ObjectiveValue:
        v = ParamVector(values, self.mode, self.orders)
        try:
            spec = unpack(v, check_correlation=False)
        except Exception:
            return _INVALID
        if self._quick_violations(spec):
            return _INVALID
        try:
            chol = np.linalg.cholesky(spec.r)
        except np.linalg.LinAlgError:
            return _INVALID

        n, m = self.n, self.orders.m
        p, q = self.orders.p, self.orders.q
        lag_plus, lag_minus = self._prepared_lags(spec)
        x = np.tile(spec.omega, (n, 1))
        for i in range(q):
            x += rows_times_matrix(lag_plus[i], spec.a_plus[i])
            x += rows_times_matrix(lag_minus[i], spec.a_minus[i])
        if self.init.kind == "presample" and p:
            pre_hpow = np.asarray(self.init.hpow, float).reshape(p, m)
        else:
            pre_hpow = np.tile(spec.omega, (p, 1))
        try:
            hpow = garch_filter(x, spec.b, pre_hpow)
        except ExplosivePath:
            return _INVALID

        log_h = np.log(hpow) * (2.0 / spec.delta)
        z = self.eps * np.exp(-0.5 * log_h)
        log_det_r = 2.0 * np.sum(np.log(np.diag(chol)))
        r_inv = scipy.linalg.cho_solve((chol, True), np.eye(m))
        quad = np.einsum("ti,ij,tj->t", z, r_inv, z)
        per_obs = log_h.sum(axis=1) + log_det_r + quad
        if not np.all(np.isfinite(per_obs)):
            return _INVALID
        return ObjectiveValue(total=float(per_obs.mean()), per_obs=per_obs, valid=True)

    def total(self, values: np.ndarray) -> float:
        return self.value(values).total

    def per_obs_or_none(self, values: np.ndarray) -> Optional[np.ndarray]:
        out = self.value(values)
        return out.per_obs if out.valid else None


def neg_quasi_loglik(v: ParamVector, returns, init: InitPolicy = ZERO_OMEGA) -> ObjectiveValue:
    """Evaluate the criterion at one parameter vector."""
    return QuasiLikelihood(returns, v.orders, v.mode, init).value(v.values)


def loglik_gradient(v: ParamVector, returns, init: InitPolicy = ZERO_OMEGA,
                    step_scale: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the mean criterion.

    Stands in for the analytic score; coordinates whose probe crosses into
    the invalid region fall back to one-sided differences.  Raises when the
    expansion point itself is invalid.
    """
    ql = QuasiLikelihood(returns, v.orders, v.mode, init)
    f0 = ql.value(v.values)
    if not f0.valid:
        raise GradientAtInvalidPoint("objective is invalid at the requested point")
    steps = _numdiff.fd_steps(v.values, step_scale)
    return _numdiff.central_gradient(ql.total, v.values, steps, f0=f0.total)
