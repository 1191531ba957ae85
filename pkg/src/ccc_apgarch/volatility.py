"""Volatility recursion and related structural diagnostics.

The model's powered volatility ``hpow_t = h_t^{delta/2}`` (componentwise,
``hpow_{t,i} = h_{i,t}^{delta_i/2}``) follows

    hpow_t = omega + sum_i A_i^+ plus_{t-i} + A_i^- minus_{t-i}
                   + sum_j B_j hpow_{t-j}

where ``plus_{t,i} = max(eps_{i,t}, 0)^{delta_i}`` and
``minus_{t,i} = max(-eps_{i,t}, 0)^{delta_i}``.  ``h_t`` is recovered
componentwise as ``hpow_t^(2/delta)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ExplosivePath, InvalidSpecError, NonInvertibleBPolynomial
from .params import ModelSpec

__all__ = [
    "EXPLOSION_CAP",
    "InitPolicy",
    "ZERO_OMEGA",
    "SAMPLE_MEAN",
    "presample_init",
    "PowerSplit",
    "VolatilityPath",
    "power_split",
    "powered_parts",
    "recursion",
    "arch_infinity_weights",
    "IdentifiabilityReport",
    "check_identifiability",
]

# Optimizers probe invalid regions; fail fast past this so the objective can
# turn the failure into a penalty.
EXPLOSION_CAP = 1e300


@dataclass(frozen=True)
class InitPolicy:
    """Presample policy for the recursion.

    ``zero_omega``: presample powered returns are 0 and presample hpow is
    omega.  ``sample_mean``: presample powered returns are the sample means
    of the corresponding transforms over the data window (hpow still omega).
    ``presample``: explicit lag values, row k-1 = lag k before the window,
    as captured by the simulator for exact round trips.
    """

    kind: str
    plus: Optional[np.ndarray] = None   # (q, m)
    minus: Optional[np.ndarray] = None  # (q, m)
    hpow: Optional[np.ndarray] = None   # (p, m)


ZERO_OMEGA = InitPolicy("zero_omega")
SAMPLE_MEAN = InitPolicy("sample_mean")


def presample_init(plus, minus, hpow) -> InitPolicy:
    return InitPolicy(
        "presample",
        plus=np.asarray(plus, float),
        minus=np.asarray(minus, float),
        hpow=np.asarray(hpow, float),
    )


@dataclass(frozen=True)
class PowerSplit:
    """Powered positive/negative parts of one return vector.

    ``plus * minus == 0`` componentwise and ``plus + minus == |eps|**delta``.
    """

    plus: np.ndarray
    minus: np.ndarray


@dataclass(frozen=True)
class VolatilityPath:
    """Volatility trajectory for a data window.

    ``hpow`` holds ``h_t^{delta/2}`` and ``h`` the componentwise
    ``exp((2/delta) * log(hpow))``, which is well defined because ``hpow``
    is bounded below by ``min(omega) > 0``.
    """

    hpow: np.ndarray  # (n, m)
    h: np.ndarray     # (n, m)
    presample: InitPolicy


def as_returns(returns, m: int) -> np.ndarray:
    eps = np.asarray(returns, dtype=float)
    if eps.ndim == 1:
        eps = eps[:, None]
    if eps.ndim != 2 or eps.shape[1] != m:
        raise ValueError(f"returns must be an (n, {m}) matrix, got shape {eps.shape}")
    if eps.shape[0] < 1:
        raise ValueError("returns must contain at least one observation")
    if not np.all(np.isfinite(eps)):
        raise ValueError("returns contain non-finite entries")
    return eps


def stable_pow(base: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """``base ** exponent`` for nonnegative bases, reproducible across shapes.

    numpy's pow ufunc rounds differently between its SIMD body and scalar
    tail, so the same value can yield different last bits at different array
    positions; exp and log do not.  The simulator's stepwise path and the
    vectorized recursion must produce bit-identical powered returns, hence
    the exp/log composition (with exact shortcuts for powers 1 and 2).
    """
    exponent = np.asarray(exponent, float)
    if np.all(exponent == 2.0):
        return base * base
    if np.all(exponent == 1.0):
        return np.array(base, dtype=float, copy=True)
    with np.errstate(divide="ignore"):
        return np.exp(exponent * np.log(base))


def power_split(eps, delta) -> PowerSplit:
    """Split one return vector into powered positive and negative parts."""
    eps = np.asarray(eps, float).reshape(-1)
    delta = np.asarray(delta, float).reshape(-1)
    return PowerSplit(
        plus=stable_pow(np.maximum(eps, 0.0), delta),
        minus=stable_pow(np.maximum(-eps, 0.0), delta),
    )


def powered_parts(eps: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise powered split of an (n, m) return matrix."""
    plus = stable_pow(np.maximum(eps, 0.0), delta)
    minus = stable_pow(np.maximum(-eps, 0.0), delta)
    return plus, minus


def rows_times_matrix(x: np.ndarray, mat: np.ndarray) -> np.ndarray:
    # Row-wise mat @ x[t].  Implemented as a broadcast multiply-reduce so the
    # reduction order matches mat_vec exactly; the simulator's stepwise path
    # and the vectorized recursion must agree bitwise.
    return (x[:, None, :] * mat[None, :, :]).sum(axis=2)


def mat_vec(mat: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (mat * v[None, :]).sum(axis=1)


def _presample_arrays(spec: ModelSpec, init: InitPolicy, plus, minus):
    m, p, q = spec.orders.m, spec.orders.p, spec.orders.q
    if init.kind == "zero_omega":
        return np.zeros((q, m)), np.zeros((q, m)), np.tile(spec.omega, (p, 1))
    if init.kind == "sample_mean":
        return (
            np.tile(plus.mean(axis=0), (q, 1)),
            np.tile(minus.mean(axis=0), (q, 1)),
            np.tile(spec.omega, (p, 1)),
        )
    if init.kind == "presample":
        pre_plus = np.asarray(init.plus, float).reshape(q, m) if q else np.zeros((0, m))
        pre_minus = np.asarray(init.minus, float).reshape(q, m) if q else np.zeros((0, m))
        pre_hpow = np.asarray(init.hpow, float).reshape(p, m) if p else np.zeros((0, m))
        if np.any(pre_plus < 0) or np.any(pre_minus < 0) or np.any(pre_hpow < 0):
            raise InvalidSpecError("presample values must be nonnegative")
        return pre_plus, pre_minus, pre_hpow
    raise InvalidSpecError(f"unknown init policy {init.kind!r}")


def _lagged(values: np.ndarray, pre: np.ndarray, lag: int) -> np.ndarray:
    # Row t of the output is values[t - lag], with presample rows (lag k at
    # pre[k-1]) filling t - lag < 0.
    n = values.shape[0]
    if lag == 0:
        return values
    prefix = pre[:lag][::-1]
    if lag >= n:
        return np.vstack([prefix])[:n]
    return np.vstack([prefix, values[: n - lag]])


def garch_filter(x: np.ndarray, b_mats: np.ndarray, pre_hpow: np.ndarray) -> np.ndarray:
    """Apply the volatility-lag feedback ``hpow_t = x_t + sum_j B_j hpow_{t-j}``.

    ``x`` already contains the intercept and return terms.  Raises
    :class:`~ccc_apgarch.errors.ExplosivePath` at the first entry exceeding
    ``EXPLOSION_CAP`` or turning non-finite.  Shared by the recursion and the
    likelihood evaluator so the two stay bit-identical.
    """
    n, m = x.shape
    p = b_mats.shape[0]
    if p == 0:
        bad = ~(np.isfinite(x) & (x < EXPLOSION_CAP))
        if bad.any():
            raise ExplosivePath(int(np.argmax(bad.any(axis=1))))
        return x
    if m == 1:
        # Scalar fast path; same IEEE operations as the array branch below.
        out = np.empty((n, 1))
        coeffs = [float(b_mats[j][0, 0]) for j in range(p)]
        hist = [float(v) for v in pre_hpow[::-1, 0]] if p else []
        xs = x[:, 0].tolist()
        cap = EXPLOSION_CAP
        for t in range(n):
            acc = xs[t]
            for j in range(1, p + 1):
                acc = acc + coeffs[j - 1] * hist[p + t - j]
            if not (acc < cap):  # also catches nan
                raise ExplosivePath(t)
            hist.append(acc)
        out[:, 0] = hist[p:]
        return out
    full = np.empty((p + n, m))
    full[:p] = pre_hpow[::-1]
    for t in range(n):
        acc = x[t].copy()
        for j in range(1, p + 1):
            acc += mat_vec(b_mats[j - 1], full[p + t - j])
        if not np.all(np.isfinite(acc) & (acc < EXPLOSION_CAP)):
            raise ExplosivePath(t)
        full[p + t] = acc
    return full[p:]


def recursion(spec: ModelSpec, returns, init: InitPolicy = ZERO_OMEGA) -> VolatilityPath:
    """Evaluate the powered-volatility recursion over a return window.

    Assumes a value-valid spec (callers that probe invalid parameter values
    validate first and turn violations into penalties).  Raises
    :class:`~ccc_apgarch.errors.ExplosivePath` as soon as an entry exceeds
    ``EXPLOSION_CAP`` or turns non-finite.
    """
    if np.any(spec.omega <= 0):
        raise InvalidSpecError("recursion requires strictly positive omega")
    eps = as_returns(returns, spec.orders.m)
    n, m = eps.shape
    p, q = spec.orders.p, spec.orders.q
    plus, minus = powered_parts(eps, spec.delta)
    pre_plus, pre_minus, pre_hpow = _presample_arrays(spec, init, plus, minus)

    x = np.tile(spec.omega, (n, 1))
    for i in range(1, q + 1):
        x += rows_times_matrix(_lagged(plus, pre_plus, i), spec.a_plus[i - 1])
        x += rows_times_matrix(_lagged(minus, pre_minus, i), spec.a_minus[i - 1])
    hpow = garch_filter(x, spec.b, pre_hpow)
    h = np.exp((2.0 / spec.delta) * np.log(hpow))
    return VolatilityPath(hpow=hpow, h=h, presample=init)


def arch_infinity_weights(spec: ModelSpec, truncation: int):
    """Truncated moving-average weights of the inverted recursion.

    Returns ``(psi_plus, psi_minus, c_inf)`` with ``psi_plus[k]`` the weight
    on the powered positive part at lag k (``psi_plus[0] == 0``) and
    ``c_inf`` the constant term; requires the volatility-lag polynomial to
    be invertible.
    """
    from .stationarity import spectral_radius_b

    m, p, q = spec.orders.m, spec.orders.p, spec.orders.q
    if p > 0:
        rho = spectral_radius_b(spec)
        if rho >= 1.0:
            raise NonInvertibleBPolynomial(
                f"volatility-lag polynomial is not invertible (spectral radius {rho:.4f})"
            )
    K = int(truncation)
    psi_plus = np.zeros((K + 1, m, m))
    psi_minus = np.zeros((K + 1, m, m))
    for k in range(1, K + 1):
        if k <= q:
            psi_plus[k] += spec.a_plus[k - 1]
            psi_minus[k] += spec.a_minus[k - 1]
        for j in range(1, min(k, p) + 1):
            psi_plus[k] += spec.b[j - 1] @ psi_plus[k - j]
            psi_minus[k] += spec.b[j - 1] @ psi_minus[k - j]
    if p == 0:
        c_inf = spec.omega.copy()
    else:
        c_inf = np.linalg.solve(np.eye(m) - spec.b.sum(axis=0), spec.omega)
    return psi_plus, psi_minus, c_inf


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Numerical check of the rank condition on the highest-lag coefficients.

    Left-coprimeness of the matrix polynomials is a property of the true
    process that has no numerical test from a single spec; it is always
    flagged as skipped.  For p == 0 the condition is vacuous (``automatic``).
    """

    left_coprime_skipped: bool
    nonzero_sum: bool
    rank_m: int
    full_rank: bool
    automatic: bool


def _highest_lag_column(mats: np.ndarray, col: int) -> np.ndarray:
    # Highest lag k >= 1 whose column `col` is nonzero; zero vector if none.
    for k in range(mats.shape[0] - 1, -1, -1):
        if np.any(mats[k][:, col] != 0.0):
            return mats[k][:, col]
    m = mats.shape[1] if mats.shape[0] else mats.shape[2]
    return np.zeros(m)


def check_identifiability(spec: ModelSpec, tol: float = 1e-10) -> IdentifiabilityReport:
    """Rank check for parameter uniqueness when p > 0."""
    m, p, q = spec.orders.m, spec.orders.p, spec.orders.q
    sum_a = spec.a_plus.sum(axis=0) + spec.a_minus.sum(axis=0) if q else np.zeros((m, m))
    nonzero_sum = bool(np.any(sum_a != 0.0))
    if p == 0:
        return IdentifiabilityReport(
            left_coprime_skipped=True,
            nonzero_sum=nonzero_sum,
            rank_m=m,
            full_rank=True,
            automatic=True,
        )
    cols = []
    for mats in (spec.a_plus, spec.a_minus, spec.b):
        for col in range(m):
            cols.append(_highest_lag_column(mats, col) if mats.shape[0] else np.zeros(m))
    big = np.column_stack(cols)  # (m, 3m)
    sv = np.linalg.svd(big, compute_uv=False)
    rank = int(np.sum(sv > tol * (sv[0] if sv.size and sv[0] > 0 else 1.0)))
    return IdentifiabilityReport(
        left_coprime_skipped=True,
        nonzero_sum=nonzero_sum,
        rank_m=rank,
        full_rank=bool(rank == m),
        automatic=False,
    )
