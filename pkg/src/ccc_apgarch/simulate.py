"""Trajectory generation.

Returns are built as ``eps_t = sqrt(h_t) * eta_tilde_t`` with
``eta_tilde_t = L eta_t``, ``L`` the lower Cholesky factor of the
correlation matrix and ``eta_t`` iid standard normal, which reproduces the
conditional covariance ``H_t = D_t R D_t``.  The volatility recursion is
iterated forward from the zero/omega presample over ``burn_in + n`` steps
and the first ``burn_in`` observations are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExplosivePath, InvalidSpecError, NonPositiveDefiniteCorrelation
from .params import ModelSpec, validate
from .volatility import (
    EXPLOSION_CAP,
    InitPolicy,
    VolatilityPath,
    mat_vec,
    presample_init,
    stable_pow,
)

__all__ = ["SimulationOutput", "correlation_factor", "simulate"]

GENERATOR_NAME = "numpy.random.PCG64/standard_normal"


@dataclass(frozen=True)
class SimulationOutput:
    """A simulated window after burn-in.

    ``returns[t] == sqrt(volatility.h[t]) * eta_tilde[t]`` exactly, and
    feeding ``returns`` together with ``presample`` back into the volatility
    recursion reproduces ``volatility`` bit for bit.
    """

    returns: np.ndarray          # (n, m)
    volatility: VolatilityPath   # aligned with returns
    eta_tilde: np.ndarray        # (n, m), retained for round-trip checks
    seed: int
    burn_in: int
    presample: InitPolicy
    generator: str = GENERATOR_NAME


def correlation_factor(r) -> np.ndarray:
    """Lower-triangular factor L with L L' = R."""
    r = np.asarray(r, float)
    try:
        return np.linalg.cholesky(r)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefiniteCorrelation(
            "correlation matrix is not positive definite"
        ) from exc


def simulate(
    spec: ModelSpec,
    n: int,
    burn_in: int = 1000,
    seed: int = 0,
    innovations="gaussian",
) -> SimulationOutput:
    """Generate ``n`` observations of the process (deterministic under ``seed``).

    ``innovations`` may be ``"gaussian"`` or a callable
    ``(rng, size) -> (size, m)`` drawing iid standardized vectors (zero
    mean, identity covariance).  Strict stationarity of the spec is the
    caller's responsibility; an explosive path raises.
    """
    violations = validate(spec)
    if violations:
        raise InvalidSpecError("cannot simulate from invalid spec: " + "; ".join(violations))
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    m, p, q = spec.orders.m, spec.orders.p, spec.orders.q
    total = burn_in + n
    chol = correlation_factor(spec.r)

    rng = np.random.default_rng(seed)
    if innovations == "gaussian":
        eta = rng.standard_normal((total, m))
        gen_name = GENERATOR_NAME
    elif callable(innovations):
        eta = np.asarray(innovations(rng, total), float).reshape(total, m)
        gen_name = f"numpy.random.PCG64/{getattr(innovations, '__name__', 'custom')}"
    else:
        raise ValueError("innovations must be 'gaussian' or a callable")
    eta_tilde = eta @ chol.T

    omega, delta = spec.omega, spec.delta
    a_plus, a_minus, b = spec.a_plus, spec.a_minus, spec.b
    hpow = np.empty((total, m))
    h = np.empty((total, m))
    eps = np.empty((total, m))
    plus = np.empty((total, m))
    minus = np.empty((total, m))

    # Term order below mirrors the vectorized recursion exactly (zero/omega
    # presample), so recomputing the path from the returns is bit-identical.
    for t in range(total):
        acc = omega.copy()
        for i in range(1, q + 1):
            if t - i >= 0:
                acc += mat_vec(a_plus[i - 1], plus[t - i])
                acc += mat_vec(a_minus[i - 1], minus[t - i])
        for j in range(1, p + 1):
            acc += mat_vec(b[j - 1], hpow[t - j] if t - j >= 0 else omega)
        if not np.all(np.isfinite(acc) & (acc < EXPLOSION_CAP)):
            raise ExplosivePath(t)
        hpow[t] = acc
        h[t] = np.exp((2.0 / delta) * np.log(acc))
        eps[t] = np.sqrt(h[t]) * eta_tilde[t]
        plus[t] = stable_pow(np.maximum(eps[t], 0.0), delta)
        minus[t] = stable_pow(np.maximum(-eps[t], 0.0), delta)

    pre_plus = np.zeros((q, m))
    pre_minus = np.zeros((q, m))
    pre_hpow = np.tile(omega, (p, 1))
    for k in range(1, q + 1):
        if burn_in - k >= 0:
            pre_plus[k - 1] = plus[burn_in - k]
            pre_minus[k - 1] = minus[burn_in - k]
    for k in range(1, p + 1):
        if burn_in - k >= 0:
            pre_hpow[k - 1] = hpow[burn_in - k]
    presample = presample_init(pre_plus, pre_minus, pre_hpow)

    path = VolatilityPath(hpow=hpow[burn_in:], h=h[burn_in:], presample=presample)
    return SimulationOutput(
        returns=eps[burn_in:],
        volatility=path,
        eta_tilde=eta_tilde[burn_in:],
        seed=seed,
        burn_in=burn_in,
        presample=presample,
        generator=gen_name,
    )
