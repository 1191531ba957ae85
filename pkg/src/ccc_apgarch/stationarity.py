"""Strict-stationarity diagnostics via random companion matrices.

The stacked vector of powered return parts and powered volatilities obeys a
random linear recursion ``z_t = b_t + C_t z_{t-1}``; the sign of the top
Lyapunov exponent of ``{C_t}`` decides whether a strictly stationary
solution exists.  The exponent is estimated by iterated vector
renormalization, and a necessary-condition diagnostic checks the spectral
radius of the volatility-lag companion matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDefiniteCorrelation, UnsupportedOrder
from .params import ModelSpec
from .volatility import stable_pow

__all__ = [
    "CompanionMatrix",
    "LyapunovEstimate",
    "upsilon",
    "companion",
    "estimate_lyapunov",
    "spectral_radius_b",
]


@dataclass(frozen=True)
class CompanionMatrix:
    """One draw of the random companion matrix, of size (p+2q)m square."""

    c: np.ndarray


@dataclass(frozen=True)
class LyapunovEstimate:
    gamma_hat: float
    std_error: float
    n_steps: int
    n_replications: int
    restarts: int = 0

    def is_stationary(self, confidence: float = 3.0) -> bool:
        """True when gamma_hat is below zero by `confidence` standard errors."""
        if self.gamma_hat == -np.inf:
            return True
        return self.gamma_hat + confidence * self.std_error < 0.0


def upsilon(eta_tilde, delta) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal matrices of powered positive/negative innovation parts."""
    e = np.asarray(eta_tilde, float).reshape(-1)
    d = np.asarray(delta, float).reshape(-1)
    return np.diag(stable_pow(np.maximum(e, 0.0), d)), np.diag(stable_pow(np.maximum(-e, 0.0), d))


def _padded(spec: ModelSpec):
    # Companion analysis needs p >= 1; p = 0 is padded with one zero B lag.
    m, p, q = spec.orders.m, spec.orders.p, spec.orders.q
    if q == 0:
        raise UnsupportedOrder("companion analysis needs at least one return lag (q >= 1)")
    p_eff = max(p, 1)
    b = spec.b if p >= 1 else np.zeros((1, m, m))
    return m, p_eff, q, b


def _coefficient_row(spec: ModelSpec):
    m, p_eff, q, b = _padded(spec)
    blocks = [spec.a_plus[i] for i in range(q)]
    blocks += [spec.a_minus[i] for i in range(q)]
    blocks += [b[j] for j in range(p_eff)]
    return m, p_eff, q, np.hstack(blocks)  # (m, (p_eff + 2q) m)


def companion(spec: ModelSpec, eta_tilde) -> CompanionMatrix:
    """Assemble the companion matrix for one innovation draw.

    Block rows, in order: powered-positive block scaled by the positive
    diagonal, its lag shifts, powered-negative block scaled by the negative
    diagonal, its lag shifts, the raw coefficient row for the powered
    volatility, and its lag shifts.
    """
    m, p_eff, q, w = _coefficient_row(spec)
    dim = (p_eff + 2 * q) * m
    e = np.asarray(eta_tilde, float).reshape(m)
    up = stable_pow(np.maximum(e, 0.0), spec.delta)
    um = stable_pow(np.maximum(-e, 0.0), spec.delta)

    c = np.zeros((dim, dim))
    c[0:m, :] = up[:, None] * w
    for k in range(1, q):
        rows = slice(m * k, m * (k + 1))
        cols = slice(m * (k - 1), m * k)
        c[rows, cols] = np.eye(m)
    base = m * q
    c[base:base + m, :] = um[:, None] * w
    for k in range(1, q):
        rows = slice(base + m * k, base + m * (k + 1))
        cols = slice(base + m * (k - 1), base + m * k)
        c[rows, cols] = np.eye(m)
    base = 2 * m * q
    c[base:base + m, :] = w
    for k in range(1, p_eff):
        rows = slice(base + m * k, base + m * (k + 1))
        cols = slice(base + m * (k - 1), base + m * k)
        c[rows, cols] = np.eye(m)
    return CompanionMatrix(c)


def _step_batch(v, u_scaled_plus, u_scaled_minus, u, m, q, p_eff):
    # One multiplication z -> C z for a batch of state vectors, using the
    # block structure instead of the full matrix.
    out = np.empty_like(v)
    out[:, 0:m] = u_scaled_plus
    if q > 1:
        out[:, m:m * q] = v[:, 0:m * (q - 1)]
    base = m * q
    out[:, base:base + m] = u_scaled_minus
    if q > 1:
        out[:, base + m:base + m * q] = v[:, base:base + m * (q - 1)]
    base = 2 * m * q
    out[:, base:base + m] = u
    if p_eff > 1:
        out[:, base + m:] = v[:, base:base + m * (p_eff - 1)]
    return out


def _growth_serial(w, delta, m, q, p_eff, eta_tilde, v0):
    """Accumulated log-growth of one renormalized trajectory.

    Returns ``(total_log_growth, collapse_step)``; the second entry is None
    when the trajectory never hits exactly zero.
    """
    v = np.asarray(v0, float).copy()
    acc = 0.0
    for t in range(eta_tilde.shape[0]):
        e = eta_tilde[t]
        up = stable_pow(np.maximum(e, 0.0), delta)
        um = stable_pow(np.maximum(-e, 0.0), delta)
        u = w @ v
        v = _step_batch(v[None, :], (up * u)[None, :], (um * u)[None, :], u[None, :], m, q, p_eff)[0]
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            return acc, t
        acc += np.log(norm)
        v /= norm
    return acc, None


def estimate_lyapunov(
    spec: ModelSpec,
    n_steps: int = 10_000,
    n_replications: int = 100,
    seed: int = 0,
) -> LyapunovEstimate:
    """Monte Carlo estimate of the top Lyapunov exponent.

    Each replication draws iid standard normal innovations, correlates them
    with the lower Cholesky factor of the correlation matrix, and iterates a
    random nonnegative unit vector through the companion recursion with
    per-step renormalization.  A replication whose vector hits exactly zero
    restarts with a fresh vector (up to 3 times, counted); persistent
    collapse yields the ``-inf`` sentinel of a degenerate recursion.
    """
    if n_steps < 100:
        raise ValueError("n_steps must be >= 100")
    if n_replications < 1:
        raise ValueError("n_replications must be >= 1")
    m, p_eff, q, w = _coefficient_row(spec)
    dim = (p_eff + 2 * q) * m
    delta = spec.delta
    try:
        chol = np.linalg.cholesky(spec.r)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefiniteCorrelation("correlation matrix is not positive definite") from exc

    children = np.random.SeedSequence(seed).spawn(n_replications)
    gens = [np.random.default_rng(c) for c in children]
    v = np.empty((n_replications, dim))
    eta_t = np.empty((n_replications, n_steps, m))
    for r, g in enumerate(gens):
        v0 = np.abs(g.standard_normal(dim))
        v[r] = v0 / np.linalg.norm(v0)
        eta_t[r] = g.standard_normal((n_steps, m)) @ chol.T

    acc = np.zeros(n_replications)
    alive = np.ones(n_replications, dtype=bool)
    for t in range(n_steps):
        e = eta_t[:, t, :]
        up = stable_pow(np.maximum(e, 0.0), delta)
        um = stable_pow(np.maximum(-e, 0.0), delta)
        u = v @ w.T
        v = _step_batch(v, up * u, um * u, u, m, q, p_eff)
        norms = np.linalg.norm(v, axis=1)
        dead = alive & (norms == 0.0)
        alive &= ~dead
        safe = np.where(norms == 0.0, 1.0, norms)
        acc[alive] += np.log(safe[alive])
        v /= safe[:, None]

    gammas = np.where(alive, acc / n_steps, -np.inf)
    restarts = 0
    for r in np.flatnonzero(~alive):
        for _ in range(3):
            restarts += 1
            v0 = np.abs(gens[r].standard_normal(dim))
            v0 /= np.linalg.norm(v0)
            total, collapse = _growth_serial(w, delta, m, q, p_eff, eta_t[r], v0)
            if collapse is None:
                gammas[r] = total / n_steps
                break

    if np.all(np.isfinite(gammas)):
        gamma_hat = float(np.mean(gammas))
        std_error = float(np.std(gammas, ddof=1) / np.sqrt(n_replications)) if n_replications > 1 else 0.0
    else:
        gamma_hat = -np.inf
        std_error = 0.0
    return LyapunovEstimate(
        gamma_hat=gamma_hat,
        std_error=std_error,
        n_steps=n_steps,
        n_replications=n_replications,
        restarts=restarts,
    )


def spectral_radius_b(spec: ModelSpec) -> float:
    """Spectral radius of the companion matrix of the volatility lags (0 when p = 0)."""
    m, p = spec.orders.m, spec.orders.p
    if p == 0:
        return 0.0
    top = np.hstack([spec.b[j] for j in range(p)])
    if p == 1:
        comp = top
    else:
        comp = np.vstack([top, np.hstack([np.eye(m * (p - 1)), np.zeros((m * (p - 1), m))])])
    return float(np.max(np.abs(np.linalg.eigvals(comp))))
