"""Parameter containers, validation, and flat encoding.

A model is described by a :class:`ModelSpec` (vectors/matrices in natural
shape) and estimated through a :class:`ParamVector` (flat layout).  The flat
layout is fixed as

    omega, vec(A_1^+)..vec(A_q^+), vec(A_1^-)..vec(A_q^-),
    vec(B_1)..vec(B_p), [delta if estimated], rho

with ``vec`` column-major and ``rho`` the strict lower triangle of the
correlation matrix enumerated column-major: (2,1), (3,1), ..., (m,1),
(3,2), ..., (m,m-1).  The power vector ``delta`` is part of the vector only
in :class:`DeltaEstimated` mode; :class:`DeltaKnown` carries the fixed
powers itself so the two packed lengths differ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidSpecError, NonPositiveDefiniteCorrelation

__all__ = [
    "ModelOrders",
    "ModelSpec",
    "DeltaKnown",
    "DeltaEstimated",
    "EstimationMode",
    "ParamVector",
    "param_count",
    "param_names",
    "pack",
    "unpack",
    "validate",
    "spec_to_config",
    "spec_from_config",
    "save_spec",
    "load_spec",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelOrders:
    """Model orders: series dimension ``m``, volatility lags ``p``, return lags ``q``."""

    m: int
    p: int
    q: int

    def __post_init__(self):
        if int(self.m) < 1:
            raise InvalidSpecError("series dimension m must be >= 1")
        if int(self.p) < 0 or int(self.q) < 0:
            raise InvalidSpecError("orders p and q must be >= 0")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))


@dataclass(frozen=True)
class DeltaKnown:
    """Estimation mode where the power vector is held fixed at ``delta``."""

    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", _readonly(np.asarray(self.delta, float).reshape(-1)))


@dataclass(frozen=True)
class DeltaEstimated:
    """Estimation mode where the power vector is part of the parameter vector."""


EstimationMode = Union[DeltaKnown, DeltaEstimated]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Full parameterization of a CCC asymmetric power GARCH model.

    Fields
    ------
    orders : ModelOrders
    omega : (m,) strictly positive intercepts of the powered-volatility recursion
    a_plus : (q, m, m) nonnegative weights on powered positive return parts
    a_minus : (q, m, m) nonnegative weights on powered negative return parts
    b : (p, m, m) nonnegative weights on lagged powered volatility
    r : (m, m) constant conditional correlation matrix
    delta : (m,) strictly positive componentwise powers

    Instances are immutable (arrays are read-only) and safe to share across
    threads.  Shape errors raise immediately; value violations are reported
    by :func:`validate`.
    """

    orders: ModelOrders
    omega: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray
    b: np.ndarray
    r: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        m, p, q = self.orders.m, self.orders.p, self.orders.q
        shapes = {
            "omega": (self.omega, (m,)),
            "a_plus": (self.a_plus, (q, m, m)),
            "a_minus": (self.a_minus, (q, m, m)),
            "b": (self.b, (p, m, m)),
            "r": (self.r, (m, m)),
            "delta": (self.delta, (m,)),
        }
        for name, (value, shape) in shapes.items():
            arr = np.asarray(value, dtype=float)
            if arr.size == 0:
                arr = np.zeros(shape)
            if arr.shape != shape:
                raise InvalidSpecError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, _readonly(arr))

    @classmethod
    def create(cls, omega, a_plus=(), a_minus=(), b=(), r=None, delta=None):
        """Build a spec from plain sequences, inferring the orders.

        ``a_plus``/``a_minus``/``b`` are sequences of m-by-m matrices; ``r``
        defaults to the identity and ``delta`` to all twos.
        """
        omega = np.asarray(omega, float).reshape(-1)
        m = omega.size
        a_plus = np.asarray(a_plus, float).reshape(-1, m, m) if len(a_plus) else np.zeros((0, m, m))
        a_minus = np.asarray(a_minus, float).reshape(-1, m, m) if len(a_minus) else np.zeros((0, m, m))
        b = np.asarray(b, float).reshape(-1, m, m) if len(b) else np.zeros((0, m, m))
        if a_plus.shape[0] != a_minus.shape[0]:
            raise InvalidSpecError("a_plus and a_minus must have the same number of lags")
        r = np.eye(m) if r is None else np.asarray(r, float)
        delta = 2.0 * np.ones(m) if delta is None else np.asarray(delta, float).reshape(-1)
        orders = ModelOrders(m=m, p=b.shape[0], q=a_plus.shape[0])
        return cls(orders, omega, a_plus, a_minus, b, r, delta)

    def equals(self, other: "ModelSpec") -> bool:
        return (
            self.orders == other.orders
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.a_plus, other.a_plus)
            and np.array_equal(self.a_minus, other.a_minus)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.delta, other.delta)
        )


def _strict_lower_indices(m: int) -> list[tuple[int, int]]:
    # column-major enumeration: (2,1),(3,1),...,(m,1),(3,2),...,(m,m-1)
    return [(i, j) for j in range(m) for i in range(j + 1, m)]


def param_count(orders: ModelOrders, mode: EstimationMode) -> int:
    """Length of the packed parameter vector for the given orders and mode."""
    m, p, q = orders.m, orders.p, orders.q
    base = m + m * m * (p + 2 * q) + m * (m - 1) // 2
    if isinstance(mode, DeltaEstimated):
        return base + m
    return base


def param_names(orders: ModelOrders, mode: EstimationMode) -> list[str]:
    """Human-readable coordinate names in the packed layout order."""
    m, p, q = orders.m, orders.p, orders.q
    names = [f"omega{i + 1}" for i in range(m)]
    for tag, lags in (("a_plus", q), ("a_minus", q), ("b", p)):
        for k in range(lags):
            names += [f"{tag}{k + 1}[{i + 1},{j + 1}]" for j in range(m) for i in range(m)]
    if isinstance(mode, DeltaEstimated):
        names += [f"delta{i + 1}" for i in range(m)]
    names += [f"rho[{i + 1},{j + 1}]" for i, j in _strict_lower_indices(m)]
    return names


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat parameter vector in the fixed layout, together with its context."""

    values: np.ndarray
    mode: EstimationMode
    orders: ModelOrders

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, float).reshape(-1)))
        expected = param_count(self.orders, self.mode)
        if self.values.size != expected:
            raise InvalidSpecError(
                f"parameter vector has length {self.values.size}, expected {expected}"
            )
        if isinstance(self.mode, DeltaKnown) and self.mode.delta.size != self.orders.m:
            raise InvalidSpecError(
                f"fixed delta has length {self.mode.delta.size}, expected m={self.orders.m}"
            )

    def replace_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.mode, self.orders)


def pack(spec: ModelSpec, mode: EstimationMode) -> ParamVector:
    """Encode a spec into the flat layout.  Inverse of :func:`unpack`."""
    violations = validate(spec)
    if violations:
        raise InvalidSpecError("cannot pack invalid spec: " + "; ".join(violations))
    m = spec.orders.m
    if isinstance(mode, DeltaKnown):
        if mode.delta.size != m:
            raise InvalidSpecError(f"fixed delta has length {mode.delta.size}, expected m={m}")
        if not np.array_equal(mode.delta, spec.delta):
            raise InvalidSpecError("fixed delta in mode differs from the spec's delta")
    parts = [spec.omega]
    parts += [spec.a_plus[k].ravel(order="F") for k in range(spec.orders.q)]
    parts += [spec.a_minus[k].ravel(order="F") for k in range(spec.orders.q)]
    parts += [spec.b[k].ravel(order="F") for k in range(spec.orders.p)]
    if isinstance(mode, DeltaEstimated):
        parts.append(spec.delta)
    rho = np.array([spec.r[i, j] for i, j in _strict_lower_indices(m)])
    parts.append(rho)
    return ParamVector(np.concatenate(parts) if parts else np.empty(0), mode, spec.orders)


def unpack(v: ParamVector, check_correlation: bool = True) -> ModelSpec:
    """Decode a flat vector back into a :class:`ModelSpec`.

    The reconstructed correlation matrix is symmetric with unit diagonal by
    construction.  With ``check_correlation`` (the default) a non
    positive-definite reconstruction raises
    :class:`~ccc_apgarch.errors.NonPositiveDefiniteCorrelation` instead of
    being silently repaired; objective evaluations pass ``False`` and turn
    the failure into a penalty.
    """
    m, p, q = v.orders.m, v.orders.p, v.orders.q
    x = v.values
    pos = 0

    def take(k):
        nonlocal pos
        out = x[pos:pos + k]
        pos += k
        return out

    omega = take(m)
    a_plus = np.stack([take(m * m).reshape((m, m), order="F") for _ in range(q)]) if q else np.zeros((0, m, m))
    a_minus = np.stack([take(m * m).reshape((m, m), order="F") for _ in range(q)]) if q else np.zeros((0, m, m))
    b = np.stack([take(m * m).reshape((m, m), order="F") for _ in range(p)]) if p else np.zeros((0, m, m))
    delta = take(m) if isinstance(v.mode, DeltaEstimated) else v.mode.delta
    rho = take(m * (m - 1) // 2)
    r = np.eye(m)
    for val, (i, j) in zip(rho, _strict_lower_indices(m)):
        r[i, j] = val
        r[j, i] = val
    if check_correlation and m > 1:
        if np.linalg.eigvalsh(r).min() <= 1e-12:
            raise NonPositiveDefiniteCorrelation(
                "reconstructed correlation matrix is not positive definite"
            )
    return ModelSpec(v.orders, omega, a_plus, a_minus, b, r, delta)


def validate(spec: ModelSpec) -> list[str]:
    """Check value constraints; returns a list of violations (empty = valid)."""
    out = []
    for i, w in enumerate(spec.omega):
        if not w > 0:
            out.append(f"omega[{i}] not strictly positive")
    for i, d in enumerate(spec.delta):
        if not d > 0:
            out.append(f"delta[{i}] not strictly positive")
    for name, mats in (("a_plus", spec.a_plus), ("a_minus", spec.a_minus), ("b", spec.b)):
        for k, mat in enumerate(mats):
            if np.any(mat < 0) or not np.all(np.isfinite(mat)):
                out.append(f"{name}[{k}] has negative or non-finite entries")
    r = spec.r
    m = spec.orders.m
    if not np.all(np.isfinite(r)):
        out.append("r has non-finite entries")
    else:
        if np.max(np.abs(r - r.T)) > 1e-12:
            out.append("r is not symmetric")
        if np.max(np.abs(np.diag(r) - 1.0)) > 1e-12:
            out.append("r does not have a unit diagonal")
        off = r[~np.eye(m, dtype=bool)]
        if off.size and np.max(np.abs(off)) >= 1.0:
            out.append("r has off-diagonal entries outside (-1, 1)")
        if m > 1 and np.linalg.eigvalsh((r + r.T) / 2.0).min() <= 1e-12:
            out.append("r is not positive definite")
    if not np.all(np.isfinite(spec.omega)) or not np.all(np.isfinite(spec.delta)):
        out.append("omega or delta has non-finite entries")
    return out


# --- config document serialization ---------------------------------------

def spec_to_config(spec: ModelSpec, mode: EstimationMode) -> dict:
    """Spec as a plain dict with keys m, p, q, omega, a_plus, a_minus, b, rho, delta, delta_mode."""
    return {
        "m": spec.orders.m,
        "p": spec.orders.p,
        "q": spec.orders.q,
        "omega": spec.omega.tolist(),
        "a_plus": [mat.tolist() for mat in spec.a_plus],
        "a_minus": [mat.tolist() for mat in spec.a_minus],
        "b": [mat.tolist() for mat in spec.b],
        "rho": [float(spec.r[i, j]) for i, j in _strict_lower_indices(spec.orders.m)],
        "delta": spec.delta.tolist(),
        "delta_mode": "estimate" if isinstance(mode, DeltaEstimated) else "known",
    }


def spec_from_config(cfg: dict) -> tuple[ModelSpec, EstimationMode]:
    from .errors import ParseError

    try:
        orders = ModelOrders(m=int(cfg["m"]), p=int(cfg["p"]), q=int(cfg["q"]))
        m = orders.m
        omega = np.asarray(cfg["omega"], float).reshape(m)
        a_plus = np.asarray(cfg.get("a_plus", []), float).reshape(orders.q, m, m)
        a_minus = np.asarray(cfg.get("a_minus", []), float).reshape(orders.q, m, m)
        b = np.asarray(cfg.get("b", []), float).reshape(orders.p, m, m)
        delta = np.asarray(cfg["delta"], float).reshape(m)
        rho = np.asarray(cfg.get("rho", []), float).reshape(m * (m - 1) // 2)
        mode_key = cfg.get("delta_mode", "known")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad spec config: {exc}") from exc
    r = np.eye(m)
    for val, (i, j) in zip(rho, _strict_lower_indices(m)):
        r[i, j] = r[j, i] = val
    if mode_key == "known":
        mode: EstimationMode = DeltaKnown(delta)
    elif mode_key == "estimate":
        mode = DeltaEstimated()
    else:
        raise ParseError(f"delta_mode must be 'known' or 'estimate', got {mode_key!r}")
    return ModelSpec(orders, omega, a_plus, a_minus, b, r, delta), mode


def save_spec(spec: ModelSpec, mode: EstimationMode, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_config(spec, mode), fh, indent=2)
        fh.write("\n")


def load_spec(path) -> tuple[ModelSpec, EstimationMode]:
    from .errors import ParseError

    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse spec config {path}: {exc}") from exc
    return spec_from_config(cfg)
