"""Dense complex matrix kernel.

Matrices are plain ``numpy`` complex arrays of shape ``(n, n)``.  Diagonal
positive weights are carried as 1-D arrays of their diagonal values; the
helpers below accept either that form or a full diagonal matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class NumericFailure(ArithmeticError):
    """A matrix decomposition failed to converge."""


class Side(str, enum.Enum):
    PLAIN = "plain"
    LEFT = "left"
    RIGHT = "right"


def parse_p(p) -> float:
    """Accept 1, 2.5, "inf", "∞" or ``math.inf``; reject p < 1."""
    if isinstance(p, str):
        s = p.strip().lower()
        p = math.inf if s in {"inf", "infinity", "∞", "oo"} else float(s)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"Schatten exponent must lie in [1, inf], got {p}")
    return p


@dataclass(frozen=True)
class NormSpec:
    """Exponent and weighting side of a (possibly weighted) Schatten norm."""

    p: float = 1.0
    side: Side = Side.LEFT

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))
        object.__setattr__(self, "side", Side(self.side))

    @property
    def conjugate(self) -> float:
        if self.p == 1:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1)

    def label(self) -> str:
        p = "inf" if math.isinf(self.p) else format_p(self.p)
        return f"p={p},{self.side.value}"


def format_p(p: float) -> str:
    if math.isinf(p):
        return "inf"
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


def diag_values(w) -> np.ndarray:
    """Strictly positive diagonal values from a vector or a diagonal matrix."""
    v = np.asarray(w)
    if v.ndim == 2:
        v = np.diagonal(v)
    v = np.asarray(v.real if np.iscomplexobj(v) else v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("weight must be a non-empty vector of diagonal values")
    if not np.all(v > 0):
        raise ValueError("weight values must be strictly positive")
    return v


def kron(a, b) -> np.ndarray:
    """Kronecker product; the first factor carries the most significant index."""
    return np.kron(np.asarray(a), np.asarray(b))


def singular_values(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    try:
        s = np.linalg.svd(x, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"singular value decomposition did not converge: {exc}") from exc
    return s


def _norm_from_sv(s: np.ndarray, p: float) -> np.ndarray:
    if math.isinf(p):
        return s.max(axis=-1)
    if p == 1:
        return s.sum(axis=-1)
    top = s.max(axis=-1, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    return safe[..., 0] * ((s / safe) ** p).sum(axis=-1) ** (1.0 / p)


def schatten_norm(x, p=1.0) -> float:
    """(sum of sigma_i^p)^(1/p); the operator norm for p = inf.

    Also accepts a stack of matrices (shape ``(..., n, n)``) and returns an
    array of norms.
    """
    p = parse_p(p)
    s = singular_values(x)
    out = _norm_from_sv(s, p)
    return float(out) if np.ndim(out) == 0 else out


def diag_power(w, z) -> np.ndarray:
    """``diag(w)**z`` computed as ``exp(z * log w)``."""
    v = diag_values(w)
    return np.diag(np.exp(complex(z) * np.log(v)))


def _weight_power(w, p: float) -> np.ndarray:
    v = diag_values(w)
    if math.isinf(p):
        return np.ones_like(v)
    return v ** (1.0 / p)


def weighted_form(x, w, spec: NormSpec) -> np.ndarray:
    """The matrix whose plain Schatten-p norm is the weighted norm of ``x``."""
    x = np.asarray(x, dtype=complex)
    if spec.side is Side.PLAIN:
        return x
    d = _weight_power(w, spec.p)
    if x.shape[-1] != d.size:
        raise ValueError(f"dimension mismatch: matrix {x.shape[-1]} vs weight {d.size}")
    if spec.side is Side.LEFT:
        return x * d[None, :]
    return d[:, None] * x


def unweighted_form(y, w, spec: NormSpec) -> np.ndarray:
    """Inverse of :func:`weighted_form`."""
    y = np.asarray(y, dtype=complex)
    if spec.side is Side.PLAIN:
        return y
    d = _weight_power(w, spec.p)
    if spec.side is Side.LEFT:
        return y / d[None, :]
    return y / d[:, None]


def weighted_norm(x, w, spec: NormSpec) -> float:
    """Left: ``||x w^(1/p)||_p``; right: ``||w^(1/p) x||_p``; plain: ``||x||_p``."""
    x = as_matrix(x)
    if spec.side is not Side.PLAIN and x.shape[0] != diag_values(w).size:
        raise ValueError(f"dimension mismatch: matrix {x.shape[0]} vs weight {diag_values(w).size}")
    return schatten_norm(weighted_form(x, w, spec), spec.p)


def _parse_float(v) -> float:
    if isinstance(v, str):
        s = v.strip()
        if "0x" in s.lower() or s.lower().startswith(("-0x", "+0x")):
            return float.fromhex(s)
        return float(s)
    return float(v)


def matrix_to_json(x) -> dict:
    x = as_matrix(x)
    return {
        "dim": int(x.shape[0]),
        "data": [[float(z.real), float(z.imag)] for z in x.ravel()],
    }


def matrix_from_json(obj) -> np.ndarray:
    n = int(obj["dim"])
    data = obj["data"]
    if n < 1 or len(data) != n * n:
        raise ValueError(f"matrix JSON needs dim >= 1 and dim^2 entries, got dim={n}, {len(data)} entries")
    vals = np.array([complex(_parse_float(re), _parse_float(im)) for re, im in data], dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ValueError("matrix JSON contains non-finite entries")
    return vals.reshape(n, n)
