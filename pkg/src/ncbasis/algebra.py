"""Product states on 2^nu x 2^nu matrices, the level tower and its expectations."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .matcore import as_matrix, diag_values


def parse_alpha(value) -> float | Fraction:
    """Parse ``0.25``, ``"0.25"`` or a fraction literal such as ``"1/3"``.

    Fraction literals are kept exact so that density products do not pick up
    the rounding of ``1/3``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        s = value.strip()
        if "/" in s:
            return Fraction(s)
        return float(s)
    return float(value)


def check_alpha(alpha) -> None:
    if not 0 < alpha <= Fraction(1, 2):
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")


def _kron_power(pair, level):
    vals = [pair[0] ** 0]
    for _ in range(level):
        vals = [v * a for v in vals for a in pair]
    return vals


@dataclass(frozen=True)
class Weight:
    """The state with density ``diag(alpha, 1-alpha)`` tensored ``level`` times.

    Mirror symmetry: ``alpha`` and ``1 - alpha`` give unitarily equivalent
    states (conjugate by the flip in every factor), so only ``(0, 1/2]`` is
    admitted.
    """

    alpha: float | Fraction
    level: int = 1
    exact: Fraction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        alpha = parse_alpha(self.alpha)
        check_alpha(alpha)
        if int(self.level) != self.level or self.level < 1:
            raise ValueError(f"level must be a positive integer, got {self.level}")
        object.__setattr__(self, "level", int(self.level))
        if isinstance(alpha, Fraction):
            object.__setattr__(self, "exact", alpha)
            alpha = float(alpha)
        object.__setattr__(self, "alpha", float(alpha))

    @property
    def lam(self) -> float:
        if self.exact is not None:
            return float(self.exact / (1 - self.exact))
        return self.alpha / (1 - self.alpha)

    @property
    def dim(self) -> int:
        return 2**self.level

    @cached_property
    def values(self) -> np.ndarray:
        """Diagonal of the density, built as an iterated Kronecker product."""
        if self.exact is not None:
            a = self.exact
            return np.array([float(v) for v in _kron_power((a, 1 - a), self.level)])
        a = self.alpha
        return np.array(_kron_power((a, 1.0 - a), self.level), dtype=float)

    @property
    def density(self) -> np.ndarray:
        return np.diag(self.values).astype(complex)

    def one(self) -> "Weight":
        """The same alpha at level 1."""
        return Weight(self.exact if self.exact is not None else self.alpha, 1)

    def at_level(self, level: int) -> "Weight":
        return Weight(self.exact if self.exact is not None else self.alpha, level)

    def to_json(self) -> dict:
        alpha = f"{self.exact.numerator}/{self.exact.denominator}" if self.exact is not None else self.alpha
        return {"alpha": alpha, "level": self.level}

    @classmethod
    def from_json(cls, obj) -> "Weight":
        return cls(parse_alpha(obj["alpha"]), int(obj["level"]))


def _values_of(w) -> np.ndarray:
    return w.values if isinstance(w, Weight) else diag_values(w)


def state(w, x) -> complex:
    """``Tr(x A)`` for the density ``A`` of ``w``."""
    x = as_matrix(x)
    a = _values_of(w)
    if x.shape[0] != a.size:
        raise ValueError(f"dimension mismatch: matrix {x.shape[0]} vs state {a.size}")
    return complex(np.dot(np.diagonal(x), a))


def embed(x) -> np.ndarray:
    """``x -> x ⊗ 1_2``."""
    x = np.asarray(x, dtype=complex)
    return np.kron(x, np.eye(2))


@dataclass(frozen=True)
class ModularContext:
    weight: Weight
    t: float = 0.0


def _phase(a: np.ndarray, t: float) -> np.ndarray:
    logs = np.log(a)
    return np.exp(1j * t * (logs[:, None] - logs[None, :]))


def modular_flow(ctx: ModularContext, x) -> np.ndarray:
    """``A^{it} x A^{-it}``."""
    x = as_matrix(x)
    a = _values_of(ctx.weight)
    if x.shape[0] != a.size:
        raise ValueError(f"dimension mismatch: matrix {x.shape[0]} vs state {a.size}")
    return x * _phase(a, float(ctx.t))


def kms_function(w, x, y, z) -> complex:
    """``Tr(A^{1+iz} x A^{-iz} y)`` for complex ``z``."""
    x = as_matrix(x)
    y = as_matrix(y)
    a = _values_of(w)
    if not (x.shape == y.shape and x.shape[0] == a.size):
        raise ValueError("dimension mismatch in KMS function")
    z = complex(z)
    left = np.exp((1 + 1j * z) * np.log(a))
    right = np.exp(-1j * z * np.log(a))
    return complex(np.sum(left[:, None] * x * right[None, :] * y.T))


def partial_trace_right(z, right_values) -> np.ndarray:
    """Weighted partial trace ``Tr_2(z (1 ⊗ diag(right_values)))``."""
    z = as_matrix(z)
    b = np.asarray(right_values, dtype=float)
    nb = b.size
    if z.shape[0] % nb:
        raise ValueError(f"dimension {z.shape[0]} not divisible by right factor {nb}")
    na = z.shape[0] // nb
    blocks = z.reshape(na, nb, na, nb)
    return np.einsum("iaja,a->ij", blocks, b)


def expect_level(w, x) -> np.ndarray:
    """Reduced level expectation: the weighted partial trace over the last qubit.

    ``w`` may be a :class:`Weight` (any level; only alpha is used) or the
    two diagonal values of the one-qubit density.  Composing with
    :func:`embed` gives the projection onto the embedded subalgebra.
    """
    x = as_matrix(x)
    if x.shape[0] % 2:
        raise ValueError(f"dimension {x.shape[0]} is not divisible by 2")
    if isinstance(w, Weight):
        a1 = w.one().values
    else:
        a1 = diag_values(w)
    return partial_trace_right(x, a1)


def expect_subalgebra(w, x) -> np.ndarray:
    return embed(expect_level(w, x))


def expect_diagonal(x) -> np.ndarray:
    x = as_matrix(x)
    return np.diag(np.diagonal(x))
