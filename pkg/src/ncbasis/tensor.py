"""Finite tensor products: product states, decomposition projections and shell-ordered product bases."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .algebra import Weight, partial_trace_right
from .haar import HaarSystem, haar_analyze, shell_index, shell_positions
from .matcore import NormSpec, as_matrix, diag_values
from .normlab import (
    EstimationStrategy,
    NormReport,
    PartialSumMap,
    certify_maps,
    default_schedule,
    theoretical_bound,
)

PRODUCT_DIM_CAP = 64


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, Weight) else diag_values(w)


@dataclass(frozen=True, eq=False)
class ProductAlgebra:
    """``M_{nA} ⊗ M_{nB}`` with the product of two faithful diagonal states."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", _values(self.left))
        object.__setattr__(self, "right", _values(self.right))
        for v in (self.left, self.right):
            if abs(v.sum() - 1) > 1e-12:
                raise ValueError("factor states must have unit trace")

    @property
    def density(self) -> np.ndarray:
        return np.kron(self.left, self.right)

    @property
    def dims(self) -> tuple[int, int]:
        return self.left.size, self.right.size


def expect_left_factor(pa: ProductAlgebra, z) -> np.ndarray:
    """Weighted partial trace over the right factor (reduced form)."""
    z = as_matrix(z)
    if z.shape[0] != pa.left.size * pa.right.size:
        raise ValueError(f"dimension mismatch: {z.shape[0]} vs {pa.left.size}*{pa.right.size}")
    return partial_trace_right(z, pa.right)


@dataclass(frozen=True, eq=False)
class DecompositionSystem:
    """A right-factor system orthonormal for ``phi(y_j^* y_k)``, with its projections ``D_j``."""

    pa: ProductAlgebra
    elements: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        y = np.array(self.elements, dtype=complex)
        nb = self.pa.right.size
        if y.ndim != 3 or y.shape[1:] != (nb, nb):
            raise ValueError(f"elements must be {nb}x{nb} matrices")
        object.__setattr__(self, "elements", y)
        gram = np.einsum("jbc,kbc,c->jk", y.conj(), y, self.pa.right)
        res = float(np.max(np.abs(gram - np.eye(len(y)))))
        if res > self.tol:
            raise ValueError(f"system is not orthonormal for the right state (residual {res:.3e})")

    def __len__(self) -> int:
        return len(self.elements)


def decomposition_project(ds: DecompositionSystem, j: int, z) -> np.ndarray:
    """``D_j z = (1 ⊗ y_j) E((1 ⊗ y_j)^* z)`` with ``E`` the left-factor expectation."""
    if not 0 <= j < len(ds):
        raise IndexError(f"projection index {j} out of range [0, {len(ds)})")
    na = ds.pa.left.size
    lift = np.kron(np.eye(na), ds.elements[j])
    reduced = expect_left_factor(ds.pa, lift.conj().T @ as_matrix(z))
    return lift @ np.kron(reduced, np.eye(ds.pa.right.size))


def alg_tensor_projection(ds: DecompositionSystem, j: int, terms: Sequence[tuple]) -> np.ndarray:
    """``D_j`` on ``sum_k a_k ⊗ b_k`` evaluated term by term from the expansions of ``b_k``.

    The expansion coefficients are found by a least-squares solve against the
    system, not through the state.
    """
    y = ds.elements
    cols = y.reshape(len(y), -1).T
    out = 0
    for a, b in terms:
        coef, *_ = np.linalg.lstsq(cols, np.asarray(b, dtype=complex).ravel(), rcond=None)
        out = out + coef[j] * np.kron(a, y[j])
    return out


@dataclass(frozen=True, eq=False)
class FactorSystem:
    """A spanning system of one tensor factor with its coefficient functional and basis bound."""

    label: str
    elements: np.ndarray
    weight: np.ndarray
    analyze: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    bound: Callable[[NormSpec], float] = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.weight.size


def haar_factor(sys: HaarSystem) -> FactorSystem:
    return FactorSystem(
        f"haar(alpha={sys.alpha!r},level={sys.level},side={sys.side.value})",
        np.asarray(sys.elements), sys.weight.values,
        lambda x: haar_analyze(sys, x),
        lambda spec: float(theoretical_bound(sys.quads, spec)[-1]),
        {"kind": "haar", "system": sys.to_json()},
    )


def unit_factor(n: int) -> FactorSystem:
    """Shell-ordered matrix units of ``M_n`` scaled by ``sqrt(n)``, orthonormal for the normalized trace."""
    pos = shell_positions(n)
    units = np.zeros((n * n, n, n), dtype=complex)
    for j, (row, col) in enumerate(pos):
        units[j, row, col] = math.sqrt(n)
    rows = np.array([p[0] for p in pos])
    cols = np.array([p[1] for p in pos])

    def analyze(x):
        x = np.asarray(x, dtype=complex)
        return x[..., rows, cols] / math.sqrt(n)

    return FactorSystem(f"units(n={n})", units, np.full(n, 1.0 / n), analyze, lambda spec: 2.0,
                        {"kind": "units", "units": n, "state": "normalized-trace", "scale": math.sqrt(n)})


def trivial_factor() -> FactorSystem:
    return FactorSystem("trivial", np.ones((1, 1, 1), dtype=complex), np.ones(1),
                        lambda x: np.asarray(x, dtype=complex)[..., 0, :1], lambda spec: 1.0,
                        {"kind": "trivial"})


def shell_order(len_a: int, len_b: int) -> list[tuple[int, int]]:
    """0-based pairs ``(j, k)`` sorted by the shell index of ``(j+1, k+1)``."""
    pairs = [(j, k) for j in range(len_a) for k in range(len_b)]
    return sorted(pairs, key=lambda jk: shell_index(jk[0] + 1, jk[1] + 1))


def product_basis(xs, ys) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Products ``x_j ⊗ y_k`` in shell order, and the 0-based pair of each position."""
    xs = np.asarray(xs, dtype=complex)
    ys = np.asarray(ys, dtype=complex)
    order = shell_order(len(xs), len(ys))
    z = np.array([np.kron(xs[j], ys[k]) for j, k in order])
    return z, order


@dataclass(frozen=True, eq=False)
class ProductSystem:
    a: FactorSystem
    b: FactorSystem

    def __post_init__(self):
        n = self.a.dim * self.b.dim
        if n > PRODUCT_DIM_CAP:
            raise ValueError(f"product dimension {n} exceeds the cap {PRODUCT_DIM_CAP}")

    @property
    def dim(self) -> int:
        return self.a.dim * self.b.dim

    @property
    def weight(self) -> np.ndarray:
        return np.kron(self.a.weight, self.b.weight)

    @property
    def order(self) -> list[tuple[int, int]]:
        return shell_order(len(self.a), len(self.b))

    def __len__(self) -> int:
        return len(self.a) * len(self.b)

    def coefficient_grid(self, z) -> np.ndarray:
        """``C[..., j, k]`` with ``z = sum C[j, k] x_j ⊗ y_k``; accepts stacks."""
        z = np.asarray(z, dtype=complex)
        na, nb = self.a.dim, self.b.dim
        lead = z.shape[:-2]
        blocks = z.reshape(lead + (na, nb, na, nb))
        blocks = np.moveaxis(blocks, -3, -2)  # (..., na, na, nb, nb)
        blocks = np.moveaxis(blocks, (-2, -1), (-4, -3))  # (..., nb, nb, na, na)
        ca = self.a.analyze(blocks.reshape((-1, na, na))).reshape(lead + (nb * nb, len(self.a)))
        eb = np.eye(nb * nb, dtype=complex).reshape(nb * nb, nb, nb)
        cb = self.b.analyze(eb)
        return np.einsum("...sj,sk->...jk", ca, cb)

    def synthesize_grid(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        na, nb = self.a.dim, self.b.dim
        yk = np.einsum("...jk,kbd->...jbd", c, self.b.elements)
        z = np.einsum("jac,...jbd->...abcd", self.a.elements, yk)
        return z.reshape(c.shape[:-2] + (na * nb, na * nb))

    def rank_grid(self) -> np.ndarray:
        rank = np.zeros((len(self.a), len(self.b)), dtype=int)
        for s, (j, k) in enumerate(self.order):
            rank[j, k] = s
        return rank

    def partial_sum(self, m: int, z) -> np.ndarray:
        if not 0 <= m <= len(self):
            raise ValueError(f"m must lie in [0, {len(self)}], got {m}")
        c = self.coefficient_grid(z)
        return self.synthesize_grid(c * (self.rank_grid() < m))

    def factor_partial_sum(self, ma: int | None, mb: int | None, z) -> np.ndarray:
        """``P_ma Q_mb``: keep first-factor indices ``< ma`` and second-factor indices ``< mb``."""
        c = self.coefficient_grid(z)
        keep = np.ones(c.shape[-2:], dtype=bool)
        if ma is not None:
            keep[ma:, :] = False
        if mb is not None:
            keep[:, mb:] = False
        return self.synthesize_grid(c * keep)

    def to_json(self) -> dict:
        def side(f):
            if f.meta["kind"] == "haar":
                return f.meta["system"]
            if f.meta["kind"] == "units":
                return {"units": f.meta["units"], "state": "normalized-trace"}
            return {"trivial": True}
        return {"left": side(self.a), "right": side(self.b), "order": "shell"}

    @classmethod
    def from_json(cls, obj) -> "ProductSystem":
        def side(o):
            if "units" in o:
                return unit_factor(int(o["units"]))
            if o.get("trivial"):
                return trivial_factor()
            return haar_factor(HaarSystem.from_json(o))
        if obj.get("order", "shell") != "shell":
            raise ValueError("only the shell order is supported")
        return cls(side(obj["left"]), side(obj["right"]))


def product_map(ps: ProductSystem, m: int, spec: NormSpec) -> PartialSumMap:
    fixed = []
    if m >= 1:
        j, k = ps.order[0]
        fixed = [np.kron(ps.a.elements[j], ps.b.elements[k])]
    return PartialSumMap(lambda z: ps.partial_sum(m, z), ps.dim, ps.weight, spec,
                         fixed=fixed, kind="product", m=m)


def product_schedule(length: int) -> list[int]:
    ms = set(default_schedule(length))
    k = 1
    while k * k <= length:
        ms.add(k * k)
        if k * k + k <= length:
            ms.add(k * k + k)
        k += 1
    return sorted(ms)


def log_ratio_record(alpha_a: float, alpha_b: float) -> dict:
    """Record ``log lambda_A / log lambda_B`` and whether it looks rational.

    Irrationality is a property of the infinite factor with no finite-level
    consequence; computation proceeds either way.
    """
    la, lb = alpha_a / (1 - alpha_a), alpha_b / (1 - alpha_b)
    if la == 1 or lb == 1:
        return {"log_ratio": None, "rational_suspected": None}
    ratio = math.log(la) / math.log(lb)
    approx = Fraction(ratio).limit_denominator(1000)
    return {"log_ratio": ratio, "rational_suspected": abs(ratio - float(approx)) < 1e-12}


def product_partial_sum_certify(a: FactorSystem, b: FactorSystem, spec: NormSpec = NormSpec(),
                                strategy: EstimationStrategy | None = None,
                                schedule: Sequence[int] | None = None) -> NormReport:
    """Shell-ordered product partial sums against the derived bound ``3 c_A c_B``."""
    strategy = strategy or EstimationStrategy()
    ps = ProductSystem(a, b)
    ca, cb = a.bound(spec), b.bound(spec)
    bound = 3 * ca * cb
    schedule = product_schedule(len(ps)) if schedule is None else list(schedule)
    rows = certify_maps([(m, product_map(ps, m, spec)) for m in schedule], bound, strategy)
    meta = {"strategy": asdict(strategy), "left": a.label, "right": b.label,
            "factor_bounds": [ca, cb], "bound_formula": "3*c_A*c_B"}
    if a.meta.get("kind") == "haar" and b.meta.get("kind") == "haar":
        meta.update(log_ratio_record(a.meta["system"]["alpha"], b.meta["system"]["alpha"]))
    for f, tag in ((a, "left"), (b, "right")):
        if f.meta.get("kind") == "units":
            meta[f"{tag}_unit_scale"] = f.meta["scale"]
    return NormReport("product", f"{a.label}x{b.label}", f"{a.dim}x{b.dim}", spec, "derived", rows, meta)


def lp_embed(x, p, alpha=0.5) -> np.ndarray:
    """``x ⊗ A_1^{1/p}``; isometric for the plain Schatten-p norm since ``Tr A_1 = 1``."""
    p = float(p) if not isinstance(p, str) else float(p)
    if math.isinf(p):
        raise ValueError("the Lp embedding is only defined for finite p")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    w = alpha.one().values if isinstance(alpha, Weight) else Weight(alpha, 1).values
    return np.kron(as_matrix(x), np.diag(w ** (1 / p)))
