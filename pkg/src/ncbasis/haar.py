"""Rademacher quadruples, shell-ordered matrix units and the inductive Haar system.

Element indices are 0-based throughout; :func:`shell_index` keeps the
1-based grid convention of the shell enumeration and the off-by-one is
confined to :func:`shell_positions`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import Weight, check_alpha, parse_alpha
from .matcore import Side, matrix_from_json, matrix_to_json

GRAM_TOL = 1e-12


class UniformBoundWarning(UserWarning):
    """A quadruple's r_0 has operator norm above 1."""


def _side(side) -> Side:
    s = Side(side)
    if s is Side.PLAIN:
        raise ValueError("Haar systems are either left or right")
    return s


def gram_matrix(r: np.ndarray, alpha: float, side) -> np.ndarray:
    """``rho_1(r_j^* r_k)`` (left) or ``rho_1(r_j r_k^*)`` (right)."""
    a = np.array([alpha, 1 - alpha])
    r = np.asarray(r, dtype=complex)
    if _side(side) is Side.LEFT:
        # Tr(r_j^* r_k A) = sum_{b,c} conj(r_j[b,c]) r_k[b,c] a[c]
        return np.einsum("jbc,kbc,c->jk", r.conj(), r, a)
    return np.einsum("jbc,kbc,b->jk", r, r.conj(), a)


@dataclass(frozen=True, eq=False)
class RademacherQuad:
    """Four 2x2 matrices orthonormal for the one-qubit state."""

    side: Side
    r: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "side", _side(self.side))
        check_alpha(self.alpha)
        object.__setattr__(self, "alpha", float(self.alpha))
        r = np.array(self.r, dtype=complex)
        if r.shape != (4, 2, 2):
            raise ValueError(f"a quadruple needs four 2x2 matrices, got shape {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        res = self.gram_residual()
        if not res <= GRAM_TOL:
            raise ValueError(f"quadruple is not orthonormal: Gram residual {res:.3e} > {GRAM_TOL}")
        if np.linalg.norm(r[0], 2) > 1 + 1e-12:
            warnings.warn(
                "r_0 has operator norm > 1; the basis-constant bound is then not uniform in the level",
                UniformBoundWarning,
                stacklevel=3,
            )

    def gram(self) -> np.ndarray:
        return gram_matrix(self.r, self.alpha, self.side)

    def gram_residual(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(4))))

    def adjoint(self) -> "RademacherQuad":
        """The quadruple of adjoints; it satisfies the opposite-side Gram condition."""
        other = Side.RIGHT if self.side is Side.LEFT else Side.LEFT
        return RademacherQuad(other, np.conj(np.transpose(self.r, (0, 2, 1))), self.alpha)

    def to_json(self) -> list:
        return [matrix_to_json(m) for m in self.r]


def standard_quad(alpha, side="left") -> RademacherQuad:
    """The diagonal/flip quadruple with ``lambda = alpha / (1 - alpha)``."""
    alpha = parse_alpha(alpha)
    check_alpha(alpha)
    if isinstance(alpha, Fraction):
        lam = alpha / (1 - alpha)
        s = math.sqrt(lam.numerator) / math.sqrt(lam.denominator)
    else:
        s = math.sqrt(alpha / (1 - alpha))
    r0 = np.eye(2)
    r1 = np.diag([1 / s, -s])
    r2 = np.array([[0, 1], [1, 0]])
    r3 = np.array([[0, -s], [1 / s, 0]])
    if _side(side) is Side.RIGHT:
        r3 = r3.conj().T
    return RademacherQuad(side, np.array([r0, r1, r2, r3], dtype=complex), float(alpha))


def random_quad(alpha, side="left", rng=None, identity_first=False) -> RademacherQuad:
    """A random orthonormal quadruple (Gram-Schmidt in the state inner product)."""
    rng = np.random.default_rng(rng)
    alpha = float(alpha)
    half = np.sqrt(np.array([alpha, 1 - alpha]))
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    side = _side(side)
    if identity_first:
        # vec(1 * A^{1/2}) is a unit vector; put it first.
        g[:, 0] = np.diag(half).ravel()
    q, rr = np.linalg.qr(g)
    q = q * (np.diag(rr) / np.abs(np.diag(rr)))[None, :]
    y = q.T.reshape(4, 2, 2)
    if side is Side.LEFT:
        r = y / half[None, None, :]
    else:
        r = y / half[None, :, None]
    if identity_first:
        r[0] = np.eye(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UniformBoundWarning)
        return RademacherQuad(side, r, alpha)


def shell_index(j: int, k: int) -> int:
    """1-based position of grid cell ``(j, k)`` in the square-shell order."""
    if j < 1 or k < 1:
        raise ValueError("shell indices are 1-based")
    if j <= k:
        return (k - 1) ** 2 + j
    return j * j - k + 1


def shell_pair(s: int) -> tuple[int, int]:
    """Inverse of :func:`shell_index`."""
    if s < 1:
        raise ValueError("shell positions are 1-based")
    n = math.isqrt(s - 1) + 1  # shell number: (n-1)^2 < s <= n^2
    offset = s - (n - 1) ** 2
    if offset <= n:
        return offset, n
    return n, n * n - s + 1


def shell_positions(n: int) -> list[tuple[int, int]]:
    """0-based ``(row, col)`` of an ``n x n`` grid in shell order."""
    return [tuple(v - 1 for v in shell_pair(s)) for s in range(1, n * n + 1)]


def matrix_units_shell(level: int) -> np.ndarray:
    """The ``4**level`` matrix units of size ``2**level`` in shell order."""
    n = 2**level
    units = np.zeros((n * n, n, n), dtype=complex)
    for j, (row, col) in enumerate(shell_positions(n)):
        units[j, row, col] = 1
    return units


@dataclass(frozen=True, eq=False)
class HaarSystem:
    side: Side
    alpha: float
    level: int
    quads: tuple[RademacherQuad, ...]
    elements: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2**self.level

    @property
    def weight(self) -> Weight:
        return Weight(self.alpha, self.level)

    def __len__(self) -> int:
        return len(self.elements)

    def to_json(self) -> dict:
        return {
            "side": self.side.value,
            "alpha": self.alpha,
            "level": self.level,
            "quads": [q.to_json() for q in self.quads],
        }

    @classmethod
    def from_json(cls, obj) -> "HaarSystem":
        side = obj["side"]
        alpha = float(parse_alpha(obj["alpha"]))
        quads = [
            RademacherQuad(side, np.array([matrix_from_json(m) for m in q]), alpha)
            for q in obj["quads"]
        ]
        return haar_build(alpha, int(obj["level"]), quads, side)


def haar_build(alpha, level: int, quads=None, side="left") -> HaarSystem:
    """Build the level-``level`` Haar system.

    ``quads`` may be ``None`` (standard quadruple), a single quadruple used
    at every step, or one quadruple per level.
    """
    side = _side(side)
    if level < 1:
        raise ValueError("level must be >= 1")
    alpha = parse_alpha(alpha)
    check_alpha(alpha)
    if quads is None:
        quads = standard_quad(alpha, side)
    if isinstance(quads, RademacherQuad):
        quads = [quads] * level
    quads = tuple(quads)
    if len(quads) != level:
        raise ValueError(f"need {level} quadruples, got {len(quads)}")
    for q in quads:
        if q.side is not side:
            raise ValueError(f"quadruple side {q.side.value} does not match system side {side.value}")
        if not math.isclose(q.alpha, float(alpha), rel_tol=0, abs_tol=1e-15):
            raise ValueError(f"quadruple alpha {q.alpha} does not match system alpha {float(alpha)}")

    h = np.array(quads[0].r)
    for step in range(1, level):
        r = quads[step].r
        units = matrix_units_shell(step)
        low = np.einsum("kab,cd->kacbd", h, r[0])
        high = np.einsum("kab,qcd->qkacbd", units, r[1:])
        n = 2 ** (step + 1)
        h = np.concatenate([low.reshape(-1, n, n), high.reshape(-1, n, n)])
    h.setflags(write=False)
    return HaarSystem(side, float(alpha), level, quads, h)


def _reduce(x4: np.ndarray, r: np.ndarray, a1: np.ndarray, side: Side) -> np.ndarray:
    # x4 has shape (B, m, 2, m, 2); returns the level-reduced block for one r_q
    if side is Side.LEFT:
        return np.einsum("ba,Xibja,a->Xij", r.conj(), x4, a1)
    return np.einsum("ab,Xiajb,a->Xij", r.conj(), x4, a1)


def haar_analyze(sys: HaarSystem, x) -> np.ndarray:
    """Coefficients ``c`` with ``x = sum_j c_j h_j``.

    Accepts one matrix or a stack ``(B, n, n)``.  At each level the block for
    ``r_q`` is extracted with the level expectation applied to
    ``(1 ⊗ r_q)^* x`` (left) or ``x (1 ⊗ r_q)^*`` (right); the ``q = 0``
    block recurses one level down.
    """
    x = np.asarray(x, dtype=complex)
    single = x.ndim == 2
    if single:
        x = x[None]
    n = sys.dim
    if x.shape[1:] != (n, n):
        raise ValueError(f"dimension mismatch: expected {n}x{n}, got {x.shape[1:]}")
    a1 = np.array([sys.alpha, 1 - sys.alpha])
    coeffs = np.zeros((x.shape[0], 4**sys.level), dtype=complex)
    y = x
    for lvl in range(sys.level, 0, -1):
        m = 2 ** (lvl - 1)
        r = sys.quads[lvl - 1].r
        x4 = y.reshape(-1, m, 2, m, 2)
        pos = shell_positions(m)
        rows = np.array([p[0] for p in pos])
        cols = np.array([p[1] for p in pos])
        block = m * m
        for q in (1, 2, 3):
            yq = _reduce(x4, r[q], a1, sys.side)
            coeffs[:, q * block:(q + 1) * block] = yq[:, rows, cols]
        y = _reduce(x4, r[0], a1, sys.side)
    coeffs[:, 0] = y[:, 0, 0]
    return coeffs[0] if single else coeffs


def haar_synthesize(sys: HaarSystem, coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    if c.shape[-1] != len(sys.elements):
        raise ValueError(f"need {len(sys.elements)} coefficients, got {c.shape[-1]}")
    return np.tensordot(c, sys.elements, axes=([-1], [0]))


def diagonal_selection(level: int) -> np.ndarray:
    """Boolean mask of Haar indices whose diagonal part is non-zero.

    For the standard quadruple: ``j = 0``, or ``4**mu <= j < 2 * 4**mu`` with
    the matrix unit ``e_{j - 4**mu}`` (level ``mu``) on the diagonal.
    """
    mask = np.zeros(4**level, dtype=bool)
    mask[0] = True
    for mu in range(level):
        for k, (row, col) in enumerate(shell_positions(2**mu)):
            if row == col:
                mask[4**mu + k] = True
    return mask


@dataclass(frozen=True)
class MeasureTable:
    alpha: float
    level: int
    masses: np.ndarray

    def rows(self):
        n = 2**self.level
        for k, m in enumerate(self.masses):
            yield k, k / n, float(m)

    def to_csv(self) -> str:
        lines = ["k,left_endpoint,mass"]
        lines += [f"{k},{x!r},{m!r}" for k, x, m in self.rows()]
        return "\n".join(lines) + "\n"


def distorted_measure(alpha, level: int) -> MeasureTable:
    """Masses of the dyadic intervals of rank ``level`` under the Bernoulli measure.

    Each binary digit 0 of ``k`` contributes ``alpha`` and each digit 1
    contributes ``1 - alpha``.
    """
    alpha = parse_alpha(alpha)
    check_alpha(alpha)
    one = Fraction(1) if isinstance(alpha, Fraction) else 1.0
    masses = []
    for k in range(2**level):
        m = one
        for s in range(level):
            eps = (k >> s) & 1
            m *= (1 - eps) * alpha + eps * (1 - alpha)
        masses.append(float(m))
    return MeasureTable(float(alpha), level, np.array(masses))


@dataclass(frozen=True)
class CommutativeHaar:
    matrices: np.ndarray  # (2**level, n, n) diagonal matrices at the top level
    steps: np.ndarray  # (2**level, 2**level) values on the dyadic intervals
    measure: MeasureTable


def commutative_haar(alpha, level: int) -> CommutativeHaar:
    """The diagonal Haar system: ``chi_0 = 1``, ``chi_1 = r_1``, ``chi_{2^mu+k} = eps_k ⊗ r_1``.

    Every element is embedded at ``level``; diagonal index ``k`` corresponds to
    the interval ``[k/2^level, (k+1)/2^level)``.
    """
    r1 = standard_quad(alpha).r[1]
    n = 2**level
    out = [np.eye(n, dtype=complex)]
    for mu in range(level):
        for k in range(2**mu):
            eps = np.zeros((2**mu, 2**mu), dtype=complex)
            eps[k, k] = 1
            out.append(np.kron(np.kron(eps, r1), np.eye(2 ** (level - mu - 1))))
    mats = np.array(out)
    steps = np.real(np.diagonal(mats, axis1=1, axis2=2)).copy()
    return CommutativeHaar(mats, steps, distorted_measure(alpha, level))


def classical_haar(level: int) -> np.ndarray:
    """Classical (unnormalised, values 0/±1) Haar functions on ``2**level`` dyadic intervals."""
    n = 2**level
    t = (np.arange(n) + 0.5) / n
    out = [np.ones(n)]
    for mu in range(level):
        for k in range(2**mu):
            lo, mid, hi = k / 2**mu, (k + 0.5) / 2**mu, (k + 1) / 2**mu
            out.append(np.where((t >= lo) & (t < mid), 1.0, 0.0) - np.where((t >= mid) & (t < hi), 1.0, 0.0))
    return np.array(out)


def quads_from_sequence(alpha, side, quads: Sequence[np.ndarray]) -> list[RademacherQuad]:
    return [RademacherQuad(side, np.asarray(q), alpha) for q in quads]
