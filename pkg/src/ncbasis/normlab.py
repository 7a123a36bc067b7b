"""Partial-sum projections and certified lower bounds on their norms.

All estimators work in the "flattened" picture: a weighted Schatten norm of
``x`` is the plain Schatten-p norm of ``y = x A^{1/p}`` (left) or
``y = A^{1/p} x`` (right), so a map ``T`` is estimated through
``T~(y) = W(T(W^{-1}(y)))`` acting on plain Schatten classes.  Every number
reported is a ratio actually attained by an explicit input, hence a lower
bound for the operator norm.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import Weight
from .haar import HaarSystem, RademacherQuad, haar_analyze, haar_synthesize, matrix_units_shell, shell_positions
from .matcore import NormSpec, NumericFailure, Side, format_p, schatten_norm, unweighted_form, weighted_form

DEFAULT_SEED = 0xC0FFEE
METHODS = ("sampling", "polar_ascent", "grid_oracle")
_CHUNK = 500


def shell_mask(n: int, m: int) -> np.ndarray:
    """0/1 mask of the first ``m`` cells of an ``n x n`` grid in shell order."""
    if not 0 <= m <= n * n:
        raise ValueError(f"m must lie in [0, {n * n}], got {m}")
    mask = np.zeros((n, n))
    for row, col in shell_positions(n)[:m]:
        mask[row, col] = 1
    return mask


def schur_project(level: int, m: int, x) -> np.ndarray:
    """Schur product of ``x`` with the mask of the first ``m`` shell-ordered matrix units."""
    n = 2**level
    x = np.asarray(x, dtype=complex)
    if x.shape[-2:] != (n, n):
        raise ValueError(f"dimension mismatch: expected {n}x{n}, got {x.shape[-2:]}")
    return x * shell_mask(n, m)


def haar_partial_sum(sys: HaarSystem, m: int, x) -> np.ndarray:
    """Keep the first ``m`` Haar coefficients of ``x`` and resynthesize."""
    if not 0 <= m <= len(sys):
        raise ValueError(f"m must lie in [0, {len(sys)}], got {m}")
    c = haar_analyze(sys, x)
    c[..., m:] = 0
    return haar_synthesize(sys, c)


@dataclass
class PartialSumMap:
    """A linear map on ``n x n`` matrices together with the norm it is measured in.

    ``apply`` must accept a stack ``(B, n, n)``.  ``fixed`` lists non-zero
    matrices known to lie in the range of the projection; they are always
    included among the explored inputs.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    dim: int
    weight: np.ndarray
    spec: NormSpec
    codomain: NormSpec | None = None
    fixed: list = field(default_factory=list)
    kind: str = "generic"
    m: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.codomain is None:
            self.codomain = self.spec

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        return self.apply(x[None])[0] if x.ndim == 2 else self.apply(x)

    def matrix(self) -> np.ndarray:
        """Matrix of the map on row-major ``vec``."""
        if "plain" not in self._cache:
            n = self.dim
            basis = np.eye(n * n, dtype=complex).reshape(n * n, n, n)
            self._cache["plain"] = self.apply(basis).reshape(n * n, n * n).T
        return self._cache["plain"]

    def flat_matrix(self) -> np.ndarray:
        """Matrix of ``T~`` acting on plain Schatten classes."""
        if "flat" not in self._cache:
            n = self.dim
            basis = np.eye(n * n, dtype=complex).reshape(n * n, n, n)
            x = unweighted_form(basis, self.weight, self.spec)
            y = weighted_form(self.apply(x), self.weight, self.spec)
            self._cache["flat"] = y.reshape(n * n, n * n).T
        return self._cache["flat"]

    def ratio(self, x) -> float:
        """``||T x|| / ||x||`` in the map's weighted norm."""
        x = np.asarray(x, dtype=complex)
        num = schatten_norm(weighted_form(self(x), self.weight, self.spec), self.spec.p)
        den = schatten_norm(weighted_form(x, self.weight, self.spec), self.spec.p)
        return num / den


def _values(w) -> np.ndarray:
    return w.values if isinstance(w, Weight) else np.asarray(w, dtype=float)


def haar_map(sys: HaarSystem, m: int, spec: NormSpec) -> PartialSumMap:
    if not 0 <= m <= len(sys):
        raise ValueError(f"m must lie in [0, {len(sys)}], got {m}")
    fixed = [np.array(sys.elements[0])] if m >= 1 else []
    return PartialSumMap(
        lambda x: haar_partial_sum(sys, m, x), sys.dim, sys.weight.values, spec,
        fixed=fixed, kind="haar", m=m,
    )


def schur_map(w, m: int, spec: NormSpec) -> PartialSumMap:
    """Shell Schur projection on the algebra of the density ``w``."""
    values = _values(w)
    n = values.size
    mask = shell_mask(n, m)
    fixed = [matrix_units_shell(int(math.log2(n)))[0]] if m >= 1 and n & (n - 1) == 0 else []
    if m >= 1 and not fixed:
        e = np.zeros((n, n), dtype=complex)
        e[0, 0] = 1
        fixed = [e]
    return PartialSumMap(lambda x: x * mask, n, values, spec, fixed=fixed, kind="schur", m=m)


def identity_map(w, spec: NormSpec) -> PartialSumMap:
    values = _values(w)
    return PartialSumMap(lambda x: np.array(x), values.size, values, spec,
                         fixed=[np.eye(values.size, dtype=complex)], kind="identity")


@dataclass(frozen=True)
class EstimationStrategy:
    """How to search for inputs of large norm ratio.

    ``method="combined"`` runs sampling followed by polar ascent and reports
    whichever produced the larger ratio.
    """

    method: str = "combined"
    samples: int = 10_000
    restarts: int = 50
    iterations: int = 200
    seed: int = DEFAULT_SEED
    rel_tol: float = 1e-10
    grid_coarse: int = 32
    grid_refine: int = 3
    grid_keep: int = 16

    def __post_init__(self):
        if self.method not in METHODS + ("combined",):
            raise ValueError(f"unknown estimation method {self.method!r}")


@dataclass
class Estimate:
    value: float
    method: str
    evaluated: int
    best_input: np.ndarray | None = field(default=None, repr=False)


def _svd(a):
    try:
        return np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD failed during estimation: {exc}") from exc


def _pnorms(stack: np.ndarray, p: float) -> np.ndarray:
    try:
        s = np.linalg.svd(stack, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD failed during estimation: {exc}") from exc
    if math.isinf(p):
        return s[..., 0]
    if p == 1:
        return s.sum(axis=-1)
    top = np.where(s[..., :1] > 0, s[..., :1], 1.0)
    return top[..., 0] * ((s / top) ** p).sum(axis=-1) ** (1 / p)


def dual_element(a: np.ndarray, p: float) -> np.ndarray:
    """Norming element ``z`` with ``||z||_{p'} = 1`` and ``Re tr(z^* a) = ||a||_p``.

    Works on stacks.  For ``p = 1`` this is the polar unitary (full SVD, so
    null directions are completed to a unitary); for ``p = inf`` the leading
    singular pair.
    """
    u, s, vh = _svd(a)
    if p == 1:
        return u @ vh
    if math.isinf(p):
        return u[..., :, :1] @ vh[..., :1, :]
    nrm = np.where(s[..., :1] > 0, s[..., :1], 1.0)
    w = (s / nrm) ** (p - 1)
    scale = np.linalg.norm(s / nrm, ord=p, axis=-1, keepdims=True) ** (p - 1)
    w = w / np.where(scale > 0, scale, 1.0)
    return (u * w[..., None, :]) @ vh


def _conj_exp(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1)


def _rank_one(raw: np.ndarray, n: int) -> np.ndarray:
    u = raw[:, 0:n] + 1j * raw[:, n:2 * n]
    v = raw[:, 2 * n:3 * n] + 1j * raw[:, 3 * n:4 * n]
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return u[:, :, None] * v.conj()[:, None, :]


def _sample_chunk(seed: int, chunk: int, size: int, n: int, p: float) -> np.ndarray:
    rng = np.random.default_rng([seed, 0, chunk])
    raw = rng.standard_normal((size, max(4 * n, 2 * n * n)))
    y = _rank_one(raw, n)
    if p > 1:
        # odd sample indices are Gaussian matrices
        idx = (chunk * _CHUNK + np.arange(size)) % 2 == 1
        g = (raw[idx, : n * n] + 1j * raw[idx, n * n: 2 * n * n]).reshape(-1, n, n)
        y[idx] = g / _pnorms(g, p)[:, None, None]
    return y


def _sampling(tm: np.ndarray, n: int, p: float, strategy: EstimationStrategy):
    best, best_y, count = 0.0, None, 0
    for chunk, start in enumerate(range(0, strategy.samples, _CHUNK)):
        size = min(_CHUNK, strategy.samples - start)
        y = _sample_chunk(strategy.seed, chunk, size, n, p)
        img = (y.reshape(size, n * n) @ tm.T).reshape(size, n, n)
        vals = _pnorms(img, p)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_y = float(vals[i]), y[i]
        count += size
    return best, best_y, count


def _polar_ascent(tm: np.ndarray, n: int, p: float, strategy: EstimationStrategy):
    """Alternating maximisation of ``Re tr(z^* T~(y))`` over the two unit balls.

    Restarts run as one batch; each restart has its own seed, so results do
    not depend on batching.
    """
    r = strategy.restarts
    if r == 0:
        return 0.0, None, 0
    q = _conj_exp(p)
    starts = []
    for k in range(r):
        rng = np.random.default_rng([strategy.seed, 1, k])
        raw = rng.standard_normal(max(4 * n, 2 * n * n))
        if p == 1:
            y0 = _rank_one(raw[None], n)[0]
        else:
            y0 = (raw[: n * n] + 1j * raw[n * n: 2 * n * n]).reshape(n, n)
            y0 = y0 / _pnorms(y0[None], p)[0]
        starts.append(y0)
    y = np.array(starts)
    tmh = tm.conj().T
    img = (y.reshape(r, -1) @ tm.T).reshape(r, n, n)
    val = _pnorms(img, p)
    active = np.ones(r, dtype=bool)
    count = r
    for _ in range(strategy.iterations):
        if not active.any():
            break
        ia = np.flatnonzero(active)
        z = dual_element(img[ia], p)
        g = (z.reshape(len(ia), -1) @ tmh.T).reshape(len(ia), n, n)
        y_new = dual_element(g, q)
        img_new = (y_new.reshape(len(ia), -1) @ tm.T).reshape(len(ia), n, n)
        val_new = _pnorms(img_new, p)
        count += len(ia)
        improve = val_new >= val[ia]
        upd = ia[improve]
        y[upd], img[upd] = y_new[improve], img_new[improve]
        gain = (val_new - val[ia]) / np.maximum(val[ia], 1e-300)
        val[upd] = val_new[improve]
        active[ia[~(gain > strategy.rel_tol)]] = False
    i = int(np.argmax(val))
    return float(val[i]), y[i], count


def _sphere(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit vectors ``(cos t, e^{i f} sin t)`` on a product grid, shape (len t * len f, 2)."""
    t, f = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.cos(t).ravel() + 0j, (np.exp(1j * f) * np.sin(t)).ravel()], axis=1)


def _trace_norm_2x2(mk: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    img = np.einsum("kab,ua,vb->kuv", mk, u, v.conj())
    fro = np.sum(np.abs(img) ** 2, axis=0)
    det = img[0] * img[3] - img[1] * img[2]
    return np.sqrt(fro + 2 * np.abs(det))


def _grid_oracle(tm: np.ndarray, n: int, p: float, strategy: EstimationStrategy):
    """Brute force over rank-one inputs of 2x2 matrices, with local grid refinement.

    Rank-one unit matrices are the extreme points of the trace-class ball, so
    for ``p = 1`` the maximum over them is the norm itself.
    """
    if n != 2:
        raise ValueError("grid oracle only handles 2x2 matrices")
    if p != 1:
        raise ValueError("grid oracle is exact only for p = 1")
    mk = tm.reshape(4, 2, 2)
    nc = strategy.grid_coarse
    theta = np.linspace(0, np.pi / 2, nc)
    phi = np.linspace(0, 2 * np.pi, nc, endpoint=False)
    u = _sphere(theta, phi)
    vals = _trace_norm_2x2(mk, u, u)
    count = vals.size
    keep = np.argsort(vals.ravel())[::-1][: strategy.grid_keep]
    cands = []
    for flat in keep:
        iu, iv = divmod(int(flat), u.shape[0])
        cands.append([theta[iu // nc], phi[iu % nc], theta[iv // nc], phi[iv % nc]])
    steps = [np.pi / 2 / (nc - 1), 2 * np.pi / nc]
    best = float(vals.max())
    best_par = cands[0]
    pts = 11
    for cand in cands:
        par = list(cand)
        dt, dp = steps
        for _ in range(strategy.grid_refine):
            tu = np.clip(par[0] + np.linspace(-dt, dt, pts), 0, np.pi / 2)
            fu = par[1] + np.linspace(-dp, dp, pts)
            tv = np.clip(par[2] + np.linspace(-dt, dt, pts), 0, np.pi / 2)
            fv = par[3] + np.linspace(-dp, dp, pts)
            lv = _trace_norm_2x2(mk, _sphere(tu, fu), _sphere(tv, fv))
            count += lv.size
            iu, iv = divmod(int(np.argmax(lv)), lv.shape[1])
            par = [tu[iu // pts], fu[iu % pts], tv[iv // pts], fv[iv % pts]]
            if lv.max() > best:
                best, best_par = float(lv.max()), par
            dt, dp = dt / 5, dp / 5
    uu = _sphere(np.array([best_par[0]]), np.array([best_par[1]]))[0]
    vv = _sphere(np.array([best_par[2]]), np.array([best_par[3]]))[0]
    return best, np.outer(uu, vv.conj()), count


def run_estimate(pmap: PartialSumMap, strategy: EstimationStrategy | None = None) -> Estimate:
    """Largest norm ratio found by the requested method(s)."""
    strategy = strategy or EstimationStrategy()
    if pmap.codomain != pmap.spec:
        raise ValueError("domain and codomain norms must agree")
    p = pmap.spec.p
    n = pmap.dim
    tm = pmap.flat_matrix()
    results = []
    if pmap.fixed and strategy.method != "grid_oracle":
        y = weighted_form(np.array(pmap.fixed), pmap.weight, pmap.spec)
        y = y / _pnorms(y, p)[:, None, None]
        vals = _pnorms((y.reshape(len(y), -1) @ tm.T).reshape(-1, n, n), p)
        i = int(np.argmax(vals))
        results.append(("sampling", float(vals[i]), y[i], len(y)))
    if strategy.method in ("sampling", "combined"):
        results.append(("sampling",) + _sampling(tm, n, p, strategy))
    if strategy.method in ("polar_ascent", "combined"):
        results.append(("polar_ascent",) + _polar_ascent(tm, n, p, strategy))
    if strategy.method == "grid_oracle":
        results.append(("grid_oracle",) + _grid_oracle(tm, n, p, strategy))
    evaluated = sum(r[3] for r in results)
    if not results:
        return Estimate(0.0, strategy.method if strategy.method in METHODS else "sampling", 0)
    method, value, y, _ = max(results, key=lambda r: r[1])
    if strategy.method in METHODS:
        method = strategy.method
    x = None if y is None else unweighted_form(y, pmap.weight, pmap.spec)
    return Estimate(value, method, evaluated, x)


def estimate_map_norm(pmap: PartialSumMap, strategy: EstimationStrategy | None = None) -> float:
    """Certified lower bound on the norm of ``pmap`` in its weighted Schatten norm."""
    return run_estimate(pmap, strategy).value


def quad_norms(quad: RademacherQuad, spec: NormSpec) -> tuple[np.ndarray, np.ndarray]:
    """Operator norms and weighted norms of the four matrices of a quadruple."""
    a1 = np.array([quad.alpha, 1 - quad.alpha])
    op = np.array([np.linalg.norm(r, 2) for r in quad.r])
    side = spec.side if spec.side is not Side.PLAIN else quad.side
    wspec = NormSpec(spec.p, side)
    w = np.array([schatten_norm(weighted_form(r, a1, wspec), spec.p) for r in quad.r])
    return op, w


def theoretical_bound(quads: Sequence[RademacherQuad], spec: NormSpec = NormSpec()) -> np.ndarray:
    """Inductive upper bounds for the basis constant at levels ``1..len(quads)``.

    ``c_1 = sum_j ||r_j|| ||r_j||_{p}`` and
    ``c_{v+1} = max(c_v ||r_0||^2, ||r_0||^2 + 2 sum_{q>=1} ||r_q||^2)``
    with each step using its own quadruple.
    """
    if isinstance(quads, RademacherQuad):
        quads = [quads]
    op, w = quad_norms(quads[0], spec)
    bounds = [float(np.sum(op * w))]
    for quad in quads[1:]:
        op, _ = quad_norms(quad, spec)
        r0 = op[0] ** 2
        bounds.append(max(bounds[-1] * r0, r0 + 2 * float(np.sum(op[1:] ** 2))))
    return np.array(bounds)


def default_schedule(length: int, level: int | None = None) -> list[int]:
    """All ``m`` for short systems; otherwise powers of two and block boundaries."""
    if length <= 16:
        return list(range(0, length + 1))
    ms = {length}
    k = 1
    while k < length:
        ms.add(k)
        k *= 2
    mu = 0
    while 4**mu < length:
        for q in (1, 2, 3):
            if 4**mu * q <= length:
                ms.add(4**mu * q)
        mu += 1
    return sorted(ms)


@dataclass
class NormRow:
    m: int
    estimate: float
    bound: float
    method: str
    samples: int
    seed: int
    tolerance: float
    passed: bool | None  # None: excluded (m = 0) or failed estimation
    error: str = ""


CSV_COLUMNS = ["alpha", "level", "p", "side", "m", "estimate", "bound", "method", "samples", "seed", "pass"]


@dataclass
class NormReport:
    suite: str
    alpha: float | str
    level: int | str
    spec: NormSpec
    bound_kind: str
    rows: list[NormRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.rows) and not self.failed_rows

    @property
    def failed_rows(self) -> list[NormRow]:
        return [r for r in self.rows if r.error]

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append({
                "alpha": self.alpha,
                "level": self.level,
                "p": format_p(self.spec.p),
                "side": self.spec.side.value,
                "m": r.m,
                "estimate": r.estimate,
                "bound": r.bound,
                "method": r.method,
                "samples": r.samples,
                "seed": r.seed,
                "pass": "excluded" if r.passed is None and not r.error else ("true" if r.passed else "false"),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rec in self.records():
            rec = dict(rec)
            for key in ("estimate", "bound"):
                rec[key] = repr(float(rec[key]))
            writer.writerow(rec)
        return buf.getvalue()

    def to_json(self) -> str:
        obj = {
            "suite": self.suite,
            "bound_kind": self.bound_kind,
            "passed": self.passed,
            "metadata": self.metadata,
            "rows": self.records(),
            "tolerances": [r.tolerance for r in self.rows],
            "errors": [r.error for r in self.rows],
        }
        return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, NormSpec):
        return {"p": format_p(o.p), "side": o.side.value}
    return str(o)


def certify_maps(maps: Sequence[tuple[int, PartialSumMap]], bound: float, strategy: EstimationStrategy,
                 tolerance: float = 1e-6) -> list[NormRow]:
    """Estimate each map and compare with ``bound``; failures stay local to their row."""
    rows = []
    for m, pmap in maps:
        if m == 0:
            rows.append(NormRow(0, 0.0, bound, strategy.method if strategy.method in METHODS else "sampling",
                                0, strategy.seed, tolerance, None))
            continue
        try:
            est = run_estimate(pmap, strategy)
        except NumericFailure as exc:
            rows.append(NormRow(m, math.nan, bound, "failed", 0, strategy.seed, tolerance, False, str(exc)))
            continue
        rows.append(NormRow(m, est.value, bound, est.method, est.evaluated, strategy.seed, tolerance,
                            bool(est.value <= bound + tolerance)))
    return rows


def certify(sys: HaarSystem, spec: NormSpec = NormSpec(), strategy: EstimationStrategy | None = None,
            schedule: Sequence[int] | None = None, level_cap: int = 4) -> NormReport:
    """Estimate every scheduled Haar partial-sum norm against the inductive bound."""
    strategy = strategy or EstimationStrategy()
    if sys.level > level_cap:
        raise ValueError(f"level {sys.level} exceeds the certification cap {level_cap}")
    bound = float(theoretical_bound(sys.quads, spec)[-1])
    schedule = default_schedule(len(sys)) if schedule is None else list(schedule)
    rows = certify_maps([(m, haar_map(sys, m, spec)) for m in schedule], bound, strategy)
    return NormReport("haar", sys.alpha, sys.level, spec, "inductive", rows,
                      {"strategy": asdict(strategy), "system_side": sys.side.value})


def certify_schur(w: Weight, spec: NormSpec = NormSpec(), strategy: EstimationStrategy | None = None,
                  schedule: Sequence[int] | None = None, level_cap: int = 4) -> NormReport:
    """Shell Schur projections against the matrix-unit basis constant 2."""
    strategy = strategy or EstimationStrategy()
    if w.level > level_cap:
        raise ValueError(f"level {w.level} exceeds the certification cap {level_cap}")
    length = 4**w.level
    schedule = default_schedule(length) if schedule is None else list(schedule)
    rows = certify_maps([(m, schur_map(w, m, spec)) for m in schedule], 2.0, strategy)
    return NormReport("schur", w.alpha, w.level, spec, "matrix-units", rows, {"strategy": asdict(strategy)})
