"""Named invariant suites behind ``ncbasis verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import ModularContext, Weight, embed, expect_diagonal, expect_level, kms_function, modular_flow, state
from .haar import (
    classical_haar,
    commutative_haar,
    diagonal_selection,
    distorted_measure,
    haar_analyze,
    haar_build,
    haar_synthesize,
    shell_index,
    shell_pair,
    standard_quad,
)
from .matcore import NormSpec, schatten_norm, weighted_norm
from .tensor import DecompositionSystem, ProductAlgebra, alg_tensor_projection, decomposition_project, lp_embed

SUITES = ("gram", "expansion", "expectation", "measure", "kms", "commutative", "tensor", "shell")


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {"check": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


def _check(name, value, tol, strict=False) -> Check:
    value = float(value)
    ok = value < tol if strict else value <= tol
    return Check(name, value, tol, bool(ok))


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def suite_gram(alpha, level, rng, **_) -> list[Check]:
    out = []
    for side in ("left", "right"):
        q = standard_quad(alpha, side)
        out.append(_check(f"gram_residual[{side}]", q.gram_residual(), 1e-12, strict=True))
        sys = haar_build(alpha, level, q, side)
        out.append(_check(f"element_count[{side}]", abs(len(sys) - 4**level), 0))
    return out


def suite_expansion(alpha, level, rng, samples=200, **_) -> list[Check]:
    out = []
    for side in ("left", "right"):
        sys = haar_build(alpha, level, side=side)
        x = _cplx(rng, samples, sys.dim, sys.dim)
        back = haar_synthesize(sys, haar_analyze(sys, x))
        err = schatten_norm(back - x, math.inf) / schatten_norm(x, math.inf)
        out.append(_check(f"roundtrip_rel_error[{side}]", np.max(err), 1e-10))
        basis = np.eye(len(sys))
        out.append(_check(f"unit_coefficients[{side}]",
                          np.max(np.abs(haar_analyze(sys, sys.elements) - basis)), 1e-10))
    return out


def suite_expectation(alpha, level, rng, samples=1000, **_) -> list[Check]:
    w = Weight(alpha, level + 1)
    n = 2**level
    a, b = _cplx(rng, n, n), _cplx(rng, 2, 2)
    rho1 = state(w.one(), b)
    elem = np.max(np.abs(expect_level(w, np.kron(a, b)) - rho1 * a))
    x = _cplx(rng, samples, 2 * n, 2 * n)
    spec = NormSpec(1, "left")
    worst = 0.0
    for xi in x:
        lhs = weighted_norm(embed(expect_level(w, xi)), w.values, spec)
        worst = max(worst, lhs - weighted_norm(xi, w.values, spec))
    a2, b2, x2 = _cplx(rng, n, n), _cplx(rng, n, n), _cplx(rng, 2 * n, 2 * n)
    module = np.max(np.abs(expect_level(w, embed(a2) @ x2 @ embed(b2)) - a2 @ expect_level(w, x2) @ b2))
    idem = np.max(np.abs(expect_level(w, embed(a)) - a))
    xd = _cplx(rng, 2 * n, 2 * n)
    diag_state = abs(state(w, expect_diagonal(xd)) - state(w, xd))
    return [
        _check("elementary_tensor", elem, 1e-12),
        _check("contractivity_excess", max(worst, 0.0), 1e-12),
        _check("module_property", module, 1e-12, strict=True),
        _check("idempotence", idem, 1e-13),
        _check("diagonal_state_preservation", diag_state, 1e-13),
    ]


def suite_measure(alpha, level, rng, **_) -> list[Check]:
    table = distorted_measure(alpha, level)
    w = Weight(alpha, level)
    n = 2**level
    resid = 0.0
    for k in range(n):
        eps = np.zeros((n, n))
        eps[k, k] = 1
        resid = max(resid, abs(state(w, eps) - table.masses[k]))
    return [
        _check("mass_sum", abs(float(np.sum(table.masses)) - 1), 1e-14),
        _check("state_vs_mass", resid, 1e-15, strict=True),
    ]


def suite_kms(alpha, level, rng, t=(0.0, 0.3, 1.7), **_) -> list[Check]:
    w = Weight(alpha, level)
    n = w.dim
    x, y = _cplx(rng, n, n), _cplx(rng, n, n)
    out = []
    for tt in np.atleast_1d(t):
        sx = modular_flow(ModularContext(w, float(tt)), x)
        r1 = abs(kms_function(w, x, y, tt) - state(w, sx @ y))
        r2 = abs(kms_function(w, x, y, tt + 1j) - state(w, y @ sx))
        inv = abs(state(w, sx) - state(w, x))
        out += [
            _check(f"boundary_real[t={tt}]", r1, 1e-10, strict=True),
            _check(f"boundary_shifted[t={tt}]", r2, 1e-10, strict=True),
            _check(f"state_invariance[t={tt}]", inv, 1e-12),
        ]
    return out


def suite_commutative(alpha, level, rng, **_) -> list[Check]:
    ch = commutative_haar(alpha, level)
    out = []
    if float(alpha) == 0.5:
        out.append(_check("classical_haar_mismatch", np.max(np.abs(ch.steps - classical_haar(level))), 0))
        vals = set(np.unique(ch.steps).tolist())
        out.append(_check("values_outside_{0,+-1}", len(vals - {0.0, 1.0, -1.0}), 0))
    sys = haar_build(alpha, level)
    nonzero = np.array([np.any(expect_diagonal(h) != 0) for h in sys.elements])
    out.append(_check("selection_rule_mismatch", int(np.sum(nonzero != diagonal_selection(level))), 0))
    chis = np.array([expect_diagonal(h) for h, keep in zip(sys.elements, nonzero) if keep])
    out.append(_check("selected_equals_chi", np.max(np.abs(chis - ch.matrices)), 0))
    return out


def suite_tensor(alpha, level, rng, samples=100, **_) -> list[Check]:
    left = Weight(alpha, level)
    q = standard_quad(alpha)
    pa = ProductAlgebra(left.values, Weight(alpha, 1).values)
    ds = DecompositionSystem(pa, q.r)
    n = left.dim
    z = _cplx(rng, 2 * n, 2 * n)
    d = [decomposition_project(ds, j, z) for j in range(4)]
    orth = max(np.max(np.abs(decomposition_project(ds, k, d[j])))
               for j in range(4) for k in range(4) if j != k)
    idem = max(np.max(np.abs(decomposition_project(ds, j, d[j]) - d[j])) for j in range(4))
    total = np.max(np.abs(sum(d) - z))
    terms = [(_cplx(rng, n, n), _cplx(rng, 2, 2)) for _ in range(2)]
    zt = sum(np.kron(a, b) for a, b in terms)
    alg = max(np.max(np.abs(decomposition_project(ds, j, zt) - alg_tensor_projection(ds, j, terms)))
              for j in range(4))
    iso = 0.0
    for p in (1, 2, 3):
        for x in _cplx(rng, samples, n, n):
            iso = max(iso, abs(schatten_norm(lp_embed(x, p, alpha), p) - schatten_norm(x, p)) / schatten_norm(x, p))
    return [
        _check("D_orthogonality", orth, 1e-10, strict=True),
        _check("D_idempotence", idem, 1e-10, strict=True),
        _check("D_sum_identity", total, 1e-10, strict=True),
        _check("alg_tensor_formula", alg, 1e-12, strict=True),
        _check("lp_embed_isometry", iso, 1e-12),
    ]


def suite_shell(alpha, level, rng, n_max=64, **_) -> list[Check]:
    bad = 0
    seen = set()
    for j in range(1, n_max + 1):
        for k in range(1, n_max + 1):
            s = shell_index(j, k)
            seen.add(s)
            bad += shell_pair(s) != (j, k)
    missing = len(set(range(1, n_max * n_max + 1)) - seen)
    return [_check("roundtrip_failures", bad, 0), _check("missing_positions", missing, 0)]


def run_suite(name: str, alpha, level: int, seed: int, **kwargs) -> list[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    rng = np.random.default_rng(seed)
    return globals()[f"suite_{name}"](alpha, level, rng, **kwargs)
