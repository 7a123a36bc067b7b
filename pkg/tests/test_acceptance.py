"""Acceptance gate: one test per criterion, each at its stated tolerance and time budget.

Every test records a PASS/FAIL line through the ``criterion`` fixture; the
lines are printed together at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from conftest import cplx
from ncbasis.algebra import ModularContext, Weight, embed, expect_diagonal, expect_level, kms_function, modular_flow, state
from ncbasis.cli import main
from ncbasis.haar import (
    classical_haar,
    commutative_haar,
    diagonal_selection,
    distorted_measure,
    haar_analyze,
    haar_build,
    haar_synthesize,
    random_quad,
    shell_index,
    shell_pair,
    standard_quad,
)
from ncbasis.matcore import NormSpec, schatten_norm, weighted_norm
from ncbasis.normlab import EstimationStrategy, certify, certify_schur, estimate_map_norm, haar_map, theoretical_bound
from ncbasis.tensor import (
    DecompositionSystem,
    ProductAlgebra,
    alg_tensor_projection,
    decomposition_project,
    haar_factor,
    lp_embed,
    product_partial_sum_certify,
    unit_factor,
)

pytestmark = pytest.mark.slow


def test_c01_gram(criterion):
    t0 = time.perf_counter()
    worst = max(standard_quad(a, side).gram_residual()
                for a in (0.5, 1 / 3, 0.1) for side in ("left", "right"))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 1
    criterion(1, ok, f"max Gram residual {worst:.2e} < 1e-12, {elapsed:.3f}s < 1s")
    assert ok


def test_c02_roundtrip(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for side in ("left", "right"):
        for level in range(1, 5):
            quads = [random_quad(1 / 3, side, rng) for _ in range(level)]
            for sys_ in (haar_build(1 / 3, level, side=side), haar_build(1 / 3, level, quads, side)):
                x = cplx(rng, 200, sys_.dim, sys_.dim)
                err = schatten_norm(haar_synthesize(sys_, haar_analyze(sys_, x)) - x, math.inf)
                worst = max(worst, float(np.max(err / schatten_norm(x, math.inf))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 30
    criterion(2, ok, f"max relative round-trip error {worst:.2e} <= 1e-10, {elapsed:.1f}s < 30s")
    assert ok


def test_c03_haar_certification(criterion):
    t0 = time.perf_counter()
    strategy = EstimationStrategy(seed=1)
    details, ok = [], True
    for alpha, limit in ((0.5, 7), (1 / 3, 11)):
        assert theoretical_bound([standard_quad(alpha)] * 3)[-1] == pytest.approx(limit, rel=1e-14)
        top = 0.0
        for level in (1, 2, 3):
            rep = certify(haar_build(alpha, level), NormSpec(1, "left"), strategy, range(4**level + 1))
            top = max(top, max(r.estimate for r in rep.rows))
            ok &= rep.passed
            ok &= abs(rep.rows[-1].estimate - 1) < 1e-9
        ok &= top <= limit
        details.append(f"alpha={alpha:.4g}: max {top:.6f} <= {limit}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    criterion(3, ok, "; ".join(details) + f", {elapsed:.1f}s < 300s")
    assert ok


def test_c04_schur_bound(criterion):
    t0 = time.perf_counter()
    strategy = EstimationStrategy(seed=1)
    top, ok = 0.0, True
    for level in (1, 2, 3):
        w = Weight(1 / 3, level)
        for p in (1, 2, 4, math.inf):
            for side in ("left", "right"):
                rep = certify_schur(w, NormSpec(p, side), strategy, range(4**level + 1))
                top = max(top, max(r.estimate for r in rep.rows))
                ok &= rep.passed
    elapsed = time.perf_counter() - t0
    ok &= top <= 2 + 1e-6 and elapsed < 300
    criterion(4, ok, f"max Schur partial-sum estimate {top:.6f} <= 2 + 1e-6, {elapsed:.1f}s < 300s")
    assert ok


def test_c05_oracle_agreement(criterion):
    rng = np.random.default_rng(5)
    polar = EstimationStrategy(method="polar_ascent", seed=1)
    grid = EstimationStrategy(method="grid_oracle", seed=1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        alpha = float(rng.uniform(0.1, 0.5))
        side = str(rng.choice(["left", "right"]))
        sys_ = haar_build(alpha, 1, random_quad(alpha, side, rng), side)
        pm = haar_map(sys_, int(rng.integers(1, 4)), NormSpec(1, side))
        worst = max(worst, abs(estimate_map_norm(pm, polar) - estimate_map_norm(pm, grid)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 120
    criterion(5, ok, f"max |polar - grid| {worst:.2e} <= 1e-3 over 20 maps, {elapsed:.1f}s < 120s")
    assert ok


def test_c06_measure(criterion):
    worst_state, worst_sum = 0.0, 0.0
    for alpha in (0.5, 1 / 3):
        for level in range(1, 11):
            table = distorted_measure(alpha, level)
            w = Weight(alpha, level)
            n = w.dim
            eps = np.zeros((n, n), dtype=complex)
            for k in range(n):
                eps[k, k] = 1
                worst_state = max(worst_state, abs(state(w, eps) - table.masses[k]))
                eps[k, k] = 0
            worst_sum = max(worst_sum, abs(float(np.sum(table.masses)) - 1))
    ok = worst_state < 1e-15 and worst_sum <= 1e-14
    criterion(6, ok, f"max |rho(eps_k) - mass| {worst_state:.1e} < 1e-15, max |sum - 1| {worst_sum:.1e} <= 1e-14")
    assert ok


def test_c07_commutative(criterion):
    ok = True
    for level in range(1, 5):
        ch = commutative_haar(0.5, level)
        ok &= np.array_equal(ch.steps, classical_haar(level))
        ok &= set(np.unique(ch.steps).tolist()) <= {0.0, 1.0, -1.0}
        sys_ = haar_build(0.5, level)
        nonzero = np.array([np.any(expect_diagonal(h) != 0) for h in sys_.elements])
        ok &= np.array_equal(nonzero, diagonal_selection(level))
        ok &= np.array_equal(np.array([expect_diagonal(h) for h in sys_.elements[nonzero]]), ch.matrices)
    criterion(7, ok, "chi steps equal classical Haar exactly with values in {0, +-1}; selection rule exact, levels 1-4")
    assert ok


def test_c08_expectation(criterion):
    rng = np.random.default_rng(8)
    elem, excess, module = 0.0, -np.inf, 0.0
    for alpha in (0.5, 1 / 3, 0.1):
        for level in (1, 2, 3):
            w = Weight(alpha, level + 1)
            n = 2**level
            a, b = cplx(rng, n, n), cplx(rng, 2, 2)
            rho1 = state(Weight(alpha, 1), b)
            elem = max(elem, np.max(np.abs(expect_level(w, np.kron(a, b)) - rho1 * a)) / np.max(np.abs(a)))
            spec = NormSpec(1, "left")
            for x in cplx(rng, 1000, 2 * n, 2 * n):
                lhs = weighted_norm(embed(expect_level(w, x)), w.values, spec)
                excess = max(excess, lhs / weighted_norm(x, w.values, spec) - 1)
            a2, b2, x2 = cplx(rng, n, n), cplx(rng, n, n), cplx(rng, 2 * n, 2 * n)
            module = max(module, np.max(np.abs(expect_level(w, embed(a2) @ x2 @ embed(b2))
                                               - a2 @ expect_level(w, x2) @ b2)))
    ok = elem <= 1e-14 and excess <= 1e-12 and module < 1e-12
    criterion(8, ok, f"elementary tensor {elem:.1e} (rounding only), max contractivity ratio - 1 = {excess:.1e} <= 1e-12, "
                     f"module residual {module:.1e} < 1e-12")
    assert ok


def test_c09_kms(criterion):
    rng = np.random.default_rng(9)
    worst = 0.0
    for alpha in (0.5, 1 / 3, 0.1):
        w = Weight(alpha, 2)
        x, y = cplx(rng, 4, 4), cplx(rng, 4, 4)
        for t in (0.0, 0.3, 1.7):
            sx = modular_flow(ModularContext(w, t), x)
            worst = max(worst, abs(kms_function(w, x, y, t) - state(w, sx @ y)),
                        abs(kms_function(w, x, y, t + 1j) - state(w, y @ sx)))
    ok = worst < 1e-10
    criterion(9, ok, f"max KMS boundary residual {worst:.1e} < 1e-10")
    assert ok


def test_c10_tensor(criterion):
    rng = np.random.default_rng(10)
    orth = idem = alg = 0.0
    for alpha in (0.5, 1 / 3):
        ds = DecompositionSystem(ProductAlgebra(Weight(alpha, 2), Weight(alpha, 1)), standard_quad(alpha).r)
        z = cplx(rng, 8, 8)
        d = [decomposition_project(ds, j, z) for j in range(4)]
        for j in range(4):
            idem = max(idem, np.max(np.abs(decomposition_project(ds, j, d[j]) - d[j])))
            for k in range(4):
                if k != j:
                    orth = max(orth, np.max(np.abs(decomposition_project(ds, k, d[j]))))
        terms = [(cplx(rng, 4, 4), cplx(rng, 2, 2)) for _ in range(2)]
        zt = sum(np.kron(a, b) for a, b in terms)
        alg = max(alg, max(np.max(np.abs(decomposition_project(ds, j, zt) - alg_tensor_projection(ds, j, terms)))
                           for j in range(4)))
    strategy = EstimationStrategy(seed=1)
    spec = NormSpec(1, "left")
    iii = product_partial_sum_certify(haar_factor(haar_build(1 / 3, 1)), haar_factor(haar_build(0.25, 1)),
                                      spec, strategy)
    iiinf = product_partial_sum_certify(haar_factor(haar_build(0.5, 1)), unit_factor(4), spec, strategy)
    shell_ok = all(shell_pair(shell_index(j, k)) == (j, k) for j in range(1, 65) for k in range(1, 65))
    shell_ok &= sorted(shell_index(j, k) for j in range(1, 65) for k in range(1, 65)) == list(range(1, 4097))
    top3 = max(r.estimate for r in iii.rows)
    top2 = max(r.estimate for r in iiinf.rows)
    ok = orth < 1e-10 and idem < 1e-10 and alg < 1e-12 and iii.passed and iiinf.passed and shell_ok
    criterion(10, ok, f"D_j orth {orth:.1e}, idem {idem:.1e}; AlgTensFor {alg:.1e}; "
                      f"III1 max {top3:.4f} <= {iii.rows[1].bound:.4g}; II_inf max {top2:.4f} <= "
                      f"{iiinf.rows[1].bound:.4g}; shell bijection n<=64 {'ok' if shell_ok else 'broken'}")
    assert ok


def test_c11_lp_embedding(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for p in (1, 2, 3):
        for x in cplx(rng, 100, 4, 4):
            worst = max(worst, abs(schatten_norm(lp_embed(x, p, 1 / 3), p) - schatten_norm(x, p)))
    ok = worst <= 1e-12
    criterion(11, ok, f"max |‖x⊗A^(1/p)‖_p - ‖x‖_p| {worst:.1e} <= 1e-12")
    assert ok


def test_c12_determinism(criterion, tmp_path, capsys):
    commands = [
        ["certify", "--alpha", "1/3", "--level", "2", "--seed", "1"],
        ["certify", "--suite", "schur", "--alpha", "1/3", "--level", "2", "--p", "4", "--side", "right", "--seed", "1"],
        ["certify", "--suite", "product", "--left", "alpha=1/3", "--right", "alpha=1/4", "--seed", "1"],
    ]
    ok = True
    for i, argv in enumerate(commands):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}-{rep}.csv"
            ok &= main(argv + ["--out", str(path)]) == 0
            outs.append(path.read_bytes())
        ok &= outs[0] == outs[1] and len(outs[0]) > 0
    capsys.readouterr()
    criterion(12, ok, f"{len(commands)} certify commands run twice: byte-identical CSV")
    assert ok
