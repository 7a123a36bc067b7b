import csv
import io
import json
import math

import numpy as np
import pytest
import sympy as sp

from conftest import cplx
from ncbasis.algebra import Weight, state
from ncbasis.haar import haar_build, random_quad, standard_quad
from ncbasis.matcore import NormSpec, NumericFailure, schatten_norm, weighted_form
from ncbasis.normlab import (
    CSV_COLUMNS,
    EstimationStrategy,
    PartialSumMap,
    certify,
    certify_maps,
    certify_schur,
    default_schedule,
    dual_element,
    estimate_map_norm,
    haar_map,
    haar_partial_sum,
    identity_map,
    run_estimate,
    schur_map,
    schur_project,
    shell_mask,
    theoretical_bound,
)

FAST = EstimationStrategy(samples=1000, restarts=8, iterations=100, seed=7)


def test_shell_mask_examples():
    np.testing.assert_array_equal(shell_mask(2, 0), np.zeros((2, 2)))
    np.testing.assert_array_equal(shell_mask(2, 2), [[1, 1], [0, 0]])
    np.testing.assert_array_equal(shell_mask(2, 3), [[1, 1], [0, 1]])
    np.testing.assert_array_equal(shell_mask(2, 4), np.ones((2, 2)))
    with pytest.raises(ValueError):
        shell_mask(2, 5)


def test_schur_project(rng):
    x = cplx(rng, 8, 8)
    np.testing.assert_array_equal(schur_project(3, 64, x), x)
    np.testing.assert_array_equal(schur_project(3, 0, x), 0)
    d = np.diag(cplx(rng, 8))
    for m in (1, 5, 10, 33):
        p = schur_project(3, m, x)
        np.testing.assert_allclose(schur_project(3, m, d @ x), d @ p, atol=1e-14)
        np.testing.assert_allclose(schur_project(3, m, x @ d), p @ d, atol=1e-14)
        np.testing.assert_array_equal(schur_project(3, m, p), p)
    with pytest.raises(ValueError):
        schur_project(2, 1, np.eye(2))


@pytest.mark.parametrize("side", ["left", "right"])
def test_haar_partial_sum(rng, side):
    sys = haar_build(1 / 3, 3, side=side)
    x = cplx(rng, 8, 8)
    np.testing.assert_allclose(haar_partial_sum(sys, 64, x), x, atol=1e-10)
    np.testing.assert_allclose(haar_partial_sum(sys, 1, x), state(sys.weight, x) * np.eye(8), atol=1e-12)
    np.testing.assert_array_equal(haar_partial_sum(sys, 0, x), 0)
    for m in (3, 17, 40):
        p = haar_partial_sum(sys, m, x)
        np.testing.assert_allclose(haar_partial_sum(sys, m, p), p, atol=1e-10)
    with pytest.raises(ValueError):
        haar_partial_sum(sys, 65, x)


def test_partial_sum_map_matrix(rng):
    sys = haar_build(0.25, 2)
    pm = haar_map(sys, 6, NormSpec(1, "left"))
    x = cplx(rng, 4, 4)
    np.testing.assert_allclose(pm.matrix() @ x.ravel(), pm(x).ravel(), atol=1e-12)
    np.testing.assert_allclose(pm.matrix() @ pm.matrix(), pm.matrix(), atol=1e-12)


def test_identity_estimate():
    for p in (1, 2, math.inf):
        for side in ("left", "right"):
            v = estimate_map_norm(identity_map(Weight(1 / 3, 2), NormSpec(p, side)), FAST)
            assert abs(v - 1) <= 1e-9


def test_dual_element_properties(rng):
    for p in (1, 1.5, 2, 4, math.inf):
        a = cplx(rng, 3, 3)
        d = dual_element(a, p)
        q = 1 / (1 - 1 / p) if p not in (1, math.inf) else (math.inf if p == 1 else 1)
        assert np.real(np.trace(d.conj().T @ a)) == pytest.approx(schatten_norm(a, p), rel=1e-10)
        assert schatten_norm(d, q) == pytest.approx(1, rel=1e-10)


def test_theoretical_bound_symbolic():
    def sym_bound(alpha):
        a = sp.Rational(alpha)
        lam = a / (1 - a)
        s = sp.sqrt(lam)
        rs = [sp.eye(2), sp.diag(1 / s, -s), sp.Matrix([[0, 1], [1, 0]]), sp.Matrix([[0, -s], [1 / s, 0]])]
        A = sp.diag(a, 1 - a)
        op = [sp.sqrt(max((r.H * r).eigenvals())) for r in rs]
        wn = [sum(sp.sqrt(e) * mult for e, mult in ((r * A).H * (r * A)).eigenvals().items()) for r in rs]
        c1 = sp.nsimplify(sp.simplify(sum(o * w for o, w in zip(op, wn))))
        c2 = sp.Max(c1 * op[0] ** 2, op[0] ** 2 + 2 * sum(o**2 for o in op[1:]))
        return c1, sp.simplify(c2)

    assert sym_bound("1/2") == (4, 7)
    assert sym_bound("1/3") == (sp.Rational(14, 3), 11)
    np.testing.assert_allclose(theoretical_bound([standard_quad(0.5)] * 4), [4, 7, 7, 7], rtol=1e-15)
    np.testing.assert_allclose(theoretical_bound([standard_quad(1 / 3)] * 3), [14 / 3, 11, 11], rtol=1e-14)
    assert theoretical_bound([standard_quad(0.25)] * 2)[1] == pytest.approx(15)


def test_theoretical_bound_uniform_when_r0_contractive(rng):
    quads = [random_quad(0.2, "left", rng, identity_first=True) for _ in range(6)]
    b = theoretical_bound(quads)
    assert np.all(np.isfinite(b))
    assert np.max(b) <= max(b[0], 1 + 2 * max(sum(np.linalg.norm(r, 2) ** 2 for r in q.r[1:]) for q in quads)) + 1e-12


def test_theoretical_bound_right_side_uses_right_norms():
    q = standard_quad(1 / 3, "right")
    left = theoretical_bound(standard_quad(1 / 3, "left"), NormSpec(1, "left"))
    right = theoretical_bound(q, NormSpec(1, "right"))
    assert right[0] == pytest.approx(left[0])


def test_default_schedule():
    assert default_schedule(4) == [0, 1, 2, 3, 4]
    s = default_schedule(64)
    assert s[0] == 1 and s[-1] == 64
    for m in (1, 2, 3, 4, 8, 12, 16, 32, 48, 64):
        assert m in s


def test_fixed_element_gives_at_least_one(rng):
    strat = EstimationStrategy(samples=200, restarts=2, iterations=20, seed=3)
    sys = haar_build(1 / 3, 2)
    for m in (1, 2, 7, 16):
        for p in (1, 2, math.inf):
            assert estimate_map_norm(haar_map(sys, m, NormSpec(p, "left")), strat) >= 1 - 1e-9
    for m in (1, 5, 16):
        assert estimate_map_norm(schur_map(Weight(1 / 3, 2), m, NormSpec(1, "right")), strat) >= 1 - 1e-9


def test_m1_projection_estimate_at_least_one():
    # m = 1 with r_0 = I is the expectation onto scalars, a norm-one map
    sys = haar_build(1 / 3, 2)
    est = run_estimate(haar_map(sys, 1, NormSpec(1, "left")), EstimationStrategy(method="sampling", samples=2000))
    assert est.value >= 1 - 1e-9
    assert est.value <= 1 + 1e-9


def test_sampling_monotone_in_samples():
    pm = haar_map(haar_build(1 / 3, 2), 6, NormSpec(1, "left"))
    vals = [estimate_map_norm(pm, EstimationStrategy(method="sampling", samples=n, seed=11))
            for n in (100, 500, 1000, 2500, 4000)]
    assert vals == sorted(vals)


def test_deterministic():
    pm = haar_map(haar_build(0.25, 2), 9, NormSpec(2, "right"))
    a = run_estimate(pm, FAST)
    b = run_estimate(pm, FAST)
    assert a.value == b.value and a.method == b.method and a.evaluated == b.evaluated


def test_estimate_is_attained():
    pm = haar_map(haar_build(1 / 3, 2), 6, NormSpec(1, "left"))
    est = run_estimate(pm, FAST)
    assert pm.ratio(est.best_input) == pytest.approx(est.value, rel=1e-9)


def test_estimate_bounded_by_exact_p2_norm():
    # for p = 2 the flattened map is a Hilbert-space operator: its norm is the top singular value
    pm = haar_map(haar_build(1 / 3, 2), 6, NormSpec(2, "left"))
    exact = np.linalg.norm(pm.flat_matrix(), 2)
    est = estimate_map_norm(pm, FAST)
    assert est <= exact * (1 + 1e-12)
    assert est == pytest.approx(exact, rel=1e-6)


def test_grid_oracle_restrictions():
    with pytest.raises(ValueError):
        estimate_map_norm(haar_map(haar_build(0.5, 2), 3, NormSpec(1)), EstimationStrategy(method="grid_oracle"))
    with pytest.raises(ValueError):
        estimate_map_norm(haar_map(haar_build(0.5, 1), 2, NormSpec(2)), EstimationStrategy(method="grid_oracle"))
    with pytest.raises(ValueError):
        EstimationStrategy(method="sdp")


def test_codomain_mismatch():
    pm = identity_map(Weight(0.5, 1), NormSpec(1, "left"))
    pm.codomain = NormSpec(2, "left")
    with pytest.raises(ValueError):
        run_estimate(pm)


@pytest.mark.parametrize("m", [2, 3, 6, 11])
def test_dual_side_symmetry(m):
    strat = EstimationStrategy(samples=2000, restarts=20, iterations=200, seed=5)
    for alpha in (1 / 3, 0.2):
        left = estimate_map_norm(haar_map(haar_build(alpha, 2, side="left"), m, NormSpec(1, "left")), strat)
        right = estimate_map_norm(haar_map(haar_build(alpha, 2, side="right"), m, NormSpec(1, "right")), strat)
        assert abs(left - right) <= 2e-3


def test_certify_report_and_csv():
    sys = haar_build(0.5, 1)
    rep = certify(sys, NormSpec(1, "left"), FAST)
    assert [r.m for r in rep.rows] == [0, 1, 2, 3, 4]
    assert rep.rows[0].passed is None and rep.rows[0].estimate == 0
    assert rep.passed
    assert rep.rows[-1].estimate == pytest.approx(1, abs=1e-9)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == CSV_COLUMNS
    assert rows[0]["pass"] == "excluded" and rows[1]["pass"] == "true"
    assert float(rows[1]["bound"]) == 4.0
    assert rows[1]["p"] == "1" and rows[1]["side"] == "left"
    obj = json.loads(rep.to_json())
    assert obj["passed"] is True
    assert [r["estimate"] for r in obj["rows"]] == [float(r["estimate"]) for r in rows]
    assert set(obj["rows"][0]) == set(CSV_COLUMNS)


def test_certify_level_cap():
    with pytest.raises(ValueError):
        certify(haar_build(0.5, 5), strategy=FAST)


def test_certify_flags_violations_and_local_failures():
    sys = haar_build(0.5, 1)
    pm = haar_map(sys, 2, NormSpec(1))

    def boom(x):
        raise NumericFailure("svd did not converge")

    bad = PartialSumMap(boom, 2, sys.weight.values, NormSpec(1))
    rows = certify_maps([(2, pm), (3, bad), (4, haar_map(sys, 4, NormSpec(1)))], 0.5, FAST)
    assert rows[0].passed is False
    assert rows[1].passed is False and rows[1].error and math.isnan(rows[1].estimate)
    assert rows[2].passed is False and rows[2].estimate == pytest.approx(1)


def test_certify_schur_small():
    rep = certify_schur(Weight(1 / 3, 1), NormSpec(math.inf, "right"), FAST)
    assert rep.passed
    assert all(r.estimate <= 2 + 1e-6 for r in rep.rows)
    assert rep.bound_kind == "matrix-units"
