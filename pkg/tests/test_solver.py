import csv

import numpy as np
import pytest

from splitbreg.linops import DenseMatrix
from splitbreg.objectives import (
    ElasticNet,
    SquaredNorm,
    bregman_distance,
    pair_from_dual,
    soft_shrink,
)
from splitbreg.projections import (
    Hyperplane,
    NonnegCone,
    NormBall,
    Point,
    ZeroDirection,
    exact_linesearch,
)
from splitbreg.solver import (
    CSV_COLUMNS,
    Constant,
    Custom,
    Cyclic,
    Difficult,
    Dynamic,
    Exact,
    Inexact,
    MissingLambda,
    RandomUniform,
    Simple,
    SolverConfig,
    history_to_csv,
    preset,
    run,
)


def _equality_config(a, b, objective, rule, **kwargs):
    return SolverConfig(
        objective=objective,
        constraints=[Difficult(DenseMatrix(a), Point(b))],
        step_rule=rule,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# controls
# ---------------------------------------------------------------------------


def test_cyclic_control():
    c = Cyclic()
    assert [c.index(k, 3) for k in range(7)] == [0, 1, 2, 0, 1, 2, 0]


def test_random_uniform_control_deterministic():
    c1 = RandomUniform(seed=42)
    c2 = RandomUniform(seed=42)
    seq1 = [c1.index(k, 5) for k in range(50)]
    seq2 = [c2.index(k, 5) for k in range(50)]
    assert seq1 == seq2
    assert set(seq1) <= set(range(5))
    assert len(set(seq1)) > 1


def test_custom_control_cycles():
    c = Custom([2, 0, 1])
    assert [c.index(k, 3) for k in range(6)] == [2, 0, 1, 2, 0, 1]


# ---------------------------------------------------------------------------
# classical presets
# ---------------------------------------------------------------------------


def test_landweber_scalar_step():
    cfg = preset("landweber", np.array([[1.0]]), np.array([2.0]), max_iterations=1)
    res = run(cfg)
    np.testing.assert_allclose(res.x, [2.0])
    assert res.records[0].step_size == pytest.approx(1.0)


def test_kaczmarz_single_row():
    cfg = preset("kaczmarz", np.array([[1.0, 0.0]]), np.array([2.0]), max_iterations=1)
    res = run(cfg)
    np.testing.assert_allclose(res.x, [2.0, 0.0])


def test_minimal_error_update_formula():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal(2)
    cfg = preset("minimal_error", a, b, max_iterations=1)
    res = run(cfg)
    r = a @ np.zeros(3) - b
    d = a.T @ r
    want = -(np.dot(r, r) / np.dot(d, d)) * d
    np.testing.assert_allclose(res.x, want, atol=1e-12)


def test_sparse_kaczmarz_iterates_are_shrunk():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 8))
    x_true = np.zeros(8)
    x_true[[1, 5]] = [2.0, -1.5]
    b = a @ x_true
    cfg = preset("sparse_kaczmarz", a, b, lam=1.0, max_iterations=400)
    states = []
    res = run(cfg, callback=lambda pair, rec: states.append((pair.x.copy(), pair.x_star.copy())))
    for x, x_star in states:
        np.testing.assert_allclose(x, soft_shrink(x_star, 1.0), atol=1e-12)


def test_preset_validation():
    with pytest.raises(MissingLambda):
        preset("linearized_bregman", np.eye(2), np.zeros(2))
    with pytest.raises(MissingLambda):
        preset("sparse_kaczmarz", np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        preset("gauss_seidel", np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        preset("kaczmarz", np.eye(2), np.zeros(3))


def test_preset_structures():
    a = np.eye(3)
    b = np.ones(3)
    kz = preset("kaczmarz", a, b)
    assert len(kz.constraints) == 3
    assert all(isinstance(c, Simple) for c in kz.constraints)
    assert all(isinstance(c.target, Hyperplane) for c in kz.constraints)
    lb = preset("linearized_bregman", a, b, lam=2.0, step_rule=Dynamic())
    assert isinstance(lb.objective, ElasticNet)
    assert lb.objective.lam == 2.0
    assert isinstance(lb.step_rule, Dynamic)
    assert isinstance(lb.constraints[0], Difficult)
    lw = preset("landweber", a, b)
    assert isinstance(lw.step_rule, Constant)
    assert isinstance(lw.objective, SquaredNorm)


# ---------------------------------------------------------------------------
# step rules
# ---------------------------------------------------------------------------


def test_exact_equals_dynamic_for_squared_norm():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 6))
    b = rng.standard_normal(3)
    steps = {}
    for rule in (Exact(), Dynamic()):
        cfg = _equality_config(a, b, SquaredNorm(6), rule, max_iterations=20)
        res = run(cfg)
        steps[type(rule).__name__] = [r.step_size for r in res.records]
    np.testing.assert_allclose(steps["Exact"], steps["Dynamic"], rtol=0, atol=1e-12)


def test_constant_step_value():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 5))
    cfg = _equality_config(a, np.ones(3), ElasticNet(1.0, 5), Constant(), max_iterations=4)
    res = run(cfg)
    want = 1.0 / np.linalg.svd(a, compute_uv=False)[0] ** 2
    for rec in res.records:
        assert rec.step_size == pytest.approx(want, rel=1e-4)


def test_inexact_rule_brackets_exact():
    rng = np.random.default_rng(4)
    obj = ElasticNet(0.8, 6)
    for _ in range(30):
        a = rng.standard_normal((2, 6))
        b = rng.standard_normal(2)
        x_star = rng.standard_normal(6)
        cfg = SolverConfig(
            objective=obj,
            constraints=[Difficult(DenseMatrix(a), Point(b))],
            step_rule=Inexact(c=2.0),
            max_iterations=1,
            x0_star=x_star,
        )
        res = run(cfg)
        t_in = res.records[0].step_size
        pair = pair_from_dual(obj, x_star)
        y = a @ pair.x
        w = y - b
        d = a.T @ w
        beta = float(np.dot(d, pair.x)) - float(np.dot(w, w))
        t_dyn = np.dot(w, w) / np.dot(d, d)
        t_ex = exact_linesearch(obj, x_star, d, beta, nonneg=True)
        assert t_dyn - 1e-12 <= t_in <= t_ex + 1e-12
        assert t_ex < 2.0 * t_in + 1e-12


def test_inexact_validation():
    with pytest.raises(ValueError):
        Inexact(c=1.0)
    with pytest.raises(ValueError):
        Inexact(p_cap=-1)


def test_unknown_rule_rejected():
    cfg = _equality_config(np.eye(2), np.ones(2), SquaredNorm(2), rule="fast")
    with pytest.raises(TypeError):
        run(cfg)


# ---------------------------------------------------------------------------
# run loop mechanics
# ---------------------------------------------------------------------------


def test_zero_iterations():
    cfg = preset("landweber", np.eye(2), np.ones(2), max_iterations=0)
    res = run(cfg)
    assert res.termination == "max_iterations"
    assert res.records == []
    np.testing.assert_allclose(res.x, np.zeros(2))


def test_feasible_start_terminates_first_pass():
    cfg = preset("landweber", np.eye(2), np.zeros(2), max_iterations=50)
    res = run(cfg)
    assert res.termination == "tolerance"
    assert res.iterations == 1


def test_tolerance_validation():
    cfg = preset("landweber", np.eye(2), np.ones(2), residual_tolerance=0.0)
    with pytest.raises(ValueError):
        run(cfg)
    cfg = preset("landweber", np.eye(2), np.ones(2), residual_tolerance=[1e-8, 1e-8])
    with pytest.raises(ValueError):
        run(cfg)  # one constraint, two tolerances


def test_per_constraint_tolerances():
    # loose tolerance on the second constraint lets the run stop early
    a = np.array([[1.0, 0.0]])
    cfg = SolverConfig(
        objective=SquaredNorm(2),
        constraints=[
            Difficult(DenseMatrix(a), Point(np.array([1.0]))),
            Simple(Hyperplane(np.array([0.0, 1.0]), 0.25)),
        ],
        max_iterations=100,
        residual_tolerance=[1e-10, 1e10],
    )
    res = run(cfg)
    assert res.termination == "tolerance"
    assert abs(res.x[0] - 1.0) <= 1e-9


def test_empty_constraints_rejected():
    cfg = SolverConfig(objective=SquaredNorm(2), constraints=[])
    with pytest.raises(ValueError):
        run(cfg)


def test_simple_constraint_needs_projector():
    cfg = SolverConfig(
        objective=ElasticNet(1.0, 2),
        constraints=[Simple(NormBall(np.zeros(2), 1.0, 2))],
    )
    with pytest.raises(TypeError):
        run(cfg)


def test_violations_at_pass_boundaries():
    a = np.eye(2)
    cfg = SolverConfig(
        objective=SquaredNorm(2),
        constraints=[
            Simple(Hyperplane(np.array([1.0, 0.0]), 1.0)),
            Simple(Hyperplane(np.array([0.0, 1.0]), 2.0)),
        ],
        max_iterations=5,
        residual_tolerance=1e-15,
    )
    res = run(cfg)
    has_violations = [rec.violations is not None for rec in res.records]
    assert has_violations == [False, True, False, True, False][: len(res.records)] or res.termination == "tolerance"


def test_zero_direction_raises():
    a = np.array([[1.0], [1.0]])
    b = np.array([1.0, -1.0])
    cfg = _equality_config(a, b, SquaredNorm(1), Exact())
    with pytest.raises(ZeroDirection):
        run(cfg)


def test_x0_star_used():
    cfg = preset("kaczmarz", np.array([[1.0, 0.0]]), np.array([2.0]), max_iterations=1,
                 x0_star=np.array([0.0, 7.0]))
    res = run(cfg)
    np.testing.assert_allclose(res.x, [2.0, 7.0])


def test_elapsed_ms_monotone():
    cfg = preset("landweber", np.eye(3), np.ones(3), max_iterations=10,
                 residual_tolerance=1e-15)
    res = run(cfg)
    times = [rec.elapsed_ms for rec in res.records]
    assert all(b >= a for a, b in zip(times, times[1:]))


def test_callback_sees_every_step():
    seen = []
    rng = np.random.default_rng(8)
    cfg = preset("landweber", rng.standard_normal((2, 2)), np.ones(2), max_iterations=7,
                 residual_tolerance=1e-18)
    run(cfg, callback=lambda pair, rec: seen.append(rec.k))
    assert seen == list(range(7))


# ---------------------------------------------------------------------------
# equivalence with the classical sparse-recovery iteration
# ---------------------------------------------------------------------------


def test_constant_rule_matches_reference_iteration():
    # with ||A|| = 1 the constant step is 1 and the solver's dual update is the
    # classical iterate v_k; the primal lags the reference x by one index
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 12))
    a /= np.linalg.svd(a, compute_uv=False)[0]
    x_true = np.zeros(12)
    x_true[[2, 7]] = [1.0, -2.0]
    b = a @ x_true
    lam = 0.5

    cfg = _equality_config(a, b, ElasticNet(lam, 12), Constant(), max_iterations=30,
                           residual_tolerance=1e-18)
    trace = []
    res = run(cfg, callback=lambda pair, rec: trace.append((pair.x.copy(), pair.x_star.copy())))
    t = res.records[0].step_size
    assert t == pytest.approx(1.0, rel=1e-5)

    v = np.zeros(12)
    for k in range(30):
        x_ref = soft_shrink(v, lam)
        v = v - t * (a.T @ (a @ x_ref - b))
        np.testing.assert_allclose(trace[k][1], v, atol=1e-10)
        np.testing.assert_allclose(trace[k][0], soft_shrink(v, lam), atol=1e-10)


# ---------------------------------------------------------------------------
# Bregman monotonicity on a small run
# ---------------------------------------------------------------------------


def test_distance_to_solution_decreases():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((5, 10))
    x_true = np.zeros(10)
    x_true[[0, 4, 9]] = [1.0, -1.0, 2.0]
    b = a @ x_true
    obj = ElasticNet(2.0, 10)
    for rule in (Exact(), Dynamic(), Constant()):
        cfg = _equality_config(a, b, obj, rule, max_iterations=60, residual_tolerance=1e-14)
        dists = []

        def watch(pair, rec):
            dists.append(bregman_distance(obj, pair.x, pair.x_star, x_true))

        run(cfg, callback=watch)
        diffs = np.diff(dists)
        assert np.all(diffs <= 1e-9), type(rule).__name__


# ---------------------------------------------------------------------------
# history CSV
# ---------------------------------------------------------------------------


def test_history_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    a = rng.standard_normal((3, 6))
    b = rng.standard_normal(3)
    cfg = preset("kaczmarz", a, b, max_iterations=7, residual_tolerance=1e-18)
    res = run(cfg)
    path = tmp_path / "history.csv"
    history_to_csv(res, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(res.records)
    # simple steps: step_size column is nan, max_violation appears at the pass
    # boundary and is carried forward afterwards
    first = rows[1]
    assert first[0] == "0"
    assert first[2] == "nan"
    assert first[4] == "nan"
    boundary = rows[3 + 1]  # k = 3 = last step of the first pass
    assert boundary[4] != "nan"
    assert float(rows[5][4]) == float(rows[4][4])
    for row, rec in zip(rows[1:], res.records):
        assert float(row[5]) == rec.objective_value


def test_history_csv_difficult_run(tmp_path):
    cfg = preset("landweber", np.eye(2), np.ones(2), max_iterations=3,
                 residual_tolerance=1e-18)
    res = run(cfg)
    path = tmp_path / "h.csv"
    history_to_csv(res, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    for row, rec in zip(rows[1:], res.records):
        assert float(row[2]) == rec.step_size
        assert float(row[3]) == rec.w_norm
        assert float(row[4]) == np.max(rec.violations)
