import numpy as np
import pytest

from gridfriendly.lp import (
    FEAS_TOL,
    INF,
    IterationLimitError,
    LinearProgram,
    LpError,
    from_arrays,
    max_violation,
    parse_dump,
    solve_lp,
)

from oracles import random_box_lp, rel_close, vertex_enumeration


def dual_bound(lp: LinearProgram, y: np.ndarray) -> float:
    """Lagrangian lower bound from row multipliers ``y`` on a box-bounded LP."""
    a = lp.dense()
    b = np.array([r.rhs for r in lp.rows])
    d = lp.objective - a.T @ y
    return float(b @ y + np.sum(np.where(d > 0, d * lp.lower, d * lp.upper)))


def test_bound_only():
    sol = solve_lp(from_arrays([-1.0], [(0.0, 1.0)]))
    assert sol.optimal
    assert sol.x[0] == 1.0 and sol.objective_value == -1.0


def test_symmetric_cover():
    sol = solve_lp(from_arrays([1.0, 1.0], [(0, 5), (0, 5)], [([1, 1], ">=", 2)]))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(2.0, abs=1e-12)
    assert max_violation(from_arrays([1.0, 1.0], [(0, 5), (0, 5)], [([1, 1], ">=", 2)]), sol.x) <= FEAS_TOL


def test_equality_and_free_variables():
    # min x - y with x - y = 3 and x + y <= 10, y free
    lp = from_arrays([1.0, -1.0], [(0, INF), (-INF, INF)], [([1, -1], "=", 3), ([1, 1], "<=", 10)])
    sol = solve_lp(lp)
    assert sol.optimal and sol.objective_value == pytest.approx(3.0)


def test_infeasible():
    lp = from_arrays([1.0], [(0, 1)], [([1], ">=", 2)])
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = from_arrays([-1.0, 0.0], [(0, INF), (0, INF)], [([1, -1], "<=", 1)])
    assert solve_lp(lp).status == "unbounded"
    assert solve_lp(from_arrays([-1.0], [(0, INF)])).status == "unbounded"


def test_empty_row_checked():
    lp = from_arrays([1.0], [(0, 1)])
    lp.add_row({}, ">=", 1.0)
    assert solve_lp(lp).status == "infeasible"


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(20240611)
    statuses = set()
    for _ in range(200):
        lp = random_box_lp(rng)
        status, value = vertex_enumeration(lp)
        sol = solve_lp(lp)
        statuses.add(status)
        assert sol.status == status
        if status == "optimal":
            assert rel_close(sol.objective_value, value)
            assert max_violation(lp, sol.x) <= FEAS_TOL
    assert statuses == {"optimal", "infeasible"}


def test_duals_certify_optimum():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(100):
        lp = random_box_lp(rng)
        sol = solve_lp(lp)
        if not sol.optimal:
            continue
        y = sol.duals
        for row, v in zip(lp.rows, y):
            if row.relation == "<=":
                assert v <= 1e-9
            elif row.relation == ">=":
                assert v >= -1e-9
        assert rel_close(dual_bound(lp, y), sol.objective_value)
        checked += 1
    assert checked > 50


def test_deterministic():
    lp = random_box_lp(np.random.default_rng(3))
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.status == b.status and a.iterations == b.iterations
    assert np.array_equal(a.x, b.x, equal_nan=True)


def test_dump_round_trip():
    lp = from_arrays([1.0, -2.5], [(0, INF), (-INF, 4)], [([1, 1], "<=", 3.25), ([0, 1], ">=", -1)])
    again = parse_dump(lp.dump())
    assert again.dump() == lp.dump()
    assert solve_lp(again).objective_value == solve_lp(lp).objective_value


def test_dump_rejects_garbage():
    with pytest.raises(LpError, match="line 1"):
        parse_dump("bogus 1\n")


def test_dimension_mismatch():
    lp = LinearProgram(np.zeros(3), np.zeros(2), np.ones(3))
    with pytest.raises(LpError, match="dimension mismatch"):
        solve_lp(lp)


def test_row_index_out_of_range():
    lp = from_arrays([1.0], [(0, 1)])
    lp.add_row({4: 1.0}, "<=", 1)
    with pytest.raises(LpError, match="references variable 4"):
        solve_lp(lp)


def test_crossed_bounds():
    with pytest.raises(LpError, match="lower bound"):
        solve_lp(from_arrays([1.0], [(2, 1)]))


def test_iteration_limit(monkeypatch):
    import gridfriendly.lp as lpmod

    original = lpmod._Simplex.__init__

    def tiny_limit(self, *args):
        args = list(args)
        args[7] = 1  # max_iter
        original(self, *args)

    monkeypatch.setattr(lpmod._Simplex, "__init__", tiny_limit)
    lp = from_arrays([-1.0, -1.0], [(0, 5), (0, 5)], [([1, 2], "<=", 6), ([3, 1], "<=", 9)])
    with pytest.raises(IterationLimitError):
        solve_lp(lp)
