import numpy as np
import pytest

from gridfriendly.lp import LpError, from_arrays, max_violation, solve_lp
from gridfriendly.milp import INT_TOL, MixedProgram, NodeLimitError, solve_mip

from oracles import enumerate_binaries, random_box_lp, random_mixed, rel_close


def test_no_binaries_matches_lp():
    rng = np.random.default_rng(0)
    for _ in range(20):
        lp = random_box_lp(rng)
        mip = solve_mip(MixedProgram(lp, ()))
        ref = solve_lp(lp)
        assert mip.status == ref.status
        if ref.optimal:
            assert mip.objective_value == ref.objective_value
            assert np.array_equal(mip.x, ref.x)
            assert mip.nodes_explored == 1


def test_infeasible_root_explores_one_node():
    lp = from_arrays([1.0, 1.0], [(0, 1), (0, 1)], [([1, 1], ">=", 3)])
    sol = solve_mip(MixedProgram(lp, (0, 1)))
    assert sol.status == "infeasible"
    assert sol.nodes_explored == 1


def test_knapsack():
    # max 5a + 4b + 3c with 2a + 3b + c <= 5: a and b fit, a b c together do not
    lp = from_arrays([-5.0, -4.0, -3.0], [(0, 1)] * 3, [([2, 3, 1], "<=", 5)])
    sol = solve_mip(MixedProgram(lp, (0, 1, 2)))
    assert sol.optimal
    assert sol.objective_value == pytest.approx(-9.0)
    assert list(sol.x) == [1.0, 1.0, 0.0]


def test_random_instances_match_enumeration():
    rng = np.random.default_rng(99)
    seen = set()
    for trial in range(60):
        k = int(rng.integers(2, 13))
        lp, binary = random_mixed(rng, k=k)
        status, value, _ = enumerate_binaries(lp, binary)
        sol = solve_mip(MixedProgram(lp, binary))
        seen.add(status)
        assert sol.status == status, trial
        if status == "optimal":
            assert rel_close(sol.objective_value, value), (trial, sol.objective_value, value)
            assert max_violation(lp, sol.x) <= 1e-7
            assert all(sol.x[j] in (0.0, 1.0) for j in binary)
    assert "optimal" in seen


def test_incumbents_never_increase():
    rng = np.random.default_rng(5)
    for _ in range(20):
        lp, binary = random_mixed(rng, k=10, extra=4)
        sol = solve_mip(MixedProgram(lp, binary))
        assert all(b < a for a, b in zip(sol.incumbents, sol.incumbents[1:]))
        if sol.optimal:
            assert sol.incumbents[-1] == sol.objective_value


def test_node_count_deterministic():
    lp, binary = random_mixed(np.random.default_rng(11), k=12, extra=4)
    a = solve_mip(MixedProgram(lp, binary))
    b = solve_mip(MixedProgram(lp, binary))
    assert a.nodes_explored == b.nodes_explored
    assert np.array_equal(a.x, b.x)


def test_binary_bounds_validated():
    lp = from_arrays([1.0], [(0, 2)])
    with pytest.raises(LpError, match="outside"):
        solve_mip(MixedProgram(lp, (0,)))


def test_node_limit(monkeypatch):
    import gridfriendly.milp as milp

    lp, binary = random_mixed(np.random.default_rng(2), k=8, extra=4)
    calls = []
    real = milp.solve_lp

    def counting(prog):
        calls.append(1)
        if len(calls) > 3:
            raise NodeLimitError("stop")
        return real(prog)

    monkeypatch.setattr(milp, "solve_lp", counting)
    with pytest.raises(NodeLimitError):
        solve_mip(MixedProgram(lp, binary))


def test_int_tol():
    assert INT_TOL == 1e-6
