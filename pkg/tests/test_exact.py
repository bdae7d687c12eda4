import numpy as np
import pytest

from tspo.barrier import RelaxedLp, relax
from tspo.errors import NodeLimitExceeded, TooLarge
from tspo.exact import Status, enumerate_binary, solve_lp_exact, solve_milp_bnb
from tspo.milp import StandardFormMilp, check_feasibility
from tspo.testutil import RandomLpSpec, gen_feasible_lp, vertex_enumerate_lp


def knapsack_milp(f, s, cap):
    d = len(f)
    return StandardFormMilp(
        c=-np.asarray(f, dtype=float),
        A=np.zeros((0, d)),
        b=[],
        G=np.vstack([-np.asarray(s, dtype=float)[None, :], -np.eye(d)]),
        h=np.concatenate([[-float(cap)], -np.ones(d)]),
        int_vars=frozenset(range(d)),
    )


class TestSolveLpExact:
    def test_hand_lp(self):
        lp = RelaxedLp([2.0, 3.0], np.zeros((0, 2)), [], [[1.0, 1.0]], [1.0])
        sol = solve_lp_exact(lp)
        assert sol.status is Status.OPTIMAL
        assert np.allclose(sol.x, [1.0, 0.0], atol=1e-6)
        assert sol.objective == pytest.approx(2.0, abs=1e-8)

    def test_degenerate_tie_objective_only(self):
        lp = RelaxedLp([1.0, 1.0], np.zeros((0, 2)), [], [[1.0, 1.0]], [1.0])
        sol = solve_lp_exact(lp)
        assert sol.objective == pytest.approx(1.0, abs=1e-8)

    def test_random_lps_match_vertex_enumeration(self):
        for seed in range(30):
            lp, _ = gen_feasible_lp(RandomLpSpec(d=4, p=1, q=5), seed)
            a = solve_lp_exact(lp)
            b = vertex_enumerate_lp(lp)
            assert a.status is Status.OPTIMAL and b.status is Status.OPTIMAL
            assert a.objective == pytest.approx(b.objective, abs=1e-6)

    def test_solution_feasible_per_checker(self):
        for seed in range(10):
            lp, _ = gen_feasible_lp(RandomLpSpec(d=4, p=2, q=4), seed + 40)
            sol = solve_lp_exact(lp)
            m = StandardFormMilp(lp.c, lp.A, lp.b, lp.G, lp.h)
            assert check_feasibility(m, sol.x, tol=1e-6).feasible

    def test_infeasible_and_unbounded(self):
        bad = RelaxedLp([1.0], np.zeros((0, 1)), [], [[1.0], [-1.0]], [1.0, 0.0])
        assert solve_lp_exact(bad).status is Status.INFEASIBLE
        ub = RelaxedLp([-1.0], np.zeros((0, 1)), [], [[1.0]], [1.0])
        assert solve_lp_exact(ub).status is Status.UNBOUNDED

    def test_presolve_fixed_variables(self):
        # x0 pinned to 0 by opposing singleton rows; x1 pinned to 1
        lp = RelaxedLp(
            [1.0, -2.0, 1.0],
            np.zeros((0, 3)),
            [],
            [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
            [0.0, 1.0, -1.0, 0.5],
        )
        sol = solve_lp_exact(lp)
        assert sol.status is Status.OPTIMAL
        assert sol.x[0] == pytest.approx(0.0, abs=1e-9)
        assert sol.x[1] == pytest.approx(1.0, abs=1e-9)
        assert sol.x[2] == pytest.approx(0.5, abs=1e-6)


class TestBranchAndBound:
    def test_two_item_hand_case(self):
        sol = solve_milp_bnb(knapsack_milp([10, 20], [6, 6], 10))
        assert np.allclose(sol.x, [0.0, 1.0])
        assert sol.objective == pytest.approx(-20.0, abs=1e-9)

    def test_integral_lp_needs_one_node(self):
        # LP optimum already integral: assignment-style structure
        m = StandardFormMilp(
            c=[1.0, 2.0], A=[[1.0, 1.0]], b=[1.0],
            G=np.vstack([-np.eye(2)]), h=-np.ones(2), int_vars=frozenset({0, 1}),
        )
        sol = solve_milp_bnb(m)
        assert sol.node_count == 1
        assert sol.objective == pytest.approx(1.0, abs=1e-8)

    def test_random_knapsacks_match_enumeration(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            m = knapsack_milp(rng.uniform(1, 20, 10), rng.uniform(1, 15, 10), float(rng.uniform(10, 60)))
            a = solve_milp_bnb(m)
            b = enumerate_binary(m)
            assert a.status is b.status is Status.OPTIMAL
            assert a.objective == pytest.approx(b.objective, abs=1e-9)

    def test_node_limit(self):
        rng = np.random.default_rng(1)
        m = knapsack_milp(rng.uniform(1, 20, 10), rng.uniform(1, 15, 10), 40.0)
        with pytest.raises(NodeLimitExceeded):
            solve_milp_bnb(m, node_limit=1)

    def test_bound_log_invariants(self):
        rng = np.random.default_rng(5)
        m = knapsack_milp(rng.uniform(1, 20, 8), rng.uniform(1, 15, 8), 30.0)
        log = []
        sol = solve_milp_bnb(m, log=log)
        assert len(log) == sol.node_count
        # every LP bound is at or below the proven optimum of its subtree,
        # so the global minimum of bounds is at or below the final objective
        assert min(e["bound"] for e in log) <= sol.objective + 1e-9
        for e in log:
            if e["integral"]:
                assert e["bound"] <= sol.objective + 1e-9

    def test_lp_relaxation_bounds_milp(self):
        for seed in range(10):
            rng = np.random.default_rng(seed + 100)
            m = knapsack_milp(rng.uniform(1, 20, 6), rng.uniform(1, 15, 6), 25.0)
            lp_obj = solve_lp_exact(relax(m)).objective
            milp_obj = solve_milp_bnb(m).objective
            assert lp_obj <= milp_obj + 1e-9

    def test_infeasible_milp(self):
        m = StandardFormMilp(
            c=[1.0], A=np.zeros((0, 1)), b=[], G=[[1.0], [-1.0]], h=[2.0, -0.5], int_vars=frozenset({0})
        )
        assert solve_milp_bnb(m).status is Status.INFEASIBLE

    def test_mixed_integer_continuous(self):
        # one binary on/off switch with a continuous flow variable
        m = StandardFormMilp(
            c=[5.0, 1.0],
            A=np.zeros((0, 2)),
            b=[],
            G=np.array([[0.0, 1.0], [10.0, -1.0], [-1.0, 0.0]]),
            h=np.array([3.0, 0.0, -1.0]),
            int_vars=frozenset({0}),
        )
        sol = solve_milp_bnb(m)
        # flow >= 3 requires the switch on (flow <= 10 * switch)
        assert sol.status is Status.OPTIMAL
        assert np.allclose(sol.x, [1.0, 3.0], atol=1e-6)


class TestEnumerateBinary:
    def test_single_item_too_big(self):
        m = knapsack_milp([5.0], [2.0], 1.0)
        sol = enumerate_binary(m)
        assert sol.objective == pytest.approx(0.0)
        assert np.allclose(sol.x, [0.0])

    def test_empty_feasible_set(self):
        d = 2
        m = StandardFormMilp(
            c=np.zeros(d), A=np.zeros((0, d)), b=[], G=[[1.0, 1.0], [-1.0, -1.0]], h=[3.0, 0.0],
            int_vars=frozenset(range(d)),
        )
        assert enumerate_binary(m).status is Status.INFEASIBLE

    def test_one_nurse_one_day_hand_roster(self):
        # one nurse, one day, two shifts; exactly one shift must be taken and
        # the demand of shift 0 requires the nurse there
        m = StandardFormMilp(
            c=[-3.0, -4.0],  # prefers shift 1
            A=[[1.0, 1.0]],
            b=[1.0],
            G=np.vstack([[[10.0, 0.0]], -np.eye(2)]),
            h=np.concatenate([[5.0], -np.ones(2)]),
            int_vars=frozenset({0, 1}),
        )
        sol = enumerate_binary(m)
        assert np.allclose(sol.x, [1.0, 0.0])
        assert sol.objective == pytest.approx(-3.0)

    def test_too_large(self):
        m = knapsack_milp(np.ones(21), np.ones(21), 5.0)
        with pytest.raises(TooLarge):
            enumerate_binary(m)

    def test_bnb_agrees_exactly_on_small_instances(self):
        for seed in range(20):
            rng = np.random.default_rng(seed + 77)
            m = knapsack_milp(rng.uniform(1, 9, 7), rng.uniform(1, 6, 7), float(rng.uniform(5, 20)))
            assert solve_milp_bnb(m).objective == pytest.approx(enumerate_binary(m).objective, abs=1e-9)
