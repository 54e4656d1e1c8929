"""Tests for the solver module."""
import logging
from dataclasses import replace

import numpy as np
import pytest

from tests.scenes import complete_graph, make_problem, random_problem
from viewsel.selection.problem import SelectionConfig, WarmStartMode, check_selection
from viewsel.selection.solver import (
    BranchAndBoundSolver,
    SolveStatus,
    brute_force_oracle,
    greedy_warm_start,
    solve_bnb,
)

BUDGET = {"time_budget": 60.0, "node_limit": 10**6}


# ─────────────────────────────────────────────────────────────
# greedy_warm_start
# ─────────────────────────────────────────────────────────────


class TestGreedyWarmStart:
    def test_top_cameras_already_feasible(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=2, n_high=2)
        bits = [
            [True, True, False, False],
            [True, True, False, False],
            [True, False, True, True],
        ]
        problem, vis = make_problem(complete_graph(4), bits, cfg)
        warm = greedy_warm_start(problem, vis)
        assert warm.selection.tolist() == [True, True, False, False]
        assert warm.top.tolist() == [0, 1]

    def test_repair_adds_views_for_coverage(self):
        cfg = SelectionConfig(n_vis=3, n_match=1, n_low=2, n_high=2)
        problem, vis = make_problem(complete_graph(3), np.ones((1, 3)), cfg)
        warm = greedy_warm_start(problem, vis)
        assert warm.selection.tolist() == [True, True, True]

    def test_ties_broken_by_camera_id(self):
        cfg = SelectionConfig(n_vis=1, n_match=0, n_low=1, n_high=1)
        problem, vis = make_problem(np.zeros((3, 3)), np.ones((1, 3)), cfg, first_id=20)
        warm = greedy_warm_start(problem, vis)
        assert problem.ids_from_selection(warm.selection) == [20]

    def test_excludes_cameras_without_partners(self):
        graph = np.zeros((4, 4), dtype=bool)
        graph[:3, :3] = complete_graph(3)
        cfg = SelectionConfig(n_vis=1, n_match=2, n_low=1, n_high=1)
        problem, vis = make_problem(graph, np.ones((1, 4)), cfg)
        warm = greedy_warm_start(problem, vis)
        assert warm.excluded.tolist() == [False, False, False, True]
        assert not warm.selection[3]
        assert check_selection(problem, warm.selection) == []

    @pytest.mark.parametrize("seed", range(10))
    def test_feasible_on_random_clusters(self, seed):
        rng = np.random.default_rng(seed)
        n = 25
        upper = np.triu(rng.random((n, n)) < 0.6, 1)
        bits = rng.random((80, n)) < 0.3
        problem, vis = make_problem(upper | upper.T, bits, SelectionConfig())
        warm = greedy_warm_start(problem, vis)
        assert warm.relaxed or check_selection(problem, warm.selection) == []


# ─────────────────────────────────────────────────────────────
# solve_bnb / BranchAndBoundSolver
# ─────────────────────────────────────────────────────────────


class TestSolveBnb:
    def test_nmin_equal_to_cluster_size(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=4, n_high=4)
        problem, vis = make_problem(complete_graph(4), np.ones((1, 4)), cfg)
        solution = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert solution.objective == 4
        assert solution.status is SolveStatus.PROVEN_OPTIMAL

    def test_two_of_three(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=2, n_high=2, **BUDGET)
        problem, vis = make_problem(complete_graph(3), np.ones((1, 3)), cfg)
        solution = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert solution.objective == 2
        assert solution.status is SolveStatus.PROVEN_OPTIMAL
        assert solution.gap == 0

    def test_node_limit_reports_budget_exceeded(self):
        # six private points: every camera is needed, but proving it takes many nodes
        cfg = SelectionConfig(n_vis=1, n_match=0, n_low=1, n_high=1, node_limit=1)
        problem, vis = make_problem(np.zeros((6, 6)), np.eye(6), cfg)
        solution = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert solution.status is SolveStatus.FEASIBLE_BUDGET_EXCEEDED
        assert solution.objective == 6
        assert solution.gap > 0
        assert solution.nodes == 1

        proven = solve_bnb(problem, greedy_warm_start(problem, vis), replace(cfg, node_limit=1000))
        assert proven.status is SolveStatus.PROVEN_OPTIMAL
        assert proven.objective == 6
        assert proven.gap == 0
        assert not solution.time_capped and not proven.time_capped

    def test_node_limit_stops_at_the_same_node_every_run(self):
        cfg = SelectionConfig(n_vis=1, n_match=0, n_low=1, n_high=1, node_limit=3, time_budget=60.0)
        problem, vis = make_problem(np.zeros((6, 6)), np.eye(6), cfg)
        runs = [solve_bnb(problem, greedy_warm_start(problem, vis), cfg) for _ in range(5)]
        assert {(r.nodes, r.gap, r.selected, r.time_capped) for r in runs} == {(3, 2, runs[0].selected, False)}
        assert runs[0].status is SolveStatus.FEASIBLE_BUDGET_EXCEEDED

    def test_wall_clock_cap_is_flagged(self, caplog):
        cfg = SelectionConfig(n_vis=1, n_match=0, n_low=1, n_high=1, node_limit=1000, time_budget=1e-9)
        problem, vis = make_problem(np.zeros((6, 6)), np.eye(6), cfg)
        with caplog.at_level(logging.WARNING, logger="viewsel.selection.solver"):
            solution = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert solution.time_capped
        assert solution.status is SolveStatus.FEASIBLE_BUDGET_EXCEEDED
        assert solution.objective == 6
        assert "may differ between runs" in caplog.text

    def test_infeasible_problem_is_relaxed(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=1, n_high=1)
        problem, vis = make_problem(np.zeros((2, 2)), np.ones((1, 2)), cfg)
        solution = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert solution.status is SolveStatus.INFEASIBLE_RELAXED
        assert solution.n_min == 0
        assert solution.excluded == (0, 1)
        assert brute_force_oracle(problem) is None

    def test_hard_fix_keeps_top_cameras(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            problem, vis, cfg = random_problem(rng, int(rng.integers(4, 11)))
            warm = greedy_warm_start(problem, vis)
            if warm.relaxed:
                continue
            hint = solve_bnb(problem, warm, cfg)
            fixed = solve_bnb(problem, warm, replace(cfg, warm_start_mode=WarmStartMode.HARD_FIX))
            assert fixed.objective >= hint.objective
            chosen = problem.selection_from_ids(fixed.selected)
            if fixed.objective < warm.objective:
                assert chosen[warm.top].all()
            assert check_selection(problem, chosen) == []

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        problem, vis, cfg = random_problem(rng, 12)
        cfg = replace(cfg, node_limit=50)
        first = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        second = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        assert (first.selected, first.status, first.gap) == (second.selected, second.status, second.gap)

    def test_solver_protocol_wraps_greedy_and_search(self):
        rng = np.random.default_rng(21)
        problem, vis, cfg = random_problem(rng, 9)
        expected = solve_bnb(problem, greedy_warm_start(problem, vis), cfg)
        actual = BranchAndBoundSolver().solve(problem, vis, cfg)
        assert (actual.selected, actual.status) == (expected.selected, expected.status)


# ─────────────────────────────────────────────────────────────
# brute_force_oracle
# ─────────────────────────────────────────────────────────────


class TestBruteForceOracle:
    def test_single_camera(self):
        cfg = SelectionConfig(n_vis=1, n_match=0, n_low=1, n_high=1)
        problem, _ = make_problem(np.zeros((1, 1)), np.ones((1, 1)), cfg, first_id=3)
        solution = brute_force_oracle(problem)
        assert solution is not None
        assert solution.selected == (3,)
        assert solution.objective == 1

    def test_two_unmatched_cameras_infeasible(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=1, n_high=1)
        problem, _ = make_problem(np.zeros((2, 2)), np.ones((1, 2)), cfg)
        assert brute_force_oracle(problem) is None

    def test_smallest_ids_among_optima(self):
        cfg = SelectionConfig(n_vis=1, n_match=1, n_low=2, n_high=2)
        problem, _ = make_problem(complete_graph(4), np.ones((1, 4)), cfg)
        assert brute_force_oracle(problem).selected == (0, 1)

    def test_refuses_large_problems(self):
        problem, _ = make_problem(complete_graph(21), np.ones((1, 21)), SelectionConfig())
        with pytest.raises(ValueError, match="refuses 21 variables"):
            brute_force_oracle(problem)

    @pytest.mark.parametrize("seed", range(5))
    def test_never_worse_than_greedy(self, seed):
        rng = np.random.default_rng(100 + seed)
        problem, vis, _ = random_problem(rng, 10)
        warm = greedy_warm_start(problem, vis)
        oracle = brute_force_oracle(problem)
        if oracle is not None:
            assert oracle.objective <= warm.objective

    def test_raising_nmin_never_lowers_optimum(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            problem, _, _ = random_problem(rng, int(rng.integers(3, 10)))
            previous = None
            for n_min in range(problem.n_vars + 1):
                solution = brute_force_oracle(replace(problem, n_min=n_min))
                if solution is None:
                    break
                if previous is not None:
                    assert solution.objective >= previous
                previous = solution.objective

    def test_raising_n_vis_never_lowers_optimum(self):
        rng = np.random.default_rng(78)
        for _ in range(30):
            n = int(rng.integers(3, 10))
            upper = np.triu(rng.random((n, n)) < rng.uniform(0.2, 0.9), 1)
            binary = upper | upper.T
            bits = rng.random((int(rng.integers(1, 3 * n + 1)), n)) < rng.uniform(0.15, 0.6)
            n_low = int(rng.integers(1, n + 1))
            cfg = SelectionConfig(n_match=int(rng.integers(0, 3)), n_low=n_low, n_high=n_low, **BUDGET)

            objectives = []
            for n_vis in (1, 2, 3):
                problem, _ = make_problem(binary, bits, replace(cfg, n_vis=n_vis))
                solution = brute_force_oracle(problem)
                objectives.append(None if solution is None else solution.objective)
            feasible = [o for o in objectives if o is not None]
            assert objectives[: len(feasible)] == feasible
            assert feasible == sorted(feasible)


# ─────────────────────────────────────────────────────────────
# Agreement with the oracle
# ─────────────────────────────────────────────────────────────


class TestOracleAgreement:
    @pytest.mark.parametrize("seed", range(4))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(60):
            problem, vis, cfg = random_problem(rng, int(rng.integers(3, 13)))
            warm = greedy_warm_start(problem, vis)
            solution = solve_bnb(problem, warm, cfg)
            oracle = brute_force_oracle(problem)
            if oracle is None:
                assert solution.status is SolveStatus.INFEASIBLE_RELAXED
                continue
            assert solution.status is SolveStatus.PROVEN_OPTIMAL
            assert solution.objective == oracle.objective
            assert oracle.objective <= solution.objective <= warm.objective
            assert check_selection(problem, problem.selection_from_ids(solution.selected)) == []
