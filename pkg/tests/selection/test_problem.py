"""Tests for the problem module."""
from dataclasses import replace

import numpy as np
import pytest

from tests.scenes import complete_graph, make_problem, matrices
from viewsel.selection.problem import (
    SelectionConfig,
    WarmStartMode,
    adaptive_nmin,
    build_ilp,
    check_selection,
    dedup_rows,
    matchable_core,
    restrict_to,
    write_lp,
)

CFG = SelectionConfig()


# ─────────────────────────────────────────────────────────────
# SelectionConfig / adaptive_nmin
# ─────────────────────────────────────────────────────────────


class TestSelectionConfig:
    def test_defaults(self):
        assert (CFG.n_vis, CFG.n_match, CFG.n_low, CFG.n_high) == (2, 2, 10, 30)
        assert CFG.n_min_fraction == 0.15
        assert CFG.warm_start_mode is WarmStartMode.HINT

    def test_collects_every_error(self):
        with pytest.raises(ValueError) as exc:
            SelectionConfig(n_low=40, n_vis=0, time_budget=0.0)
        message = str(exc.value)
        assert "n_low" in message and "n_vis" in message and "time_budget" in message

    def test_rejects_fraction_above_one(self):
        with pytest.raises(ValueError, match="n_min_fraction"):
            SelectionConfig(n_min_fraction=1.5)


class TestAdaptiveNmin:
    @pytest.mark.parametrize(
        "n_c, expected",
        [(200, 30), (20, 10), (6, 6), (100, 15), (101, 16), (1, 1)],
    )
    def test_defaults(self, n_c, expected):
        assert adaptive_nmin(n_c, CFG) == expected

    def test_custom_clamp(self):
        cfg = SelectionConfig(n_low=2, n_high=4, n_min_fraction=0.5)
        assert [adaptive_nmin(n, cfg) for n in (1, 3, 6, 50)] == [1, 2, 3, 4]

    def test_empty_cluster(self):
        with pytest.raises(ValueError, match="at least one camera"):
            adaptive_nmin(0, CFG)


# ─────────────────────────────────────────────────────────────
# dedup_rows / build_ilp
# ─────────────────────────────────────────────────────────────


class TestDedupRows:
    def test_identical_rows_collapse(self):
        bits = np.tile([True, False, True], (1000, 1))
        rows, counts = dedup_rows(bits)
        assert rows.tolist() == [[True, False, True]]
        assert counts.tolist() == [1000]

    def test_keeps_distinct_rows(self):
        bits = np.array([[1, 0], [0, 1], [1, 0], [1, 1]], dtype=bool)
        rows, counts = dedup_rows(bits)
        assert {tuple(r) for r in rows.tolist()} == {(True, False), (False, True), (True, True)}
        assert counts.sum() == 4

    def test_wide_rows_survive_packing(self):
        rng = np.random.default_rng(0)
        bits = rng.random((50, 21)) < 0.5
        rows, _ = dedup_rows(bits)
        assert rows.shape[1] == 21
        assert {tuple(r) for r in rows.tolist()} == {tuple(r) for r in bits.tolist()}

    def test_empty(self):
        rows, counts = dedup_rows(np.zeros((0, 4), dtype=bool))
        assert rows.shape == (0, 4) and counts.shape == (0,)


class TestBuildIlp:
    def test_matchability_rows_for_complete_graph(self):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG)
        assert problem.matchability_rows.tolist() == [[-2, 1, 1], [1, -2, 1], [1, 1, -2]]

    def test_shared_pattern_becomes_one_row(self):
        problem, _ = make_problem(complete_graph(3), np.tile([True, True, False], (1000, 1)), CFG)
        assert problem.n_rows == 1
        assert problem.row_multiplicity.tolist() == [1000]
        assert problem.rhs_vis.tolist() == [2]

    def test_point_seen_once_needs_one_view(self):
        problem, _ = make_problem(complete_graph(3), [[False, True, False]], CFG)
        assert problem.rhs_vis.tolist() == [1]

    def test_unseen_points_dropped(self):
        problem, _ = make_problem(complete_graph(3), [[False, False, False], [True, True, True]], CFG)
        assert problem.n_rows == 1

    def test_nmin_from_cluster_size(self):
        problem, _ = make_problem(complete_graph(6), np.ones((1, 6)), CFG)
        assert problem.n_min == 6

    def test_camera_ids_carried(self):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG, first_id=40)
        assert problem.camera_ids == (40, 41, 42)

    def test_mismatched_matrices(self):
        cluster, vis, sim = matrices(complete_graph(3), np.ones((1, 3)))
        with pytest.raises(ValueError, match="do not match"):
            build_ilp(replace(cluster, cameras=(0, 1, 7)), vis, sim, CFG)

    def test_unselected_camera_rows_never_bind(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            upper = np.triu(rng.random((8, 8)) < 0.5, 1)
            problem, _ = make_problem(upper | upper.T, np.ones((1, 8)), CFG)
            x = rng.random(8) < 0.5
            slack = problem.matchability_rows @ x.astype(np.int64)
            assert (slack[~x] >= 0).all()


# ─────────────────────────────────────────────────────────────
# check_selection / matchable_core / restrict_to
# ─────────────────────────────────────────────────────────────


class TestCheckSelection:
    def test_all_selected_is_feasible(self):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG)
        assert check_selection(problem, np.ones(3, dtype=bool)) == []

    def test_reports_each_violation(self):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG, first_id=10)
        violations = check_selection(problem, np.array([True, True, False]))
        assert "selected 2 cameras, need at least 3" in violations
        assert "camera 10: matchability row short by 1" in violations
        assert "camera 11: matchability row short by 1" in violations

    def test_visibility_shortfall(self):
        cfg = SelectionConfig(n_match=0, n_low=1, n_high=1)
        problem, _ = make_problem(np.zeros((3, 3)), [[True, True, False]], cfg)
        violations = check_selection(problem, np.array([False, False, True]))
        assert violations == ["visibility row 0: seen by 0 selected cameras, need 2"]

    def test_wrong_shape(self):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG)
        assert "expected (3,)" in check_selection(problem, np.ones(4, dtype=bool))[0]


class TestMatchableCore:
    def test_path_collapses(self):
        path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=bool)
        problem, _ = make_problem(path, np.ones((1, 3)), CFG)
        assert matchable_core(problem).tolist() == [False, False, False]

    def test_triangle_with_pendant(self):
        graph = np.zeros((4, 4), dtype=bool)
        for a, b in [(0, 1), (1, 2), (0, 2), (0, 3)]:
            graph[a, b] = graph[b, a] = True
        problem, _ = make_problem(graph, np.ones((1, 4)), CFG)
        assert matchable_core(problem).tolist() == [True, True, True, False]

    def test_no_matching_requirement_keeps_all(self):
        cfg = SelectionConfig(n_match=0)
        problem, _ = make_problem(np.zeros((3, 3)), np.ones((1, 3)), cfg)
        assert matchable_core(problem).all()


class TestRestrictTo:
    def test_feasible_problem_is_not_relaxed(self):
        problem, _ = make_problem(complete_graph(4), np.ones((2, 4)), CFG)
        relaxation = restrict_to(problem, matchable_core(problem))
        assert not relaxation.relaxed
        assert relaxation.problem.n_min == problem.n_min

    def test_lowers_nmin_to_selectable_count(self):
        graph = np.zeros((4, 4), dtype=bool)
        graph[:3, :3] = complete_graph(3)
        cfg = SelectionConfig(n_low=4, n_high=4)
        problem, _ = make_problem(graph, np.ones((1, 4)), cfg)
        relaxation = restrict_to(problem, matchable_core(problem))
        assert relaxation.relaxed
        assert relaxation.problem.n_min == 3
        assert relaxation.selectable.tolist() == [True, True, True, False]

    def test_lowers_unreachable_visibility(self):
        graph = np.zeros((4, 4), dtype=bool)
        graph[:3, :3] = complete_graph(3)
        cfg = SelectionConfig(n_low=1, n_high=1)
        problem, _ = make_problem(graph, [[False, False, True, True]], cfg)
        relaxation = restrict_to(problem, matchable_core(problem))
        assert relaxation.relaxed
        assert relaxation.problem.rhs_vis.tolist() == [1]


# ─────────────────────────────────────────────────────────────
# write_lp
# ─────────────────────────────────────────────────────────────


class TestWriteLp:
    def test_sections_and_rows(self, tmp_path):
        problem, _ = make_problem(complete_graph(3), np.ones((1, 3)), CFG, first_id=10)
        text = write_lp(problem, tmp_path / "cluster.lp").read_text()
        lines = text.splitlines()
        assert lines[1] == "Minimize"
        assert " obj: x10 + x11 + x12" in lines
        assert " nmin: x10 + x11 + x12 >= 3" in lines
        assert " match_10: - 2 x10 + x11 + x12 >= 0" in lines
        assert " vis_0: x10 + x11 + x12 >= 2" in lines
        assert lines[-1] == "End"
        assert lines[lines.index("Binary") + 1 :] == [" x10", " x11", " x12", "End"]

    def test_isolated_camera_row(self, tmp_path):
        cfg = SelectionConfig(n_match=0, n_low=1, n_high=1)
        problem, _ = make_problem(np.zeros((2, 2)), np.ones((1, 2)), cfg)
        text = write_lp(problem, tmp_path / "cluster.lp").read_text()
        assert " match_0: 0 x0 >= 0" in text.splitlines()
