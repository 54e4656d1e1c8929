"""Greedy warm start, best-first branch and bound, and the exhaustive oracle."""

import enum
import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from viewsel.selection.problem import (
    SelectionConfig,
    SelectionProblem,
    WarmStartMode,
    matchable_core,
    restrict_to,
)
from viewsel.selection.visibility import VisibilityMatrix

logger = logging.getLogger(__name__)

ORACLE_MAX_VARS = 20
_ORACLE_BATCH = 4096


class SolveStatus(enum.Enum):
    PROVEN_OPTIMAL = "proven_optimal"
    FEASIBLE_BUDGET_EXCEEDED = "feasible_budget_exceeded"
    INFEASIBLE_RELAXED = "infeasible_relaxed"


@dataclass(frozen=True)
class Solution:
    selected: tuple[int, ...]
    objective: int
    status: SolveStatus
    gap: int = 0
    solve_time: float = 0.0
    n_min: int = 0
    excluded: tuple[int, ...] = ()
    nodes: int = 0
    time_capped: bool = False


@dataclass(frozen=True, eq=False)
class WarmStart:
    selection: np.ndarray
    excluded: np.ndarray
    top: np.ndarray
    relaxed: bool = False

    @property
    def objective(self) -> int:
        return int(self.selection.sum())


def _visibility_order(problem: SelectionProblem, vis: VisibilityMatrix | None) -> np.ndarray:
    """Variables by descending visible-point count, ties by ascending camera id."""
    if vis is not None:
        counts = vis.points_per_camera().astype(np.int64)
    else:
        counts = problem.visibility_rows.sum(axis=0).astype(np.int64)
    ids = np.asarray(problem.camera_ids, dtype=np.int64)
    return np.lexsort((ids, -counts))


def _violation_gain(
    x: np.ndarray,
    rows: np.ndarray,
    rhs: np.ndarray,
    adjacency: np.ndarray,
    n_match: int,
    n_min: int,
) -> tuple[int, np.ndarray]:
    """Total violation of ``x`` and, per variable, the reduction from selecting it."""
    xf = x.astype(np.float32)
    deficit = np.maximum(rhs - np.rint(rows @ xf), 0)
    partners = np.rint(adjacency @ xf)
    match_deficit = np.where(x, np.maximum(n_match - partners, 0), 0)
    nmin_deficit = max(n_min - int(x.sum()), 0)
    total = int(deficit.sum() + match_deficit.sum()) + nmin_deficit

    gain = (deficit > 0).astype(np.float32) @ rows
    gain += (match_deficit > 0).astype(np.float32) @ adjacency
    gain -= np.maximum(n_match - partners, 0)
    gain += 1.0 if nmin_deficit > 0 else 0.0
    return total, gain


def greedy_warm_start(
    problem: SelectionProblem, vis: VisibilityMatrix | None = None
) -> WarmStart:
    """Top-``n_min`` cameras by visibility, then greedy repair until feasible.

    Cameras outside the matchable core can never be part of a feasible
    selection; they are excluded (fixed to 0) and reported in ``excluded``.
    """
    selectable = matchable_core(problem)
    relaxation = restrict_to(problem, selectable)
    restricted = relaxation.problem
    order = [i for i in _visibility_order(problem, vis) if selectable[i]]
    top = np.array(order[: restricted.n_min], dtype=np.int64)

    x = np.zeros(problem.n_vars, dtype=bool)
    x[top] = True
    rows = restricted.visibility_rows.astype(np.float32)
    adjacency = (problem.matchability_rows > 0).astype(np.float32)
    rhs = restricted.rhs_vis.astype(np.float32)
    while True:
        total, gain = _violation_gain(
            x, rows, rhs, adjacency, problem.n_match, restricted.n_min
        )
        candidates = selectable & ~x
        if total == 0 or not candidates.any():
            break
        gain = np.where(candidates, gain, -np.inf)
        x[int(np.argmax(gain))] = True

    excluded = ~selectable
    if excluded.any():
        logger.debug(
            "excluded %d cameras without %d matchable partners: %s",
            int(excluded.sum()),
            problem.n_match,
            [problem.camera_ids[i] for i in np.flatnonzero(excluded)],
        )
    return WarmStart(selection=x, excluded=excluded, top=top, relaxed=relaxation.relaxed)


@dataclass(order=True)
class _Node:
    key: tuple[int, int, int]
    fixed1: np.ndarray = field(compare=False)
    fixed0: np.ndarray = field(compare=False)
    coverage: np.ndarray = field(compare=False)
    potential: np.ndarray = field(compare=False)
    partners: np.ndarray = field(compare=False)
    partner_potential: np.ndarray = field(compare=False)

    @property
    def bound(self) -> int:
        return self.key[0]


class _Search:
    """Best-first search state over the restricted problem."""

    def __init__(self, problem: SelectionProblem, selectable: np.ndarray) -> None:
        self.problem = problem
        self.selectable = selectable
        self.rows = problem.visibility_rows
        self.rows_i = problem.visibility_rows.astype(np.int16)
        self.rows_f = problem.visibility_rows.astype(np.float32)
        self.adjacency = problem.matchability_rows > 0
        self.adjacency_i = self.adjacency.astype(np.int16)
        self.adjacency_f = self.adjacency.astype(np.float32)
        self.rhs = problem.rhs_vis.astype(np.int16)
        self.counter = itertools.count()

    def root(self, forced: np.ndarray) -> "_Node | None":
        fixed1 = forced.copy()
        fixed0 = ~self.selectable
        open_ = ~fixed0
        coverage = (self.rows_i[:, fixed1]).sum(axis=1).astype(np.int16)
        potential = (self.rows_i[:, open_]).sum(axis=1).astype(np.int16)
        partners = (self.adjacency_i[:, fixed1]).sum(axis=1).astype(np.int16)
        partner_potential = (self.adjacency_i[:, open_]).sum(axis=1).astype(np.int16)
        return self._make(fixed1, fixed0, coverage, potential, partners, partner_potential, 0)

    def _make(
        self,
        fixed1: np.ndarray,
        fixed0: np.ndarray,
        coverage: np.ndarray,
        potential: np.ndarray,
        partners: np.ndarray,
        partner_potential: np.ndarray,
        depth: int,
    ) -> "_Node | None":
        p = self.problem
        count = int(fixed1.sum())
        n_free = p.n_vars - count - int(fixed0.sum())
        if count + n_free < p.n_min:
            return None
        if (potential < self.rhs).any():
            return None
        if p.n_match > 0 and (partner_potential[fixed1] < p.n_match).any():
            return None
        bound = count + self.deficit(fixed1, coverage, partners, count)
        return _Node(
            key=(bound, -depth, next(self.counter)),
            fixed1=fixed1,
            fixed0=fixed0,
            coverage=coverage,
            potential=potential,
            partners=partners,
            partner_potential=partner_potential,
        )

    def deficit(
        self, fixed1: np.ndarray, coverage: np.ndarray, partners: np.ndarray, count: int
    ) -> int:
        """Largest single-constraint shortfall; each added camera closes at most one unit."""
        worst = max(self.problem.n_min - count, 0)
        if coverage.size:
            worst = max(worst, int((self.rhs - coverage).max()))
        if self.problem.n_match > 0 and fixed1.any():
            worst = max(worst, int((self.problem.n_match - partners[fixed1]).max()))
        return worst

    def branch_variable(self, node: _Node) -> int | None:
        free = ~(node.fixed1 | node.fixed0)
        if not free.any():
            return None
        violated_rows = (node.coverage < self.rhs).astype(np.float32)
        score = violated_rows @ self.rows_f
        if self.problem.n_match > 0:
            short = (node.fixed1 & (node.partners < self.problem.n_match)).astype(np.float32)
            score = score + short @ self.adjacency_f
        score = np.where(free, score, -1.0)
        return int(np.argmax(score))

    def children(self, node: _Node, var: int) -> list["_Node | None"]:
        depth = -node.key[1] + 1
        fixed1 = node.fixed1.copy()
        fixed1[var] = True
        take = self._make(
            fixed1,
            node.fixed0,
            node.coverage + self.rows_i[:, var],
            node.potential,
            node.partners + self.adjacency_i[:, var],
            node.partner_potential,
            depth,
        )
        fixed0 = node.fixed0.copy()
        fixed0[var] = True
        skip = self._make(
            node.fixed1,
            fixed0,
            node.coverage,
            node.potential - self.rows_i[:, var],
            node.partners,
            node.partner_potential - self.adjacency_i[:, var],
            depth,
        )
        return [take, skip]


def solve_bnb(
    problem: SelectionProblem, warm: WarmStart, cfg: SelectionConfig
) -> Solution:
    """Best-first branch and bound with the warm start as initial incumbent.

    The node bound is the selected count plus the largest single-constraint
    deficit. ``cfg.node_limit`` is the stopping rule: node order is fixed, so
    the same problem always yields the same solution. ``cfg.time_budget`` is a
    safety net only; when it fires first the result depends on machine load,
    which is logged and flagged as ``time_capped``.
    """
    started = time.perf_counter()
    selectable = ~warm.excluded
    relaxation = restrict_to(problem, selectable)
    restricted = relaxation.problem
    if relaxation.relaxed:
        logger.warning(
            "selection problem over cameras %s..%s is infeasible; "
            "n_min lowered from %d to %d",
            problem.camera_ids[0] if problem.camera_ids else "-",
            problem.camera_ids[-1] if problem.camera_ids else "-",
            problem.n_min,
            restricted.n_min,
        )

    search = _Search(restricted, selectable)
    forced = np.zeros(problem.n_vars, dtype=bool)
    if cfg.warm_start_mode is WarmStartMode.HARD_FIX:
        forced[warm.top] = True

    incumbent = warm.selection.copy()
    best = int(incumbent.sum())
    heap: list[_Node] = []
    root = search.root(forced)
    if root is not None and root.bound < best:
        heap.append(root)

    expanded = 0
    time_capped = False
    while heap:
        if expanded >= cfg.node_limit:
            break
        if time.perf_counter() - started > cfg.time_budget:
            time_capped = True
            logger.warning(
                "wall-clock cap of %.1fs hit after %d of %d nodes; "
                "the selection may differ between runs",
                cfg.time_budget,
                expanded,
                cfg.node_limit,
            )
            break
        node = heapq.heappop(heap)
        if node.bound >= best:
            continue
        expanded += 1
        count = int(node.fixed1.sum())
        if search.deficit(node.fixed1, node.coverage, node.partners, count) == 0:
            incumbent, best = node.fixed1.copy(), count
            logger.debug("incumbent improved to %d after %d nodes", best, expanded)
            continue
        var = search.branch_variable(node)
        if var is None:
            continue
        for child in search.children(node, var):
            if child is not None and child.bound < best:
                heapq.heappush(heap, child)

    open_bounds = [n.bound for n in heap if n.bound < best]
    exhausted = not open_bounds
    gap = 0 if exhausted else best - min(open_bounds)
    if relaxation.relaxed:
        status = SolveStatus.INFEASIBLE_RELAXED
    elif exhausted:
        status = SolveStatus.PROVEN_OPTIMAL
    else:
        status = SolveStatus.FEASIBLE_BUDGET_EXCEEDED
    return Solution(
        selected=tuple(problem.ids_from_selection(incumbent)),
        objective=best,
        status=status,
        gap=gap,
        solve_time=time.perf_counter() - started,
        n_min=restricted.n_min,
        excluded=tuple(problem.ids_from_selection(warm.excluded)),
        nodes=expanded,
        time_capped=time_capped,
    )


def brute_force_oracle(problem: SelectionProblem) -> Solution | None:
    """Exhaustive minimum-cardinality feasible selection, or ``None`` if none exists.

    Subsets are scanned by size, then lexicographically, so the first
    feasible subset found has the smallest selected-id list among optima.
    """
    n = problem.n_vars
    if n > ORACLE_MAX_VARS:
        raise ValueError(
            f"brute-force oracle refuses {n} variables (limit {ORACLE_MAX_VARS})"
        )
    started = time.perf_counter()
    a_t = problem.matchability_rows.T.astype(np.int64)
    b_t = problem.visibility_rows.T.astype(np.int64)
    for k in range(max(problem.n_min, 0), n + 1):
        combos = itertools.combinations(range(n), k)
        while True:
            batch = list(itertools.islice(combos, _ORACLE_BATCH))
            if not batch:
                break
            x = np.zeros((len(batch), n), dtype=np.int64)
            if k:
                x[np.repeat(np.arange(len(batch)), k), np.array(batch).ravel()] = 1
            ok = ((x @ a_t) >= 0).all(axis=1) & ((x @ b_t) >= problem.rhs_vis).all(axis=1)
            hits = np.flatnonzero(ok)
            if hits.size:
                chosen = batch[int(hits[0])]
                return Solution(
                    selected=tuple(problem.camera_ids[i] for i in chosen),
                    objective=k,
                    status=SolveStatus.PROVEN_OPTIMAL,
                    solve_time=time.perf_counter() - started,
                    n_min=problem.n_min,
                )
    return None


class SelectionSolver(Protocol):
    def solve(
        self, problem: SelectionProblem, vis: VisibilityMatrix, cfg: SelectionConfig
    ) -> Solution: ...


class BranchAndBoundSolver:
    """Default solver: greedy warm start followed by ``solve_bnb``."""

    def solve(
        self, problem: SelectionProblem, vis: VisibilityMatrix, cfg: SelectionConfig
    ) -> Solution:
        warm = greedy_warm_start(problem, vis)
        return solve_bnb(problem, warm, cfg)
