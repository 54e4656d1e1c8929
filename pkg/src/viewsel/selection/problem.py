"""The per-cluster view-selection program.

    min   sum_i x_i
    s.t.  sum_i x_i >= n_min
          A_i . x  >= 0          for every camera i   (A = S~ - n_match * I)
          B_j . x  >= rhs_j      for every distinct visibility row j
          x_i in {0, 1}
"""

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from viewsel.clustering.grid import Cluster
from viewsel.selection.visibility import SimilarityMatrix, VisibilityMatrix

_NMIN_EPS = 1e-9


class WarmStartMode(enum.Enum):
    HINT = "hint"
    HARD_FIX = "hardfix"


@dataclass(frozen=True)
class SelectionConfig:
    n_vis: int = 2
    n_match: int = 2
    n_low: int = 10
    n_high: int = 30
    n_min_fraction: float = 0.15
    time_budget: float = 10.0
    node_limit: int = 2000
    warm_start_mode: WarmStartMode = WarmStartMode.HINT

    def __post_init__(self) -> None:
        errors = []
        if not 1 <= self.n_low <= self.n_high:
            errors.append(
                f"need 1 <= n_low <= n_high, got n_low={self.n_low}, n_high={self.n_high}"
            )
        if self.n_vis < 1:
            errors.append(f"n_vis must be at least 1, got {self.n_vis}")
        if self.n_match < 0:
            errors.append(f"n_match must be non-negative, got {self.n_match}")
        if not 0 < self.n_min_fraction <= 1:
            errors.append(f"n_min_fraction must lie in (0, 1], got {self.n_min_fraction}")
        if self.time_budget <= 0:
            errors.append(f"time_budget must be positive, got {self.time_budget}")
        if self.node_limit < 1:
            errors.append(f"node_limit must be at least 1, got {self.node_limit}")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True, eq=False)
class SelectionProblem:
    n_vars: int
    matchability_rows: np.ndarray
    visibility_rows: np.ndarray
    rhs_vis: np.ndarray
    n_min: int
    camera_ids: tuple[int, ...]
    n_match: int
    row_multiplicity: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.n_vars
        if self.matchability_rows.shape != (n, n):
            raise ValueError(
                f"matchability rows must be {n}x{n}, got {self.matchability_rows.shape}"
            )
        if self.visibility_rows.ndim != 2 or self.visibility_rows.shape[1] != n:
            raise ValueError(
                f"visibility rows must have {n} columns, got {self.visibility_rows.shape}"
            )
        if self.rhs_vis.shape != (self.visibility_rows.shape[0],):
            raise ValueError("rhs_vis must hold one entry per visibility row")
        if len(self.camera_ids) != n:
            raise ValueError(f"need {n} camera ids, got {len(self.camera_ids)}")

    @property
    def n_rows(self) -> int:
        return int(self.visibility_rows.shape[0])

    def selection_from_ids(self, camera_ids: Iterable[int]) -> np.ndarray:
        position = {cam: i for i, cam in enumerate(self.camera_ids)}
        x = np.zeros(self.n_vars, dtype=bool)
        for cam in camera_ids:
            x[position[cam]] = True
        return x

    def ids_from_selection(self, x: np.ndarray) -> list[int]:
        return [self.camera_ids[i] for i in np.flatnonzero(x)]


def adaptive_nmin(n_c: int, cfg: SelectionConfig) -> int:
    """``min(n_c, clamp(ceil(fraction * n_c), n_low, n_high))``."""
    if n_c < 1:
        raise ValueError(f"cluster must hold at least one camera, got {n_c}")
    raw = math.ceil(cfg.n_min_fraction * n_c - _NMIN_EPS)
    return min(n_c, max(cfg.n_low, min(cfg.n_high, raw)))


def dedup_rows(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows of a boolean matrix (lexicographic order) and their multiplicities."""
    n_cols = bits.shape[1]
    if bits.shape[0] == 0:
        return np.zeros((0, n_cols), dtype=bool), np.zeros(0, dtype=np.int64)
    packed = np.packbits(bits, axis=1)
    unique, counts = np.unique(packed, axis=0, return_counts=True)
    rows = np.unpackbits(unique, axis=1, count=n_cols).astype(bool)
    return rows, counts.astype(np.int64)


def build_ilp(
    cluster: Cluster,
    vis: VisibilityMatrix,
    sim: SimilarityMatrix,
    cfg: SelectionConfig,
) -> SelectionProblem:
    n = len(cluster.cameras)
    if vis.camera_ids != tuple(cluster.cameras) or sim.camera_ids != vis.camera_ids:
        raise ValueError(
            f"cluster {cluster.id}: matrices do not match the cluster's cameras"
        )
    matchability = sim.binary.astype(np.int64) - cfg.n_match * np.eye(n, dtype=np.int64)
    rows, multiplicity = dedup_rows(vis.bits)
    popcount = rows.sum(axis=1)
    keep = popcount > 0
    rows, multiplicity, popcount = rows[keep], multiplicity[keep], popcount[keep]
    return SelectionProblem(
        n_vars=n,
        matchability_rows=matchability,
        visibility_rows=rows,
        rhs_vis=np.minimum(cfg.n_vis, popcount).astype(np.int64),
        n_min=adaptive_nmin(n, cfg),
        camera_ids=tuple(cluster.cameras),
        n_match=cfg.n_match,
        row_multiplicity=multiplicity,
    )


def check_selection(problem: SelectionProblem, x: np.ndarray) -> list[str]:
    """Every violated constraint of ``problem`` under selection ``x``, as messages."""
    x = np.asarray(x, dtype=bool)
    if x.shape != (problem.n_vars,):
        return [f"selection has shape {x.shape}, expected ({problem.n_vars},)"]
    violations = []
    count = int(x.sum())
    if count < problem.n_min:
        violations.append(f"selected {count} cameras, need at least {problem.n_min}")
    slack = problem.matchability_rows @ x.astype(np.int64)
    for i in np.flatnonzero(slack < 0):
        violations.append(
            f"camera {problem.camera_ids[i]}: matchability row short by {-int(slack[i])}"
        )
    coverage = problem.visibility_rows.astype(np.int64) @ x.astype(np.int64)
    for j in np.flatnonzero(coverage < problem.rhs_vis):
        violations.append(
            f"visibility row {j}: seen by {int(coverage[j])} selected cameras, "
            f"need {int(problem.rhs_vis[j])}"
        )
    return violations


def matchable_core(problem: SelectionProblem) -> np.ndarray:
    """Cameras that can hold ``n_match`` selected partners in some selection.

    Repeatedly removes cameras with fewer than ``n_match`` matchable partners
    among the remaining ones; anything removed is 0 in every feasible solution.
    """
    adjacency = problem.matchability_rows > 0
    alive = np.ones(problem.n_vars, dtype=bool)
    if problem.n_match <= 0:
        return alive
    while True:
        degree = adjacency[:, alive].sum(axis=1)
        weak = alive & (degree < problem.n_match)
        if not weak.any():
            return alive
        alive &= ~weak


@dataclass(frozen=True, eq=False)
class Relaxation:
    problem: SelectionProblem
    selectable: np.ndarray
    relaxed: bool


def restrict_to(problem: SelectionProblem, selectable: np.ndarray) -> Relaxation:
    """Fix non-selectable variables to 0 and re-clamp what they make unreachable.

    ``relaxed`` is set when ``n_min`` or any visibility requirement had to be
    lowered, which happens exactly when the original problem is infeasible.
    """
    rows = problem.visibility_rows & selectable[None, :]
    popcount = rows.sum(axis=1)
    rhs = np.minimum(problem.rhs_vis, popcount)
    keep = popcount > 0
    n_min = min(problem.n_min, int(selectable.sum()))
    relaxed = n_min < problem.n_min or bool((rhs < problem.rhs_vis).any())
    multiplicity = (
        problem.row_multiplicity[keep] if problem.row_multiplicity is not None else None
    )
    restricted = SelectionProblem(
        n_vars=problem.n_vars,
        matchability_rows=problem.matchability_rows,
        visibility_rows=rows[keep],
        rhs_vis=rhs[keep],
        n_min=n_min,
        camera_ids=problem.camera_ids,
        n_match=problem.n_match,
        row_multiplicity=multiplicity,
    )
    return Relaxation(problem=restricted, selectable=selectable.copy(), relaxed=relaxed)


def write_lp(problem: SelectionProblem, path: Path | str) -> Path:
    """Dump the program in CPLEX LP format for cross-checking with external solvers."""

    def var(i: int) -> str:
        return f"x{problem.camera_ids[i]}"

    def linear(coefficients: np.ndarray) -> str:
        terms = []
        for i in np.flatnonzero(coefficients):
            c = int(coefficients[i])
            sign = "-" if c < 0 else "+"
            magnitude = "" if abs(c) == 1 else f"{abs(c)} "
            terms.append(f"{sign} {magnitude}{var(i)}")
        text = " ".join(terms) if terms else f"0 {var(0)}"
        return text[2:] if text.startswith("+ ") else text

    ones = np.ones(problem.n_vars, dtype=np.int64)
    lines = ["\\ view selection", "Minimize", f" obj: {linear(ones)}", "Subject To"]
    lines.append(f" nmin: {linear(ones)} >= {problem.n_min}")
    for i in range(problem.n_vars):
        lines.append(f" match_{problem.camera_ids[i]}: {linear(problem.matchability_rows[i])} >= 0")
    for j in range(problem.n_rows):
        row = problem.visibility_rows[j].astype(np.int64)
        lines.append(f" vis_{j}: {linear(row)} >= {int(problem.rhs_vis[j])}")
    lines.append("Binary")
    lines.extend(f" {var(i)}" for i in range(problem.n_vars))
    lines.append("End")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
