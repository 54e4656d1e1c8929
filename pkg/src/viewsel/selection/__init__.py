"""View selection: visibility matrices, the selection program and its solvers."""

from viewsel.selection.problem import (
    SelectionConfig,
    SelectionProblem,
    WarmStartMode,
    adaptive_nmin,
    build_ilp,
    check_selection,
    matchable_core,
    write_lp,
)
from viewsel.selection.solver import (
    BranchAndBoundSolver,
    SelectionSolver,
    Solution,
    SolveStatus,
    WarmStart,
    brute_force_oracle,
    greedy_warm_start,
    solve_bnb,
)
from viewsel.selection.visibility import (
    SimilarityMatrix,
    VisibilityMatrix,
    build_similarity,
    build_visibility_matrix,
    dump_bitmap,
)

__all__ = [
    "BranchAndBoundSolver",
    "SelectionConfig",
    "SelectionProblem",
    "SelectionSolver",
    "SimilarityMatrix",
    "Solution",
    "SolveStatus",
    "VisibilityMatrix",
    "WarmStart",
    "WarmStartMode",
    "adaptive_nmin",
    "brute_force_oracle",
    "build_ilp",
    "build_similarity",
    "build_visibility_matrix",
    "check_selection",
    "dump_bitmap",
    "greedy_warm_start",
    "matchable_core",
    "solve_bnb",
    "write_lp",
]
