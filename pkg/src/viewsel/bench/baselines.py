"""Cost baselines: the full co-visibility matrix and maximal-clique enumeration."""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from viewsel.model import Scene

logger = logging.getLogger(__name__)

FULL_SIMILARITY_MAX_VIEWS = 20000
BRON_KERBOSCH_MAX_VERTICES = 60
# Node visits above this are reported as impractical.
PRACTICAL_CLIQUE_VISITS = 1e9


@dataclass(frozen=True)
class FullSimilarityResult:
    n_views: int
    ops: int
    elapsed: float = 0.0
    nonzero_pairs: int = 0
    max_count: int = 0
    mean_count: float = 0.0
    refused: bool = False
    message: str = ""
    counts: np.ndarray | None = field(default=None, repr=False, compare=False)


def _observations(scene: Scene) -> list[set[int]]:
    """Per camera (scene order), the keypoint ids it observes."""
    observed: list[set[int]] = [set() for _ in scene.cameras]
    for point in scene.points:
        for cam in point.track:
            observed[scene.camera_index[cam]].add(point.id)
    return observed


def full_similarity_baseline(
    scene: Scene, keep_counts: bool = False, max_views: int = FULL_SIMILARITY_MAX_VIEWS
) -> FullSimilarityResult:
    """Global co-visibility counts over every camera pair, by direct track intersection.

    Costs ``N^2`` operations. Scenes above ``max_views`` are refused with the
    projected cost instead of being computed.
    """
    n = len(scene.cameras)
    ops = n * n
    if n > max_views:
        message = (
            f"refusing full similarity on {n} views: {ops:.3g} pairwise "
            f"track intersections (limit {max_views} views)"
        )
        logger.warning(message)
        return FullSimilarityResult(n_views=n, ops=ops, refused=True, message=message)

    started = time.perf_counter()
    observed = _observations(scene)
    counts = np.zeros((n, n), dtype=np.int32) if keep_counts else None
    nonzero = 0
    largest = 0
    total = 0
    for i in range(n):
        seen_i = observed[i]
        for j in range(i + 1, n):
            shared = len(seen_i & observed[j])
            if not shared:
                continue
            nonzero += 1
            total += shared
            largest = max(largest, shared)
            if counts is not None:
                counts[i, j] = counts[j, i] = shared
    pairs = n * (n - 1) // 2
    return FullSimilarityResult(
        n_views=n,
        ops=ops,
        elapsed=time.perf_counter() - started,
        nonzero_pairs=nonzero,
        max_count=largest,
        mean_count=total / pairs if pairs else 0.0,
        counts=counts,
    )


def _neighbour_sets(adjacency: np.ndarray) -> list[frozenset[int]]:
    adjacency = np.asarray(adjacency)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {adjacency.shape}")
    binary = adjacency.astype(bool)
    if not np.array_equal(binary, binary.T):
        raise ValueError("adjacency must be symmetric")
    if binary.diagonal().any():
        raise ValueError("adjacency must have a zero diagonal")
    return [frozenset(np.flatnonzero(row).tolist()) for row in binary]


def bron_kerbosch(adjacency: np.ndarray) -> list[tuple[int, ...]]:
    """All maximal cliques, each sorted, in lexicographic order (pivoting variant)."""
    n = np.asarray(adjacency).shape[0]
    if n > BRON_KERBOSCH_MAX_VERTICES:
        raise ValueError(
            f"refusing Bron-Kerbosch on {n} vertices (limit {BRON_KERBOSCH_MAX_VERTICES}); "
            f"worst case {clique_cost_estimate(n).visits:.3g} node visits"
        )
    neighbours = _neighbour_sets(adjacency)
    cliques: list[tuple[int, ...]] = []

    def expand(r: list[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        # pivot with the most neighbours in P; ties by smallest vertex
        pivot = max(p | x, key=lambda u: (len(p & neighbours[u]), -u))
        for v in sorted(p - neighbours[pivot]):
            expand([*r, v], p & neighbours[v], x & neighbours[v])
            p.remove(v)
            x.add(v)

    expand([], set(range(n)), set())
    return sorted(cliques)


def moon_moser_graph(n: int) -> np.ndarray:
    """Complete multipartite graph with ``n / 3`` parts of size 3: ``3^(n/3)`` maximal cliques."""
    if n < 3 or n % 3:
        raise ValueError(f"Moon-Moser graph needs a positive multiple of 3 vertices, got {n}")
    part = np.arange(n) // 3
    return part[:, None] != part[None, :]


@dataclass(frozen=True)
class CliqueCostEstimate:
    n: int
    visits: float

    @property
    def log10_visits(self) -> float:
        return self.n / 3 * math.log10(3)

    @property
    def practical(self) -> bool:
        return self.visits <= PRACTICAL_CLIQUE_VISITS

    @property
    def verdict(self) -> str:
        return "practical" if self.practical else "impractical"


def clique_cost_estimate(n_c: int) -> CliqueCostEstimate:
    """Worst-case maximal-clique enumeration cost ``3^(n/3)``; never executed."""
    if n_c < 0:
        raise ValueError(f"vertex count must be non-negative, got {n_c}")
    return CliqueCostEstimate(n=n_c, visits=3.0 ** (n_c / 3))


@dataclass(frozen=True)
class CliqueRun:
    n: int
    cliques: int
    elapsed: float


def time_bron_kerbosch(adjacency: np.ndarray) -> CliqueRun:
    started = time.perf_counter()
    cliques = bron_kerbosch(adjacency)
    return CliqueRun(
        n=int(np.asarray(adjacency).shape[0]),
        cliques=len(cliques),
        elapsed=time.perf_counter() - started,
    )
