"""End-to-end orchestration: grid, sampling, association, merge, selection."""

import logging
import os
import time
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from functools import partial
from typing import TypeVar

from viewsel.clustering.associate import (
    associate_cluster,
    association_counts,
    merge_small_clusters,
)
from viewsel.clustering.grid import (
    Cluster,
    assign_keypoints,
    build_grid,
    lattice_size,
    sample_uniform_points,
    sampling_z_range,
    scene_z_range,
)
from viewsel.model import Scene
from viewsel.pipeline.config import PipelineConfig
from viewsel.pipeline.manifest import ClusterManifest, build_manifest
from viewsel.pipeline.stats import ClusterSummary, RunRecord, StatsTable, compute_stats
from viewsel.selection.problem import SelectionProblem, build_ilp, check_selection
from viewsel.selection.solver import (
    BranchAndBoundSolver,
    SelectionSolver,
    Solution,
    SolveStatus,
)
from viewsel.selection.visibility import build_similarity, build_visibility_matrix

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ClusterStageError(RuntimeError):
    def __init__(self, cluster_id: int, stage: str, cause: BaseException) -> None:
        super().__init__(f"cluster {cluster_id}: {stage} failed: {cause}")
        self.cluster_id = cluster_id
        self.stage = stage


@contextmanager
def _stage(cluster_id: int, stage: str) -> Iterator[None]:
    try:
        yield
    except ClusterStageError:
        raise
    except Exception as e:
        raise ClusterStageError(cluster_id, stage, e) from e


@dataclass(frozen=True, eq=False)
class ClusterResult:
    cluster: Cluster
    problem: SelectionProblem
    solution: Solution
    violations: tuple[str, ...] = ()

    @property
    def relaxed(self) -> bool:
        return self.solution.status is SolveStatus.INFEASIBLE_RELAXED


@dataclass(frozen=True, eq=False)
class PipelineRun:
    manifests: list[ClusterManifest]
    record: RunRecord
    results: list[ClusterResult]

    @property
    def stats(self) -> StatsTable:
        return compute_stats(self.record)


def resolve_workers(parallelism: int) -> int:
    return parallelism if parallelism > 0 else (os.cpu_count() or 1)


def _pool_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Ordered map; results come back in input order at any worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))


def _warm_caches(scene: Scene) -> None:
    # cached_property is not locked; fill the shared caches before fanning out
    _ = scene.camera_index, scene.point_row, scene.keypoint_positions, scene.keypoint_ids
    _ = scene.camera_batch, scene.camera_tree


def _sample(
    job: tuple[Cluster, tuple[float, float], int], cfg: PipelineConfig
) -> Cluster:
    cluster, z_range, first_id = job
    with _stage(cluster.id, "sampling"):
        points = sample_uniform_points(cluster, cfg.grid, z_range, first_id=first_id)
        return replace(cluster, sampled=tuple(points))


def _associate(cluster: Cluster, scene: Scene, cfg: PipelineConfig) -> Cluster | None:
    with _stage(cluster.id, "association"):
        return associate_cluster(cluster, scene, cfg.assoc)


def select_cluster(
    cluster: Cluster, scene: Scene, cfg: PipelineConfig, solver: SelectionSolver
) -> ClusterResult:
    """Matrices, program and solve for one associated cluster."""
    with _stage(cluster.id, "selection"):
        vis = build_visibility_matrix(cluster, scene, cfg.assoc)
        sim = build_similarity(vis, cfg.match_threshold)
        problem = build_ilp(cluster, vis, sim, cfg.select)
        solution = solver.solve(problem, vis, cfg.select)

    result = ClusterResult(cluster=cluster, problem=problem, solution=solution)
    if result.relaxed:
        logger.warning(
            "cluster %d: selection infeasible, n_min relaxed from %d to %d",
            cluster.id,
            problem.n_min,
            solution.n_min,
        )
        return result
    violations = tuple(check_selection(problem, problem.selection_from_ids(solution.selected)))
    if violations:
        logger.warning("cluster %d: selection violates %s", cluster.id, violations)
    return replace(result, violations=violations)


def form_clusters(scene: Scene, cfg: PipelineConfig, workers: int) -> list[Cluster]:
    """Grid, lattice sampling, camera association and small-cluster merging."""
    blocks = build_grid(scene, cfg.grid)
    clusters = assign_keypoints(blocks, scene)
    logger.info("grid: %d blocks, %d non-empty clusters", len(blocks), len(clusters))

    fallback = scene_z_range(scene)
    z_ranges = [sampling_z_range(c, scene, fallback) for c in clusters]
    next_id = int(scene.keypoint_ids.max()) + 1
    jobs = []
    for cluster, z_range in zip(clusters, z_ranges):
        jobs.append((cluster, z_range, next_id))
        next_id += lattice_size(cluster, cfg.grid, z_range)

    sampled = _pool_map(partial(_sample, cfg=cfg), jobs, workers)
    associated = _pool_map(partial(_associate, scene=scene, cfg=cfg), sampled, workers)
    kept = []
    for before, after in zip(sampled, associated):
        if after is None:
            logger.info("cluster %d: no camera sees it, dropped", before.id)
            continue
        kept.append(after)
    merged = merge_small_clusters(kept, cfg.assoc, scene)
    logger.info("association: %d clusters after merging %d", len(merged), len(kept))
    return merged


def execute_pipeline(
    scene: Scene,
    cfg: PipelineConfig | None = None,
    solver: SelectionSolver | None = None,
    name: str = "sequence",
) -> PipelineRun:
    """Run every stage and keep the per-cluster programs alongside the manifests."""
    cfg = cfg or PipelineConfig()
    solver = solver or BranchAndBoundSolver()
    if not scene.cameras:
        raise ValueError("scene has no cameras")
    if not scene.points:
        raise ValueError("scene has no keypoints")
    workers = resolve_workers(cfg.parallelism)
    _warm_caches(scene)

    started = time.perf_counter()
    clusters = form_clusters(scene, cfg, workers)
    t_clustering = time.perf_counter() - started
    if not clusters:
        raise ValueError("no cluster is observed by any camera")

    started = time.perf_counter()
    results = _pool_map(
        partial(select_cluster, scene=scene, cfg=cfg, solver=solver), clusters, workers
    )
    t_selection = time.perf_counter() - started

    counts = association_counts(clusters)
    record = RunRecord(
        name=name,
        n_input_views=len(scene.cameras),
        n_views=len(counts),
        n_keypoints=len(scene.points),
        k_max=max(counts.values()),
        t_clustering=t_clustering,
        t_selection=t_selection,
        parallelism=workers,
        clusters=tuple(
            ClusterSummary(
                cluster_id=r.cluster.id,
                n_cameras=len(r.cluster.cameras),
                n_selected=len(r.solution.selected),
                n_keypoints=len(r.cluster.keypoints),
                n_sampled=len(r.cluster.sampled),
                status=r.solution.status.value,
                objective=r.solution.objective,
                n_min=r.solution.n_min,
                gap=r.solution.gap,
                nodes=r.solution.nodes,
                solve_time=r.solution.solve_time,
            )
            for r in results
        ),
        config=cfg.to_dict(),
    )
    manifests = [build_manifest(r.cluster, r.solution, scene) for r in results]
    logger.info(
        "selection: %d of %d cluster views kept in %.2fs",
        sum(len(m.cameras) for m in manifests),
        sum(len(c.cameras) for c in clusters),
        t_selection,
    )
    return PipelineRun(manifests=manifests, record=record, results=results)


def run_pipeline(
    scene: Scene,
    cfg: PipelineConfig | None = None,
    solver: SelectionSolver | None = None,
) -> tuple[list[ClusterManifest], StatsTable]:
    run = execute_pipeline(scene, cfg, solver)
    return run.manifests, run.stats
