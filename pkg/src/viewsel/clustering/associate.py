"""Camera-to-cluster association and merging of undersized clusters."""

import logging
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from viewsel.clustering.grid import Cluster
from viewsel.model import Scene, visibility_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssociationConfig:
    max_centroid_distance: float = 40.0
    max_depth: float = 50.0
    min_cluster_cameras: int = 10

    def __post_init__(self) -> None:
        if self.max_centroid_distance <= 0:
            raise ValueError(
                f"max_centroid_distance must be positive, got {self.max_centroid_distance}"
            )
        if self.max_depth <= 0:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if self.min_cluster_cameras < 1:
            raise ValueError(
                f"min_cluster_cameras must be at least 1, got {self.min_cluster_cameras}"
            )


def candidate_cameras(
    centroid: np.ndarray, scene: Scene, cfg: AssociationConfig
) -> np.ndarray:
    """Rows of ``scene.cameras`` whose centre lies within the centroid gate."""
    rows = scene.camera_tree.query_ball_point(centroid, cfg.max_centroid_distance)
    return np.array(sorted(rows), dtype=np.int64)


def associate_cluster(
    cluster: Cluster, scene: Scene, cfg: AssociationConfig
) -> Cluster | None:
    """Attach every gated camera that sees at least one cluster point.

    Returns ``None`` when no camera qualifies.
    """
    points = cluster.point_positions(scene)
    rows = candidate_cameras(points.mean(axis=0), scene, cfg)
    if rows.size == 0:
        return None
    batch = scene.camera_batch.take(rows)
    sees = visibility_mask(batch, points, cfg.max_depth).any(axis=0)
    cameras = tuple(sorted(batch.ids[sees].tolist()))
    if not cameras:
        return None
    return replace(cluster, cameras=cameras)


def associate_cameras(
    clusters: list[Cluster], scene: Scene, cfg: AssociationConfig
) -> list[Cluster]:
    associated = []
    for cluster in clusters:
        result = associate_cluster(cluster, scene, cfg)
        if result is None:
            logger.info("cluster %d: no camera sees it, dropped", cluster.id)
            continue
        associated.append(result)
    return associated


def _adjacent(a: Cluster, b: Cluster) -> bool:
    return any(
        max(abs(pa.index[0] - pb.index[0]), abs(pa.index[1] - pb.index[1])) <= 1
        for pa in a.blocks
        for pb in b.blocks
    )


def _centroid(cluster: Cluster, scene: Scene | None) -> np.ndarray:
    if scene is None:
        r = cluster.expanded_bounds
        return np.array([(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2, 0.0])
    return cluster.centroid(scene)


def _merge(into: Cluster, other: Cluster) -> Cluster:
    sampled = {p.id: p for p in into.sampled}
    for p in other.sampled:
        sampled.setdefault(p.id, p)
    return Cluster(
        id=into.id,
        blocks=tuple(sorted({*into.blocks, *other.blocks}, key=lambda b: b.index)),
        keypoints=tuple(sorted({*into.keypoints, *other.keypoints})),
        sampled=tuple(sampled[k] for k in sorted(sampled)),
        cameras=tuple(sorted({*into.cameras, *other.cameras})),
    )


def merge_small_clusters(
    clusters: list[Cluster], cfg: AssociationConfig, scene: Scene | None = None
) -> list[Cluster]:
    """Merge clusters below ``min_cluster_cameras`` into a neighbour.

    The smallest cluster (ties by id) goes first. Its partner is the
    8-connected neighbour sharing the most cameras, then the nearest
    centroid, then the smallest id; isolated clusters join the nearest
    cluster overall. Centroids come from the point sets when ``scene`` is
    given, otherwise from the expanded bounds.
    """
    work = {c.id: c for c in clusters}
    centroids = {c.id: _centroid(c, scene) for c in clusters}
    while len(work) > 1:
        small = [c for c in work.values() if len(c.cameras) < cfg.min_cluster_cameras]
        if not small:
            break
        victim = min(small, key=lambda c: (len(c.cameras), c.id))
        others = [c for c in work.values() if c.id != victim.id]
        neighbours = [c for c in others if _adjacent(victim, c)]
        victim_cams = set(victim.cameras)

        def distance(c: Cluster) -> float:
            return float(np.linalg.norm(centroids[c.id] - centroids[victim.id]))

        if neighbours:
            partner = min(
                neighbours,
                key=lambda c: (-len(victim_cams.intersection(c.cameras)), distance(c), c.id),
            )
        else:
            partner = min(others, key=lambda c: (distance(c), c.id))

        merged = _merge(partner, victim)
        logger.debug(
            "merged cluster %d (%d cameras) into %d -> %d cameras",
            victim.id,
            len(victim.cameras),
            partner.id,
            len(merged.cameras),
        )
        del work[victim.id]
        del centroids[victim.id]
        work[partner.id] = merged
        centroids[partner.id] = _centroid(merged, scene)

    result = sorted(work.values(), key=lambda c: c.id)
    if len(result) == 1 and len(result[0].cameras) < cfg.min_cluster_cameras:
        logger.warning(
            "cluster %d keeps only %d cameras (< %d) after merging everything",
            result[0].id,
            len(result[0].cameras),
            cfg.min_cluster_cameras,
        )
    return result


def association_counts(clusters: list[Cluster]) -> Counter[int]:
    """Camera id -> number of clusters it is associated to."""
    return Counter(cam for cluster in clusters for cam in cluster.cameras)
