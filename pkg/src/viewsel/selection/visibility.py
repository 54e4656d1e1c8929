"""Per-cluster binary visibility (point x camera) and similarity (camera x camera) matrices."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from viewsel.clustering.associate import AssociationConfig
from viewsel.clustering.grid import Cluster
from viewsel.model import Scene, visibility_mask


@dataclass(frozen=True, eq=False)
class VisibilityMatrix:
    """``bits[j, i]`` is set when point ``j`` is visible in camera ``i``."""

    bits: np.ndarray
    point_ids: tuple[int, ...]
    camera_ids: tuple[int, ...]

    @property
    def n_points(self) -> int:
        return int(self.bits.shape[0])

    @property
    def n_cameras(self) -> int:
        return int(self.bits.shape[1])

    def points_per_camera(self) -> np.ndarray:
        return self.bits.sum(axis=0)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    counts: np.ndarray
    binary: np.ndarray
    match_threshold: int
    camera_ids: tuple[int, ...]

    def edges(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.binary))
        return set(zip(rows.tolist(), cols.tolist()))


def build_visibility_matrix(
    cluster: Cluster, scene: Scene, cfg: AssociationConfig
) -> VisibilityMatrix:
    if not cluster.cameras:
        raise ValueError(f"cluster {cluster.id} has no associated cameras")
    rows = np.array([scene.camera_index[cam] for cam in cluster.cameras], dtype=np.int64)
    bits = visibility_mask(
        scene.camera_batch.take(rows), cluster.point_positions(scene), cfg.max_depth
    )
    return VisibilityMatrix(
        bits=bits,
        point_ids=tuple(cluster.point_ids()),
        camera_ids=tuple(cluster.cameras),
    )


def build_similarity(vis: VisibilityMatrix, match_threshold: int) -> SimilarityMatrix:
    """Co-visibility counts ``S = B^T B`` and their binarization at ``match_threshold``.

    The binarized matrix has a zero diagonal: a camera is never its own partner.
    """
    if match_threshold < 1:
        raise ValueError(f"match_threshold must be at least 1, got {match_threshold}")
    # float32 products stay exact for counts below 2**24
    b = vis.bits.astype(np.float32)
    counts = np.rint(b.T @ b).astype(np.int64)
    binary = counts >= match_threshold
    np.fill_diagonal(binary, False)
    return SimilarityMatrix(
        counts=counts,
        binary=binary,
        match_threshold=match_threshold,
        camera_ids=vis.camera_ids,
    )


def dump_bitmap(bits: np.ndarray, path: Path | str) -> Path:
    """Write a binary matrix as ASCII, one row per line of 0/1 characters."""
    path = Path(path)
    rows = np.asarray(bits, dtype=bool).astype(np.uint8)
    path.write_text("".join("".join(map(str, row)) + "\n" for row in rows.tolist()))
    return path
