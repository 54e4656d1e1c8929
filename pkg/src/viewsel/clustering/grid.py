"""Overlapping 2D grid on the (x, y) plane, keypoint assignment and lattice sampling."""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from viewsel.model import Point3, PointOrigin, Scene

# Below this many keypoints a cluster borrows the scene-wide z range.
MIN_KEYPOINTS_FOR_LOCAL_Z = 20
Z_PERCENTILES = (2.0, 98.0)
_LATTICE_EPS = 1e-9


@dataclass(frozen=True)
class GridConfig:
    block_x: float = 20.0
    block_y: float = 20.0
    overlap: float = 2.0
    sample_resolution: float = 1.0

    def __post_init__(self) -> None:
        if self.block_x <= 0 or self.block_y <= 0:
            raise ValueError(
                f"block size must be positive, got ({self.block_x}, {self.block_y})"
            )
        if not 0 <= self.overlap < min(self.block_x, self.block_y) / 2:
            raise ValueError(
                f"overlap must lie in [0, {min(self.block_x, self.block_y) / 2}), "
                f"got {self.overlap}"
            )
        if self.sample_resolution <= 0:
            raise ValueError(
                f"sample_resolution must be positive, got {self.sample_resolution}"
            )


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, half-open on the max edges."""

    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def grow(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def union(self, other: "Rect") -> "Rect":
        return Rect(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class Block:
    index: tuple[int, int]
    core_bounds: Rect
    expanded_bounds: Rect


@dataclass(frozen=True)
class Cluster:
    """A spatial cluster; merged clusters carry several blocks."""

    id: int
    blocks: tuple[Block, ...]
    keypoints: tuple[int, ...]
    sampled: tuple[Point3, ...] = field(default=(), repr=False)
    cameras: tuple[int, ...] = ()

    @property
    def block(self) -> Block:
        return self.blocks[0]

    @property
    def core_bounds(self) -> Rect:
        bounds = self.blocks[0].core_bounds
        for b in self.blocks[1:]:
            bounds = bounds.union(b.core_bounds)
        return bounds

    @property
    def expanded_bounds(self) -> Rect:
        bounds = self.blocks[0].expanded_bounds
        for b in self.blocks[1:]:
            bounds = bounds.union(b.expanded_bounds)
        return bounds

    @cached_property
    def sampled_positions(self) -> np.ndarray:
        return np.array([p.position for p in self.sampled], dtype=float).reshape(-1, 3)

    def keypoint_positions(self, scene: Scene) -> np.ndarray:
        rows = [scene.point_row[pid] for pid in self.keypoints]
        return scene.keypoint_positions[rows].reshape(-1, 3)

    def point_positions(self, scene: Scene) -> np.ndarray:
        """Keypoints first, then sampled points, in stored order."""
        return np.vstack([self.keypoint_positions(scene), self.sampled_positions])

    def point_ids(self) -> list[int]:
        return [*self.keypoints, *(p.id for p in self.sampled)]

    def centroid(self, scene: Scene) -> np.ndarray:
        return self.point_positions(scene).mean(axis=0)


def _grid_origin(scene: Scene, cfg: GridConfig) -> tuple[float, float]:
    xy_min = scene.keypoint_positions[:, :2].min(axis=0)
    origin = []
    for lo, size in zip(xy_min.tolist(), (cfg.block_x, cfg.block_y)):
        o = math.floor((lo - cfg.overlap) / size) * size
        # keep every keypoint out of the expanded bounds of index -1
        while lo < o + cfg.overlap:
            o -= size
        origin.append(o)
    return origin[0], origin[1]


def _make_block(i: int, j: int, origin: tuple[float, float], cfg: GridConfig) -> Block:
    core = Rect(
        origin[0] + i * cfg.block_x,
        origin[1] + j * cfg.block_y,
        origin[0] + (i + 1) * cfg.block_x,
        origin[1] + (j + 1) * cfg.block_y,
    )
    return Block(index=(i, j), core_bounds=core, expanded_bounds=core.grow(cfg.overlap))


def _candidate_cells(
    xy: np.ndarray, origin: tuple[float, float], cfg: GridConfig
) -> np.ndarray:
    """(n_points * 16, 3) rows of (point_row, i, j) covering every possible membership.

    The floor estimate is widened by one index on each side; ``Rect.contains``
    makes the final call, so rounding in the estimate never drops a block.
    """
    offsets = np.arange(4)
    i_lo = np.floor((xy[:, 0] - origin[0] - cfg.overlap) / cfg.block_x).astype(np.int64) - 1
    j_lo = np.floor((xy[:, 1] - origin[1] - cfg.overlap) / cfg.block_y).astype(np.int64) - 1
    rows = np.repeat(np.arange(xy.shape[0]), 16)
    i = np.repeat(i_lo[:, None] + offsets, 4, axis=1).ravel()
    j = np.tile(j_lo[:, None] + offsets, (1, 4)).ravel()
    return np.column_stack([rows, i, j])


def _memberships(
    scene: Scene, origin: tuple[float, float], cfg: GridConfig
) -> dict[tuple[int, int], list[int]]:
    """Block index -> keypoint rows whose (x, y) lies in its expanded bounds."""
    xy = scene.keypoint_positions[:, :2]
    members: dict[tuple[int, int], list[int]] = {}
    blocks: dict[tuple[int, int], Block] = {}
    for row, i, j in _candidate_cells(xy, origin, cfg).tolist():
        if i < 0 or j < 0:
            continue
        block = blocks.get((i, j))
        if block is None:
            block = blocks[(i, j)] = _make_block(i, j, origin, cfg)
        if block.expanded_bounds.contains(xy[row, 0], xy[row, 1]):
            members.setdefault((i, j), []).append(row)
    return members


def build_grid(scene: Scene, cfg: GridConfig) -> list[Block]:
    """Blocks of the overlapping grid whose expanded bounds hold a keypoint.

    The grid is anchored on the block lattice cell at the keypoint minimum
    (shifted by the overlap so every index is non-negative); blocks are
    returned in row-major index order.
    """
    if not scene.points:
        raise ValueError("scene has no keypoints")
    origin = _grid_origin(scene, cfg)
    members = _memberships(scene, origin, cfg)
    return [_make_block(i, j, origin, cfg) for i, j in sorted(members)]


def assign_keypoints(blocks: list[Block], scene: Scene) -> list[Cluster]:
    """Add each keypoint to every block whose expanded bounds contain it.

    Blocks without keypoints are dropped; cluster ids follow row-major
    block order.
    """
    if not blocks or not scene.points:
        return []
    xy = scene.keypoint_positions[:, :2]
    ids = scene.keypoint_ids
    clusters = []
    for block in sorted(blocks, key=lambda b: b.index):
        r = block.expanded_bounds
        inside = (xy[:, 0] >= r.x0) & (xy[:, 0] < r.x1) & (xy[:, 1] >= r.y0) & (xy[:, 1] < r.y1)
        if not inside.any():
            continue
        clusters.append(
            Cluster(
                id=len(clusters),
                blocks=(block,),
                keypoints=tuple(sorted(ids[inside].tolist())),
            )
        )
    return clusters


def _lattice_axes(
    bounds: "Rect", cfg: GridConfig, z_range: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z_min, z_max = z_range
    if z_min > z_max:
        raise ValueError(f"z_range must be ordered, got ({z_min}, {z_max})")
    r = cfg.sample_resolution

    def axis(lo: float, hi: float) -> np.ndarray:
        count = math.floor((hi - lo) / r + _LATTICE_EPS) + 1
        return lo + r * np.arange(count)

    return axis(bounds.x0, bounds.x1), axis(bounds.y0, bounds.y1), axis(z_min, z_max)


def lattice_size(cluster: Cluster, cfg: GridConfig, z_range: tuple[float, float]) -> int:
    xs, ys, zs = _lattice_axes(cluster.expanded_bounds, cfg, z_range)
    return len(xs) * len(ys) * len(zs)


def sample_uniform_points(
    cluster: Cluster,
    cfg: GridConfig,
    z_range: tuple[float, float],
    first_id: int = 0,
) -> list[Point3]:
    """Regular lattice with spacing ``sample_resolution`` over the expanded bounds.

    Anchored at the expanded-bounds minimum corner with ``floor(span / r) + 1``
    samples per axis. Ids run from ``first_id`` with x varying slowest.
    """
    xs, ys, zs = _lattice_axes(cluster.expanded_bounds, cfg, z_range)
    grid = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    return [
        Point3(
            id=first_id + k,
            position=(float(x), float(y), float(z)),
            origin=PointOrigin.SAMPLED,
        )
        for k, (x, y, z) in enumerate(grid.tolist())
    ]


def scene_z_range(scene: Scene) -> tuple[float, float]:
    lo, hi = np.percentile(scene.keypoint_positions[:, 2], Z_PERCENTILES)
    return float(lo), float(hi)


def sampling_z_range(
    cluster: Cluster, scene: Scene, fallback: tuple[float, float] | None = None
) -> tuple[float, float]:
    """Robust vertical extent: keypoint z percentiles, scene-wide for sparse clusters."""
    if len(cluster.keypoints) < MIN_KEYPOINTS_FOR_LOCAL_Z:
        return fallback if fallback is not None else scene_z_range(scene)
    lo, hi = np.percentile(cluster.keypoint_positions(scene)[:, 2], Z_PERCENTILES)
    return float(lo), float(hi)
