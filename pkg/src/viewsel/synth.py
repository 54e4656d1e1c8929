"""Synthetic urban scenes: vehicle trajectories, a multi-camera rig and facade keypoints.

The world is a street corridor: two vertical facades run parallel to every
pass of the vehicle at ``corridor_half_width``. Keypoints are scattered on
the facades, textureless patches are cut out, and each keypoint's track is
every camera that sees it within ``track_max_depth``.
"""

import enum
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from viewsel.model import (
    Camera,
    CameraBatch,
    CameraIntrinsics,
    CameraPose,
    Point3,
    Scene,
    visibility_mask,
)

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 9
# Facade points closer than this share of the half-width to any pass are dropped.
CORRIDOR_CLEARANCE = 0.9
_POINT_CHUNK = 4096


def _q(value: float) -> float:
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


class TrajectoryKind(enum.Enum):
    STRAIGHT = "straight"
    INTERSECTING = "intersecting"
    ROUNDABOUT = "roundabout"


@dataclass(frozen=True)
class SensorMount:
    """Sensor pose on the vehicle: yaw from the driving direction, offset (forward, left, up)."""

    yaw_deg: float
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=2400.0, fy=2400.0, cx=1920.0, cy=960.0, width=3840, height=1920)


@dataclass(frozen=True)
class RigConfig:
    n_cams: int = 7
    framerate: float = 30.0
    intrinsics: CameraIntrinsics = field(default_factory=_default_intrinsics)
    height: float = 1.8
    mounts: tuple[SensorMount, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_cams < 1:
            raise ValueError(f"rig needs at least one camera, got n_cams={self.n_cams}")
        if self.framerate <= 0:
            raise ValueError(f"framerate must be positive, got {self.framerate}")
        if self.mounts is not None and len(self.mounts) != self.n_cams:
            raise ValueError(
                f"rig has {self.n_cams} cameras but {len(self.mounts)} mounts"
            )

    def sensor_mounts(self) -> tuple[SensorMount, ...]:
        """Explicit mounts, or ``n_cams`` sensors evenly spaced in yaw."""
        if self.mounts is not None:
            return self.mounts
        step = 360.0 / self.n_cams
        return tuple(SensorMount(yaw_deg=i * step) for i in range(self.n_cams))


@dataclass(frozen=True)
class TrajectorySpec:
    kind: TrajectoryKind = TrajectoryKind.STRAIGHT
    duration: float = 10.0
    speed: float = 10.0
    headings_deg: tuple[float, ...] = (0.0, 120.0)
    radius: float = 15.0
    position_jitter: float = 0.02
    seed: int = 0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.speed <= 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        if self.kind is TrajectoryKind.ROUNDABOUT and self.radius <= 0:
            raise ValueError(f"roundabout radius must be positive, got {self.radius}")
        if self.kind is TrajectoryKind.INTERSECTING and len(self.headings_deg) < 2:
            raise ValueError("intersecting trajectory needs two segment headings")
        if not self.headings_deg:
            raise ValueError("at least one segment heading is required")
        if self.position_jitter < 0:
            raise ValueError(f"position_jitter must be >= 0, got {self.position_jitter}")


@dataclass(frozen=True)
class WorldSpec:
    corridor_half_width: float = 10.0
    density: float = 0.2
    noise_sigma: float = 0.05
    textureless_fraction: float = 0.0
    facade_height: float = 10.0
    patch_length: float = 5.0
    track_max_depth: float = 15.0
    seed: int = 0

    def __post_init__(self) -> None:
        # density 0 is allowed and yields a scene without keypoints
        if self.density < 0:
            raise ValueError(f"density must be non-negative, got {self.density}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not 0 <= self.textureless_fraction < 1:
            raise ValueError(
                f"textureless_fraction must lie in [0, 1), got {self.textureless_fraction}"
            )
        if self.corridor_half_width <= 0 or self.facade_height <= 0:
            raise ValueError("corridor_half_width and facade_height must be positive")
        if self.patch_length <= 0 or self.track_max_depth <= 0:
            raise ValueError("patch_length and track_max_depth must be positive")


def views_per_minute(framerate: float, n_cams: int) -> int:
    """Images a rig acquires per minute: ``60 * f * N_cams``."""
    return round(60 * framerate * n_cams)


def full_circle_duration(radius: float, speed: float) -> float:
    return 2 * math.pi * radius / speed


def camera_rotation(heading: float) -> np.ndarray:
    """World-to-camera rotation for a level camera looking along ``heading`` (radians).

    Camera x points right, y down, z forward; world z is up.
    """
    s, c = math.sin(heading), math.cos(heading)
    return np.array([[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]])


def _vehicle_states(spec: TrajectorySpec, n_frames: int, framerate: float) -> np.ndarray:
    """(n_frames, 3) rows of (x, y, heading) along the parametric path."""
    t = np.arange(n_frames) / framerate
    if spec.kind is TrajectoryKind.STRAIGHT:
        h = math.radians(spec.headings_deg[0])
        s = spec.speed * t
        return np.column_stack([s * math.cos(h), s * math.sin(h), np.full(n_frames, h)])

    if spec.kind is TrajectoryKind.ROUNDABOUT:
        theta = spec.speed * t / spec.radius
        return np.column_stack(
            [
                spec.radius * np.cos(theta),
                spec.radius * np.sin(theta),
                theta + math.pi / 2,
            ]
        )

    # two passes through the origin, each centred on it
    first = n_frames // 2
    states = []
    for pass_index, frames in enumerate((first, n_frames - first)):
        h = math.radians(spec.headings_deg[pass_index])
        length = spec.speed * frames / framerate
        s = spec.speed * np.arange(frames) / framerate - length / 2
        states.append(np.column_stack([s * math.cos(h), s * math.sin(h), np.full(frames, h)]))
    return np.vstack(states)


def generate_trajectory(spec: TrajectorySpec, rig: RigConfig) -> list[Camera]:
    """Rig cameras at every frame: ``floor(duration * framerate) * n_cams`` cameras.

    Camera ids are ``frame * n_cams + sensor``.
    """
    n_frames = math.floor(spec.duration * rig.framerate + 1e-9)
    states = _vehicle_states(spec, n_frames, rig.framerate)
    if spec.position_jitter > 0:
        rng = np.random.default_rng(spec.seed)
        states[:, :2] += rng.normal(0.0, spec.position_jitter, size=(n_frames, 2))

    mounts = rig.sensor_mounts()
    cameras = []
    for frame, (x, y, heading) in enumerate(states.tolist()):
        forward = np.array([math.cos(heading), math.sin(heading), 0.0])
        left = np.array([-math.sin(heading), math.cos(heading), 0.0])
        base = np.array([x, y, rig.height])
        for sensor, mount in enumerate(mounts):
            fwd, lft, up = mount.offset
            center = base + fwd * forward + lft * left + np.array([0.0, 0.0, up])
            pose = CameraPose.from_center(
                camera_rotation(heading + math.radians(mount.yaw_deg)), center
            )
            cameras.append(
                Camera(
                    id=frame * rig.n_cams + sensor,
                    intrinsics=rig.intrinsics,
                    pose=CameraPose(
                        rotation=tuple(_q(v) for v in pose.rotation),  # type: ignore[arg-type]
                        translation=tuple(_q(v) for v in pose.translation),  # type: ignore[arg-type]
                    ),
                    sensor_index=sensor,
                    timestamp=_q(frame / rig.framerate),
                )
            )
    return cameras


def _vehicle_path(cameras: list[Camera]) -> np.ndarray:
    """(frames, 2) vehicle positions: mean camera centre per timestamp, in time order."""
    by_time: dict[float, list[np.ndarray]] = {}
    for camera in cameras:
        by_time.setdefault(camera.timestamp, []).append(camera.center[:2])
    return np.array([np.mean(by_time[t], axis=0) for t in sorted(by_time)]).reshape(-1, 2)


def _split_passes(path: np.ndarray) -> list[np.ndarray]:
    """Cut the path wherever a step is much longer than the typical step."""
    if len(path) < 2:
        return [path] if len(path) else []
    steps = np.linalg.norm(np.diff(path, axis=0), axis=1)
    typical = float(np.median(steps))
    cuts = np.flatnonzero(steps > 3 * max(typical, 1e-9)) + 1
    return [p for p in np.split(path, cuts) if len(p) >= 2]


def _extend(polyline: np.ndarray, margin: float) -> np.ndarray:
    head = polyline[1] - polyline[0]
    tail = polyline[-1] - polyline[-2]
    head = head / max(np.linalg.norm(head), 1e-12)
    tail = tail / max(np.linalg.norm(tail), 1e-12)
    return np.vstack([polyline[0] - margin * head, polyline, polyline[-1] + margin * tail])


def _facade_points(polyline: np.ndarray, world: WorldSpec, rng: np.random.Generator) -> np.ndarray:
    """Points on both facades flanking one pass, textureless patches removed."""
    keep_step = np.linalg.norm(np.diff(polyline, axis=0), axis=1) > 1e-9
    polyline = np.vstack([polyline[0], polyline[1:][keep_step]])
    if len(polyline) < 2:
        return np.zeros((0, 3))
    seg = np.diff(polyline, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    tangents = seg / seg_len[:, None]
    normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])
    cumulative = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cumulative[-1])

    n_patches = max(1, math.ceil(total / world.patch_length))
    sides = []
    for side in (1.0, -1.0):
        count = rng.poisson(world.density * total * world.facade_height)
        s = rng.uniform(0.0, total, size=count)
        z = rng.uniform(0.0, world.facade_height, size=count)
        blank = rng.permutation(n_patches)[: round(world.textureless_fraction * n_patches)]
        textured = ~np.isin(np.minimum((s // world.patch_length).astype(np.int64), n_patches - 1), blank)
        s, z = s[textured], z[textured]
        k = np.clip(np.searchsorted(cumulative, s, side="right") - 1, 0, len(seg) - 1)
        xy = polyline[k] + (s - cumulative[k])[:, None] * tangents[k]
        xy = xy + side * world.corridor_half_width * normals[k]
        sides.append(np.column_stack([xy, z]))
    return np.vstack(sides)


def _tracks(batch: CameraBatch, points: np.ndarray, max_depth: float) -> list[frozenset[int]]:
    tracks: list[frozenset[int]] = []
    for start in range(0, len(points), _POINT_CHUNK):
        mask = visibility_mask(batch, points[start : start + _POINT_CHUNK], max_depth)
        tracks.extend(frozenset(batch.ids[row].tolist()) for row in mask)
    return tracks


def generate_scene(cameras: list[Camera], world: WorldSpec, rig: RigConfig) -> Scene:
    """Facade keypoints around the trajectory with projection-derived tracks.

    Keypoints seen by fewer than two cameras are dropped. Ids are assigned
    sequentially after dropping.
    """
    if not cameras:
        raise ValueError("trajectory has no cameras")
    rng = np.random.default_rng(world.seed)
    passes = _split_passes(_vehicle_path(cameras))
    candidates = [
        _facade_points(_extend(p, world.track_max_depth), world, rng) for p in passes
    ]
    points = np.vstack(candidates) if candidates else np.zeros((0, 3))

    if len(points) and passes:
        path_tree = cKDTree(np.vstack(passes))
        distance, _ = path_tree.query(points[:, :2])
        points = points[distance >= CORRIDOR_CLEARANCE * world.corridor_half_width]
    if len(points) and world.noise_sigma > 0:
        points = points + rng.normal(0.0, world.noise_sigma, size=points.shape)
    points = np.vectorize(_q)(points) if len(points) else points

    batch = CameraBatch.from_cameras(cameras)
    kept = []
    for position, track in zip(points.tolist(), _tracks(batch, points, world.track_max_depth)):
        if len(track) < 2:
            continue
        kept.append(Point3(id=len(kept), position=tuple(position), track=track))  # type: ignore[arg-type]
    logger.info(
        "synthetic scene: %d cameras (%d views/min rig), %d of %d facade points tracked",
        len(cameras),
        views_per_minute(rig.framerate, rig.n_cams),
        len(kept),
        len(points),
    )
    return Scene(cameras=tuple(cameras), points=tuple(kept))


def generate_synthetic_scene(
    spec: TrajectorySpec | None = None,
    world: WorldSpec | None = None,
    rig: RigConfig | None = None,
) -> Scene:
    spec, world, rig = spec or TrajectorySpec(), world or WorldSpec(), rig or RigConfig()
    return generate_scene(generate_trajectory(spec, rig), world, rig)


def vehicle_headings(cameras: Iterable[Camera]) -> dict[int, float]:
    """Camera id -> vehicle heading (radians) from same-sensor centre differences.

    Each camera uses the step to its successor in time; the last camera of a
    pass, or one whose successor lies after a jump, uses its predecessor.
    """
    by_sensor: dict[int, list[Camera]] = {}
    for camera in cameras:
        by_sensor.setdefault(camera.sensor_index, []).append(camera)

    headings: dict[int, float] = {}
    for track in by_sensor.values():
        track.sort(key=lambda c: (c.timestamp, c.id))
        if len(track) < 2:
            continue
        centers = np.array([c.center[:2] for c in track])
        steps = np.diff(centers, axis=0)
        lengths = np.linalg.norm(steps, axis=1)
        limit = 3 * max(float(np.median(lengths)), 1e-9)
        for i, camera in enumerate(track):
            forward_ok = i < len(steps) and 0 < lengths[i] <= limit
            backward_ok = i > 0 and 0 < lengths[i - 1] <= limit
            if forward_ok:
                step = steps[i]
            elif backward_ok:
                step = steps[i - 1]
            else:
                continue
            headings[camera.id] = math.atan2(step[1], step[0])
    return headings


def _circular_gaps(degrees: np.ndarray) -> np.ndarray:
    """Gap after each sorted angle to the next one, wrapping at 360."""
    return np.diff(np.append(degrees, degrees[0] + 360.0))


def heading_groups(headings: Mapping[int, float], min_gap_deg: float = 45.0) -> list[list[int]]:
    """Group camera ids by heading, splitting at circular gaps wider than ``min_gap_deg``.

    Groups are returned in ascending heading order starting after the widest gap.
    """
    if not headings:
        return []
    ids = np.array(list(headings), dtype=np.int64)
    degrees = np.degrees(np.array([headings[i] for i in ids.tolist()])) % 360.0
    order = np.lexsort((ids, degrees))
    ids, degrees = ids[order], degrees[order]
    gaps = _circular_gaps(degrees)
    if len(ids) == 1 or not (gaps > min_gap_deg).any():
        return [sorted(ids.tolist())]

    start = (int(np.argmax(gaps)) + 1) % len(ids)
    groups: list[list[int]] = [[]]
    for k in range(len(ids)):
        i = (start + k) % len(ids)
        groups[-1].append(int(ids[i]))
        if gaps[i] > min_gap_deg and k < len(ids) - 1:
            groups.append([])
    return [sorted(g) for g in groups]


def heading_span(headings: Iterable[float]) -> float:
    """Degrees of heading covered: 360 minus the widest circular gap."""
    degrees = np.sort(np.degrees(np.fromiter(headings, dtype=float)) % 360.0)
    if len(degrees) < 2:
        return 0.0
    return float(360.0 - _circular_gaps(degrees).max())
