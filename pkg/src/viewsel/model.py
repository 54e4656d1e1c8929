"""Domain types shared by every stage, plus the pinhole projection kernel."""

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

# 9 significant digits in the scene format leave ~1e-9 error per component.
QUATERNION_NORM_TOLERANCE = 1e-6

# Cameras per vectorized projection chunk; bounds the (m, P, 3) temporary.
PROJECTION_CHUNK = 64


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.fx, self.fy, self.cx, self.cy)):
            raise ValueError(
                f"intrinsics must be finite, got fx={self.fx}, fy={self.fy}, "
                f"cx={self.cx}, cy={self.cy}"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera pose: p_c = R·p_w + t, quaternion scalar-first."""

    rotation: tuple[float, float, float, float]
    translation: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (*self.rotation, *self.translation)):
            raise ValueError(
                f"pose must be finite, got rotation={self.rotation}, "
                f"translation={self.translation}"
            )
        norm = float(np.linalg.norm(self.rotation))
        if abs(norm - 1.0) > QUATERNION_NORM_TOLERANCE:
            raise ValueError(f"rotation quaternion is not unit length (norm={norm!r})")

    @cached_property
    def rotation_matrix(self) -> np.ndarray:
        qw, qx, qy, qz = self.rotation
        matrix = Rotation.from_quat([qx, qy, qz, qw]).as_matrix()
        matrix.flags.writeable = False
        return matrix

    @cached_property
    def center(self) -> np.ndarray:
        center = -self.rotation_matrix.T @ np.asarray(self.translation, dtype=float)
        center.flags.writeable = False
        return center

    @classmethod
    def from_matrix(cls, rotation: np.ndarray, translation: np.ndarray) -> "CameraPose":
        qx, qy, qz, qw = Rotation.from_matrix(rotation).as_quat()
        if qw < 0:
            qw, qx, qy, qz = -qw, -qx, -qy, -qz
        t = np.asarray(translation, dtype=float)
        return cls(
            rotation=(float(qw), float(qx), float(qy), float(qz)),
            translation=(float(t[0]), float(t[1]), float(t[2])),
        )

    @classmethod
    def from_center(cls, rotation: np.ndarray, center: np.ndarray) -> "CameraPose":
        """Build a pose from a world-to-camera rotation and a camera centre."""
        rotation = np.asarray(rotation, dtype=float)
        return cls.from_matrix(rotation, -rotation @ np.asarray(center, dtype=float))


@dataclass(frozen=True)
class Camera:
    id: int
    intrinsics: CameraIntrinsics
    pose: CameraPose
    sensor_index: int = 0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"camera id must be non-negative, got {self.id}")
        if self.sensor_index < 0:
            raise ValueError(
                f"camera {self.id}: sensor index must be non-negative, "
                f"got {self.sensor_index}"
            )
        if not math.isfinite(self.timestamp):
            raise ValueError(f"camera {self.id}: timestamp must be finite, got {self.timestamp}")

    @property
    def center(self) -> np.ndarray:
        return self.pose.center


class PointOrigin(enum.Enum):
    KEYPOINT = "keypoint"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class Point3:
    id: int
    position: tuple[float, float, float]
    track: frozenset[int] = frozenset()
    origin: PointOrigin = PointOrigin.KEYPOINT

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"point id must be non-negative, got {self.id}")
        if not all(math.isfinite(v) for v in self.position):
            raise ValueError(f"point {self.id} position must be finite, got {self.position}")
        if self.origin is PointOrigin.KEYPOINT and not self.track:
            raise ValueError(f"keypoint {self.id} has an empty track")
        if self.origin is PointOrigin.SAMPLED and self.track:
            raise ValueError(f"sampled point {self.id} must not carry a track")


@dataclass(frozen=True)
class Scene:
    cameras: tuple[Camera, ...]
    points: tuple[Point3, ...] = field(default=())

    @cached_property
    def camera_index(self) -> dict[int, int]:
        """Camera id -> position in ``cameras``."""
        return {camera.id: i for i, camera in enumerate(self.cameras)}

    @cached_property
    def point_row(self) -> dict[int, int]:
        """Point id -> row in ``keypoint_positions``."""
        return {point.id: i for i, point in enumerate(self.points)}

    @cached_property
    def camera_batch(self) -> "CameraBatch":
        return CameraBatch.from_cameras(self.cameras)

    @cached_property
    def camera_tree(self) -> cKDTree:
        """KD-tree over camera centres, rows aligned with ``cameras``."""
        return cKDTree(self.camera_batch.centers)

    @cached_property
    def keypoint_positions(self) -> np.ndarray:
        positions = np.array(
            [p.position for p in self.points], dtype=float
        ).reshape(-1, 3)
        positions.flags.writeable = False
        return positions

    @cached_property
    def keypoint_ids(self) -> np.ndarray:
        ids = np.array([p.id for p in self.points], dtype=np.int64)
        ids.flags.writeable = False
        return ids

    def camera(self, camera_id: int) -> Camera:
        try:
            return self.cameras[self.camera_index[camera_id]]
        except KeyError:
            raise KeyError(f"camera {camera_id} not in scene") from None


@dataclass(frozen=True)
class CameraBatch:
    """Stacked camera parameters for vectorized projection."""

    ids: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray
    centers: np.ndarray
    focal: np.ndarray
    principal: np.ndarray
    size: np.ndarray

    @classmethod
    def from_cameras(cls, cameras: "tuple[Camera, ...] | list[Camera]") -> "CameraBatch":
        if not cameras:
            empty3 = np.zeros((0, 3))
            return cls(
                ids=np.zeros(0, dtype=np.int64),
                rotations=np.zeros((0, 3, 3)),
                translations=empty3,
                centers=empty3,
                focal=np.zeros((0, 2)),
                principal=np.zeros((0, 2)),
                size=np.zeros((0, 2)),
            )
        return cls(
            ids=np.array([c.id for c in cameras], dtype=np.int64),
            rotations=np.stack([c.pose.rotation_matrix for c in cameras]),
            translations=np.array([c.pose.translation for c in cameras], dtype=float),
            centers=np.stack([c.pose.center for c in cameras]),
            focal=np.array(
                [(c.intrinsics.fx, c.intrinsics.fy) for c in cameras], dtype=float
            ),
            principal=np.array(
                [(c.intrinsics.cx, c.intrinsics.cy) for c in cameras], dtype=float
            ),
            size=np.array(
                [(c.intrinsics.width, c.intrinsics.height) for c in cameras],
                dtype=float,
            ),
        )

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def take(self, indices: np.ndarray) -> "CameraBatch":
        return CameraBatch(
            ids=self.ids[indices],
            rotations=self.rotations[indices],
            translations=self.translations[indices],
            centers=self.centers[indices],
            focal=self.focal[indices],
            principal=self.principal[indices],
            size=self.size[indices],
        )


def project_point(
    camera: Camera, point_w: tuple[float, float, float] | np.ndarray
) -> tuple[float, float, float] | None:
    """Project a world point into ``camera``.

    Returns ``(u, v, depth)`` when the point lies in front of the camera and
    inside the half-open image rectangle, otherwise ``None``. Occlusion is not
    modelled.
    """
    p_c = camera.pose.rotation_matrix @ np.asarray(point_w, dtype=float) + np.asarray(
        camera.pose.translation, dtype=float
    )
    depth = float(p_c[2])
    if depth <= 0:
        return None
    k = camera.intrinsics
    u = k.fx * float(p_c[0]) / depth + k.cx
    v = k.fy * float(p_c[1]) / depth + k.cy
    if not (0 <= u < k.width and 0 <= v < k.height):
        return None
    return u, v, depth


def back_project(camera: Camera, u: float, v: float, depth: float) -> np.ndarray:
    k = camera.intrinsics
    p_c = np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])
    rotation = camera.pose.rotation_matrix
    return rotation.T @ (p_c - np.asarray(camera.pose.translation, dtype=float))


def visibility_mask(
    batch: CameraBatch, points: np.ndarray, max_depth: float = np.inf
) -> np.ndarray:
    """Boolean (P, M) matrix: point p projects in-bounds in camera m.

    Depth must satisfy ``0 < depth <= max_depth``. Cameras are processed in
    chunks of ``PROJECTION_CHUNK``.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n_points, n_cams = points.shape[0], len(batch)
    mask = np.zeros((n_points, n_cams), dtype=bool)
    if n_points == 0 or n_cams == 0:
        return mask
    for start in range(0, n_cams, PROJECTION_CHUNK):
        stop = min(start + PROJECTION_CHUNK, n_cams)
        rot = batch.rotations[start:stop]
        p_c = np.einsum("mij,pj->mpi", rot, points) + batch.translations[
            start:stop, None, :
        ]
        depth = p_c[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = batch.focal[start:stop, 0, None] * p_c[..., 0] / depth + batch.principal[
                start:stop, 0, None
            ]
            v = batch.focal[start:stop, 1, None] * p_c[..., 1] / depth + batch.principal[
                start:stop, 1, None
            ]
        visible = (
            (depth > 0)
            & (depth <= max_depth)
            & (u >= 0)
            & (u < batch.size[start:stop, 0, None])
            & (v >= 0)
            & (v < batch.size[start:stop, 1, None])
        )
        mask[:, start:stop] = visible.T
    return mask
