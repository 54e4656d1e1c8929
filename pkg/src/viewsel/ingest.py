"""Read, write and validate scenes in the line-oriented text format.

    CAM <id> <fx> <fy> <cx> <cy> <width> <height> <qw> <qx> <qy> <qz> <tx> <ty> <tz> [sensor] [timestamp]
    PT  <id> <x> <y> <z> <cam_id>*

Lines starting with ``#`` and blank lines are ignored. Floats are written
with 9 significant digits.
"""

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from viewsel.model import (
    Camera,
    CameraIntrinsics,
    CameraPose,
    Point3,
    PointOrigin,
    Scene,
)

logger = logging.getLogger(__name__)

SCENE_HEADER = "# viewsel scene v1"
_CAM_FIELDS = 14


class SceneParseError(ValueError):
    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SceneStructureError(ValueError):
    pass


@dataclass
class SceneFileReport:
    camera_count: int
    keypoint_count: int
    dangling_track_refs: int
    warnings: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.dangling_track_refs == 0 and self.camera_count > 0


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def _parse_camera(tokens: list[str], line_number: int) -> Camera:
    if not _CAM_FIELDS + 1 <= len(tokens) <= _CAM_FIELDS + 3:
        raise SceneParseError(
            line_number,
            f"CAM expects {_CAM_FIELDS} to {_CAM_FIELDS + 2} fields, "
            f"got {len(tokens) - 1}",
        )
    try:
        camera_id = int(tokens[1])
        fx, fy, cx, cy = (float(t) for t in tokens[2:6])
        width, height = int(tokens[6]), int(tokens[7])
        qw, qx, qy, qz = (float(t) for t in tokens[8:12])
        tx, ty, tz = (float(t) for t in tokens[12:15])
        sensor = int(tokens[15]) if len(tokens) > 15 else 0
        timestamp = float(tokens[16]) if len(tokens) > 16 else 0.0
    except ValueError as e:
        raise SceneParseError(line_number, f"bad CAM value: {e}") from None
    try:
        return Camera(
            id=camera_id,
            intrinsics=CameraIntrinsics(fx, fy, cx, cy, width, height),
            pose=CameraPose(rotation=(qw, qx, qy, qz), translation=(tx, ty, tz)),
            sensor_index=sensor,
            timestamp=timestamp,
        )
    except ValueError as e:
        raise SceneParseError(line_number, f"invalid camera: {e}") from None


def _parse_point(tokens: list[str], line_number: int) -> Point3:
    if len(tokens) < 5:
        raise SceneParseError(
            line_number, f"PT expects at least 4 fields, got {len(tokens) - 1}"
        )
    try:
        point_id = int(tokens[1])
        x, y, z = (float(t) for t in tokens[2:5])
        track = [int(t) for t in tokens[5:]]
    except ValueError as e:
        raise SceneParseError(line_number, f"bad PT value: {e}") from None
    if not track:
        raise SceneStructureError(f"line {line_number}: keypoint {point_id} has an empty track")
    if len(set(track)) != len(track):
        raise SceneParseError(line_number, f"keypoint {point_id} repeats a camera id")
    try:
        return Point3(id=point_id, position=(x, y, z), track=frozenset(track))
    except ValueError as e:
        raise SceneParseError(line_number, str(e)) from None


def parse_scene(stream: bytes | str | IO[bytes] | IO[str]) -> Scene:
    """Parse a scene from bytes, text or an open file.

    Raises:
        SceneParseError: a line is malformed (carries ``line_number``).
        SceneStructureError: duplicate ids, dangling track references, or no
            cameras.
    """
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)

    cameras: list[Camera] = []
    points: list[Point3] = []
    camera_lines: dict[int, int] = {}
    point_lines: dict[int, int] = {}
    for line_number, raw in enumerate(stream, start=1):
        try:
            line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        except UnicodeDecodeError as e:
            raise SceneParseError(line_number, f"invalid UTF-8: {e.reason}") from None
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        match tokens[0]:
            case "CAM":
                camera = _parse_camera(tokens, line_number)
                if camera.id in camera_lines:
                    raise SceneStructureError(
                        f"line {line_number}: duplicate camera id {camera.id} "
                        f"(first defined on line {camera_lines[camera.id]})"
                    )
                camera_lines[camera.id] = line_number
                cameras.append(camera)
            case "PT":
                point = _parse_point(tokens, line_number)
                if point.id in point_lines:
                    raise SceneStructureError(
                        f"line {line_number}: duplicate point id {point.id} "
                        f"(first defined on line {point_lines[point.id]})"
                    )
                point_lines[point.id] = line_number
                points.append(point)
            case other:
                raise SceneParseError(line_number, f"unknown record type '{other}'")

    if not cameras:
        raise SceneStructureError("scene has no cameras")

    dangling = sorted({cam for p in points for cam in p.track} - camera_lines.keys())
    if dangling:
        raise SceneStructureError(
            f"tracks reference unknown camera ids: {dangling}"
        )
    return Scene(cameras=tuple(cameras), points=tuple(points))


def load_scene(path: Path | str) -> Scene:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scene file not found: {path}")
    with open(path, "rb") as f:
        return parse_scene(f)


def serialize_scene(scene: Scene) -> str:
    lines = [SCENE_HEADER]
    for c in scene.cameras:
        k, pose = c.intrinsics, c.pose
        fields = [
            "CAM",
            str(c.id),
            *(_fmt(v) for v in (k.fx, k.fy, k.cx, k.cy)),
            str(k.width),
            str(k.height),
            *(_fmt(v) for v in pose.rotation),
            *(_fmt(v) for v in pose.translation),
            str(c.sensor_index),
            _fmt(c.timestamp),
        ]
        lines.append(" ".join(fields))
    for p in scene.points:
        fields = ["PT", str(p.id), *(_fmt(v) for v in p.position)]
        fields.extend(str(cam) for cam in sorted(p.track))
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def write_scene(scene: Scene, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(serialize_scene(scene), encoding="utf-8")
    return path


def validate_scene(scene: Scene) -> SceneFileReport:
    """Count entities and invariant violations without raising."""
    known = set(scene.camera_index)
    observed: set[int] = set()
    dangling = 0
    for point in scene.points:
        for cam in point.track:
            if cam in known:
                observed.add(cam)
            else:
                dangling += 1

    warnings: list[str] = []
    if not scene.cameras:
        warnings.append("scene has no cameras")
    if len(known) != len(scene.cameras):
        warnings.append("scene has duplicate camera ids")
    idle = sorted(known - observed)
    if idle:
        warnings.append(f"cameras observing no keypoints: {idle}")
        logger.warning("%d cameras observe no keypoints", len(idle))
    return SceneFileReport(
        camera_count=len(scene.cameras),
        keypoint_count=len(scene.points),
        dangling_track_refs=dangling,
        warnings=warnings,
    )
