"""Per-cluster manifests handed to an external MVS tool."""

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from viewsel.clustering.grid import Cluster, Rect
from viewsel.model import Camera, CameraIntrinsics, CameraPose, Scene
from viewsel.selection.solver import Solution, SolveStatus

MANIFEST_SCHEMA_VERSION = 1
INDEX_FILENAME = "index.json"


@dataclass(frozen=True)
class ClusterManifest:
    cluster_id: int
    core_bounds: Rect
    expanded_bounds: Rect
    blocks: tuple[tuple[int, int], ...]
    cameras: tuple[Camera, ...]
    associated_camera_ids: tuple[int, ...]
    keypoint_ids: tuple[int, ...]
    n_sampled: int
    status: SolveStatus
    objective: int
    n_min: int
    gap: int = 0
    excluded_camera_ids: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        stray = sorted({c.id for c in self.cameras} - set(self.associated_camera_ids))
        if stray:
            raise ValueError(
                f"cluster {self.cluster_id}: selected cameras {stray} are not associated"
            )

    @property
    def selected_camera_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.cameras)

    @property
    def filename(self) -> str:
        return f"cluster_{self.cluster_id}.json"


def build_manifest(cluster: Cluster, solution: Solution, scene: Scene) -> ClusterManifest:
    return ClusterManifest(
        cluster_id=cluster.id,
        core_bounds=cluster.core_bounds,
        expanded_bounds=cluster.expanded_bounds,
        blocks=tuple(b.index for b in cluster.blocks),
        cameras=tuple(scene.camera(cam) for cam in sorted(solution.selected)),
        associated_camera_ids=tuple(cluster.cameras),
        keypoint_ids=tuple(cluster.keypoints),
        n_sampled=len(cluster.sampled),
        status=solution.status,
        objective=solution.objective,
        n_min=solution.n_min,
        gap=solution.gap,
        excluded_camera_ids=tuple(solution.excluded),
    )


def camera_to_dict(camera: Camera) -> dict[str, Any]:
    k = camera.intrinsics
    return {
        "id": camera.id,
        "sensor": camera.sensor_index,
        "timestamp": camera.timestamp,
        "intrinsics": {
            "fx": k.fx,
            "fy": k.fy,
            "cx": k.cx,
            "cy": k.cy,
            "width": k.width,
            "height": k.height,
        },
        "rotation": list(camera.pose.rotation),
        "translation": list(camera.pose.translation),
    }


def camera_from_dict(raw: dict[str, Any]) -> Camera:
    return Camera(
        id=int(raw["id"]),
        intrinsics=CameraIntrinsics(**raw["intrinsics"]),
        pose=CameraPose(
            rotation=tuple(float(v) for v in raw["rotation"]),  # type: ignore[arg-type]
            translation=tuple(float(v) for v in raw["translation"]),  # type: ignore[arg-type]
        ),
        sensor_index=int(raw.get("sensor", 0)),
        timestamp=float(raw.get("timestamp", 0.0)),
    )


def manifest_to_dict(manifest: ClusterManifest) -> dict[str, Any]:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "cluster_id": manifest.cluster_id,
        "core_bounds": manifest.core_bounds.as_list(),
        "expanded_bounds": manifest.expanded_bounds.as_list(),
        "blocks": [list(index) for index in manifest.blocks],
        "solver": {
            "status": manifest.status.value,
            "objective": manifest.objective,
            "n_min": manifest.n_min,
            "gap": manifest.gap,
        },
        "associated_camera_ids": list(manifest.associated_camera_ids),
        "excluded_camera_ids": list(manifest.excluded_camera_ids),
        "selected_cameras": [camera_to_dict(c) for c in manifest.cameras],
        "keypoint_ids": list(manifest.keypoint_ids),
        "n_sampled": manifest.n_sampled,
    }


def manifest_from_dict(raw: dict[str, Any]) -> ClusterManifest:
    version = raw.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported manifest schema version {version!r} "
            f"(expected {MANIFEST_SCHEMA_VERSION})"
        )
    solver = raw["solver"]
    return ClusterManifest(
        cluster_id=int(raw["cluster_id"]),
        core_bounds=Rect(*raw["core_bounds"]),
        expanded_bounds=Rect(*raw["expanded_bounds"]),
        blocks=tuple((int(i), int(j)) for i, j in raw["blocks"]),
        cameras=tuple(camera_from_dict(c) for c in raw["selected_cameras"]),
        associated_camera_ids=tuple(int(c) for c in raw["associated_camera_ids"]),
        keypoint_ids=tuple(int(p) for p in raw["keypoint_ids"]),
        n_sampled=int(raw["n_sampled"]),
        status=SolveStatus(solver["status"]),
        objective=int(solver["objective"]),
        n_min=int(solver["n_min"]),
        gap=int(solver.get("gap", 0)),
        excluded_camera_ids=tuple(int(c) for c in raw.get("excluded_camera_ids", [])),
    )


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def export_manifests(manifests: list[ClusterManifest], out_dir: Path | str) -> list[Path]:
    """Write one ``cluster_<id>.json`` per manifest plus ``index.json``.

    Existing files are replaced atomically and cluster files left over from an
    earlier run are removed once the index is written. Returns the written
    paths, index last.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e}") from e

    written = []
    ordered = sorted(manifests, key=lambda m: m.cluster_id)
    for manifest in ordered:
        path = out_dir / manifest.filename
        try:
            write_atomic(path, _dumps(manifest_to_dict(manifest)))
        except OSError as e:
            raise OSError(f"cannot write manifest {path}: {e}") from e
        written.append(path)

    index = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "clusters": [
            {
                "cluster_id": m.cluster_id,
                "file": m.filename,
                "n_selected": len(m.cameras),
                "n_associated": len(m.associated_camera_ids),
                "status": m.status.value,
            }
            for m in ordered
        ],
    }
    index_path = out_dir / INDEX_FILENAME
    try:
        write_atomic(index_path, _dumps(index))
    except OSError as e:
        raise OSError(f"cannot write manifest index {index_path}: {e}") from e
    written.append(index_path)

    current = {m.filename for m in ordered}
    for stale in sorted(out_dir.glob("cluster_*.json")):
        if stale.name not in current:
            stale.unlink()
    return written


def load_manifest(path: Path | str) -> ClusterManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found at {path}")
    with open(path) as f:
        return manifest_from_dict(json.load(f))


def load_manifests(out_dir: Path | str) -> list[ClusterManifest]:
    """Every manifest listed in ``index.json``, in index order."""
    out_dir = Path(out_dir)
    index_path = out_dir / INDEX_FILENAME
    if not index_path.exists():
        raise FileNotFoundError(f"manifest index not found at {index_path}")
    with open(index_path) as f:
        index = json.load(f)
    return [load_manifest(out_dir / entry["file"]) for entry in index["clusters"]]
