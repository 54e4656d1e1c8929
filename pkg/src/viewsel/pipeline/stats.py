"""Run records, per-sequence statistics and their text/CSV rendering."""

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

logger = logging.getLogger(__name__)

RUN_RECORD_FILENAME = "run_record.yaml"
RUN_RECORD_VERSION = 1


def check_efficiency(k: float, c: int, ops: tuple[int, int] | None = None) -> bool:
    """Clustering beats the full similarity matrix when ``K < sqrt(C)``.

    ``ops`` is ``(sum N_c^2, N^2)`` from ``operation_counts``; when given it is
    logged next to the K test.
    """
    if c < 1:
        raise ValueError(f"cluster count must be at least 1, got {c}")
    if k < 0:
        raise ValueError(f"redundancy factor must be non-negative, got {k}")
    holds = k < math.sqrt(c)
    if ops is None:
        logger.info("efficiency: K=%.2f %s sqrt(C)=%.2f", k, "<" if holds else ">=", math.sqrt(c))
    else:
        clustered, full = ops
        logger.info(
            "efficiency: K=%.2f %s sqrt(C)=%.2f, sum N_c^2=%d %s N^2=%d",
            k,
            "<" if holds else ">=",
            math.sqrt(c),
            clustered,
            "<" if clustered < full else ">=",
            full,
        )
    return holds


def operation_counts(cluster_sizes: list[int], n_views: int) -> tuple[int, int]:
    """``(sum N_c^2, N^2)``: similarity work per cluster vs over the whole scene."""
    return sum(n * n for n in cluster_sizes), n_views * n_views


@dataclass(frozen=True)
class ClusterSummary:
    cluster_id: int
    n_cameras: int
    n_selected: int
    n_keypoints: int
    n_sampled: int
    status: str
    objective: int
    n_min: int
    gap: int = 0
    nodes: int = 0
    solve_time: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    """Everything ``compute_stats`` needs, saved next to the manifests."""

    name: str
    n_input_views: int
    n_views: int
    n_keypoints: int
    k_max: int
    t_clustering: float
    t_selection: float
    parallelism: int
    clusters: tuple[ClusterSummary, ...]
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["clusters"] = [asdict(c) for c in self.clusters]
        return {"version": RUN_RECORD_VERSION, **payload}

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunRecord":
        raw = dict(raw)
        version = raw.pop("version", None)
        if version != RUN_RECORD_VERSION:
            raise ValueError(
                f"unsupported run record version {version!r} (expected {RUN_RECORD_VERSION})"
            )
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise KeyError(f"unknown run record keys {unknown}")
        clusters = tuple(ClusterSummary(**c) for c in raw.pop("clusters", []))
        return cls(clusters=clusters, **raw)


def save_run_record(record: RunRecord, path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w") as f:
        yaml.safe_dump(record.to_dict(), f, sort_keys=False)
    return path


def load_run_record(path: Path | str) -> RunRecord:
    path = Path(path)
    if path.is_dir():
        path = path / RUN_RECORD_FILENAME
    if not path.exists():
        raise FileNotFoundError(f"run record not found at {path}")
    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ValueError(f"{path} does not hold a run record")
    return RunRecord.from_dict(raw)


@dataclass(frozen=True)
class StatsTable:
    name: str
    n_views: int
    n_keypoints: int
    n_clusters: int
    n_after_clustering: int
    k_after_clustering: float
    avg_nc_after_clustering: float
    t_clustering: float
    n_after_selection: int
    k_after_selection: float
    avg_nc_after_selection: float
    t_selection: float
    t_total: float
    n_input_views: int = 0
    k_max: int = 0
    ops_clustered: int = 0
    ops_full: int = 0
    efficient: bool = False
    n_relaxed: int = 0
    images_per_minute: float = 0.0


def compute_stats(record: RunRecord) -> StatsTable:
    if record.n_views < 1 or not record.clusters:
        raise ValueError(f"run '{record.name}' holds no associated cameras")
    c = len(record.clusters)
    sizes = [s.n_cameras for s in record.clusters]
    n_clustered = sum(sizes)
    n_selected = sum(s.n_selected for s in record.clusters)
    k_clustered = n_clustered / record.n_views
    ops_clustered, ops_full = operation_counts(sizes, record.n_views)
    t_total = record.t_clustering + record.t_selection
    views = record.n_input_views or record.n_views
    return StatsTable(
        name=record.name,
        n_views=record.n_views,
        n_keypoints=record.n_keypoints,
        n_clusters=c,
        n_after_clustering=n_clustered,
        k_after_clustering=k_clustered,
        avg_nc_after_clustering=n_clustered / c,
        t_clustering=record.t_clustering,
        n_after_selection=n_selected,
        k_after_selection=n_selected / record.n_views,
        avg_nc_after_selection=n_selected / c,
        t_selection=record.t_selection,
        t_total=t_total,
        n_input_views=record.n_input_views,
        k_max=record.k_max,
        ops_clustered=ops_clustered,
        ops_full=ops_full,
        efficient=check_efficiency(k_clustered, c, (ops_clustered, ops_full)),
        n_relaxed=sum(s.status == "infeasible_relaxed" for s in record.clusters),
        images_per_minute=60.0 * views / t_total if t_total > 0 else math.inf,
    )


# (label, attribute, format)
_ROWS: list[tuple[str, str, str]] = [
    ("N", "n_views", "d"),
    ("P", "n_keypoints", "d"),
    ("C", "n_clusters", "d"),
    ("N after clustering", "n_after_clustering", "d"),
    ("K after clustering", "k_after_clustering", ".2f"),
    ("avg N_c after clustering", "avg_nc_after_clustering", ".1f"),
    ("t clustering [s]", "t_clustering", ".2f"),
    ("N after selection", "n_after_selection", "d"),
    ("K after selection", "k_after_selection", ".2f"),
    ("avg N_c after selection", "avg_nc_after_selection", ".1f"),
    ("t selection [s]", "t_selection", ".2f"),
    ("t total [s]", "t_total", ".2f"),
    ("K max", "k_max", "d"),
    ("sum N_c^2", "ops_clustered", "d"),
    ("N^2", "ops_full", "d"),
    ("K < sqrt(C)", "efficient", ""),
    ("relaxed clusters", "n_relaxed", "d"),
    ("images / min", "images_per_minute", ".0f"),
]


def _cell(value: Any, fmt: str) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return format(value, fmt)


def render_table(tables: list[StatsTable]) -> str:
    """Aligned text with one column per sequence."""
    if not tables:
        return ""
    header = ["", *(t.name for t in tables)]
    body = [
        [label, *(_cell(getattr(t, attr), fmt) for t in tables)] for label, attr, fmt in _ROWS
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = []
    for row in [header, *body]:
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(width) for cell, width in zip(row[1:], widths[1:])
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def render_csv(tables: list[StatsTable]) -> str:
    """One row per sequence; columns are the StatsTable field names."""
    out = io.StringIO()
    names = [f.name for f in fields(StatsTable)]
    writer = csv.DictWriter(out, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for table in tables:
        writer.writerow(asdict(table))
    return out.getvalue()
