"""Runtime scaling of the pipeline against the quadratic full-similarity baseline."""

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from viewsel.bench.baselines import (
    CliqueRun,
    full_similarity_baseline,
    moon_moser_graph,
    time_bron_kerbosch,
)
from viewsel.pipeline.config import PipelineConfig
from viewsel.pipeline.runner import execute_pipeline, resolve_workers
from viewsel.synth import (
    RigConfig,
    TrajectoryKind,
    TrajectorySpec,
    WorldSpec,
    generate_synthetic_scene,
)

logger = logging.getLogger(__name__)

BENCH_CSV_VERSION = 1
DEFAULT_BASELINE_MAX_VIEWS = 2000
DEFAULT_CLIQUE_SIZES = (3, 6, 9, 12, 15)


@dataclass(frozen=True)
class BenchRow:
    target_views: int
    n_views: int
    n_clusters: int
    k: float
    ops_full_similarity: int
    ops_clustered: int
    t_pipeline: float
    t_full_similarity: float | None = None
    images_per_minute: float = 0.0

    @property
    def efficient(self) -> bool:
        return self.ops_clustered < self.ops_full_similarity


@dataclass(frozen=True)
class Fit:
    """Polynomial fit, highest degree first as ``numpy.polyfit`` returns it."""

    coefficients: tuple[float, ...]
    r2: float

    def predict(self, x: float) -> float:
        return float(np.polyval(self.coefficients, x))


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    parallelism: int
    linear: Fit | None = None
    quadratic: Fit | None = None
    cliques: tuple[CliqueRun, ...] = field(default=())

    @property
    def quadratic_share(self) -> float | None:
        """Share of the largest-size quadratic prediction owed to the squared term."""
        if self.quadratic is None or not self.rows:
            return None
        x = float(self.rows[-1].n_views)
        total = abs(self.quadratic.predict(x))
        if total == 0:
            return 0.0
        return abs(self.quadratic.coefficients[0] * x * x) / total


def fit_polynomial(x: np.ndarray, y: np.ndarray, degree: int) -> Fit:
    coefficients = np.polyfit(x, y, degree)
    residual = y - np.polyval(coefficients, x)
    spread = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((residual**2).sum()) / spread if spread > 0 else 1.0
    return Fit(coefficients=tuple(float(c) for c in coefficients), r2=r2)


def run_scaling_benchmark(
    sizes: list[int],
    base_spec: TrajectorySpec | None = None,
    seed: int = 0,
    world: WorldSpec | None = None,
    rig: RigConfig | None = None,
    cfg: PipelineConfig | None = None,
    baseline_max_views: int = DEFAULT_BASELINE_MAX_VIEWS,
    clique_sizes: tuple[int, ...] = DEFAULT_CLIQUE_SIZES,
) -> BenchReport:
    """Time the pipeline on straight synthetic scenes of growing length.

    Each size becomes the trajectory duration ``size / (framerate * n_cams)``.
    The full-similarity baseline is timed only up to ``baseline_max_views``.
    """
    if not sizes:
        raise ValueError("at least one benchmark size is required")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"benchmark sizes must be strictly ascending, got {sizes}")
    if sizes[0] < 1:
        raise ValueError(f"benchmark sizes must be positive, got {sizes}")

    base_spec = base_spec or TrajectorySpec()
    world = world or WorldSpec()
    rig = rig or RigConfig()
    cfg = cfg or PipelineConfig()

    rows = []
    for size in sizes:
        spec = replace(
            base_spec,
            kind=TrajectoryKind.STRAIGHT,
            duration=size / (rig.framerate * rig.n_cams),
            seed=seed,
        )
        scene = generate_synthetic_scene(spec, replace(world, seed=seed), rig)

        started = time.perf_counter()
        run = execute_pipeline(scene, cfg, name=f"{size} views")
        elapsed = time.perf_counter() - started
        stats = run.stats

        t_full = None
        if len(scene.cameras) <= baseline_max_views:
            t_full = full_similarity_baseline(scene).elapsed

        rows.append(
            BenchRow(
                target_views=size,
                n_views=len(scene.cameras),
                n_clusters=stats.n_clusters,
                k=stats.k_after_clustering,
                ops_full_similarity=stats.ops_full,
                ops_clustered=stats.ops_clustered,
                t_pipeline=elapsed,
                t_full_similarity=t_full,
                images_per_minute=60.0 * len(scene.cameras) / elapsed if elapsed > 0 else 0.0,
            )
        )
        logger.info("bench %d views: pipeline %.2fs, C=%d", size, elapsed, stats.n_clusters)

    x = np.array([r.n_views for r in rows], dtype=float)
    y = np.array([r.t_pipeline for r in rows], dtype=float)
    linear = fit_polynomial(x, y, 1) if len(rows) >= 2 else None
    quadratic = fit_polynomial(x, y, 2) if len(rows) >= 3 else None
    cliques = tuple(time_bron_kerbosch(moon_moser_graph(n)) for n in clique_sizes)
    return BenchReport(
        rows=tuple(rows),
        parallelism=resolve_workers(cfg.parallelism),
        linear=linear,
        quadratic=quadratic,
        cliques=cliques,
    )


def render_bench_csv(report: BenchReport) -> str:
    """CSV with a leading ``# viewsel bench v<N>`` line and one row per size.

    Columns are the BenchRow fields; a missing baseline time is left empty.
    Fit and clique results follow as comment lines.
    """
    out = io.StringIO()
    out.write(f"# viewsel bench v{BENCH_CSV_VERSION} parallelism={report.parallelism}\n")
    names = [f.name for f in fields(BenchRow)]
    writer = csv.DictWriter(out, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        values = asdict(row)
        if values["t_full_similarity"] is None:
            values["t_full_similarity"] = ""
        writer.writerow(values)
    for label, fit in (("linear", report.linear), ("quadratic", report.quadratic)):
        if fit is not None:
            coefficients = " ".join(f"{c:.6g}" for c in fit.coefficients)
            out.write(f"# fit {label}: coefficients={coefficients} r2={fit.r2:.4f}\n")
    for run in report.cliques:
        out.write(f"# bron_kerbosch n={run.n} cliques={run.cliques} time={run.elapsed:.4f}\n")
    return out.getvalue()
