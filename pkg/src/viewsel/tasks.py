"""The viewsel task collection: run, synth, bench, stats and validate."""

import logging
from pathlib import Path
from typing import Any

from invoke.collection import Collection
from invoke.context import Context
from invoke.exceptions import Exit, ParseError
from invoke.tasks import task

from viewsel.bench.baselines import clique_cost_estimate
from viewsel.bench.scaling import render_bench_csv, run_scaling_benchmark
from viewsel.ingest import load_scene, validate_scene, write_scene
from viewsel.pipeline.config import (
    PipelineConfig,
    config_from_dict,
    load_pipeline_config,
    validate_config_yaml,
)
from viewsel.pipeline.manifest import export_manifests
from viewsel.pipeline.runner import ClusterStageError, execute_pipeline
from viewsel.pipeline.stats import (
    RUN_RECORD_FILENAME,
    compute_stats,
    load_run_record,
    render_csv,
    render_table,
    save_run_record,
)
from viewsel.selection.problem import write_lp
from viewsel.selection.visibility import dump_bitmap
from viewsel.synth import (
    RigConfig,
    TrajectoryKind,
    TrajectorySpec,
    WorldSpec,
    generate_synthetic_scene,
)

# Errors that end a task with exit code 1.
DATA_ERRORS = (ValueError, KeyError, OSError, ClusterStageError)

# flag -> (config section, field); section None is a top-level key
_FLAG_FIELDS: dict[str, tuple[str | None, str]] = {
    "block_x": ("grid", "block_x"),
    "block_y": ("grid", "block_y"),
    "overlap": ("grid", "overlap"),
    "resolution": ("grid", "sample_resolution"),
    "assoc_distance": ("association", "max_centroid_distance"),
    "max_depth": ("association", "max_depth"),
    "min_cluster_cams": ("association", "min_cluster_cameras"),
    "n_vis": ("selection", "n_vis"),
    "n_match": ("selection", "n_match"),
    "n_low": ("selection", "n_low"),
    "n_high": ("selection", "n_high"),
    "nmin_fraction": ("selection", "n_min_fraction"),
    "time_budget": ("selection", "time_budget"),
    "node_limit": ("selection", "node_limit"),
    "warm_start": ("selection", "warm_start_mode"),
    "match_threshold": (None, "match_threshold"),
    "jobs": (None, "parallelism"),
}

_DEFAULTS = PipelineConfig().to_dict()


def _default(flag: str) -> Any:
    section, key = _FLAG_FIELDS[flag]
    return _DEFAULTS[key] if section is None else _DEFAULTS[section][key]


_PIPELINE_HELP = {
    "config": "Path to a viewsel.yaml config; discovered from cwd when empty (default: '')",
    "block_x": f"Block size along x in metres (default: {_default('block_x')})",
    "block_y": f"Block size along y in metres (default: {_default('block_y')})",
    "overlap": f"Block overlap in metres (default: {_default('overlap')})",
    "resolution": f"Uniform sampling resolution r in metres (default: {_default('resolution')})",
    "n_vis": f"Selected cameras required per cluster point (default: {_default('n_vis')})",
    "n_match": f"Matchable partners required per selected camera (default: {_default('n_match')})",
    "n_low": f"Lower clamp of the adaptive minimum view count (default: {_default('n_low')})",
    "n_high": f"Upper clamp of the adaptive minimum view count (default: {_default('n_high')})",
    "nmin_fraction": (
        f"Fraction of cluster cameras for the minimum view count "
        f"(default: {_default('nmin_fraction')})"
    ),
    "match_threshold": (
        f"Shared points for two cameras to count as matchable "
        f"(default: {_default('match_threshold')})"
    ),
    "assoc_distance": (
        f"Max camera distance from a cluster centroid in metres "
        f"(default: {_default('assoc_distance')})"
    ),
    "max_depth": f"Max depth at which a camera sees a point (default: {_default('max_depth')})",
    "min_cluster_cams": (
        f"Clusters with fewer cameras are merged into a neighbour "
        f"(default: {_default('min_cluster_cams')})"
    ),
    "warm_start": f"Warm start mode: hint or hardfix (default: {_default('warm_start')})",
    "time_budget": (
        f"Wall-clock cap per cluster solve in seconds (default: {_default('time_budget')})"
    ),
    "node_limit": (
        f"Branch-and-bound node budget per cluster (default: {_default('node_limit')})"
    ),
    "jobs": f"Worker threads, 0 = one per CPU (default: {_default('jobs')})",
    "verbose": "Log pipeline progress (default: False)",
}


def _setup_logging(verbose: bool) -> None:
    if verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _coerce(flag: str, value: Any) -> Any:
    """Command-line values arrive as strings; convert them to the field's type."""
    kind = type(_default(flag))
    if not isinstance(value, str) or kind is str:
        return value
    try:
        return kind(value)
    except ValueError:
        raise ParseError(
            f"--{flag.replace('_', '-')} expects {kind.__name__}, got {value!r}"
        ) from None


def pipeline_config_from_flags(config: str, **flags: Any) -> PipelineConfig:
    """Config file (or discovered viewsel.yaml) overridden by every flag that was given.

    A flag left at ``None`` was not given and keeps the file or default value.
    """
    base = load_pipeline_config(config or None).to_dict()
    for flag, value in flags.items():
        if value is None:
            continue
        value = _coerce(flag, value)
        section, key = _FLAG_FIELDS[flag]
        if section is None:
            base[key] = value
        else:
            base[section][key] = value
    return config_from_dict(base, config or "<flags>")


def _dump_debug(run: Any, out: Path) -> None:
    debug_dir = out / "debug"
    debug_dir.mkdir(parents=True, exist_ok=True)
    for result in run.results:
        cid = result.cluster.id
        write_lp(result.problem, debug_dir / f"cluster_{cid}.lp")
        dump_bitmap(result.problem.visibility_rows, debug_dir / f"cluster_{cid}_visibility.txt")
        dump_bitmap(
            result.problem.matchability_rows > 0, debug_dir / f"cluster_{cid}_similarity.txt"
        )


@task(
    help={
        "scene": "Path to the scene file",
        "out": "Output directory for manifests and the run record (default: viewsel-out)",
        "dump": "Also write LP files and matrix bitmaps under <out>/debug (default: False)",
        **_PIPELINE_HELP,
    }
)
def run(
    c: Context,
    scene: str,
    out: str = "viewsel-out",
    config: str = "",
    block_x: float | None = None,
    block_y: float | None = None,
    overlap: float | None = None,
    resolution: float | None = None,
    n_vis: int | None = None,
    n_match: int | None = None,
    n_low: int | None = None,
    n_high: int | None = None,
    nmin_fraction: float | None = None,
    match_threshold: int | None = None,
    assoc_distance: float | None = None,
    max_depth: float | None = None,
    min_cluster_cams: int | None = None,
    warm_start: str | None = None,
    time_budget: float | None = None,
    node_limit: int | None = None,
    jobs: int | None = None,
    dump: bool = False,
    verbose: bool = False,
) -> None:
    """Cluster and select views for a scene, then write per-cluster manifests."""
    _setup_logging(verbose)
    try:
        cfg = pipeline_config_from_flags(
            config,
            block_x=block_x,
            block_y=block_y,
            overlap=overlap,
            resolution=resolution,
            n_vis=n_vis,
            n_match=n_match,
            n_low=n_low,
            n_high=n_high,
            nmin_fraction=nmin_fraction,
            match_threshold=match_threshold,
            assoc_distance=assoc_distance,
            max_depth=max_depth,
            min_cluster_cams=min_cluster_cams,
            warm_start=warm_start,
            time_budget=time_budget,
            node_limit=node_limit,
            jobs=jobs,
        )
        print(f"📦 Loading scene {scene}")
        loaded = load_scene(scene)
        for warning in validate_scene(loaded).warnings:
            print(f"⚠️  {warning}")
        result = execute_pipeline(loaded, cfg, name=Path(scene).stem)
        out_dir = Path(out)
        export_manifests(result.manifests, out_dir)
        save_run_record(result.record, out_dir / RUN_RECORD_FILENAME)
        if dump:
            _dump_debug(result, out_dir)
    except DATA_ERRORS as e:
        raise Exit(f"❌ {e}", code=1) from e

    table = compute_stats(result.record)
    print(render_table([table]), end="")
    if table.n_relaxed:
        print(f"⚠️  {table.n_relaxed} clusters needed a relaxed selection")
    violated = [r.cluster.id for r in result.results if r.violations]
    if violated:
        print(f"⚠️  clusters failing the feasibility check: {violated}")
    print(f"✅ Wrote {len(result.manifests)} manifests to {out_dir}")


@task(
    help={
        "out": "Scene file to write (default: scene.txt)",
        "kind": "Trajectory: straight, intersecting or roundabout (default: straight)",
        "duration": "Drive duration in seconds (default: 10.0)",
        "speed": "Vehicle speed in m/s (default: 10.0)",
        "radius": "Roundabout radius in metres (default: 15.0)",
        "seed": "Random seed for trajectory jitter and keypoints (default: 0)",
        "n_cams": "Cameras on the rig (default: 7)",
        "framerate": "Rig framerate in Hz (default: 30.0)",
        "density": "Keypoints per square metre of facade (default: 0.2)",
        "noise": "Keypoint position noise sigma in metres (default: 0.05)",
        "textureless": "Fraction of facade length without keypoints (default: 0.0)",
        "verbose": "Log generation progress (default: False)",
    }
)
def synth(
    c: Context,
    out: str = "scene.txt",
    kind: str = "straight",
    duration: float = 10.0,
    speed: float = 10.0,
    radius: float = 15.0,
    seed: int = 0,
    n_cams: int = 7,
    framerate: float = 30.0,
    density: float = 0.2,
    noise: float = 0.05,
    textureless: float = 0.0,
    verbose: bool = False,
) -> None:
    """Generate a synthetic urban scene and write it in the scene format."""
    _setup_logging(verbose)
    try:
        spec = TrajectorySpec(
            kind=TrajectoryKind(kind.lower()),
            duration=duration,
            speed=speed,
            radius=radius,
            seed=seed,
        )
        rig = RigConfig(n_cams=n_cams, framerate=framerate)
        world = WorldSpec(
            density=density, noise_sigma=noise, textureless_fraction=textureless, seed=seed
        )
        scene = generate_synthetic_scene(spec, world, rig)
        path = write_scene(scene, out)
    except DATA_ERRORS as e:
        raise Exit(f"❌ {e}", code=1) from e
    print(f"✅ Wrote {len(scene.cameras)} cameras and {len(scene.points)} keypoints to {path}")


@task(
    help={
        "sizes": "Comma-separated view counts, ascending (default: 500,1000,2000,4000,8000)",
        "out": "CSV report to write (default: bench.csv)",
        "seed": "Random seed for the synthetic scenes (default: 0)",
        "baseline_max": "Largest view count timed with the full similarity (default: 2000)",
        "config": _PIPELINE_HELP["config"],
        "jobs": _PIPELINE_HELP["jobs"],
        "verbose": "Log benchmark progress (default: False)",
    }
)
def bench(
    c: Context,
    sizes: str = "500,1000,2000,4000,8000",
    out: str = "bench.csv",
    seed: int = 0,
    baseline_max: int = 2000,
    config: str = "",
    jobs: int | None = None,
    verbose: bool = False,
) -> None:
    """Time the pipeline on growing synthetic scenes and write a CSV report."""
    _setup_logging(verbose)
    try:
        views = [int(s) for s in sizes.split(",") if s.strip()]
        cfg = pipeline_config_from_flags(config, jobs=jobs)
        print(f"📊 Benchmarking {len(views)} scene sizes...")
        report = run_scaling_benchmark(views, seed=seed, cfg=cfg, baseline_max_views=baseline_max)
        Path(out).write_text(render_bench_csv(report))
    except DATA_ERRORS as e:
        raise Exit(f"❌ {e}", code=1) from e

    if report.linear is not None:
        print(f"📈 Linear fit R² = {report.linear.r2:.3f}")
    estimate = clique_cost_estimate(100)
    print(
        f"🔍 Per-point clique enumeration at N_c = 100: "
        f"~10^{estimate.log10_visits:.0f} node visits ({estimate.verdict})"
    )
    print(f"✅ Wrote benchmark report to {out}")


@task(
    help={
        "record": "Run record file or output directory; comma-separate several",
        "csv": "Render CSV instead of an aligned table (default: False)",
    }
)
def stats(c: Context, record: str, csv: bool = False) -> None:
    """Re-render statistics from saved run records."""
    try:
        tables = [compute_stats(load_run_record(p.strip())) for p in record.split(",") if p.strip()]
    except DATA_ERRORS as e:
        raise Exit(f"❌ {e}", code=1) from e
    print(render_csv(tables) if csv else render_table(tables), end="")


@task(
    help={
        "scene": "Path to the scene file",
        "config": "Also validate this viewsel.yaml (default: '')",
    }
)
def validate(c: Context, scene: str, config: str = "") -> None:
    """Check a scene file (and optionally a config file) without running the pipeline."""
    try:
        report = validate_scene(load_scene(scene))
        if config:
            validate_config_yaml(config)
            print(f"✅ {config} is valid.")
    except DATA_ERRORS as e:
        raise Exit(f"❌ {e}", code=1) from e
    print(f"📦 {report.camera_count} cameras, {report.keypoint_count} keypoints")
    for warning in report.warnings:
        print(f"⚠️  {warning}")
    if not report.accepted:
        raise Exit("❌ scene rejected", code=1)
    print("✅ Scene is valid.")


ns = Collection()
ns.add_task(run)
ns.add_task(synth)
ns.add_task(bench)
ns.add_task(stats)
ns.add_task(validate)
