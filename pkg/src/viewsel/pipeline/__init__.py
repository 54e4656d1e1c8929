"""Pipeline orchestration, statistics, manifests and configuration."""

from viewsel.pipeline.config import PipelineConfig, load_pipeline_config, validate_config_yaml
from viewsel.pipeline.manifest import (
    ClusterManifest,
    export_manifests,
    load_manifest,
    load_manifests,
)
from viewsel.pipeline.runner import (
    ClusterResult,
    ClusterStageError,
    PipelineRun,
    execute_pipeline,
    run_pipeline,
)
from viewsel.pipeline.stats import (
    RunRecord,
    StatsTable,
    check_efficiency,
    compute_stats,
    load_run_record,
    operation_counts,
    render_csv,
    render_table,
    save_run_record,
)

__all__ = [
    "ClusterManifest",
    "ClusterResult",
    "ClusterStageError",
    "PipelineConfig",
    "PipelineRun",
    "RunRecord",
    "StatsTable",
    "check_efficiency",
    "compute_stats",
    "execute_pipeline",
    "export_manifests",
    "load_manifest",
    "load_manifests",
    "load_pipeline_config",
    "load_run_record",
    "operation_counts",
    "render_csv",
    "render_table",
    "run_pipeline",
    "save_run_record",
    "validate_config_yaml",
]
