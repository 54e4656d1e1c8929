"""Baselines and the scaling benchmark."""

from viewsel.bench.baselines import (
    CliqueCostEstimate,
    FullSimilarityResult,
    bron_kerbosch,
    clique_cost_estimate,
    full_similarity_baseline,
    moon_moser_graph,
)
from viewsel.bench.scaling import BenchReport, BenchRow, render_bench_csv, run_scaling_benchmark

__all__ = [
    "BenchReport",
    "BenchRow",
    "CliqueCostEstimate",
    "FullSimilarityResult",
    "bron_kerbosch",
    "clique_cost_estimate",
    "full_similarity_baseline",
    "moon_moser_graph",
    "render_bench_csv",
    "run_scaling_benchmark",
]
