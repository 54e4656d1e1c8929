"""View clustering: overlapping grid, lattice sampling, camera association."""

from viewsel.clustering.associate import (
    AssociationConfig,
    associate_cameras,
    associate_cluster,
    association_counts,
    merge_small_clusters,
)
from viewsel.clustering.grid import (
    Block,
    Cluster,
    GridConfig,
    Rect,
    assign_keypoints,
    build_grid,
    lattice_size,
    sample_uniform_points,
    sampling_z_range,
    scene_z_range,
)

__all__ = [
    "AssociationConfig",
    "Block",
    "Cluster",
    "GridConfig",
    "Rect",
    "assign_keypoints",
    "associate_cameras",
    "associate_cluster",
    "association_counts",
    "build_grid",
    "lattice_size",
    "merge_small_clusters",
    "sample_uniform_points",
    "sampling_z_range",
    "scene_z_range",
]
