"""Tests for the visibility module."""
from dataclasses import replace

import numpy as np
import pytest

from tests.scenes import BLOCK, keypoint, look_camera, random_scene
from viewsel.clustering.associate import AssociationConfig
from viewsel.clustering.grid import Cluster, GridConfig, sample_uniform_points
from viewsel.model import Scene, project_point
from viewsel.selection.visibility import (
    VisibilityMatrix,
    build_similarity,
    build_visibility_matrix,
    dump_bitmap,
)

CFG = AssociationConfig()


def vis_from_bits(bits) -> VisibilityMatrix:
    bits = np.asarray(bits, dtype=bool)
    return VisibilityMatrix(
        bits=bits,
        point_ids=tuple(range(bits.shape[0])),
        camera_ids=tuple(range(bits.shape[1])),
    )


# ─────────────────────────────────────────────────────────────
# build_visibility_matrix
# ─────────────────────────────────────────────────────────────


class TestBuildVisibilityMatrix:
    def test_point_on_optical_axis(self):
        scene = Scene(cameras=(look_camera(0),), points=(keypoint(0, (10.0, 0.0, 0.0)),))
        cluster = Cluster(id=0, blocks=(BLOCK,), keypoints=(0,), cameras=(0,))
        vis = build_visibility_matrix(cluster, scene, CFG)
        assert vis.bits.tolist() == [[True]]
        assert vis.point_ids == (0,)
        assert vis.camera_ids == (0,)

    def test_back_to_back_cameras(self):
        scene = Scene(
            cameras=(look_camera(0, heading_deg=0.0), look_camera(1, heading_deg=180.0)),
            points=(keypoint(0, (10.0, 0.0, 0.0)),),
        )
        cluster = Cluster(id=0, blocks=(BLOCK,), keypoints=(0,), cameras=(0, 1))
        assert build_visibility_matrix(cluster, scene, CFG).bits.tolist() == [[True, False]]

    def test_columns_follow_cluster_camera_order(self):
        scene = Scene(
            cameras=(look_camera(5, heading_deg=180.0), look_camera(9, heading_deg=0.0)),
            points=(keypoint(0, (10.0, 0.0, 0.0), track=(9,)),),
        )
        cluster = Cluster(id=0, blocks=(BLOCK,), keypoints=(0,), cameras=(5, 9))
        assert build_visibility_matrix(cluster, scene, CFG).bits.tolist() == [[False, True]]

    def test_rows_cover_keypoints_then_sampled(self):
        scene = Scene(cameras=(look_camera(0),), points=(keypoint(0, (10.0, 0.0, 0.0)),))
        cluster = Cluster(id=0, blocks=(BLOCK,), keypoints=(0,), cameras=(0,))
        sampled = sample_uniform_points(cluster, GridConfig(sample_resolution=12.0), (0.0, 0.0), 1)
        vis = build_visibility_matrix(replace(cluster, sampled=tuple(sampled)), scene, CFG)
        assert vis.point_ids == (0, *(p.id for p in sampled))
        assert vis.n_points == 1 + len(sampled)

    def test_matches_projection_oracle(self):
        rng = np.random.default_rng(3)
        scene = random_scene(rng, n_cameras=20, n_points=200, extent=50.0)
        ids = tuple(c.id for c in scene.cameras)
        cluster = Cluster(
            id=0, blocks=(BLOCK,), keypoints=tuple(p.id for p in scene.points), cameras=ids
        )
        vis = build_visibility_matrix(cluster, scene, CFG)
        for j, point in enumerate(scene.points):
            for i, camera in enumerate(scene.cameras):
                hit = project_point(camera, point.position)
                assert vis.bits[j, i] == (hit is not None and hit[2] <= CFG.max_depth)

    def test_cluster_without_cameras(self):
        scene = Scene(cameras=(look_camera(0),), points=(keypoint(0, (10.0, 0.0, 0.0)),))
        cluster = Cluster(id=4, blocks=(BLOCK,), keypoints=(0,))
        with pytest.raises(ValueError, match="cluster 4 has no associated cameras"):
            build_visibility_matrix(cluster, scene, CFG)


# ─────────────────────────────────────────────────────────────
# build_similarity
# ─────────────────────────────────────────────────────────────


class TestBuildSimilarity:
    def test_identical_columns(self):
        bits = np.zeros((10, 2), dtype=bool)
        bits[:7] = True
        sim = build_similarity(vis_from_bits(bits), match_threshold=5)
        assert sim.counts.tolist() == [[7, 7], [7, 7]]
        assert sim.binary.tolist() == [[False, True], [True, False]]

    def test_disjoint_columns(self):
        bits = np.zeros((10, 2), dtype=bool)
        bits[:5, 0] = True
        bits[5:, 1] = True
        sim = build_similarity(vis_from_bits(bits), match_threshold=1)
        assert sim.counts[0, 1] == 0
        assert not sim.binary.any()

    def test_counts_match_pairwise_intersections(self):
        rng = np.random.default_rng(8)
        bits = rng.random((300, 10)) < 0.3
        sim = build_similarity(vis_from_bits(bits), match_threshold=5)
        for a in range(10):
            for b in range(10):
                assert sim.counts[a, b] == int((bits[:, a] & bits[:, b]).sum())
        assert np.array_equal(sim.counts, sim.counts.T)

    def test_raising_threshold_only_removes_edges(self):
        rng = np.random.default_rng(9)
        vis = vis_from_bits(rng.random((200, 12)) < 0.25)
        previous = build_similarity(vis, 1).edges()
        for threshold in range(2, 30):
            edges = build_similarity(vis, threshold).edges()
            assert edges <= previous
            previous = edges

    def test_rejects_zero_threshold(self):
        with pytest.raises(ValueError, match="match_threshold"):
            build_similarity(vis_from_bits(np.ones((1, 1))), 0)

    def test_finer_sampling_never_lowers_counts(self):
        cameras = tuple(
            look_camera(i, center=(-15.0 + 5.0 * i, -20.0, 1.0), heading_deg=90.0) for i in range(6)
        )
        scene = Scene(cameras=cameras, points=(keypoint(0, (10.0, 10.0, 1.0)),))
        cluster = Cluster(
            id=0, blocks=(BLOCK,), keypoints=(0,), cameras=tuple(c.id for c in cameras)
        )
        counts = []
        for r in (1.0, 0.5):
            sampled = sample_uniform_points(cluster, GridConfig(sample_resolution=r), (0.0, 2.0), 1)
            vis = build_visibility_matrix(replace(cluster, sampled=tuple(sampled)), scene, CFG)
            counts.append(build_similarity(vis, 5).counts)
        coarse, fine = counts
        assert (fine >= coarse).all()
        assert (fine > coarse).any()


class TestDumpBitmap:
    def test_ascii_rows(self, tmp_path):
        path = dump_bitmap(np.array([[1, 0], [0, 1]]), tmp_path / "bits.txt")
        assert path.read_text() == "10\n01\n"
