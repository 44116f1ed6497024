import numpy as np
import pytest

from heatsense.cloud import (
    DIRICHLET,
    INTERIOR,
    NEUMANN,
    PointCloud,
    generate_1d,
    generate_grid_2d,
    generate_random_1d,
    generate_random_2d,
    knn_stencils,
    load_cloud_csv,
    save_cloud_csv,
)


class TestGenerate1d:
    def test_benchmark_cloud(self):
        cloud = generate_1d(-10, 10, 400)
        assert cloud.n == 400
        assert cloud.points[0, 0] == -10
        assert cloud.tags[0] == DIRICHLET
        assert cloud.tags[-1] == DIRICHLET
        spacing = np.diff(cloud.points[:, 0])
        assert np.allclose(spacing, 20 / 399)

    def test_three_points(self):
        cloud = generate_1d(0, 1, 3)
        assert np.allclose(cloud.points[:, 0], [0, 0.5, 1])
        assert cloud.tags[1] == INTERIOR

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            generate_1d(0, 1, 2)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            generate_1d(1, 0, 5)


class TestGrid2d:
    def test_3x3_counts(self):
        cloud = generate_grid_2d(
            1, 1, 3, 3, {"bottom": DIRICHLET, "top": NEUMANN, "left": NEUMANN, "right": NEUMANN}
        )
        assert cloud.n == 9
        assert np.sum(cloud.tags == INTERIOR) == 1
        assert np.sum(cloud.tags == DIRICHLET) == 3
        assert np.sum(cloud.tags == NEUMANN) == 5

    def test_benchmark_grid_size(self):
        cloud = generate_grid_2d(1, 1, 37, 37, {"bottom": DIRICHLET})
        assert cloud.n == 1369

    def test_corner_tag_precedence(self):
        cloud = generate_grid_2d(
            1, 1, 3, 3, {"bottom": DIRICHLET, "left": NEUMANN, "top": NEUMANN, "right": NEUMANN}
        )
        corner = np.flatnonzero((cloud.points[:, 0] == 0) & (cloud.points[:, 1] == 0))[0]
        assert cloud.tags[corner] == DIRICHLET

    def test_neumann_corner_normal_is_unit_diagonal(self):
        cloud = generate_grid_2d(
            1, 1, 3, 3, {"bottom": DIRICHLET, "left": NEUMANN, "top": NEUMANN, "right": NEUMANN}
        )
        corner = np.flatnonzero((cloud.points[:, 0] == 0) & (cloud.points[:, 1] == 1))[0]
        assert cloud.tags[corner] == NEUMANN
        assert np.allclose(cloud.normals[corner], [-1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_boundary_points_on_edges(self):
        cloud = generate_grid_2d(2.0, 1.0, 9, 7, {"bottom": DIRICHLET, "top": NEUMANN})
        for i in np.flatnonzero(cloud.tags != INTERIOR):
            x, y = cloud.points[i]
            assert (
                min(abs(x - 0), abs(x - 2.0), abs(y - 0), abs(y - 1.0)) < 1e-12
            )


class TestKnn:
    def test_line_endpoint(self):
        cloud = generate_1d(0, 3, 4)
        sten = knn_stencils(cloud, 3)
        assert list(sten.row(0)) == [0, 1, 2]

    def test_tie_breaks_to_lower_index(self):
        cloud = generate_1d(0, 3, 4)
        sten = knn_stencils(cloud, 3)
        assert list(sten.row(2)) == [2, 1, 3]

    def test_benchmark_stencils_distinct(self):
        cloud = generate_1d(-10, 10, 400)
        sten = knn_stencils(cloud, 25)
        assert sten.indices.shape == (400, 25)
        for i in range(400):
            row = sten.row(i)
            assert row[0] == i
            assert len(set(row.tolist())) == 25

    def test_interior_stencils_symmetric(self):
        cloud = generate_1d(-1, 1, 41)
        sten = knn_stencils(cloud, 7)
        for i in range(10, 31):
            offsets = sorted(sten.row(i) - i)
            assert offsets == [-3, -2, -1, 0, 1, 2, 3]

    def test_deterministic(self):
        cloud = generate_random_2d(1, 1, 50, seed=3)
        a = knn_stencils(cloud, 10).indices
        b = knn_stencils(cloud, 10).indices
        assert np.array_equal(a, b)

    def test_m_too_large(self):
        with pytest.raises(ValueError):
            knn_stencils(generate_1d(0, 1, 5), 6)


class TestRandomClouds:
    def test_random_1d_sorted_and_tagged(self):
        cloud = generate_random_1d(-2, 2, 50, seed=1)
        x = cloud.points[:, 0]
        assert np.all(np.diff(x) > 0)
        assert x[0] == -2 and x[-1] == 2
        assert cloud.tags[0] == DIRICHLET and cloud.tags[-1] == DIRICHLET
        assert np.sum(cloud.tags == INTERIOR) == 48

    def test_random_2d_interior_only(self):
        cloud = generate_random_2d(1, 1, 200, seed=4)
        assert cloud.n == 200
        assert np.all(cloud.tags == INTERIOR)

    def test_random_deterministic_per_seed(self):
        a = generate_random_1d(0, 1, 20, seed=9).points
        b = generate_random_1d(0, 1, 20, seed=9).points
        assert np.array_equal(a, b)


class TestValidation:
    def test_duplicate_points_rejected(self):
        pts = np.array([[0.0], [1.0], [1.0]])
        with pytest.raises(ValueError, match="duplicate"):
            PointCloud(pts, np.array([1, 0, 1]))

    def test_non_unit_normal_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        normals = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 2.0]])
        with pytest.raises(ValueError, match="unit"):
            PointCloud(pts, np.array([INTERIOR, INTERIOR, NEUMANN]), normals)


class TestCsvRoundtrip:
    def test_1d(self, tmp_path):
        cloud = generate_1d(-1, 1, 11)
        path = tmp_path / "cloud.csv"
        save_cloud_csv(cloud, path)
        back = load_cloud_csv(path)
        assert np.array_equal(back.points, cloud.points)
        assert np.array_equal(back.tags, cloud.tags)

    def test_2d_with_normals(self, tmp_path):
        cloud = generate_grid_2d(1, 2, 4, 5, {"bottom": DIRICHLET, "top": NEUMANN})
        path = tmp_path / "cloud.csv"
        save_cloud_csv(cloud, path)
        back = load_cloud_csv(path)
        assert np.array_equal(back.points, cloud.points)
        assert np.array_equal(back.tags, cloud.tags)
        assert np.array_equal(back.normals, cloud.normals)
