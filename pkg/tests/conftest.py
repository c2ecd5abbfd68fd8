import numpy as np
import pytest

from pcmetric import PointCloud


def make_cloud(n, seed, scale=100.0, with_normals=False, name="cloud"):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 3)) * scale
    normals = None
    if with_normals:
        v = rng.normal(size=(n, 3))
        normals = v / np.linalg.norm(v, axis=1, keepdims=True)
    return PointCloud(name, pts, normals)


def lattice_cloud(side, name="lattice"):
    """Integer grid with side^3 points, voxel-style data with unit spacing."""
    axis = np.arange(side, dtype=np.float64)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return PointCloud(name, pts)


@pytest.fixture
def random_cloud():
    return make_cloud


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return request.param
