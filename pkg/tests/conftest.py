import numpy as np
import pytest

from splatpix import BodyModel, Camera, ColoredVertexSet, synth_subject


def random_chain_model(rng, n_verts=40, n_joints=5, n_shapes=4):
    """Small random but valid model on a straight kinematic chain."""
    template = rng.uniform(-0.2, 0.2, (n_verts, 3)) + np.array([0.0, 0.5, 0.0])
    shape_basis = rng.normal(0.0, 0.02, (n_verts, 3, n_shapes))
    pose_basis = rng.normal(0.0, 0.001, (n_verts, 3, 9 * (n_joints - 1)))
    regressor = rng.uniform(0.0, 1.0, (n_joints, n_verts))
    regressor /= regressor.sum(axis=1, keepdims=True)
    weights = rng.uniform(0.0, 1.0, (n_verts, n_joints)) ** 3
    weights /= weights.sum(axis=1, keepdims=True)
    parents = np.arange(-1, n_joints - 1)
    faces = np.stack([
        np.arange(n_verts - 2),
        np.arange(1, n_verts - 1),
        np.arange(2, n_verts),
    ], axis=1)
    return BodyModel(template, shape_basis, pose_basis, regressor, weights, parents, faces)


@pytest.fixture(scope="session")
def capsule_subject():
    return synth_subject(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def simple_camera():
    K = np.array([[100.0, 0.0, 5.0], [0.0, 100.0, 5.0], [0.0, 0.0, 1.0]])
    return Camera(K, np.eye(3), np.zeros(3), 11, 11)


def random_camera(rng, max_size=128):
    from splatpix import look_at

    width = int(rng.integers(8, max_size + 1))
    height = int(rng.integers(8, max_size + 1))
    radius = rng.uniform(0.5, 3.0)
    az = rng.uniform(0.0, 2.0 * np.pi)
    el = rng.uniform(-1.0, 1.0)
    eye = radius * np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])
    fx = rng.uniform(0.4, 2.0) * width
    fy = rng.uniform(0.4, 2.0) * height
    return look_at(eye, (0.0, 0.0, 0.0), (0.0, 1.0, 0.0),
                   fx, fy, width / 2.0, height / 2.0, width, height)


def random_colored_vertices(rng, n, spread=0.4):
    positions = rng.normal(0.0, spread, (n, 3))
    colors = rng.uniform(0.0, 1.0, (n, 3))
    return ColoredVertexSet(positions, colors)
