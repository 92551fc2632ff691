import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import splatpix as sp
from splatpix.body_model import joint_rotations, pose_feature

from conftest import random_chain_model


def naive_shape_offsets(model, beta):
    out = np.zeros((model.num_vertices, 3))
    for n in range(model.num_vertices):
        for c in range(3):
            for s in range(model.num_shape_dims):
                out[n, c] += beta[s] * model.shape_basis[n, c, s]
    return out


def naive_pose_offsets(model, theta):
    feat = pose_feature(model, theta)
    out = np.zeros((model.num_vertices, 3))
    for n in range(model.num_vertices):
        for c in range(3):
            for p in range(len(feat)):
                out[n, c] += feat[p] * model.pose_basis[n, c, p]
    return out


@pytest.fixture
def model(rng):
    return random_chain_model(rng)


class TestShapeOffsets:
    def test_zero_beta(self, model):
        assert np.all(sp.shape_offsets(model, np.zeros(4)) == 0.0)

    def test_unit_vector_extracts_basis_slice(self, model):
        e0 = np.zeros(4)
        e0[0] = 1.0
        np.testing.assert_array_equal(sp.shape_offsets(model, e0), model.shape_basis[:, :, 0])

    def test_matches_naive_contraction(self, model, rng):
        beta = rng.normal(0.0, 1.0, 4)
        got = sp.shape_offsets(model, beta)
        np.testing.assert_allclose(got, naive_shape_offsets(model, beta), atol=1e-12)

    def test_linearity(self, model, rng):
        b1, b2 = rng.normal(0.0, 1.0, (2, 4))
        combined = sp.shape_offsets(model, 2.0 * b1 - 3.0 * b2)
        parts = 2.0 * sp.shape_offsets(model, b1) - 3.0 * sp.shape_offsets(model, b2)
        np.testing.assert_allclose(combined, parts, atol=1e-12)

    def test_dimension_mismatch(self, model):
        with pytest.raises(sp.ParameterError):
            sp.shape_offsets(model, np.zeros(7))


class TestPoseOffsets:
    def test_zero_theta(self, model):
        assert np.all(sp.pose_offsets(model, np.zeros(15)) == 0.0)

    def test_single_joint_quarter_turn(self, model):
        theta = np.zeros(15)
        theta[3] = np.pi / 2.0  # joint 1 about x
        feat_block = Rotation.from_rotvec([np.pi / 2.0, 0.0, 0.0]).as_matrix() - np.eye(3)
        expected = np.einsum("ncp,p->nc", model.pose_basis[:, :, :9], feat_block.reshape(-1))
        np.testing.assert_allclose(sp.pose_offsets(model, theta), expected, atol=1e-12)

    def test_matches_naive_contraction(self, model, rng):
        theta = rng.normal(0.0, 0.7, 15)
        got = sp.pose_offsets(model, theta)
        np.testing.assert_allclose(got, naive_pose_offsets(model, theta), atol=1e-12)

    def test_dimension_mismatch(self, model):
        with pytest.raises(sp.ParameterError):
            sp.pose_offsets(model, np.zeros(12))


class TestJointLocations:
    def test_one_hot_regressor_selects_vertices(self, rng):
        model = random_chain_model(rng)
        picks = [0, 5, 9, 12, 20]
        regressor = np.zeros_like(model.joint_regressor)
        for j, v in enumerate(picks):
            regressor[j, v] = 1.0
        model = sp.BodyModel(model.template, model.shape_basis, model.pose_basis,
                             regressor, model.skin_weights, model.parents, model.faces)
        joints = sp.joint_locations(model, np.zeros(4))
        np.testing.assert_array_equal(joints, model.template[picks])

    def test_matches_dense_matmul(self, model):
        joints = sp.joint_locations(model, np.zeros(4))
        expected = np.array([
            [sum(model.joint_regressor[j, n] * model.template[n, c]
                 for n in range(model.num_vertices)) for c in range(3)]
            for j in range(model.num_joints)
        ])
        np.testing.assert_allclose(joints, expected, atol=1e-12)

    def test_translation_equivariance(self, model):
        shifted = sp.BodyModel(model.template + (1.0, 0.0, 0.0), model.shape_basis,
                               model.pose_basis, model.joint_regressor,
                               model.skin_weights, model.parents, model.faces)
        before = sp.joint_locations(model, np.zeros(4))
        after = sp.joint_locations(shifted, np.zeros(4))
        np.testing.assert_allclose(after - before, np.broadcast_to((1.0, 0.0, 0.0), before.shape),
                                   atol=1e-12)


class TestPoseMesh:
    def test_rest_pose_is_template(self, model):
        posed = sp.pose_mesh(model, np.zeros(4), np.zeros(15))
        np.testing.assert_allclose(posed, model.template, atol=1e-12)

    def test_rest_pose_with_shape(self, model, rng):
        beta = rng.normal(0.0, 1.0, 4)
        posed = sp.pose_mesh(model, beta, np.zeros(15))
        np.testing.assert_allclose(posed, model.template + sp.shape_offsets(model, beta),
                                   atol=1e-12)

    def test_root_only_rotation_is_rigid(self, model, rng):
        theta = np.zeros(15)
        theta[:3] = rng.normal(0.0, 0.8, 3)
        R0 = Rotation.from_rotvec(theta[:3]).as_matrix()
        root = sp.joint_locations(model, np.zeros(4))[0]
        rest = model.template + sp.pose_offsets(model, theta)
        expected = (rest - root) @ R0.T + root
        np.testing.assert_allclose(sp.pose_mesh(model, np.zeros(4), theta), expected, atol=1e-9)

    def test_global_rotation_equivariance(self, model, rng):
        theta = rng.normal(0.0, 0.5, 15)
        theta_no_root = theta.copy()
        theta_no_root[:3] = 0.0
        root_vec = rng.normal(0.0, 0.8, 3)
        theta_with_root = theta.copy()
        theta_with_root[:3] = root_vec
        R0 = Rotation.from_rotvec(root_vec).as_matrix()
        root = sp.joint_locations(model, np.zeros(4))[0]
        base = sp.pose_mesh(model, np.zeros(4), theta_no_root)
        # pose offsets ignore the root, so the two parameterizations share them
        expected = (base - root) @ R0.T + root
        np.testing.assert_allclose(sp.pose_mesh(model, np.zeros(4), theta_with_root),
                                   expected, atol=1e-9)

    def test_two_joint_chain_distal_bend(self):
        # two joints on the y axis, distal joint bent 90 degrees about z;
        # vertices fully bound to the distal joint rotate about its location
        template = np.array([[0.0, 2.0, 0.0], [0.5, 2.0, 0.0], [0.0, 3.0, 0.0]])
        shape_basis = np.zeros((3, 3, 1))
        pose_basis = np.zeros((3, 3, 9))
        regressor = np.zeros((2, 3))
        regressor[0, 0] = 1.0  # joint 0 at vertex 0
        regressor[1, 2] = 1.0  # joint 1 at vertex 2
        weights = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        parents = np.array([-1, 0])
        model = sp.BodyModel(template, shape_basis, pose_basis, regressor, weights,
                             parents, np.zeros((0, 3), dtype=np.int64))
        theta = np.zeros(6)
        theta[5] = np.pi / 2.0  # distal joint about z
        posed = sp.pose_mesh(model, np.zeros(1), theta)
        np.testing.assert_allclose(posed[0], template[0], atol=1e-12)
        np.testing.assert_allclose(posed[1], template[1], atol=1e-12)
        joint1 = template[2]
        Rz = Rotation.from_rotvec([0.0, 0.0, np.pi / 2.0]).as_matrix()
        np.testing.assert_allclose(posed[2], Rz @ (template[2] - joint1) + joint1, atol=1e-12)

    def test_nonfinite_rejected(self, model):
        theta = np.zeros(15)
        theta[4] = np.nan
        with pytest.raises(sp.ParameterError):
            sp.pose_mesh(model, np.zeros(4), theta)


class TestUnpose:
    def test_round_trip(self, model, rng):
        for _ in range(20):
            beta = rng.normal(0.0, 1.0, 4)
            theta = rng.uniform(-np.pi / 2, np.pi / 2, 15)
            posed = sp.pose_mesh(model, beta, theta)
            colors = rng.uniform(0.0, 1.0, posed.shape)
            recovered = sp.unpose(model, sp.ColoredVertexSet(posed, colors), theta)
            target = model.template + sp.shape_offsets(model, beta)
            assert np.abs(recovered.positions - target).max() < 1e-6
            np.testing.assert_array_equal(recovered.colors, colors)

    def test_zero_theta_identity(self, model, rng):
        verts = sp.ColoredVertexSet(model.template + rng.normal(0, 0.01, model.template.shape),
                                    rng.uniform(0, 1, model.template.shape))
        out = sp.unpose(model, verts, np.zeros(15))
        np.testing.assert_allclose(out.positions, verts.positions, atol=1e-9)

    def test_free_deformation_round_trip(self, model, rng):
        theta = rng.uniform(-1.2, 1.2, 15)
        posed = sp.pose_mesh(model, np.zeros(4), theta)
        delta = rng.normal(0.0, 0.005, posed.shape)
        registration = sp.ColoredVertexSet(posed + delta, rng.uniform(0, 1, posed.shape))
        template_star = sp.unpose(model, registration, theta)
        reposed = sp.repose_subject(template_star, model, theta)
        assert np.abs(reposed.positions - registration.positions).max() < 1e-6
        np.testing.assert_array_equal(reposed.colors, registration.colors)

    def test_vertex_count_mismatch(self, model, rng):
        bad = sp.ColoredVertexSet(np.zeros((5, 3)), np.zeros((5, 3)))
        with pytest.raises(sp.ParameterError):
            sp.unpose(model, bad, np.zeros(15))


class TestReposeSubject:
    def test_zero_pose_is_identity(self, model, rng):
        star = sp.ColoredVertexSet(model.template, rng.uniform(0, 1, model.template.shape))
        out = sp.repose_subject(star, model, np.zeros(15))
        np.testing.assert_allclose(out.positions, star.positions, atol=1e-12)

    def test_sequence_outputs_finite_with_colors(self, model, rng):
        star = sp.ColoredVertexSet(model.template, rng.uniform(0, 1, model.template.shape))
        frames = rng.normal(0.0, 0.3, (100, 15))
        for theta in frames:
            out = sp.repose_subject(star, model, theta)
            assert np.all(np.isfinite(out.positions))
            np.testing.assert_array_equal(out.colors, star.colors)


class TestModelIO:
    def test_save_load_round_trip(self, tmp_path, capsule_subject):
        model, _ = capsule_subject
        path = tmp_path / "model.bsm1"
        sp.save_model(model, path)
        loaded = sp.load_model(path)
        np.testing.assert_allclose(loaded.template, model.template, atol=1e-6)
        np.testing.assert_array_equal(loaded.faces, model.faces)
        np.testing.assert_array_equal(loaded.parents, model.parents)
        assert loaded.uv is not None

    def test_partition_of_unity_preserved(self, tmp_path, capsule_subject):
        model, _ = capsule_subject
        path = tmp_path / "model.bsm1"
        sp.save_model(model, path)
        loaded = sp.load_model(path)
        np.testing.assert_allclose(loaded.skin_weights.sum(axis=1), 1.0, atol=1e-12)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bsm1"
        path.write_bytes(b"NOPE" + b"\0" * 40)
        with pytest.raises(sp.FormatError):
            sp.load_model(path)


class TestValidation:
    def test_weights_must_sum_to_one(self, rng):
        model = random_chain_model(rng)
        bad = model.skin_weights * 1.01
        with pytest.raises(sp.ParameterError):
            sp.BodyModel(model.template, model.shape_basis, model.pose_basis,
                         model.joint_regressor, bad, model.parents, model.faces)

    def test_two_roots_rejected(self, rng):
        model = random_chain_model(rng)
        parents = model.parents.copy()
        parents[2] = -1
        with pytest.raises(sp.ParameterError):
            sp.BodyModel(model.template, model.shape_basis, model.pose_basis,
                         model.joint_regressor, model.skin_weights, parents, model.faces)

    def test_cycle_rejected(self, rng):
        model = random_chain_model(rng)
        parents = model.parents.copy()
        parents[1] = 2
        parents[2] = 1
        with pytest.raises(sp.ParameterError):
            sp.BodyModel(model.template, model.shape_basis, model.pose_basis,
                         model.joint_regressor, model.skin_weights, parents, model.faces)


def test_pose_sequence_round_trip(tmp_path, rng):
    frames = rng.normal(0.0, 0.5, (7, 48))
    path = tmp_path / "poses.json"
    sp.save_pose_sequence(frames, path)
    loaded = sp.load_pose_sequence(path)
    np.testing.assert_allclose(loaded, frames, atol=1e-15)
