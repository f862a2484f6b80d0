import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from touchproto import geometry as geo


class TestApplyAffine:
    def test_identity(self):
        np.testing.assert_allclose(
            geo.apply_affine2d([1, 0, 0, 0], (0.3, 0.7)), [0.3, 0.7])

    def test_quarter_turn(self):
        np.testing.assert_allclose(
            geo.apply_affine2d([0, 1, 0, 0], (1.0, 0.0)), [0.0, 1.0], atol=1e-15)

    def test_scale_and_shift(self):
        # A = 2I, t = (0.1, 0): (0.2, 0.1) -> (0.5, 0.2)
        np.testing.assert_allclose(
            geo.apply_affine2d([2, 0, 0.1, 0], (0.2, 0.1)), [0.5, 0.2])


class TestSolveAffine:
    def test_static_fingers_give_identity(self):
        fp = geo.FingerPair(np.array([0.2, 0.3]), np.array([0.7, 0.6]),
                            np.array([0.2, 0.3]), np.array([0.7, 0.6]))
        np.testing.assert_allclose(geo.solve_affine2d(fp), [1, 0, 0, 0], atol=1e-12)

    def test_pure_translation(self):
        d = np.array([0.1, -0.05])
        fp = geo.FingerPair(np.array([0.2, 0.3]), np.array([0.7, 0.6]),
                            np.array([0.2, 0.3]) + d, np.array([0.7, 0.6]) + d)
        np.testing.assert_allclose(geo.solve_affine2d(fp), [1, 0, 0.1, -0.05], atol=1e-12)

    def test_rotation_about_origin(self):
        fp = geo.FingerPair(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                            np.array([0.0, 1.0]), np.array([-1.0, 0.0]))
        np.testing.assert_allclose(geo.solve_affine2d(fp), [0, 1, 0, 0], atol=1e-12)

    def test_coincident_fingers_raise(self):
        p = np.array([0.4, 0.4])
        fp = geo.FingerPair(p, p.copy(), p + 0.1, p + 0.2)
        with pytest.raises(geo.SingularTransformError, match="coincident"):
            geo.solve_affine2d(fp)

    def test_origin_fingers_raise_with_origin_message(self):
        z = np.zeros(2)
        fp = geo.FingerPair(z, z.copy(), z + 0.1, z + 0.2)
        with pytest.raises(geo.SingularTransformError, match="origin"):
            geo.solve_affine2d(fp)


@settings(max_examples=200, deadline=None)
@given(
    alpha=st.floats(-np.pi, np.pi),
    sigma=st.floats(0.5, 2.0),
    tx=st.floats(-0.3, 0.3),
    ty=st.floats(-0.3, 0.3),
    l1=st.tuples(st.floats(0, 1), st.floats(0, 1)),
    l2=st.tuples(st.floats(0, 1), st.floats(0, 1)),
)
def test_solve_round_trip_recovers_theta(alpha, sigma, tx, ty, l1, l2):
    l1, l2 = np.array(l1), np.array(l2)
    if np.linalg.norm(l1 - l2) < 0.05:
        return
    theta = geo.theta_from_params(alpha, sigma, tx, ty)
    fp = geo.FingerPair(l1, l2, geo.apply_affine2d(theta, l1), geo.apply_affine2d(theta, l2))
    got = geo.solve_affine2d(fp)
    np.testing.assert_allclose(got, theta, atol=1e-9)
    # solved transform interpolates both correspondences
    np.testing.assert_allclose(geo.apply_affine2d(got, l1), fp.l1p, atol=1e-9)
    np.testing.assert_allclose(geo.apply_affine2d(got, l2), fp.l2p, atol=1e-9)


class TestCompose:
    def test_identity_is_noop(self):
        theta = np.array([1.3, -0.2, 0.05, 0.1])
        np.testing.assert_allclose(geo.compose_affine2d([1, 0, 0, 0], theta), theta)
        np.testing.assert_allclose(geo.compose_affine2d(theta, [1, 0, 0, 0]), theta)

    def test_two_quarter_turns_make_half_turn(self):
        q = np.array([0.0, 1.0, 0.0, 0.0])
        np.testing.assert_allclose(geo.compose_affine2d(q, q), [-1, 0, 0, 0], atol=1e-15)

    def test_translate_then_scale(self):
        # translate (0.1, 0) then scale x2 about the origin
        got = geo.compose_affine2d([2, 0, 0, 0], [1, 0, 0.1, 0])
        np.testing.assert_allclose(got, [2, 0, 0.2, 0])

    def test_matches_matrix_product_on_points(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            outer = rng.normal(size=4)
            inner = rng.normal(size=4)
            p = rng.normal(size=2)
            via_compose = geo.apply_affine2d(geo.compose_affine2d(outer, inner), p)
            via_seq = geo.apply_affine2d(outer, geo.apply_affine2d(inner, p))
            np.testing.assert_allclose(via_compose, via_seq, atol=1e-12)


class TestPose:
    def test_zero_pose_is_identity(self):
        np.testing.assert_allclose(geo.pose_to_matrix(np.zeros(6)), np.eye(4))

    def test_quarter_turn_about_z(self):
        m = geo.pose_to_matrix([0, 0, 0, 0, 0, np.pi / 2])
        np.testing.assert_allclose(m[:3, :3] @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    def test_rotation_block_orthonormal(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            pose = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-np.pi, np.pi, 3)])
            r = geo.pose_to_matrix(pose)[:3, :3]
            np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(r) - 1.0) < 1e-9

    def test_matrix_round_trip_recovers_pose(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pose = np.concatenate([
                rng.uniform(-2, 2, 3),
                [rng.uniform(-np.pi, np.pi)],
                [rng.uniform(-np.pi / 2 + 0.05, np.pi / 2 - 0.05)],  # stay off the gimbal cone
                [rng.uniform(-np.pi, np.pi)],
            ])
            got = geo.matrix_to_pose(geo.pose_to_matrix(pose))
            np.testing.assert_allclose(got, pose, atol=1e-9)

    def test_gimbal_cone_is_flagged(self):
        m = geo.pose_to_matrix([0, 0, 0, 0.3, np.pi / 2, -0.2])
        with pytest.raises(geo.GimbalLockError):
            geo.matrix_to_pose(m)


class TestWrap:
    def test_zero_delta_keeps_pose(self):
        pose = np.array([0.1, -0.5, 2.0, 1.0, -2.0, 3.0])
        np.testing.assert_allclose(geo.add_residual_pose(pose, np.zeros(6)), pose)

    def test_wrap_example(self):
        got = geo.add_residual_pose([0, 0, 0, 3.0, 0, 0], [0, 0, 0, 0.5, 0, 0])
        np.testing.assert_allclose(got[3], 3.5 - 2 * np.pi, atol=1e-12)

    def test_wrap_idempotent(self):
        x = np.array([3.5, -4.0, 10.0, np.pi, -np.pi, 0.0])
        once = geo.wrap_angle(x)
        np.testing.assert_allclose(geo.wrap_angle(once), once)

    @given(st.floats(-50, 50), st.integers(-5, 5))
    @settings(max_examples=200, deadline=None)
    def test_wrap_invariant_under_two_pi_shifts(self, x, k):
        a = geo.wrap_angle(x)
        b = geo.wrap_angle(x + 2 * np.pi * k)
        assert -np.pi < a <= np.pi + 1e-12
        assert abs(a - b) < 1e-9 or abs(abs(a - b) - 2 * np.pi) < 1e-9

    def test_half_range_boundary_maps_to_pi(self):
        assert geo.wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert geo.wrap_angle(np.pi) == pytest.approx(np.pi)


class TestReward:
    def test_perfect_overlap_not_done(self):
        v = np.array([[0.1, 0.2], [0.3, 0.2], [0.3, 0.5], [0.1, 0.5]])
        assert geo.reward_shaped(v, v, done=False) == pytest.approx(-0.2)

    def test_offset_vertices(self):
        v = np.zeros((4, 2))
        o = v + np.array([0.1, 0.0])
        # each vertex: L1 = 0.1, L2 = 0.1 -> total -(4 * 0.2) - 0.2 = -1.0
        assert geo.reward_shaped(o, v, done=False) == pytest.approx(-1.0)

    def test_perfect_overlap_done_gets_bonus(self):
        v = np.zeros((2, 3))
        assert geo.reward_shaped(v, v, done=True) == pytest.approx(24.8)

    def test_non_terminal_reward_upper_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            o = rng.normal(size=(4, 2))
            t = rng.normal(size=(4, 2))
            assert geo.reward_shaped(o, t, done=False) <= -0.2 + 1e-12

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            geo.reward_shaped(np.zeros((4, 2)), np.zeros((3, 2)), done=False)
