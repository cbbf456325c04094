import numpy as np
import pytest

from tppca.metrics import Subspace, first_principal_angle, orthonormalize


def angle_of(u, w):
    return first_principal_angle(
        orthonormalize(np.asarray(u, float).reshape(-1, 1)),
        orthonormalize(np.asarray(w, float).reshape(-1, 1)),
    )


# Hand-checked reference pairs: published fitted/true first axes in two
# dimensions together with their reported principal angles.
REFERENCE_PAIRS = [
    ((0.769, 0.639), (0.929, 0.369), 0.316),
    ((0.769, 0.639), (0.846, 0.533), 0.132),
    ((0.769, 0.639), (0.801, 0.599), 0.051),
    ((0.709, 0.705), (0.566, -0.824), 1.390),
    ((0.709, 0.705), (0.741, 0.672), 0.046),
    ((0.709, 0.705), (0.749, 0.663), 0.058),
]


class TestSubspace:
    def test_accepts_orthonormal(self):
        s = Subspace(np.eye(3)[:, :2])
        assert (s.q, s.d) == (3, 2)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError, match="orthonormal"):
            Subspace(np.array([[2.0], [1.0]]))

    def test_rejects_wide_basis(self):
        with pytest.raises(ValueError, match="columns"):
            Subspace(np.ones((1, 2)))


class TestOrthonormalize:
    def test_normalizes_single_column(self):
        s = orthonormalize(np.array([[2.0], [1.0]]))
        np.testing.assert_allclose(np.abs(s.basis[:, 0]), np.array([2.0, 1.0]) / np.sqrt(5))

    def test_orthonormal_input_unchanged(self):
        rng = np.random.default_rng(5)
        Q, _ = np.linalg.qr(rng.normal(size=(5, 3)))
        s = orthonormalize(Q)
        assert first_principal_angle(s, Subspace(Q)) < 1e-12

    def test_span_preserved(self):
        rng = np.random.default_rng(6)
        W = rng.normal(size=(6, 2))
        s = orthonormalize(W)
        # every column of W lies in the returned span
        proj = s.basis @ (s.basis.T @ W)
        np.testing.assert_allclose(proj, W, atol=1e-10)

    def test_rank_deficiency_rejected(self):
        M = np.array([[1.0, 1.0], [0.0, 1e-13], [0.0, 0.0]])
        with pytest.raises(ValueError, match="rank"):
            orthonormalize(M)


class TestFirstPrincipalAngle:
    @pytest.mark.parametrize("u,w,expected", REFERENCE_PAIRS)
    def test_reference_values(self, u, w, expected):
        assert angle_of(u, w) == pytest.approx(expected, abs=1e-3)

    def test_identical_subspace_is_zero(self):
        rng = np.random.default_rng(7)
        s = orthonormalize(rng.normal(size=(4, 2)))
        assert first_principal_angle(s, s) == 0.0

    def test_orthogonal_lines(self):
        assert angle_of((1.0, 0.0), (0.0, 1.0)) == pytest.approx(np.pi / 2)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        a = orthonormalize(rng.normal(size=(5, 2)))
        b = orthonormalize(rng.normal(size=(5, 3)))
        assert first_principal_angle(a, b) == first_principal_angle(b, a)

    def test_basis_invariance(self):
        rng = np.random.default_rng(9)
        a = orthonormalize(rng.normal(size=(6, 3)))
        b = orthonormalize(rng.normal(size=(6, 3)))
        R, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        a_rot = Subspace(a.basis @ R)
        assert abs(first_principal_angle(a_rot, b) - first_principal_angle(a, b)) < 1e-10

    def test_single_direction_matches_cosine_formula(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            u = rng.normal(size=3)
            w = rng.normal(size=3)
            direct = np.arccos(
                min(1.0, abs(u @ w) / (np.linalg.norm(u) * np.linalg.norm(w)))
            )
            assert abs(angle_of(u, w) - direct) < 1e-12

    def test_sign_flip_invariant(self):
        # arccos has sqrt-scale sensitivity near 1, so round-off in the
        # cosine shows up at the 1e-8 level in the angle
        assert angle_of((2.0, 1.0), (-2.0, -1.0)) == pytest.approx(0.0, abs=1e-7)

    def test_shared_direction_gives_zero(self):
        # overlap in even one direction pins the first angle at zero
        a = Subspace(np.eye(4)[:, :2])
        b = Subspace(np.eye(4)[:, 1:3])
        assert first_principal_angle(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_non_increasing_in_subspace_dimension(self):
        rng = np.random.default_rng(11)
        target = orthonormalize(rng.normal(size=(8, 1)))
        Q, _ = np.linalg.qr(rng.normal(size=(8, 4)))
        angles = [
            first_principal_angle(Subspace(Q[:, :d]), target) for d in range(1, 5)
        ]
        assert all(a2 <= a1 + 1e-12 for a1, a2 in zip(angles, angles[1:]))

    def test_ambient_mismatch_rejected(self):
        a = Subspace(np.eye(3)[:, :1])
        b = Subspace(np.eye(4)[:, :1])
        with pytest.raises(ValueError, match="ambient"):
            first_principal_angle(a, b)

    def test_range_bounds(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            a = orthonormalize(rng.normal(size=(5, 2)))
            b = orthonormalize(rng.normal(size=(5, 2)))
            theta = first_principal_angle(a, b)
            assert 0.0 <= theta <= np.pi / 2
