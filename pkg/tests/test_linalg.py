import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dmdembed.errors import EmptySpectrumError, RankDeficiencyError
from dmdembed.linalg import dense_eig, gram_spectrum, lstsq, snapshot_svd


def dense_tall(h):
    return lambda x: h @ x


def test_snapshot_svd_identity_gram():
    h = np.eye(3)
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=3)
    assert_allclose(out.singular_values, [1.0, 1.0, 1.0])
    assert out.left_vectors.shape == (3, 3)
    assert out.right_vectors.shape == (3, 3)


def test_snapshot_svd_diagonal():
    h = np.diag([3.0, 2.0])
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=2)
    assert_allclose(out.singular_values, [3.0, 2.0])


def test_snapshot_svd_matches_dense_svd():
    rng = np.random.default_rng(42)
    h = rng.normal(size=(6, 4))
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=4)
    rebuilt = out.left_vectors @ np.diag(out.singular_values) @ out.right_vectors.T
    assert np.linalg.norm(rebuilt - h) <= 1e-8 * np.linalg.norm(h)
    u_ref, s_ref, vt_ref = np.linalg.svd(h, full_matrices=False)
    assert_allclose(out.singular_values, s_ref, rtol=1e-8)
    for j in range(4):
        # factors match up to a shared per-column sign
        sign = np.sign(out.left_vectors[:, j] @ u_ref[:, j])
        assert_allclose(out.left_vectors[:, j], sign * u_ref[:, j], atol=1e-8)
        assert_allclose(out.right_vectors[:, j], sign * vt_ref[j], atol=1e-8)


def test_snapshot_svd_orthonormal_columns():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(20, 12))
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=12)
    for g in (out.left_vectors, out.right_vectors):
        assert np.linalg.norm(g.T @ g - np.eye(g.shape[1])) <= 1e-8


def test_snapshot_svd_sign_convention_deterministic():
    rng = np.random.default_rng(11)
    h = rng.normal(size=(9, 5))
    a = snapshot_svd(h.T @ h, dense_tall(h), rank=5)
    b = snapshot_svd(h.T @ h, dense_tall(h), rank=5)
    assert np.array_equal(a.left_vectors, b.left_vectors)
    for j in range(5):
        pivot = np.argmax(np.abs(a.left_vectors[:, j]))
        assert a.left_vectors[pivot, j] >= 0


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_snapshot_svd_subspace_agreement(seed):
    rng = np.random.default_rng(seed)
    rows = int(rng.integers(5, 24))
    cols = int(rng.integers(3, min(rows, 16) + 1))
    h = rng.normal(size=(rows, cols))
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=cols)
    _, s_ref, vt_ref = np.linalg.svd(h, full_matrices=False)
    assert_allclose(out.singular_values, s_ref[: out.rank], rtol=1e-8)
    # principal angles between right subspaces
    overlap = np.linalg.svd(out.right_vectors.T @ vt_ref[: out.rank].T, compute_uv=False)
    assert np.all(np.abs(overlap - 1.0) <= 1e-8)


def test_snapshot_svd_truncates_numerical_rank():
    h = np.outer(np.arange(1.0, 5.0), np.ones(3))
    out = snapshot_svd(h.T @ h, dense_tall(h), rank=3)
    assert out.rank == 1
    assert out.spectrum.size == 3


def test_snapshot_svd_errors():
    h = np.eye(2)
    with pytest.raises(ValueError):
        snapshot_svd(h, dense_tall(h), rank=0)
    with pytest.raises(ValueError):
        snapshot_svd(np.array([[1.0, 2.0], [0.0, 1.0]]), dense_tall(h), rank=1)
    zero = np.zeros((3, 3))
    with pytest.raises(EmptySpectrumError):
        snapshot_svd(zero, dense_tall(np.zeros((5, 3))), rank=2)


def test_gram_spectrum_tie_break_stable():
    sigma, _ = gram_spectrum(np.eye(4))
    assert_allclose(sigma, np.ones(4))


def test_dense_eig_rotation():
    theta = 2 * math.pi / 24
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    spec = dense_eig(rot)
    expected = np.array([
        complex(0.9659258262890683, 0.25881904510252074),
        complex(0.9659258262890683, -0.25881904510252074),
    ])
    assert_allclose(spec.eigenvalues, expected, atol=1e-12)


def test_dense_eig_identity_and_diagonal():
    assert_allclose(dense_eig(np.eye(3)).eigenvalues, np.ones(3))
    assert_allclose(dense_eig(np.diag([0.9, 0.5])).eigenvalues, [0.9, 0.5])


def test_dense_eig_residuals_and_ordering():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(6, 6))
    spec = dense_eig(m)
    for lam, vec in zip(spec.eigenvalues, spec.eigenvectors.T):
        assert np.linalg.norm(m @ vec - lam * vec) <= 1e-8 * np.linalg.norm(vec)
    mods = np.abs(spec.eigenvalues)
    assert np.all(np.diff(mods) <= 1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_dense_eig_conjugate_closure(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(5, 5))
    eigs = dense_eig(m).eigenvalues
    remaining = list(eigs)
    for lam in eigs:
        match = min(remaining, key=lambda z: abs(z - np.conj(lam)))
        assert abs(match - np.conj(lam)) <= 1e-10
        remaining.remove(match)


def test_dense_eig_rejects_nonfinite():
    with pytest.raises(ValueError):
        dense_eig(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_lstsq_identity():
    b = np.array([2.0, -1.0, 3.0])
    assert_allclose(lstsq(np.eye(3), b), b)


def test_lstsq_mean_of_two_points():
    a = np.array([[1.0], [1.0]])
    b = np.array([[0.0], [2.0]])
    assert_allclose(lstsq(a, b), [[1.0]])


def test_lstsq_matches_normal_equations():
    rng = np.random.default_rng(17)
    a = rng.normal(size=(8, 3))
    b = rng.normal(size=(8, 2))
    x = lstsq(a, b)
    x_ref = np.linalg.solve(a.T @ a, a.T @ b)
    assert_allclose(x, x_ref, atol=1e-8)
    # residual orthogonal to the column space
    assert np.max(np.abs(a.T @ (a @ x - b))) <= 1e-8


def test_lstsq_rank_deficiency():
    a = np.column_stack([np.ones(5), np.ones(5)])
    with pytest.raises(RankDeficiencyError) as err:
        lstsq(a, np.ones(5))
    assert err.value.numerical_rank == 1


def test_lstsq_shape_errors():
    with pytest.raises(ValueError):
        lstsq(np.ones((2, 3)), np.ones(2))
