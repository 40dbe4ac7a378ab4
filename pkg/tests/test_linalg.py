import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpinstruments import linalg
from cpinstruments.errors import NotHermitian
from cpinstruments.linalg import Tolerance


def random_matrix(rng, m, n):
    return rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))


def test_tolerance_thresholds():
    tol = Tolerance(1e-6)
    assert tol.slack(0.5) == 1e-6
    assert tol.slack(10.0) == pytest.approx(1e-5)
    assert tol.rank_cut(2.0, (3, 5)) == pytest.approx(1e-5)
    assert tol.projection(4) == pytest.approx(4e-6)
    with pytest.raises(ValueError):
        Tolerance(0.0)
    assert linalg.as_tol(None).eps == 1e-8
    assert linalg.as_tol(1e-3).eps == 1e-3


def test_herm_eig_descending_and_reconstructs(rng):
    g = random_matrix(rng, 5, 5)
    h = g + g.conj().T
    w, u = linalg.herm_eig(h)
    assert np.all(np.diff(w) <= 0)
    assert np.allclose(u @ np.diag(w) @ u.conj().T, h)
    assert np.allclose(u.conj().T @ u, np.eye(5))


def test_herm_eig_degenerate_basis_is_canonical(rng):
    # the same eigenspace presented through two different unitaries
    p = np.diag([1.0, 1.0, 0.0])
    q1 = np.linalg.qr(random_matrix(rng, 3, 3))[0]
    blk = np.eye(3, dtype=complex)
    blk[:2, :2] = np.linalg.qr(random_matrix(rng, 2, 2))[0]
    q2 = q1 @ blk
    _, u1 = linalg.herm_eig(q1 @ p @ q1.conj().T)
    _, u2 = linalg.herm_eig(q2 @ p @ q2.conj().T)
    assert np.allclose(u1[:, :2], u2[:, :2])


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        linalg.herm_eig(np.array([[0, 1], [0, 0]]))


def test_psd_check_and_sqrt(rng):
    g = random_matrix(rng, 4, 2)
    m = g @ g.conj().T
    assert linalg.psd_check(m)
    r = linalg.psd_sqrt(m)
    assert np.allclose(r @ r, m)
    assert not linalg.psd_check(-m)


def test_psd_sqrt_of_projection_is_exact():
    # rounding-level eigenvalues must not survive as 1e-8 square roots
    u = np.linalg.qr(random_matrix(np.random.default_rng(3), 4, 4))[0]
    p = u[:, :2] @ u[:, :2].conj().T
    assert np.linalg.norm(linalg.psd_sqrt(p) - p) < 1e-12


def test_rank_nullspace_floor():
    m = np.diag([1.0, 1e-12, 0.0])
    rank, null = linalg.rank_nullspace(m)
    assert rank == 1 and null.shape == (3, 2)
    # a matrix of pure rounding noise has rank zero once an absolute floor is set
    noise = np.full((3, 3), 1e-17)
    assert linalg.matrix_rank(noise) == 1
    assert linalg.matrix_rank(noise, floor=1e-10) == 0


def test_least_squares_residual():
    a = np.array([[1.0], [1.0]])
    x, res = linalg.least_squares(a, np.array([0.0, 2.0]))
    assert x[0] == pytest.approx(1.0)
    assert res == pytest.approx(np.sqrt(2.0))


def test_orthonormalize_and_projectors(rng):
    v = random_matrix(rng, 5, 2)
    q = linalg.orthonormalize(np.hstack([v, v[:, :1] * 3]))
    assert q.shape == (5, 2)
    p = linalg.range_projector(q)
    assert linalg.is_projection(p)
    assert linalg.is_isometry(q)
    assert not linalg.is_unitary(q)
    assert linalg.isometry_defect(2 * q) == pytest.approx(3.0)


def test_hermitian_basis_spans_hermitian_matrices():
    basis = linalg.hermitian_basis(3)
    assert basis.shape == (9, 3, 3)
    assert all(np.allclose(b, b.conj().T) for b in basis)
    real = np.array([linalg.hermitian_to_real(b) for b in basis])
    assert np.linalg.matrix_rank(real) == 9


def test_span_distance():
    a = np.eye(3)[:, :2]
    assert linalg.span_distance(a, a @ np.array([[0, 1], [1, 0]])) < 1e-12
    assert linalg.span_distance(a, np.eye(3)[:, 1:]) == pytest.approx(1.0)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_psd_sqrt_property(n, seed):
    rng = np.random.default_rng(seed)
    g = random_matrix(rng, n, n)
    m = g @ g.conj().T
    r = linalg.psd_sqrt(m)
    assert np.allclose(r, r.conj().T)
    assert np.linalg.norm(r @ r - m) <= 1e-9 * max(1.0, np.linalg.norm(m))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_rank_plus_nullity(m, n, seed):
    rng = np.random.default_rng(seed)
    r = min(m, n, int(rng.integers(0, 4)))
    a = random_matrix(rng, m, r) @ random_matrix(rng, r, n)
    rank, null = linalg.rank_nullspace(a)
    assert rank == r
    assert rank + null.shape[1] == n
    assert np.linalg.norm(a @ null) <= 1e-9 * max(1.0, np.linalg.norm(a))
