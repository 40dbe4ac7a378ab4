"""Dense complex linear algebra with one explicit tolerance policy.

Every numerical decision in the package goes through this module.  A single
relative tolerance ``eps`` drives all thresholds:

* Hermiticity:   ``||m - m*|| <= eps * max(1, ||m||)``
* PSD slack:     ``lambda_min(m) >= -eps * max(1, ||m||)``
* rank cut:      ``sigma_j > eps * sigma_max * max(rows, cols)``
* projection:    ``||P^2 - P|| <= eps * dim`` (and Hermitian)
* eigenvalue grouping: eigenvalues closer than ``eps * max(1, ||m||)`` are
  treated as one degenerate group.

Norms are spectral (largest singular value) unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import NotHermitian, NotPSD

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class Tolerance:
    """Relative tolerance with derived thresholds."""

    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"tolerance must be positive, got {self.eps!r}")

    def slack(self, norm: float) -> float:
        """Absolute slack for Hermiticity and PSD tests of a matrix of norm ``norm``."""
        return self.eps * max(1.0, norm)

    def rank_cut(self, sigma_max: float, shape: Sequence[int]) -> float:
        return self.eps * sigma_max * max(shape)

    def projection(self, dim: int) -> float:
        return self.eps * max(1, dim)


TolLike = Union[Tolerance, float, None]


def as_tol(tol: TolLike) -> Tolerance:
    if tol is None:
        return Tolerance()
    if isinstance(tol, Tolerance):
        return tol
    return Tolerance(float(tol))


def op_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if m.ndim == 1:
        return float(np.linalg.norm(m))
    return float(np.linalg.norm(m, 2))


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def is_hermitian(m: np.ndarray, tol: TolLike = None) -> bool:
    tol = as_tol(tol)
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return op_norm(m - m.conj().T) <= tol.slack(op_norm(m))


def _require_hermitian(m, tol: Tolerance) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix of shape {m.shape} is not square")
    if not is_hermitian(m, tol):
        raise NotHermitian(
            f"||m - m*|| = {op_norm(m - m.conj().T):.3e} exceeds tolerance")
    return (m + m.conj().T) / 2


def phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its first dominant component is real and positive.

    "Dominant" means modulus at least half the largest modulus, which keeps
    the choice stable under rounding noise.
    """
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    top = mags.max() if v.size else 0.0
    if top == 0.0:
        return v.copy()
    j = int(np.argmax(mags >= 0.5 * top))
    return v * (np.conj(v[j]) / mags[j])


def _canonical_basis(projector: np.ndarray, rank: int) -> np.ndarray:
    """Deterministic orthonormal basis of the range of ``projector``.

    Gram-Schmidt over the projector's columns in index order, taking the first
    column whose residual is comfortably nonzero.  The result depends only on
    the subspace, not on how an eigensolver happened to rotate it.
    """
    n = projector.shape[0]
    floor = 0.5 / np.sqrt(n)
    basis = []
    for _ in range(rank):
        for j in range(n):
            v = projector[:, j].copy()
            for b in basis:
                v -= b * np.vdot(b, v)
            nv = np.linalg.norm(v)
            if nv > floor:
                basis.append(v / nv)
                break
        else:  # pragma: no cover - projector of the stated rank always has one
            raise ArithmeticError("degenerate projector in eigenvector canonicalization")
    vecs = [phase_normalize(b) for b in basis]
    vecs.sort(key=_lex_key, reverse=True)
    return np.column_stack(vecs)


def _lex_key(v: np.ndarray):
    return tuple(x for c in np.round(v, 10) for x in (c.real, c.imag))


def herm_eig(m, tol: TolLike = None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(eigenvalues, U)`` with eigenvalues sorted descending and the
    columns of ``U`` orthonormal.  Within a group of numerically equal
    eigenvalues the eigenvectors are a canonical basis of the eigenspace,
    phase-normalized and sorted lexicographically (descending).

    :raises NotHermitian: if ``m`` is not Hermitian within tolerance.
    """
    tol = as_tol(tol)
    h = _require_hermitian(m, tol)
    n = h.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    w, u = np.linalg.eigh(h)
    w, u = w[::-1], u[:, ::-1]
    gap = tol.slack(op_norm(h))
    out = np.empty_like(u)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop - 1] - w[stop] <= gap:
            stop += 1
        block = u[:, start:stop]
        if stop - start == 1:
            out[:, start] = phase_normalize(block[:, 0])
        else:
            out[:, start:stop] = _canonical_basis(block @ block.conj().T, stop - start)
        start = stop
    return w.copy(), out


def psd_check(m, tol: TolLike = None) -> bool:
    """True iff ``m`` is positive semidefinite up to ``-eps * max(1, ||m||)``."""
    tol = as_tol(tol)
    h = _require_hermitian(m, tol)
    if h.size == 0:
        return True
    return float(np.linalg.eigvalsh(h)[0]) >= -tol.slack(op_norm(h))


def psd_sqrt(m, tol: TolLike = None) -> np.ndarray:
    """Positive square root of a PSD matrix.

    Eigenvalues at rounding level (below ``dim * machine_eps * ||m||``) are
    set to zero first; otherwise their square roots would put ``1e-8``-sized
    noise into the root of an exact projection.

    :raises NotPSD: when ``m`` has an eigenvalue below the PSD slack.
    """
    tol = as_tol(tol)
    h = _require_hermitian(m, tol)
    if h.size == 0:
        return h
    w, u = np.linalg.eigh(h)
    if w[0] < -tol.slack(op_norm(h)):
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} is negative")
    noise = max(1, len(w)) * np.finfo(float).eps * max(abs(w[0]), abs(w[-1]))
    root = (u * np.sqrt(np.where(w > noise, w, 0.0))) @ u.conj().T
    return (root + root.conj().T) / 2


def rank_nullspace(m, tol: TolLike = None, floor: float = 0.0) -> Tuple[int, np.ndarray]:
    """Numerical rank and an orthonormal basis of the right null space.

    ``floor`` is an optional absolute cut applied on top of the relative one;
    callers pass it when the matrix may be exactly zero up to rounding.
    """
    tol = as_tol(tol)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("rank_nullspace expects a matrix")
    rows, cols = m.shape
    dtype = complex if np.iscomplexobj(m) else float
    if rows == 0 or cols == 0:
        return 0, np.eye(cols, dtype=dtype)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    cut = max(tol.rank_cut(s[0], m.shape), floor) if s.size else 0.0
    rank = int(np.sum(s > cut)) if s.size and s[0] > 0 else 0
    return rank, vh[rank:].conj().T


def matrix_rank(m, tol: TolLike = None, floor: float = 0.0) -> int:
    tol = as_tol(tol)
    m = np.asarray(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > max(tol.rank_cut(s[0], m.shape), floor)))


def least_squares(a, b) -> Tuple[np.ndarray, float]:
    """Minimizer of ``||a x - b||`` and the attained residual norm."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[1] == 0:
        return np.zeros((0,) + b.shape[1:], dtype=np.result_type(a, b)), float(np.linalg.norm(b))
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x, float(np.linalg.norm(a @ x - b))


def orthonormalize(vectors: Union[np.ndarray, Iterable[np.ndarray]], dim: int = None,
                   tol: TolLike = None, floor: float = 0.0) -> np.ndarray:
    """Orthonormal basis (as columns) of the span of ``vectors``.

    ``vectors`` is either a matrix whose columns are the vectors or an
    iterable of 1-D arrays.  ``dim`` fixes the ambient dimension for an empty
    input.  ``floor`` is an absolute cut on top of the relative one.
    """
    tol = as_tol(tol)
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        mat = vectors
    else:
        vecs = [np.asarray(v).reshape(-1) for v in vectors]
        if not vecs:
            return np.zeros((dim or 0, 0), dtype=complex)
        mat = np.column_stack(vecs)
    mat = np.asarray(mat, dtype=complex)
    if mat.shape[1] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s[0] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > max(tol.rank_cut(s[0], mat.shape), floor)))
    return np.column_stack([phase_normalize(u[:, j]) for j in range(rank)]) if rank else \
        np.zeros((mat.shape[0], 0), dtype=complex)


def range_projector(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of the orthonormal columns of ``basis``."""
    return basis @ basis.conj().T


def is_projection(p, tol: TolLike = None) -> bool:
    tol = as_tol(tol)
    p = np.asarray(p)
    return is_hermitian(p, tol) and op_norm(p @ p - p) <= tol.projection(p.shape[0])


def isometry_defect(w) -> float:
    w = np.asarray(w)
    return op_norm(w.conj().T @ w - np.eye(w.shape[1]))


def is_isometry(w, tol: TolLike = None) -> bool:
    tol = as_tol(tol)
    w = np.asarray(w)
    return isometry_defect(w) <= tol.projection(w.shape[1])


def is_unitary(u, tol: TolLike = None) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and is_isometry(u, tol)


def hermitian_basis(r: int) -> np.ndarray:
    """Real basis of the Hermitian ``r x r`` matrices, shape ``(r*r, r, r)``.

    Ordered: diagonal units, then for ``j < l`` the symmetric and the
    antisymmetric imaginary parts.
    """
    out = []
    for j in range(r):
        e = np.zeros((r, r), dtype=complex)
        e[j, j] = 1
        out.append(e)
    for j in range(r):
        for l in range(j + 1, r):
            s = np.zeros((r, r), dtype=complex)
            s[j, l] = s[l, j] = 1
            a = np.zeros((r, r), dtype=complex)
            a[j, l] = 1j
            a[l, j] = -1j
            out.extend([s, a])
    return np.array(out).reshape(r * r, r, r)


def hermitian_to_real(m: np.ndarray) -> np.ndarray:
    """Real coordinates ``[Re(flat), Im(flat)]`` of a complex array."""
    flat = np.asarray(m).reshape(-1)
    return np.concatenate([flat.real, flat.imag])


def span_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric distance between the spans of the orthonormal columns of ``a`` and ``b``.

    Zero iff the spans coincide; equals 1 when the dimensions differ.
    """
    if a.shape[1] != b.shape[1]:
        return 1.0
    if a.shape[1] == 0:
        return 0.0
    pa = a - b @ (b.conj().T @ a)
    pb = b - a @ (a.conj().T @ b)
    return max(op_norm(pa), op_norm(pb))
