"""Completely positive maps ``Phi: M_{d_1} (+) ... (+) M_{d_S} -> M_k``.

A map is stored as one Choi block per factor,

    choi_s = sum_{p,q} E_pq (x) Phi_s(E_pq),        (d_s*k) x (d_s*k),

with row index ``(p, alpha) -> p*k + alpha``.  Kraus operators are ``d_s x k``
matrices acting from the output space into the factor, so that

    Phi_s(a) = sum_j K_j^* a K_j.

With this convention the Choi block is ``sum_j v_j v_j^*`` where
``v_j = conj(K_j).reshape(-1)``; the conjugation is the one place the
convention bites and it is covered by the round-trip tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import linalg
from .algebra import AlgebraElement, AlgebraSpec, identity, matrix_unit_labels
from .errors import NotCP, NotIsometry, ShapeMismatch, SpecMismatch
from .linalg import TolLike, as_tol, op_norm

KrausSet = Tuple[Tuple[np.ndarray, ...], ...]
"""Per factor, a tuple of ``d_s x k`` Kraus operators."""


@dataclass(frozen=True, eq=False)
class CPMap:
    spec: AlgebraSpec
    out_dim: int
    choi_blocks: Tuple[np.ndarray, ...]

    def __init__(self, spec: AlgebraSpec, out_dim: int, choi_blocks: Sequence):
        k = int(out_dim)
        if k < 0:
            raise ShapeMismatch("output dimension must be nonnegative")
        if len(choi_blocks) != spec.n_factors:
            raise ShapeMismatch(f"{spec} needs {spec.n_factors} Choi blocks, got {len(choi_blocks)}")
        blocks = []
        for d, c in zip(spec.block_dims, choi_blocks):
            c = np.array(c, dtype=complex)
            if c.shape != (d * k, d * k):
                raise ShapeMismatch(f"Choi block of shape {c.shape}, expected {(d * k, d * k)}")
            if not np.all(np.isfinite(c)):
                raise ShapeMismatch("Choi block has non-finite entries")
            c.flags.writeable = False
            blocks.append(c)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "out_dim", k)
        object.__setattr__(self, "choi_blocks", tuple(blocks))

    def __add__(self, other: "CPMap") -> "CPMap":
        _check_compatible(self, other)
        return CPMap(self.spec, self.out_dim, [x + y for x, y in zip(self.choi_blocks, other.choi_blocks)])

    def __sub__(self, other: "CPMap") -> "CPMap":
        _check_compatible(self, other)
        return CPMap(self.spec, self.out_dim, [x - y for x, y in zip(self.choi_blocks, other.choi_blocks)])

    def __mul__(self, c) -> "CPMap":
        return CPMap(self.spec, self.out_dim, [c * x for x in self.choi_blocks])

    __rmul__ = __mul__

    def choi_norm(self) -> float:
        return max(op_norm(c) for c in self.choi_blocks)

    def is_zero(self, tol: TolLike = None) -> bool:
        return self.choi_norm() <= as_tol(tol).eps

    def __repr__(self):
        return f"CPMap({self.spec!r}, out_dim={self.out_dim})"


def _check_compatible(x: CPMap, y: CPMap):
    if x.spec != y.spec or x.out_dim != y.out_dim:
        raise SpecMismatch(f"{x!r} vs {y!r}")


def zero_map(spec: AlgebraSpec, k: int) -> CPMap:
    return CPMap(spec, k, [np.zeros((d * k, d * k)) for d in spec.block_dims])


def cpmap_from_function(spec: AlgebraSpec, k: int,
                        f: Callable[[int, int, int], np.ndarray]) -> CPMap:
    """Assemble the Choi blocks from ``f(s, p, q) = Phi(E_pq^(s))`` (0-based indices)."""
    blocks = []
    for s, d in enumerate(spec.block_dims):
        c = np.zeros((d, k, d, k), dtype=complex)
        for p in range(d):
            for q in range(d):
                c[p, :, q, :] = f(s, p, q)
        blocks.append(c.reshape(d * k, d * k))
    return CPMap(spec, k, blocks)


def factor_image(phi: CPMap, s: int, a_s: np.ndarray) -> np.ndarray:
    """``Phi_s(a_s)`` for a single ``d_s x d_s`` block (0-based ``s``)."""
    d, k = phi.spec.block_dims[s], phi.out_dim
    c = phi.choi_blocks[s].reshape(d, k, d, k)
    return np.einsum("pq,paqb->ab", a_s, c)


def apply(phi: CPMap, a: AlgebraElement) -> np.ndarray:
    """``Phi(a)`` as a ``k x k`` matrix."""
    if a.spec != phi.spec:
        raise SpecMismatch(f"element of {a.spec} fed to a map on {phi.spec}")
    out = np.zeros((phi.out_dim, phi.out_dim), dtype=complex)
    for s, a_s in enumerate(a.blocks):
        out += factor_image(phi, s, a_s)
    return out


def basis_images(phi: CPMap) -> np.ndarray:
    """``Phi`` on the matrix-unit basis, shape ``(sum d_s^2, k, k)``."""
    k = phi.out_dim
    out = []
    for s, d in enumerate(phi.spec.block_dims):
        c = phi.choi_blocks[s].reshape(d, k, d, k).transpose(0, 2, 1, 3)
        out.append(c.reshape(d * d, k, k))
    return np.concatenate(out) if out else np.zeros((0, k, k))


def unit_image(phi: CPMap) -> np.ndarray:
    return apply(phi, identity(phi.spec))


def validate_cp(phi: CPMap, tol: TolLike = None) -> bool:
    """True iff every Choi block is PSD within tolerance."""
    tol = as_tol(tol)
    try:
        return all(linalg.psd_check(c, tol) for c in phi.choi_blocks)
    except linalg.NotHermitian:
        return False


def is_unital(phi: CPMap, tol: TolLike = None) -> bool:
    """``||Phi(1) - I_k|| <= eps * k``."""
    tol = as_tol(tol)
    return op_norm(unit_image(phi) - np.eye(phi.out_dim)) <= tol.projection(phi.out_dim)


def _choi_kraus(choi: np.ndarray, d: int, k: int, tol) -> Tuple[np.ndarray, ...]:
    if choi.size == 0:
        return ()
    try:
        psd = linalg.psd_check(choi, tol)
    except linalg.NotHermitian as exc:
        raise NotCP(str(exc)) from None
    if not psd:
        raise NotCP("Choi block is not positive semidefinite")
    w, u = linalg.herm_eig(choi, tol)
    # absolute floor eps: blocks below it count as zero, matching CPMap.is_zero
    cut = max(tol.rank_cut(w[0], choi.shape), tol.eps)
    rank = int(np.sum(w > cut))
    return tuple(np.sqrt(w[j]) * u[:, j].conj().reshape(d, k) for j in range(rank))


def kraus_minimal(phi: CPMap, tol: TolLike = None) -> KrausSet:
    """Minimal Kraus operators per factor from the scaled Choi eigenvectors.

    The count per factor equals the rank of the Choi block and the operators
    are linearly independent (orthogonal in Hilbert-Schmidt inner product).

    :raises NotCP: if some Choi block is not PSD.
    """
    tol = as_tol(tol)
    return tuple(_choi_kraus(c, d, phi.out_dim, tol)
                 for c, d in zip(phi.choi_blocks, phi.spec.block_dims))


def kraus_ranks(phi: CPMap, tol: TolLike = None) -> Tuple[int, ...]:
    return tuple(len(ks) for ks in kraus_minimal(phi, tol))


def cpmap_from_kraus(spec: AlgebraSpec, k: int, kraus: Sequence[Sequence[np.ndarray]]) -> CPMap:
    """Map ``a -> sum_s sum_j K_j^(s)* a_s K_j^(s)``.

    :raises ShapeMismatch: if some operator is not ``d_s x k``.
    """
    if len(kraus) != spec.n_factors:
        raise ShapeMismatch(f"{spec} needs Kraus lists for {spec.n_factors} factors")
    blocks = []
    for d, ops in zip(spec.block_dims, kraus):
        c = np.zeros((d * k, d * k), dtype=complex)
        for op in ops:
            op = np.asarray(op, dtype=complex)
            if op.shape != (d, k):
                raise ShapeMismatch(f"Kraus operator of shape {op.shape}, expected {(d, k)}")
            v = op.conj().reshape(-1)
            c += np.outer(v, v.conj())
        blocks.append(c)
    return CPMap(spec, k, blocks)


def compress(phi: CPMap, w: np.ndarray, tol: TolLike = None) -> CPMap:
    """``a -> W^* Phi(a) W`` for an isometry ``W: C^{k'} -> C^k``.

    :raises NotIsometry: if ``W^*W != I``.
    """
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != phi.out_dim:
        raise NotIsometry(f"expected a {phi.out_dim} x k' matrix, got {w.shape}")
    if not linalg.is_isometry(w, tol):
        raise NotIsometry(f"||W*W - I|| = {linalg.isometry_defect(w):.3e}")
    return conjugate(phi, w)


def conjugate(phi: CPMap, t: np.ndarray) -> CPMap:
    """``a -> T^* Phi(a) T`` for any ``k x k'`` matrix ``T`` (no isometry check)."""
    t = np.asarray(t, dtype=complex)
    kk = t.shape[1]
    blocks = []
    for d, c in zip(phi.spec.block_dims, phi.choi_blocks):
        big = np.kron(np.eye(d), t)
        blocks.append(big.conj().T @ c @ big)
    return CPMap(phi.spec, kk, blocks)


@dataclass(frozen=True, eq=False)
class Stinespring:
    """Minimal Stinespring dilation in block coordinates.

    The dilation space is ``(+)_s C^{d_s} (x) C^{r_s}`` over factors with
    ``r_s > 0``; ``pi(a) = (+)_s a_s (x) I_{r_s}`` and
    ``Phi(a) = V^* pi(a) V``.
    """
    ranks: Tuple[int, ...]
    V: np.ndarray
    blocks: Tuple[Tuple[int, int, int], ...]   # (s 0-based, d_s, r_s) for r_s > 0

    @property
    def dim(self) -> int:
        return self.V.shape[0]

    def pi(self, a: AlgebraElement) -> np.ndarray:
        return block_rep(a, self.blocks)


def block_rep(a: AlgebraElement, blocks) -> np.ndarray:
    """``(+) a_s (x) I_r`` over ``blocks`` given as tuples starting ``(s, d, r)``."""
    n = sum(b[1] * b[2] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    off = 0
    for b in blocks:
        s, d, r = b[0], b[1], b[2]
        out[off:off + d * r, off:off + d * r] = np.kron(a.blocks[s], np.eye(r))
        off += d * r
    return out


def kraus_to_rows(ops: Sequence[np.ndarray], d: int) -> np.ndarray:
    """Stack Kraus operators into the ``(d*r) x k`` block of ``V`` (row ``p*r + j``)."""
    r = len(ops)
    k = ops[0].shape[1]
    return np.stack(ops, axis=1).reshape(d * r, k)


def rows_to_kraus(rows: np.ndarray, d: int, r: int) -> List[np.ndarray]:
    k = rows.shape[1]
    v = rows.reshape(d, r, k)
    return [v[:, j, :] for j in range(r)]


def stinespring_minimal(phi: CPMap, tol: TolLike = None) -> Stinespring:
    """Minimal Stinespring dilation built from the minimal Kraus operators.

    :raises NotCP: if ``phi`` is not completely positive.
    """
    kraus = kraus_minimal(phi, tol)
    blocks, rows = [], []
    for s, (d, ops) in enumerate(zip(phi.spec.block_dims, kraus)):
        if ops:
            blocks.append((s, d, len(ops)))
            rows.append(kraus_to_rows(ops, d))
    v = np.vstack(rows) if rows else np.zeros((0, phi.out_dim), dtype=complex)
    return Stinespring(tuple(len(ops) for ops in kraus), v, tuple(blocks))


def is_pure_cpmap(phi: CPMap, tol: TolLike = None) -> bool:
    """Exactly one factor carries Kraus rank one and the others vanish."""
    return sum(kraus_ranks(phi, tol)) == 1


def is_homomorphism(phi: CPMap, tol: TolLike = None) -> bool:
    """Multiplicativity ``Phi(xy) = Phi(x)Phi(y)`` on all matrix-unit pairs."""
    tol = as_tol(tol)
    labels = matrix_unit_labels(phi.spec)
    images = basis_images(phi)
    index = {lab: i for i, lab in enumerate(labels)}
    scale = max(1.0, op_norm(unit_image(phi))) ** 2
    k = phi.out_dim
    for i, (s, p, q) in enumerate(labels):
        for j, (t, q2, r) in enumerate(labels):
            prod = images[i] @ images[j]
            target = images[index[(s, p, r)]] if (s == t and q == q2) else np.zeros((k, k))
            if op_norm(prod - target) > tol.slack(scale):
                return False
    return True


def identity_map(spec: AlgebraSpec) -> CPMap:
    """The inclusion ``a -> embed_full(a)`` into ``M_D``."""
    offs = spec.offsets()
    n = spec.total_dim

    def f(s, p, q):
        m = np.zeros((n, n))
        m[offs[s] + p, offs[s] + q] = 1
        return m
    return cpmap_from_function(spec, n, f)


def irrep_map(spec: AlgebraSpec, s: int) -> CPMap:
    """``a -> a_s`` (1-based ``s``)."""
    d = spec.block_dims[s - 1]

    def f(t, p, q):
        m = np.zeros((d, d))
        if t == s - 1:
            m[p, q] = 1
        return m
    return cpmap_from_function(spec, d, f)


def transpose_map(d: int) -> CPMap:
    """``a -> a^T`` on ``M_d``; positive but not completely positive."""
    return cpmap_from_function(AlgebraSpec([d]), d, lambda s, p, q: np.eye(d)[:, [q]] @ np.eye(d)[[p], :])
