"""Minimal bi-dilations ``(K, pi, E, V)`` in explicit block coordinates.

For every outcome ``i`` and algebra factor ``s`` with Kraus rank
``r = r_{i,s} > 0`` the dilation space carries one block
``C^{d_s} (x) C^r`` (row index ``p*r + j``).  On it

    pi(a) = a_s (x) I_r,      E({i}) = identity on the outcome-i blocks,

and the rows of ``V`` are the stacked minimal Kraus operators, so that
``V^* pi(a) E({i}) V = Phi_i(a)``.  Spectrality of ``E`` and its commutation
with ``pi`` hold exactly; only ``V`` carries rounding error.

The commutant of ``pi(A) E(O(X))`` is ``(+)_{(i,s)} I_{d_s} (x) M_{r_{i,s}}``;
its elements are handled as one ``r x r`` matrix per block.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from . import linalg
from .algebra import AlgebraElement, AlgebraSpec, matrix_unit_basis
from .cpmap import basis_images, block_rep, kraus_minimal, kraus_to_rows, rows_to_kraus
from .instrument import Instrument, is_unital_instrument
from .linalg import Tolerance, TolLike, as_tol, op_norm


@dataclass(frozen=True)
class Block:
    """One ``C^d (x) C^r`` summand, for outcome ``i`` and factor ``s`` (both 1-based)."""
    outcome: int
    factor: int
    d: int
    r: int

    @property
    def size(self) -> int:
        return self.d * self.r


@dataclass(frozen=True, eq=False)
class BiDilation:
    spec: AlgebraSpec
    n: int
    blocks: Tuple[Block, ...]
    V: np.ndarray

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def out_dim(self) -> int:
        return self.V.shape[1]

    def offsets(self) -> List[int]:
        out, off = [], 0
        for b in self.blocks:
            out.append(off)
            off += b.size
        return out

    def block_rows(self, j: int) -> np.ndarray:
        """Rows of ``V`` belonging to block ``j``."""
        off = self.offsets()[j]
        return self.V[off:off + self.blocks[j].size]

    def kraus(self, j: int) -> List[np.ndarray]:
        b = self.blocks[j]
        return rows_to_kraus(self.block_rows(j), b.d, b.r)

    def pi(self, a: AlgebraElement) -> np.ndarray:
        return block_rep(a, [(b.factor - 1, b.d, b.r) for b in self.blocks])

    def E(self, subset: Iterable[int]) -> np.ndarray:
        """Spectral projection of the outcome set ``subset`` (1-based labels)."""
        keep = set(subset)
        diag = np.concatenate([np.full(b.size, 1.0 if b.outcome in keep else 0.0)
                               for b in self.blocks]) if self.blocks else np.zeros(0)
        return np.diag(diag).astype(complex)

    def commutant_dim(self) -> int:
        return sum(b.r * b.r for b in self.blocks)

    def block_table(self) -> List[Tuple[int, int, int, int]]:
        return [(b.outcome, b.factor, b.d, b.r) for b in self.blocks]


def minimal_bidilation(ins: Instrument, tol: TolLike = None) -> BiDilation:
    """Minimal bi-dilation from the minimal Kraus operators of each outcome map.

    :raises NotCP: if some outcome map is not completely positive.
    """
    tol = as_tol(tol)
    blocks, rows = [], []
    for i, m in zip(ins.outcomes, ins.maps):
        for s, (d, ops) in enumerate(zip(ins.spec.block_dims, kraus_minimal(m, tol)), start=1):
            if ops:
                blocks.append(Block(i, s, d, len(ops)))
                rows.append(kraus_to_rows(ops, d))
    v = np.vstack(rows) if rows else np.zeros((0, ins.out_dim), dtype=complex)
    return BiDilation(ins.spec, ins.n, tuple(blocks), v)


# --------------------------------------------------------------------------
# commutant
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CommutantBasis:
    """Basis ``I_d (x) E_jl`` of the commutant, one unit per block entry."""
    dilation: BiDilation
    labels: Tuple[Tuple[int, int, int], ...]     # (block index, j, l), 0-based
    elements: np.ndarray                         # (m, N, N)

    @property
    def dim(self) -> int:
        return len(self.labels)


def commutant_element(dil: BiDilation, cs: Sequence[np.ndarray]) -> np.ndarray:
    """``(+)_b I_{d_b} (x) C_b`` as an ``N x N`` matrix."""
    out = np.zeros((dil.dim, dil.dim), dtype=complex)
    for off, b, c in zip(dil.offsets(), dil.blocks, cs):
        out[off:off + b.size, off:off + b.size] = np.kron(np.eye(b.d), c)
    return out


def commutant_blocks(dil: BiDilation, m: np.ndarray) -> Tuple[List[np.ndarray], float]:
    """Read the per-block ``r x r`` coefficients off an ``N x N`` matrix.

    Returns the blocks and the distance of ``m`` from the commutant (operator
    norm of the part not of the form ``(+) I (x) C``).
    """
    m = np.asarray(m, dtype=complex)
    cs = []
    for off, b in zip(dil.offsets(), dil.blocks):
        sub = m[off:off + b.size, off:off + b.size].reshape(b.d, b.r, b.d, b.r)
        cs.append(np.einsum("pjpl->jl", sub) / b.d)
    defect = op_norm(m - commutant_element(dil, cs)) if dil.dim else 0.0
    return cs, defect


def commutant_basis(dil: BiDilation) -> CommutantBasis:
    labels, elems = [], []
    for j, b in enumerate(dil.blocks):
        for p in range(b.r):
            for q in range(b.r):
                cs = [np.zeros((c.r, c.r)) for c in dil.blocks]
                cs[j][p, q] = 1.0
                labels.append((j, p, q))
                elems.append(commutant_element(dil, cs))
    arr = np.array(elems) if elems else np.zeros((0, dil.dim, dil.dim), dtype=complex)
    return CommutantBasis(dil, tuple(labels), arr)


def compressed_products(dil: BiDilation, j: int, c: np.ndarray) -> np.ndarray:
    """Choi block of ``a -> V_b^* (a (x) C) V_b`` for block ``j``.

    With ``u_l = conj(K_l).reshape(-1)`` this is ``U C U^*``.
    """
    u = np.column_stack([k.conj().reshape(-1) for k in dil.kraus(j)])
    return u @ c @ u.conj().T


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

@dataclass
class DilationReport:
    reconstruction_residual: float = 0.0
    commutation_residual: float = 0.0
    spectral_residual: float = 0.0
    minimality_rank: int = 0
    dim: int = 0
    isometry_defect: float = 0.0
    unital: bool = True
    passed: bool = True
    failures: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "dim": self.dim,
            "minimality_rank": self.minimality_rank,
            "reconstruction_residual": self.reconstruction_residual,
            "commutation_residual": self.commutation_residual,
            "spectral_residual": self.spectral_residual,
            "isometry_defect": self.isometry_defect,
        }


def verify_bidilation(ins: Instrument, dil: BiDilation, tol: TolLike = None) -> DilationReport:
    """Re-check a bi-dilation against the instrument from first principles.

    Reconstruction must hold within ``eps * scale`` on the matrix-unit basis,
    the span of ``pi(a) E({i}) V h`` must be the whole space, and ``V`` must
    be an isometry exactly when the instrument is unital.
    """
    tol = as_tol(tol)
    rep = DilationReport(dim=dil.dim)
    k = ins.out_dim
    if dil.V.shape != (dil.dim, k) or dil.n != ins.n or dil.spec != ins.spec:
        rep.passed = False
        rep.failures.append("shape")
        return rep
    basis = matrix_unit_basis(ins.spec)
    pis = [dil.pi(a) for a in basis]
    es = [dil.E([i]) for i in ins.outcomes]
    v = dil.V
    worst = 0.0
    for i, m in zip(ins.outcomes, ins.maps):
        imgs = basis_images(m)
        for u, p in enumerate(pis):
            worst = max(worst, op_norm(v.conj().T @ p @ es[i - 1] @ v - imgs[u]))
    rep.reconstruction_residual = worst
    rep.commutation_residual = max([0.0] + [op_norm(p @ e - e @ p) for p in pis for e in es])
    if es:
        rep.spectral_residual = max([op_norm(e @ e - e) for e in es]
                                    + [op_norm(sum(es) - np.eye(dil.dim))])
    if dil.dim:
        span = np.hstack([p @ e @ v for p in pis for e in es])
        rep.minimality_rank = linalg.matrix_rank(span, tol, floor=tol.slack(op_norm(v)))
    rep.isometry_defect = linalg.isometry_defect(v)
    rep.unital = is_unital_instrument(ins, tol)
    scale = ins.scale()
    if worst > tol.slack(scale):
        rep.failures.append("reconstruction")
    if rep.commutation_residual > tol.eps or rep.spectral_residual > tol.eps:
        rep.failures.append("commutation")
    if rep.minimality_rank != dil.dim:
        rep.failures.append("minimality")
    if rep.unital != (rep.isometry_defect <= tol.projection(k)):
        rep.failures.append("isometry")
    rep.passed = not rep.failures
    return rep


# --------------------------------------------------------------------------
# sub-minimal dilations
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubDilation:
    """A dilation compressed to the range of ``Q`` (orthonormal columns).

    ``pi`` and ``E`` are the compressions ``Q^* pi Q`` and ``Q^* E Q``;
    ``V = Q^* V_bi``.
    """
    basis: np.ndarray
    parent: BiDilation
    V: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def pi(self, a: AlgebraElement) -> np.ndarray:
        q = self.basis
        return q.conj().T @ self.parent.pi(a) @ q

    def E(self, subset: Iterable[int]) -> np.ndarray:
        q = self.basis
        return q.conj().T @ self.parent.E(subset) @ q

    def reconstruct(self, i: int, a: AlgebraElement) -> np.ndarray:
        return self.V.conj().T @ self.pi(a) @ self.E([i]) @ self.V


def _subdilation(dil: BiDilation, vectors: List[np.ndarray], tol: Tolerance) -> SubDilation:
    q = linalg.orthonormalize(np.hstack(vectors) if vectors else np.zeros((dil.dim, 0)),
                              dim=dil.dim, tol=tol, floor=tol.slack(op_norm(dil.V)))
    return SubDilation(q, dil, q.conj().T @ dil.V)



def cp_subminimal(dil: BiDilation, tol: TolLike = None) -> SubDilation:
    """Compression to ``P1 = [pi(A) V H]``; ``pi`` stays a representation there."""
    tol = as_tol(tol)
    return _subdilation(dil, [dil.pi(a) @ dil.V for a in matrix_unit_basis(dil.spec)], tol)


def povm_subminimal(dil: BiDilation, tol: TolLike = None) -> SubDilation:
    """Compression to ``P2 = [E(O(X)) V H]``; ``E`` stays spectral there."""
    tol = as_tol(tol)
    return _subdilation(dil, [dil.E([i]) @ dil.V for i in range(1, dil.n + 1)], tol)


def dilation_dims(dil: BiDilation, tol: TolLike = None) -> Tuple[int, int, int]:
    """``(bi-dilation, CP sub-minimal, POVM sub-minimal)`` space dimensions."""
    return dil.dim, cp_subminimal(dil, tol).dim, povm_subminimal(dil, tol).dim


def decomposable_via_dilation(dil: BiDilation, tol: TolLike = None) -> Tuple[bool, float]:
    """Decomposability from the bi-dilation: ``P1 E_i P1 V = V V^* P1 E_i P1 V``.

    The identity is checked in this ``V``-on-the-right form, which is
    equivalent to decomposability whether or not ``V`` is an isometry.
    Returns the verdict and the largest residual.
    """
    tol = as_tol(tol)
    if dil.dim == 0:
        return True, 0.0
    q = cp_subminimal(dil, tol).basis
    p1 = q @ q.conj().T
    v = dil.V
    vv = v @ v.conj().T
    worst = 0.0
    for i in range(1, dil.n + 1):
        x = p1 @ dil.E([i]) @ p1 @ v
        worst = max(worst, op_norm(x - vv @ x))
    scale = max(1.0, op_norm(v)) ** 3
    return worst <= tol.slack(scale), worst
