"""Domination, Radon-Nikodym derivatives, extremality and C*-extremality.

Everything here works inside the bi-dilation commutant
``(+)_{(i,s)} I_{d_s} (x) M_{r_{i,s}}``, with elements carried as one
``r x r`` coefficient matrix per block.  For such a ``D`` the instrument

    J(i, a) = V^* D pi(a) E({i}) V

has Choi block ``U C U^*`` on outcome ``i`` and factor ``s``, where the columns
of ``U`` are the vectorized conjugated Kraus operators of that block.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import linalg
from .algebra import matrix_unit_basis
from .certificates import Certificate
from .cpmap import (CPMap, basis_images, compress, is_unital,
                    stinespring_minimal, unit_image)
from .dilation import (BiDilation, commutant_blocks, commutant_element,
                       compressed_products, minimal_bidilation)
from .errors import (InvalidDerivative, Mismatch, NotAnAlgebra, NotDominated,
                     NotUnital, TheoryViolation)
from .instrument import (Instrument, POVM, cp_marginal, is_unital_instrument,
                         povm_as_instrument_trivial_algebra, povm_marginal)
from .linalg import Tolerance, TolLike, as_tol, op_norm


# --------------------------------------------------------------------------
# domination and Radon-Nikodym derivatives
# --------------------------------------------------------------------------

def _check_comparable(j: Instrument, i: Instrument):
    if j.spec != i.spec or j.out_dim != i.out_dim or j.n != i.n:
        raise Mismatch(f"{j!r} and {i!r} are not comparable")


def dominates(j: Instrument, i: Instrument, tol: TolLike = None) -> bool:
    """True iff ``I - J`` is completely positive outcome by outcome.

    On a finite outcome set, domination on every subset reduces to the
    singletons.  Note the argument order: this asks whether ``J <= I``.
    """
    tol = as_tol(tol)
    _check_comparable(j, i)
    for a, b in zip(i.maps, j.maps):
        for c in (a - b).choi_blocks:
            try:
                if not linalg.psd_check(c, tol):
                    return False
            except linalg.NotHermitian:
                return False
    return True


def _block_frames(dil: BiDilation) -> List[np.ndarray]:
    """Per block, the matrix ``U`` whose columns are ``conj(K_l).reshape(-1)``."""
    return [np.column_stack([k.conj().reshape(-1) for k in dil.kraus(j)])
            for j in range(len(dil.blocks))]


def _instrument_from_blocks(ins: Instrument, dil: BiDilation,
                            cs: Sequence[np.ndarray]) -> Instrument:
    """``V^* D pi(.) E({i}) V`` for ``D = (+) I (x) C_b``, with no checks on ``D``."""
    k = ins.out_dim
    choi = [[np.zeros((d * k, d * k), dtype=complex) for d in ins.spec.block_dims]
            for _ in range(ins.n)]
    for j, (b, c) in enumerate(zip(dil.blocks, cs)):
        choi[b.outcome - 1][b.factor - 1] += compressed_products(dil, j, c)
    return Instrument(ins.spec, k, [CPMap(ins.spec, k, bl) for bl in choi])


@dataclass(frozen=True, eq=False)
class RNDerivative:
    """A Radon-Nikodym derivative ``D = (+)_b I (x) C_b`` in the commutant."""
    dilation: BiDilation
    blocks: Tuple[np.ndarray, ...]
    residual: float = 0.0

    @property
    def coefficients(self) -> np.ndarray:
        """Coordinates over :func:`commutant_basis`, in its label order."""
        if not self.blocks:
            return np.zeros(0, dtype=complex)
        return np.concatenate([c.reshape(-1) for c in self.blocks])

    @property
    def D(self) -> np.ndarray:
        return commutant_element(self.dilation, self.blocks)


def rn_derivative(j: Instrument, i: Instrument, tol: TolLike = None) -> RNDerivative:
    """Solve ``J(i, a) = V^* D pi(a) E({i}) V`` for ``D`` in the commutant.

    Per block the Choi block of ``J`` must equal ``U C U^*``; ``C`` is the
    least-squares solution ``U^+ choi (U^+)^*``.

    :raises NotDominated: if the system has a residual, or ``C`` is not a
        positive contraction.
    """
    tol = as_tol(tol)
    _check_comparable(j, i)
    dil = minimal_bidilation(i, tol)
    frames = _block_frames(dil)
    scale = max(i.scale(), j.scale())
    present = {(b.outcome, b.factor) for b in dil.blocks}
    for o, m in zip(j.outcomes, j.maps):
        for s, c in enumerate(m.choi_blocks, start=1):
            if (o, s) not in present and op_norm(c) > tol.slack(scale):
                raise NotDominated(f"J has mass on outcome {o}, factor {s} where I vanishes")
    cs, worst = [], 0.0
    for b, u in zip(dil.blocks, frames):
        target = j.map(b.outcome).choi_blocks[b.factor - 1]
        pinv = np.linalg.pinv(u)
        c = pinv @ target @ pinv.conj().T
        worst = max(worst, op_norm(target - u @ c @ u.conj().T))
        sv = np.linalg.svd(u, compute_uv=False)
        slack = tol.slack(1.0) * max(1.0, sv[0] / sv[-1]) ** 2
        if op_norm(c - c.conj().T) > slack:
            raise NotDominated("derivative is not Hermitian")
        c = (c + c.conj().T) / 2
        w = np.linalg.eigvalsh(c)
        if w[0] < -slack or w[-1] > 1 + slack:
            raise NotDominated(f"derivative spectrum [{w[0]:.3e}, {w[-1]:.3e}] leaves [0, 1]")
        cs.append(c)
    if worst > tol.slack(scale):
        raise NotDominated(f"Radon-Nikodym residual {worst:.3e}")
    return RNDerivative(dil, tuple(cs), worst)


DerivativeLike = Union[RNDerivative, np.ndarray, Sequence[np.ndarray]]


def _derivative_blocks(dil: BiDilation, d: DerivativeLike, tol: Tolerance) -> List[np.ndarray]:
    if isinstance(d, RNDerivative):
        cs = list(d.blocks)
    elif isinstance(d, np.ndarray) and d.ndim == 2:
        if d.shape != (dil.dim, dil.dim):
            raise InvalidDerivative(f"expected {dil.dim}x{dil.dim}, got {d.shape}")
        cs, defect = commutant_blocks(dil, d)
        if defect > tol.slack(op_norm(d)):
            raise InvalidDerivative(f"D is {defect:.3e} away from the commutant")
    else:
        cs = [np.asarray(c, dtype=complex) for c in d]
    if len(cs) != len(dil.blocks) or any(c.shape != (b.r, b.r) for c, b in zip(cs, dil.blocks)):
        raise InvalidDerivative("derivative blocks do not match the dilation")
    return cs


def rn_apply(ins: Instrument, d: DerivativeLike, tol: TolLike = None) -> Instrument:
    """The dominated instrument ``V^* D pi(.) E(.) V``.

    :raises InvalidDerivative: unless ``D`` is in the commutant and ``0 <= D <= I``.
    """
    tol = as_tol(tol)
    dil = minimal_bidilation(ins, tol)
    cs = _derivative_blocks(dil, d, tol)
    for c in cs:
        if not linalg.is_hermitian(c, tol):
            raise InvalidDerivative("D is not Hermitian")
        w = np.linalg.eigvalsh((c + c.conj().T) / 2)
        if w[0] < -tol.slack(1.0) or w[-1] > 1 + tol.slack(1.0):
            raise InvalidDerivative("D is not a positive contraction")
    return _instrument_from_blocks(ins, dil, cs)


# --------------------------------------------------------------------------
# purity and extremality
# --------------------------------------------------------------------------

def is_pure_instrument(ins: Instrument, tol: TolLike = None) -> bool:
    """Trivial commutant: exactly one block, of Kraus rank one."""
    return minimal_bidilation(ins, tol).commutant_dim() == 1


def _unit_compression_matrix(dil: BiDilation) -> Tuple[np.ndarray, List[Tuple[int, np.ndarray]]]:
    """Real matrix of ``D -> V^* D V`` on Hermitian commutant coordinates.

    Columns follow ``(block, hermitian_basis(r))``; the returned list pairs
    each column with its block index and basis matrix.
    """
    cols, index = [], []
    for j, b in enumerate(dil.blocks):
        vb = dil.block_rows(j).reshape(b.d, b.r, -1)
        for h in linalg.hermitian_basis(b.r):
            img = np.einsum("pja,jl,plb->ab", vb.conj(), h, vb)
            cols.append(linalg.hermitian_to_real(img))
            index.append((j, h))
    k = dil.out_dim
    mat = np.column_stack(cols) if cols else np.zeros((2 * k * k, 0))
    return mat, index


def extremality_kernel(dil: BiDilation, tol: TolLike = None) -> Tuple[int, int, List[np.ndarray]]:
    """``(rank, commutant dimension, kernel)`` of ``D -> V^* D V``.

    The kernel is returned as Hermitian block tuples, each of norm one.
    Injectivity is equivalent to joint linear independence of the products
    ``K_j^* K_l`` over all outcomes, factors and index pairs.
    """
    tol = as_tol(tol)
    mat, index = _unit_compression_matrix(dil)
    dim = mat.shape[1]
    if dim == 0:
        return 0, 0, []
    rank, null = linalg.rank_nullspace(mat, tol, floor=tol.slack(op_norm(dil.V) ** 2))
    kernel = []
    for x in null.T:
        cs = [np.zeros((b.r, b.r), dtype=complex) for b in dil.blocks]
        for coeff, (j, h) in zip(x.real, index):
            cs[j] += coeff * h
        norm = max(op_norm(c) for c in cs)
        kernel.append([c / norm for c in cs])
    return rank, dim, kernel


def is_extreme(ins: Instrument, tol: TolLike = None) -> Tuple[bool, Certificate]:
    """Extreme-point test: ``D -> V^* D V`` injective on the commutant.

    Returns an ``extreme`` certificate carrying the minimal Kraus data, or a
    ``non_extreme`` certificate with the pair ``I+- = V^*(I +- D) pi E V``,
    whose average is ``ins``.

    :raises NotUnital: if the instrument is not normalized.
    """
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        raise NotUnital("extremality is decided among normalized instruments")
    dil = minimal_bidilation(ins, tol)
    rank, dim, kernel = extremality_kernel(dil, tol)
    if not kernel:
        kraus = [{"outcome": b.outcome, "factor": b.factor, "operators": dil.kraus(j)}
                 for j, b in enumerate(dil.blocks)]
        return True, Certificate("extreme", {"rank": rank, "commutant_dim": dim, "kraus": kraus})
    return False, non_extreme_certificate(ins, dil, kernel[0])


def witness_pair(ins: Instrument, dil: BiDilation, cs: Sequence[np.ndarray]) -> Tuple[Instrument, Instrument]:
    """``(V^*(I + D) pi E V, V^*(I - D) pi E V)`` for ``D`` in the kernel."""
    plus = _instrument_from_blocks(ins, dil, [np.eye(b.r) + c for b, c in zip(dil.blocks, cs)])
    minus = _instrument_from_blocks(ins, dil, [np.eye(b.r) - c for b, c in zip(dil.blocks, cs)])
    return plus, minus


def non_extreme_certificate(ins: Instrument, dil: BiDilation, cs: Sequence[np.ndarray]) -> Certificate:
    plus, minus = witness_pair(ins, dil, cs)
    return Certificate("non_extreme", {"plus": plus, "minus": minus,
                                       "D": commutant_element(dil, cs)})


def dominated_pair_check(ins: Instrument, seed: int = 0, trials: int = 8,
                         tol: TolLike = None) -> bool:
    """Search for ``J1 != J2 <= I`` with ``J1(X, 1) = J2(X, 1)``.

    Pairs are drawn around random derivatives ``D1`` with spectrum in
    ``[1/4, 3/4]``, moved along random directions projected onto the kernel of
    ``D -> V^* D V``.  Returns ``True`` when no such pair is found, which is
    what extremality predicts.
    """
    return dominated_counterexample(ins, seed, trials, tol) is None


def dominated_counterexample(ins: Instrument, seed: int = 0, trials: int = 8,
                             tol: TolLike = None) -> Optional[Tuple[Instrument, Instrument]]:
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        raise NotUnital("dominated-pair test needs a normalized instrument")
    dil = minimal_bidilation(ins, tol)
    mat, index = _unit_compression_matrix(dil)
    if mat.shape[1] == 0:
        return None
    _, null = linalg.rank_nullspace(mat, tol, floor=tol.slack(op_norm(dil.V) ** 2))
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d1 = []
        for b in dil.blocks:
            g = rng.normal(size=(b.r, b.r)) + 1j * rng.normal(size=(b.r, b.r))
            q, _ = np.linalg.qr(g)
            d1.append((q * rng.uniform(0.25, 0.75, size=b.r)) @ q.conj().T)
        if null.shape[1] == 0:
            continue
        x = null @ rng.normal(size=null.shape[1])
        step = [np.zeros((b.r, b.r), dtype=complex) for b in dil.blocks]
        for coeff, (j, h) in zip(x.real, index):
            step[j] += coeff * h
        norm = max(op_norm(c) for c in step)
        d2 = [a + c / (4 * norm) for a, c in zip(d1, step)]
        j1 = _instrument_from_blocks(ins, dil, d1)
        j2 = _instrument_from_blocks(ins, dil, d2)
        one = sum(unit_image(m) for m in j1.maps) - sum(unit_image(m) for m in j2.maps)
        apart = max((a - b).choi_norm() for a, b in zip(j1.maps, j2.maps))
        if op_norm(one) <= tol.slack(1.0) and apart > 10 * tol.eps:
            return j1, j2
    return None


# --------------------------------------------------------------------------
# nest machinery
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockAlgebra:
    """A subalgebra of ``(+)_j M_{r_j}``, stored as block-diagonal ``R x R`` matrices."""
    dims: Tuple[int, ...]
    basis: np.ndarray        # (m, R, R)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def offsets(self) -> List[int]:
        return list(np.cumsum((0,) + self.dims[:-1])) if self.dims else []

    def compression(self, j: int) -> np.ndarray:
        o, r = self.offsets()[j], self.dims[j]
        return self.basis[:, o:o + r, o:o + r]


def _frame(obj) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """``V`` and the ``(d, r)`` block list of a bi-dilation or Stinespring dilation."""
    if isinstance(obj, BiDilation):
        return obj.V, [(b.d, b.r) for b in obj.blocks]
    return obj.V, [(d, r) for _, d, r in obj.blocks]


def invariance_algebra(dil, tol: TolLike = None) -> BlockAlgebra:
    """``M = {S in commutant : S range(V) <= range(V)}`` in ``(+) M_r`` coordinates.

    Accepts a :class:`BiDilation` or a Stinespring dilation.  Solved as the
    null space of ``S -> (I - Q) S V`` with ``Q`` the projector onto range(V).
    """
    tol = as_tol(tol)
    v, dr = _frame(dil)
    dims = tuple(r for _, r in dr)
    total = sum(dims)
    if not dr:
        return BlockAlgebra(dims, np.zeros((0, 0, 0), dtype=complex))
    floor = tol.slack(op_norm(v))
    qv = linalg.orthonormalize(v, dim=v.shape[0], tol=tol, floor=floor)
    cols, offs_v, off = [], [], 0
    for d, r in dr:
        offs_v.append(off)
        off += d * r
    for (d, r), ov in zip(dr, offs_v):
        vb = v[ov:ov + d * r].reshape(d, r, -1)
        for j in range(r):
            for l in range(r):
                sv = np.zeros_like(v)
                rows = np.zeros((d, r, v.shape[1]), dtype=complex)
                rows[:, j, :] = vb[:, l, :]
                sv[ov:ov + d * r] = rows.reshape(d * r, -1)
                cols.append((sv - qv @ (qv.conj().T @ sv)).reshape(-1))
    _, null = linalg.rank_nullspace(np.column_stack(cols), tol, floor=floor)
    basis = []
    for x in null.T:
        m = np.zeros((total, total), dtype=complex)
        pos, o = 0, 0
        for r in dims:
            m[o:o + r, o:o + r] = x[pos:pos + r * r].reshape(r, r)
            pos += r * r
            o += r
        basis.append(m)
    return BlockAlgebra(dims, np.array(basis).reshape(len(basis), total, total))


def _span_basis(mats: np.ndarray, tol: Tolerance) -> np.ndarray:
    """Frobenius-orthonormal basis of the span of ``mats`` (shape ``(m, r, r)``)."""
    if len(mats) == 0:
        return mats
    r = mats.shape[-1]
    q = linalg.orthonormalize(mats.reshape(len(mats), -1).T, dim=r * r, tol=tol, floor=tol.eps)
    return q.T.reshape(-1, r, r)


def radical(basis: np.ndarray, tol: TolLike = None) -> np.ndarray:
    """Jacobson radical as the kernel of the trace form ``(x, y) -> tr(xy)``.

    :raises NotAnAlgebra: if the span is not closed under multiplication or
        the computed radical is not nilpotent.
    """
    tol = as_tol(tol)
    basis = _span_basis(np.asarray(basis, dtype=complex), tol)
    m = len(basis)
    if m == 0:
        return basis
    r = basis.shape[-1]
    flat = basis.reshape(m, -1).T
    prods = np.einsum("aij,bjk->abik", basis, basis).reshape(m * m, -1).T
    resid = prods - flat @ (flat.conj().T @ prods)
    if op_norm(resid) > tol.projection(r * r) * max(1.0, op_norm(prods)):
        raise NotAnAlgebra(f"span not closed under products (residual {op_norm(resid):.3e})")
    gram = np.einsum("aij,bji->ab", basis, basis)
    _, null = linalg.rank_nullspace(gram, tol, floor=tol.projection(r))
    rad = _span_basis(np.einsum("ac,aij->cij", null, basis), tol)
    _power_chain(rad, r, tol)
    return rad


def _power_chain(rad: np.ndarray, r: int, tol: Tolerance) -> List[np.ndarray]:
    """Images ``W_0 = C^r, W_m = span J W_{m-1}`` down to ``0``."""
    chain = [np.eye(r, dtype=complex)]
    while chain[-1].shape[1]:
        if len(chain) > r + 1:
            raise NotAnAlgebra("radical is not nilpotent")
        w = chain[-1]
        vecs = np.hstack([x @ w for x in rad]) if len(rad) else np.zeros((r, 0))
        chain.append(linalg.orthonormalize(vecs, dim=r, tol=tol, floor=tol.eps))
    return chain


@dataclass(frozen=True, eq=False)
class FactorFlag:
    """Flag ``F_1 < ... < F_p`` in one factor, with orthonormal atom bases."""
    subspaces: Tuple[np.ndarray, ...]
    atoms: Tuple[np.ndarray, ...]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(a.shape[1] for a in self.atoms)


@dataclass(frozen=True, eq=False)
class FlagChain:
    factors: Tuple[FactorFlag, ...]


@dataclass(frozen=True, eq=False)
class NestResult:
    accepted: bool
    flags: Optional[FlagChain]
    reason: str = ""


def nest_subalgebra_test(alg: BlockAlgebra, tol: TolLike = None) -> NestResult:
    """Decide whether ``alg`` is a nest subalgebra of ``(+)_j M_{r_j}``.

    The algebra must be the direct sum of its factor compressions; in each
    factor the radical powers ``J^m C^r`` form the candidate flag, which must
    be invariant with ``dim = sum_{j<=l} s_j s_l`` for atom sizes ``s``.
    """
    tol = as_tol(tol)
    comps = [_span_basis(alg.compression(j), tol) for j in range(len(alg.dims))]
    if sum(len(c) for c in comps) != alg.dim:
        return NestResult(False, None, "algebra does not split over the factors")
    flags = []
    for j, (r, comp) in enumerate(zip(alg.dims, comps)):
        chain = _power_chain(radical(comp, tol), r, tol)
        subspaces = tuple(reversed(chain[:-1]))     # F_1 = J^{p-1} C^r, ..., F_p = C^r
        dims = [f.shape[1] for f in subspaces]
        if any(a >= b for a, b in zip(dims, dims[1:])):
            return NestResult(False, None, f"flag not strictly increasing in factor {j + 1}")
        for f in subspaces:
            pf = f @ f.conj().T
            for x in comp:
                if op_norm(x @ pf - pf @ x @ pf) > tol.projection(r) * max(1.0, op_norm(x)):
                    return NestResult(False, None, f"flag not invariant in factor {j + 1}")
        atoms, prev = [], np.zeros((r, 0), dtype=complex)
        for f in subspaces:
            rest = f - prev @ (prev.conj().T @ f)
            atoms.append(linalg.orthonormalize(rest, dim=r, tol=tol, floor=tol.eps))
            prev = f
        sizes = [a.shape[1] for a in atoms]
        need = sum(sizes[a] * sizes[b] for a in range(len(sizes)) for b in range(a, len(sizes)))
        if need != len(comp):
            return NestResult(False, None,
                              f"factor {j + 1}: dimension {len(comp)} but the flag needs {need}")
        flags.append(FactorFlag(subspaces, tuple(atoms)))
    return NestResult(True, FlagChain(tuple(flags)))


# --------------------------------------------------------------------------
# C*-extremity
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PureBlock:
    """``a -> X^* a_s X`` for an isometry ``X: C^m -> C^{d_s}``."""
    factor: int            # 1-based
    isometry: np.ndarray   # d_s x m
    embedding: np.ndarray  # k x m, the output-space range of the block


@dataclass(frozen=True, eq=False)
class UCPDecomposition:
    """``phi(a) = U^* ((+)_b X_b^* a X_b) U`` with nested ranges per factor."""
    blocks: Tuple[PureBlock, ...]
    U: np.ndarray
    nest_orders: Tuple[Tuple[int, Tuple[int, ...]], ...]   # (factor, block indices, largest range first)
    flags: Optional[FlagChain] = None
    reason: str = ""


def _range_order(projs: List[np.ndarray], tol: Tolerance) -> Optional[List[int]]:
    """Order indices by decreasing range, or ``None`` if ranges are not nested."""
    order = sorted(range(len(projs)), key=lambda j: -int(round(np.trace(projs[j]).real)))
    for a, b in zip(order, order[1:]):
        pa, pb = projs[a], projs[b]
        if op_norm(pa @ pb - pb) > tol.projection(pa.shape[0]) * 10:
            return None
    return order


def is_cstar_extreme_ucp(phi: CPMap, tol: TolLike = None) -> Tuple[bool, UCPDecomposition]:
    """C*-extremity of a unital CP map via the invariance algebra of its
    minimal Stinespring dilation.

    If the invariance algebra is a nest subalgebra of the commutant, rank-one
    subprojections of the flag atoms cut the map into pure compressions of
    irreducible representations whose ranges must nest per irrep.

    :raises NotUnital: if ``phi`` is not unital.
    :raises TheoryViolation: if the nest test passes but the extracted
        pieces fail to be isometric, orthogonal or nested.
    """
    tol = as_tol(tol)
    if not is_unital(phi, tol):
        raise NotUnital("C*-extremity is decided among unital maps")
    k = phi.out_dim
    st = stinespring_minimal(phi, tol)
    nest = nest_subalgebra_test(invariance_algebra(st, tol), tol)
    if not nest.accepted:
        return False, UCPDecomposition((), np.zeros((0, k)), (), None, nest.reason)
    v = st.V
    blocks: List[PureBlock] = []
    off = 0
    for (s0, d, r), flag in zip(st.blocks, nest.flags.factors):
        vb = v[off:off + d * r].reshape(d, r, k)
        for atom in flag.atoms:
            for e in atom.T:
                cut = np.einsum("j,pjk->pk", e.conj(), vb)         # (I (x) e^*) V_b
                proj = cut.conj().T @ cut                          # V^* (I (x) ee^*) V
                if op_norm(proj @ proj - proj) > 10 * tol.projection(k):
                    raise TheoryViolation("flag-atom compression of V is not a projection")
                w, u = linalg.herm_eig(proj, tol)
                emb = u[:, w > 0.5]
                x = cut @ emb
                if not linalg.is_isometry(x, Tolerance(10 * tol.eps)):
                    raise TheoryViolation("pure block is not isometric")
                blocks.append(PureBlock(s0 + 1, x, emb))
        off += d * r
    u_mat = np.hstack([b.embedding for b in blocks]).conj().T
    if not linalg.is_unitary(u_mat, Tolerance(10 * tol.eps)):
        raise TheoryViolation("block ranges do not decompose the output space")
    orders = []
    for s in sorted({b.factor for b in blocks}):
        idx = [j for j, b in enumerate(blocks) if b.factor == s]
        projs = [blocks[j].isometry @ blocks[j].isometry.conj().T for j in idx]
        order = _range_order(projs, tol)
        if order is None:
            raise TheoryViolation(f"nest test passed but ranges in factor {s} are not nested")
        orders.append((s, tuple(idx[o] for o in order)))
    return True, UCPDecomposition(tuple(blocks), u_mat, tuple(orders), nest.flags)


def _projection_witness(mu: np.ndarray) -> Tuple[float, np.ndarray]:
    """Eigenpair of ``mu`` farthest from ``{0, 1}``; ties go to the smaller eigenvalue."""
    w, u = np.linalg.eigh((mu + mu.conj().T) / 2)
    dist = np.minimum(np.abs(w), np.abs(1 - w))
    # eigh is ascending; take the first eigenvalue within rounding of the maximum
    j = int(np.flatnonzero(dist >= dist.max() - 1e-12)[0])
    return float(w[j]), linalg.phase_normalize(u[:, j])


def is_cstar_extreme_instrument(ins: Instrument, tol: TolLike = None) -> Tuple[bool, Certificate]:
    """C*-extremity by outcome-block reduction.

    Every effect must be a projection; then ``phi`` commutes with each
    ``mu(i)`` and the instrument is C*-extreme iff every compression of
    ``Phi_i`` to ``range mu(i)`` is a C*-extreme unital map.

    :raises NotUnital: if the instrument is not normalized.
    :raises TheoryViolation: if a spectral marginal fails to commute with
        ``phi`` or the per-outcome decomposition is inconsistent.
    """
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        raise NotUnital("C*-extremity is decided among normalized instruments")
    k = ins.out_dim
    mu = povm_marginal(ins)
    for i, e in zip(ins.outcomes, mu.effects):
        if not linalg.is_projection(e, tol):
            lam, vec = _projection_witness(e)
            return False, _refutation(ins, tol, {"reason": "non_projection", "outcome": i,
                                                 "eigenvalue": lam, "eigenvector": vec})
    phi_imgs = basis_images(cp_marginal(ins))
    scale = ins.scale()
    blocks, rows, orders = [], [], []
    for i, e in zip(ins.outcomes, mu.effects):
        comm = max(op_norm(x @ e - e @ x) for x in phi_imgs) if len(phi_imgs) else 0.0
        if comm > tol.slack(scale) * 10:
            raise TheoryViolation(f"phi does not commute with the projection mu({i})")
        w, u = linalg.herm_eig(e, tol)
        wi = u[:, w > 0.5]
        if wi.shape[1] == 0:
            continue
        psi = compress(ins.map(i), wi, tol)
        ok, dec = is_cstar_extreme_ucp(psi, tol)
        if not ok:
            return False, _refutation(ins, tol, {"reason": "nest_failure", "outcome": i,
                                                 "range_basis": wi, "detail": dec.reason})
        base = len(blocks)
        for b in dec.blocks:
            blocks.append({"outcome": i, "factor": b.factor, "isometry": b.isometry})
        rows.append(dec.U @ wi.conj().T)
        for s, order in dec.nest_orders:
            orders.append({"outcome": i, "factor": s, "order": [base + o for o in order]})
    u_mat = np.vstack(rows) if rows else np.zeros((0, k))
    return True, Certificate("cstar_extreme", {"U": u_mat, "blocks": blocks, "nest_orders": orders})


def _refutation(ins: Instrument, tol: Tolerance, payload: dict) -> Certificate:
    ok, cert = is_extreme(ins, tol)
    if not ok:
        payload = dict(payload, non_extreme={"plus": cert.payload["plus"],
                                             "minus": cert.payload["minus"]})
    return Certificate("not_cstar_extreme", payload)


def is_cstar_extreme_via_bidilation(ins: Instrument, tol: TolLike = None) -> bool:
    """Cross-validation path: nest test on the full bi-dilation commutant."""
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        raise NotUnital("C*-extremity is decided among normalized instruments")
    dil = minimal_bidilation(ins, tol)
    return nest_subalgebra_test(invariance_algebra(dil, tol), tol).accepted


def cp_marginal_cstar_extreme(ins: Instrument, tol: TolLike = None) -> bool:
    return is_cstar_extreme_ucp(cp_marginal(ins), tol)[0]


def povm_is_extreme(povm: POVM, tol: TolLike = None) -> bool:
    return is_extreme(povm_as_instrument_trivial_algebra(povm), tol)[0]


def povm_is_cstar_extreme(povm: POVM, tol: TolLike = None) -> bool:
    return is_cstar_extreme_instrument(povm_as_instrument_trivial_algebra(povm), tol)[0]


def spectral_disjointness(dil_a: BiDilation, dil_b: BiDilation, tol: TolLike = None) -> bool:
    """True iff no nonzero ``T`` intertwines ``pi_A E_A`` with ``pi_B E_B``.

    Intertwining the generators ``E({i})`` and ``pi(E_pq)`` suffices.
    """
    tol = as_tol(tol)
    if dil_a.spec != dil_b.spec or dil_a.n != dil_b.n:
        raise Mismatch("dilations over different algebras or outcome sets")
    na, nb = dil_a.dim, dil_b.dim
    if na == 0 or nb == 0:
        return True
    gens = [(dil_a.E([i]), dil_b.E([i])) for i in range(1, dil_a.n + 1)]
    gens += [(dil_a.pi(a), dil_b.pi(a)) for a in matrix_unit_basis(dil_a.spec)]
    rows = [np.kron(ga.T, np.eye(nb)) - np.kron(np.eye(na), gb) for ga, gb in gens]
    _, null = linalg.rank_nullspace(np.vstack(rows), tol, floor=tol.eps)
    return null.shape[1] == 0
