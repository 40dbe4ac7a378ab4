"""Instruments on a finite outcome set ``{1, ..., n}``.

An :class:`Instrument` holds one CP map per outcome; the value on a subset is
the sum over its elements.  Outcome labels in the public API are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import linalg
from .algebra import AlgebraElement, AlgebraSpec
from .cpmap import (CPMap, apply, basis_images, conjugate, cpmap_from_kraus,
                    is_homomorphism, unit_image, zero_map)
from .errors import (CoefficientsNotNormalized, Mismatch, NotIsometry,
                     NotNormalized, NotPSD, NotUnitary, ShapeMismatch)
from .linalg import TolLike, as_tol, op_norm


@dataclass(frozen=True, eq=False)
class Instrument:
    spec: AlgebraSpec
    out_dim: int
    maps: Tuple[CPMap, ...]

    def __init__(self, spec: AlgebraSpec, out_dim: int, maps: Sequence[CPMap]):
        for m in maps:
            if m.spec != spec or m.out_dim != out_dim:
                raise ShapeMismatch(f"outcome map {m!r} does not match {spec}, k={out_dim}")
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "out_dim", int(out_dim))
        object.__setattr__(self, "maps", tuple(maps))

    @property
    def n(self) -> int:
        return len(self.maps)

    @property
    def outcomes(self) -> range:
        return range(1, self.n + 1)

    def map(self, i: int) -> CPMap:
        """The CP map of outcome ``i`` (1-based)."""
        return self.maps[i - 1]

    def scale(self) -> float:
        """Largest Choi-block norm, at least 1; the reference size for residuals."""
        return max([1.0] + [m.choi_norm() for m in self.maps])

    def __repr__(self):
        return f"Instrument({self.spec!r}, k={self.out_dim}, n={self.n})"


@dataclass(frozen=True, eq=False)
class POVM:
    effects: Tuple[np.ndarray, ...]

    def __init__(self, effects: Sequence):
        arrs = []
        for e in effects:
            e = np.array(e, dtype=complex)
            e.flags.writeable = False
            arrs.append(e)
        if not arrs:
            raise ShapeMismatch("a POVM needs at least one effect")
        k = arrs[0].shape[0]
        if any(e.shape != (k, k) for e in arrs):
            raise ShapeMismatch("effects must be square and of equal size")
        object.__setattr__(self, "effects", tuple(arrs))

    @property
    def out_dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.effects)

    def total(self) -> np.ndarray:
        return sum(self.effects)

    def is_normalized(self, tol: TolLike = None) -> bool:
        return op_norm(self.total() - np.eye(self.out_dim)) <= as_tol(tol).projection(self.out_dim)

    def is_valid(self, tol: TolLike = None) -> bool:
        tol = as_tol(tol)
        try:
            return all(linalg.psd_check(e, tol) for e in self.effects)
        except linalg.NotHermitian:
            return False

    def is_spectral(self, tol: TolLike = None) -> bool:
        return all(linalg.is_projection(e, tol) for e in self.effects)


# --------------------------------------------------------------------------
# validation and evaluation
# --------------------------------------------------------------------------

@dataclass
class ValidationReport:
    cp_violations: List[Tuple[int, int, float]] = field(default_factory=list)
    normalization_defect: float = 0.0
    require_unital: bool = True
    passed: bool = True

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "cp_violations": [{"outcome": i, "factor": s, "min_eigenvalue": lam}
                              for i, s, lam in self.cp_violations],
            "normalization_defect": self.normalization_defect,
            "require_unital": self.require_unital,
        }


def validate(ins: Instrument, tol: TolLike = None, require_unital: bool = True) -> ValidationReport:
    """Check complete positivity per outcome and factor, and normalization.

    The normalization defect is ``||sum_i Phi_i(1) - I||``; with
    ``require_unital`` it must not exceed ``eps * k``.
    """
    tol = as_tol(tol)
    rep = ValidationReport(require_unital=require_unital)
    for i, m in zip(ins.outcomes, ins.maps):
        for s, c in enumerate(m.choi_blocks, start=1):
            if c.size == 0:
                continue
            herm = (c + c.conj().T) / 2
            lam = float(np.linalg.eigvalsh(herm)[0])
            if not linalg.is_hermitian(c, tol) or lam < -tol.slack(op_norm(herm)):
                rep.cp_violations.append((i, s, lam))
    rep.normalization_defect = op_norm(total_effect(ins) - np.eye(ins.out_dim))
    rep.passed = not rep.cp_violations and (
        not require_unital or rep.normalization_defect <= tol.projection(ins.out_dim))
    return rep


def is_valid(ins: Instrument, tol: TolLike = None) -> bool:
    return validate(ins, tol, require_unital=False).passed


def is_unital_instrument(ins: Instrument, tol: TolLike = None) -> bool:
    return op_norm(total_effect(ins) - np.eye(ins.out_dim)) <= as_tol(tol).projection(ins.out_dim)


def total_effect(ins: Instrument) -> np.ndarray:
    out = np.zeros((ins.out_dim, ins.out_dim), dtype=complex)
    for m in ins.maps:
        out += unit_image(m)
    return out


def _labels(ins: Instrument, subset: Iterable[int]) -> List[int]:
    labels = sorted(set(subset))
    for i in labels:
        if not 1 <= i <= ins.n:
            raise IndexError(f"outcome {i} outside 1..{ins.n}")
    return labels


def value(ins: Instrument, subset: Iterable[int], a: AlgebraElement) -> np.ndarray:
    """``I(A)(a) = sum_{i in A} Phi_i(a)``."""
    out = np.zeros((ins.out_dim, ins.out_dim), dtype=complex)
    for i in _labels(ins, subset):
        out += apply(ins.map(i), a)
    return out


def povm_marginal(ins: Instrument) -> POVM:
    """``mu(i) = Phi_i(1)``."""
    if ins.n == 0:
        raise ShapeMismatch("instrument has no outcomes")
    return POVM([unit_image(m) for m in ins.maps])


def cp_marginal(ins: Instrument) -> CPMap:
    """``phi = sum_i Phi_i``."""
    total = zero_map(ins.spec, ins.out_dim)
    for m in ins.maps:
        total = total + m
    return total


def zero_equivalence(ins: Instrument, tol: TolLike = None) -> Tuple[bool, bool, bool]:
    """``(I == 0, mu == 0, phi == 0)``; for a CP instrument the three agree."""
    tol = as_tol(tol)
    ins_zero = all(m.is_zero(tol) for m in ins.maps)
    mu_zero = all(op_norm(unit_image(m)) <= tol.eps for m in ins.maps)
    phi_zero = cp_marginal(ins).is_zero(tol)
    return ins_zero, mu_zero, phi_zero


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------

def zero_instrument(spec: AlgebraSpec, k: int, n: int) -> Instrument:
    return Instrument(spec, k, [zero_map(spec, k) for _ in range(n)])


def from_cpmap(phi: CPMap) -> Instrument:
    """Single-outcome instrument with value ``phi``."""
    return Instrument(phi.spec, phi.out_dim, [phi])


def from_kraus(spec: AlgebraSpec, k: int, kraus: Sequence[Sequence[Sequence[np.ndarray]]]) -> Instrument:
    """Instrument from per-outcome, per-factor Kraus lists."""
    return Instrument(spec, k, [cpmap_from_kraus(spec, k, ks) for ks in kraus])


def povm_as_instrument_trivial_algebra(povm: POVM) -> Instrument:
    """``Phi_i(lambda) = lambda * mu(i)`` over the algebra ``C``."""
    spec = AlgebraSpec([1])
    return Instrument(spec, povm.out_dim, [CPMap(spec, povm.out_dim, [e]) for e in povm.effects])


def instrument_from_povm_naimark(povm: POVM, tol: TolLike = None) -> Instrument:
    """Instrument over ``C(X)`` with ``Phi_i(a) = a_i mu(i)``.

    This is the closed form of ``V^* pi_mu(a) E({i}) V`` for the minimal
    Naimark dilation ``(E, V)`` of ``mu``.

    :raises NotNormalized: if the effects do not sum to the identity.
    """
    if not (povm.is_valid(tol) and povm.is_normalized(tol)):
        raise NotNormalized("Naimark construction needs a normalized POVM")
    n, k = povm.n, povm.out_dim
    spec = AlgebraSpec([1] * n)
    maps = []
    for i, e in enumerate(povm.effects):
        blocks = [e if s == i else np.zeros((k, k)) for s in range(n)]
        maps.append(CPMap(spec, k, blocks))
    return Instrument(spec, k, maps)


def luders(povm: POVM, tol: TolLike = None) -> Instrument:
    """Lueders instrument ``Phi_i(a) = sqrt(mu(i)) a sqrt(mu(i))`` on ``M_k``.

    :raises NotPSD: if an effect is not positive.
    """
    k = povm.out_dim
    spec = AlgebraSpec([k])
    try:
        roots = [linalg.psd_sqrt(e, tol) for e in povm.effects]
    except linalg.NotHermitian as exc:
        raise NotPSD(str(exc)) from None
    return Instrument(spec, k, [cpmap_from_kraus(spec, k, [[r]]) for r in roots])


def _embed_choi(c: np.ndarray, d: int, k: int, big: int, off: int) -> np.ndarray:
    out = np.zeros((d, big, d, big), dtype=complex)
    out[:, off:off + k, :, off:off + k] = c.reshape(d, k, d, k)
    return out.reshape(d * big, d * big)


def direct_sum(ins_list: Sequence[Instrument]) -> Instrument:
    """Outcome-wise block-diagonal sum; the output dimension adds up.

    :raises Mismatch: if the summands differ in algebra or outcome count.
    """
    if not ins_list:
        raise Mismatch("direct sum of nothing")
    spec, n = ins_list[0].spec, ins_list[0].n
    if any(x.spec != spec or x.n != n for x in ins_list):
        raise Mismatch("direct sum needs a common algebra and outcome set")
    big = sum(x.out_dim for x in ins_list)
    maps = []
    for i in range(n):
        blocks = [np.zeros((d * big, d * big), dtype=complex) for d in spec.block_dims]
        off = 0
        for x in ins_list:
            for s, d in enumerate(spec.block_dims):
                blocks[s] += _embed_choi(x.maps[i].choi_blocks[s], d, x.out_dim, big, off)
            off += x.out_dim
        maps.append(CPMap(spec, big, blocks))
    return Instrument(spec, big, maps)


def conjugate_instrument(ins: Instrument, t: np.ndarray) -> Instrument:
    """Outcome-wise ``T^* Phi_i(.) T`` with no condition on ``T``."""
    t = np.asarray(t, dtype=complex)
    return Instrument(ins.spec, t.shape[1], [conjugate(m, t) for m in ins.maps])


def compress_instrument(ins: Instrument, w: np.ndarray, tol: TolLike = None) -> Instrument:
    """Compression ``W^* I(.) W`` by an isometry ``W``.

    :raises NotIsometry: if ``W^*W != I``.
    """
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != ins.out_dim or not linalg.is_isometry(w, tol):
        raise NotIsometry("compression needs an isometry into the output space")
    return conjugate_instrument(ins, w)


def unitary_conjugate(ins: Instrument, u: np.ndarray, tol: TolLike = None) -> Instrument:
    """``U^* I(.) U``.

    :raises NotUnitary: if ``U`` is not unitary.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (ins.out_dim, ins.out_dim) or not linalg.is_unitary(u, tol):
        raise NotUnitary("conjugation needs a unitary on the output space")
    return conjugate_instrument(ins, u)


def cstar_convex_combine(ins_list: Sequence[Instrument], coefficients: Sequence[np.ndarray],
                         tol: TolLike = None) -> Instrument:
    """``sum_j T_j^* I_j(.) T_j`` with ``sum_j T_j^* T_j = I``.

    :raises CoefficientsNotNormalized: if the coefficients are not normalized.
    """
    tol = as_tol(tol)
    if len(ins_list) != len(coefficients) or not ins_list:
        raise Mismatch("need one coefficient per instrument")
    k = ins_list[0].out_dim
    ts = [np.asarray(t, dtype=complex) for t in coefficients]
    if any(t.shape != (k, k) for t in ts):
        raise Mismatch("coefficients must be k x k")
    norm = sum(t.conj().T @ t for t in ts)
    if op_norm(norm - np.eye(k)) > tol.projection(k):
        raise CoefficientsNotNormalized(f"||sum T*T - I|| = {op_norm(norm - np.eye(k)):.3e}")
    parts = [conjugate_instrument(x, t) for x, t in zip(ins_list, ts)]
    maps = []
    for i in range(parts[0].n):
        total = parts[0].maps[i]
        for p in parts[1:]:
            total = total + p.maps[i]
        maps.append(total)
    return Instrument(parts[0].spec, k, maps)


def convex_combine(ins_list: Sequence[Instrument], weights: Sequence[float]) -> Instrument:
    maps = []
    for i in range(ins_list[0].n):
        total = weights[0] * ins_list[0].maps[i]
        for w, x in zip(weights[1:], ins_list[1:]):
            total = total + w * x.maps[i]
        maps.append(total)
    return Instrument(ins_list[0].spec, ins_list[0].out_dim, maps)


def instrument_difference(a: Instrument, b: Instrument) -> float:
    """Largest Choi-block norm of ``a - b`` over outcomes and factors."""
    if a.spec != b.spec or a.out_dim != b.out_dim or a.n != b.n:
        raise Mismatch("instruments are not comparable")
    return max([0.0] + [(x - y).choi_norm() for x, y in zip(a.maps, b.maps)])


# --------------------------------------------------------------------------
# structural predicates
# --------------------------------------------------------------------------

def _images(ins: Instrument) -> np.ndarray:
    """``Phi_i(E_u)`` for all outcomes and basis units, shape ``(n, m, k, k)``."""
    return np.array([basis_images(m) for m in ins.maps])


def decomposability_defect(ins: Instrument) -> Tuple[float, Optional[Tuple[int, int]]]:
    """Largest ``||Phi_i(E_u) - phi(E_u) mu(i)||`` and where it occurs.

    Returns ``(residual, (outcome, basis index))`` with a 1-based outcome.
    """
    if ins.n == 0:
        return 0.0, None
    imgs = _images(ins)
    phi = imgs.sum(axis=0)
    mu = np.array([unit_image(m) for m in ins.maps])
    worst, where = 0.0, None
    for i in range(ins.n):
        for u in range(imgs.shape[1]):
            r = op_norm(imgs[i, u] - phi[u] @ mu[i])
            # ties (up to rounding) keep the first occurrence
            if where is None or r > worst + 1e-12 * max(1.0, worst):
                worst, where = r, (i + 1, u)
    return worst, where


def is_decomposable(ins: Instrument, tol: TolLike = None) -> bool:
    """``Phi_i(a) = phi(a) mu(i)`` for every outcome and basis element."""
    tol = as_tol(tol)
    return decomposability_defect(ins)[0] <= tol.slack(ins.scale() ** 2)


def is_spectral(ins: Instrument, tol: TolLike = None) -> bool:
    """Product-form test: ``mu`` a spectral measure, ``phi`` a homomorphism and
    ``Phi_i(a) = phi(a) mu(i)``.  Requires a unital instrument."""
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        return False
    mu = povm_marginal(ins)
    if not mu.is_spectral(tol):
        return False
    for i in range(mu.n):
        for j in range(i + 1, mu.n):
            if op_norm(mu.effects[i] @ mu.effects[j]) > tol.projection(ins.out_dim):
                return False
    return is_homomorphism(cp_marginal(ins), tol) and is_decomposable(ins, tol)


def is_spectral_direct(ins: Instrument, tol: TolLike = None) -> bool:
    """Definition-level test: every ``I(A)`` is a *-homomorphism.

    Singletons and the full set suffice: multiplicativity of the singletons
    and of the total forces the cross terms between outcomes to vanish, which
    gives multiplicativity on every union.
    """
    tol = as_tol(tol)
    if not is_unital_instrument(ins, tol):
        return False
    return all(is_homomorphism(m, tol) for m in ins.maps) and is_homomorphism(cp_marginal(ins), tol)


def is_concentrated(ins: Instrument, subset: Iterable[int], tol: TolLike = None) -> bool:
    """``Phi_i = 0`` for every outcome outside ``subset``."""
    keep = set(_labels(ins, subset))
    return all(ins.map(i).is_zero(tol) for i in ins.outcomes if i not in keep)


def atoms(ins: Instrument, tol: TolLike = None) -> List[frozenset]:
    """Atoms of an instrument on a finite set: the singletons with nonzero value."""
    return [frozenset([i]) for i in ins.outcomes if not ins.map(i).is_zero(tol)]


def has_commutative_range(ins: Instrument, tol: TolLike = None) -> bool:
    """All values on the matrix-unit basis commute pairwise."""
    tol = as_tol(tol)
    k = ins.out_dim
    vals = _images(ins).reshape(-1, k, k)
    if len(vals) == 0:
        return True
    prod = np.einsum("iab,jbc->ijac", vals, vals)
    comm = prod - prod.transpose(1, 0, 2, 3)
    return float(np.abs(comm).max()) <= tol.slack(ins.scale() ** 2)


def subsets(n: int):
    """All subsets of ``{1..n}`` as tuples, smallest first."""
    for size in range(n + 1):
        yield from combinations(range(1, n + 1), size)
