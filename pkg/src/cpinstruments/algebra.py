"""Finite-dimensional C*-algebras in multiplicity-free block-diagonal form.

An algebra is ``M_{d_1} (+) ... (+) M_{d_S}``.  The full matrix algebra is
``blocks=[d]``; the commutative algebra ``C(X)`` on ``n`` points is
``blocks=[1]*n``.  Factor indices in the public API are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ShapeMismatch, SpecMismatch


@dataclass(frozen=True)
class AlgebraSpec:
    block_dims: Tuple[int, ...]

    def __init__(self, block_dims: Sequence[int]):
        dims = tuple(int(d) for d in block_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {list(block_dims)}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def n_factors(self) -> int:
        return len(self.block_dims)

    @property
    def total_dim(self) -> int:
        """Size ``D`` of the block-diagonal embedding into ``M_D``."""
        return sum(self.block_dims)

    @property
    def dimension(self) -> int:
        """Vector-space dimension ``sum d_s^2``."""
        return sum(d * d for d in self.block_dims)

    def offsets(self) -> List[int]:
        return list(np.cumsum((0,) + self.block_dims[:-1]))

    def __repr__(self):
        return f"AlgebraSpec({list(self.block_dims)})"


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    spec: AlgebraSpec
    blocks: Tuple[np.ndarray, ...]

    def __init__(self, spec: AlgebraSpec, blocks: Sequence):
        if len(blocks) != spec.n_factors:
            raise ShapeMismatch(f"{spec} needs {spec.n_factors} blocks, got {len(blocks)}")
        arrs = []
        for d, b in zip(spec.block_dims, blocks):
            b = np.array(b, dtype=complex).reshape(np.shape(b) or (1, 1))
            if b.shape != (d, d):
                raise ShapeMismatch(f"block of shape {b.shape} in a factor of size {d}")
            b.flags.writeable = False
            arrs.append(b)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "blocks", tuple(arrs))

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.spec, [b.conj().T for b in self.blocks])

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        _same_spec(self.spec, other.spec)
        return AlgebraElement(self.spec, [x @ y for x, y in zip(self.blocks, other.blocks)])

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        _same_spec(self.spec, other.spec)
        return AlgebraElement(self.spec, [x + y for x, y in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        _same_spec(self.spec, other.spec)
        return AlgebraElement(self.spec, [x - y for x, y in zip(self.blocks, other.blocks)])

    def __mul__(self, c) -> "AlgebraElement":
        return AlgebraElement(self.spec, [c * x for x in self.blocks])

    __rmul__ = __mul__

    def norm(self) -> float:
        return max(float(np.linalg.norm(b, 2)) for b in self.blocks)

    def __repr__(self):
        return f"AlgebraElement({self.spec!r}, {[b.tolist() for b in self.blocks]})"


def _same_spec(a: AlgebraSpec, b: AlgebraSpec):
    if a != b:
        raise SpecMismatch(f"{a} vs {b}")


def zero(spec: AlgebraSpec) -> AlgebraElement:
    return AlgebraElement(spec, [np.zeros((d, d)) for d in spec.block_dims])


def identity(spec: AlgebraSpec) -> AlgebraElement:
    return AlgebraElement(spec, [np.eye(d) for d in spec.block_dims])


def matrix_unit(spec: AlgebraSpec, s: int, p: int, q: int) -> AlgebraElement:
    """``E_pq`` in factor ``s`` (all indices 0-based here)."""
    blocks = [np.zeros((d, d)) for d in spec.block_dims]
    blocks[s][p, q] = 1.0
    return AlgebraElement(spec, blocks)


def matrix_unit_labels(spec: AlgebraSpec) -> List[Tuple[int, int, int]]:
    """``(s, p, q)`` (0-based) in the order used by :func:`matrix_unit_basis`."""
    return [(s, p, q) for s, d in enumerate(spec.block_dims)
            for p in range(d) for q in range(d)]


def matrix_unit_basis(spec: AlgebraSpec) -> List[AlgebraElement]:
    """The ``sum d_s^2`` matrix units ``E_pq^(s)``, ordered by factor then row-major."""
    return [matrix_unit(spec, s, p, q) for s, p, q in matrix_unit_labels(spec)]


def embed_full(a: AlgebraElement) -> np.ndarray:
    """Block-diagonal ``D x D`` matrix of ``a``."""
    n = a.spec.total_dim
    out = np.zeros((n, n), dtype=complex)
    for off, b in zip(a.spec.offsets(), a.blocks):
        d = b.shape[0]
        out[off:off + d, off:off + d] = b
    return out


def from_full(spec: AlgebraSpec, m: np.ndarray) -> AlgebraElement:
    """Read the diagonal blocks of a ``D x D`` matrix (off-diagonal part is dropped)."""
    m = np.asarray(m)
    if m.shape != (spec.total_dim, spec.total_dim):
        raise ShapeMismatch(f"expected {spec.total_dim}x{spec.total_dim}, got {m.shape}")
    return AlgebraElement(spec, [m[o:o + d, o:o + d] for o, d in zip(spec.offsets(), spec.block_dims)])


def irrep_apply(spec: AlgebraSpec, s: int, a: AlgebraElement) -> np.ndarray:
    """Image of ``a`` under the ``s``-th irreducible representation (1-based ``s``).

    For a block algebra the irreps are, up to equivalence, exactly the block
    evaluations.
    """
    _same_spec(spec, a.spec)
    if not 1 <= s <= spec.n_factors:
        raise IndexError(f"factor index {s} outside 1..{spec.n_factors}")
    return np.array(a.blocks[s - 1])


def random_hermitian(spec: AlgebraSpec, seed) -> AlgebraElement:
    """Hermitian element of norm exactly 1, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    blocks = []
    for d in spec.block_dims:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks.append((g + g.conj().T) / 2)
    a = AlgebraElement(spec, blocks)
    n = a.norm()
    return a * (1.0 / n) if n > 0 else a
