"""Seeded random instruments for property tests and the acceptance corpus.

Every generator takes a :class:`numpy.random.Generator` so a corpus is a
pure function of its seed.  Families cover generic instruments (normalized
and not), spectral ones, C*-extreme direct sums of nested pure compressions,
non-nested variants, Lueders and Naimark instruments of random POVMs, and
convex mixtures.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import examples
from .algebra import AlgebraSpec
from .cpmap import cpmap_from_kraus
from .instrument import (POVM, Instrument, conjugate_instrument, convex_combine,
                         instrument_from_povm_naimark, luders, unitary_conjugate)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_spec(rng: np.random.Generator, max_factors: int = 2, max_d: int = 3) -> AlgebraSpec:
    s = int(rng.integers(1, max_factors + 1))
    return AlgebraSpec(rng.integers(1, max_d + 1, size=s).tolist())


def _gaussian(rng, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_kraus_instrument(rng: np.random.Generator, spec: AlgebraSpec, k: int, n: int,
                            max_rank: int = 2, unital: bool = True,
                            zero_prob: float = 0.2) -> Instrument:
    """Gaussian Kraus operators, optionally normalized by ``M^{-1/2}`` with
    ``M = sum_i Phi_i(1)``.  Some outcome/factor pairs are left empty."""
    kraus = []
    for _ in range(n):
        per = []
        for d in spec.block_dims:
            r = 0 if rng.random() < zero_prob else int(rng.integers(1, max_rank + 1))
            per.append([_gaussian(rng, (d, k)) for _ in range(r)])
        kraus.append(per)
    def total(ks):
        return sum((K.conj().T @ K for per in ks for ops in per for K in ops),
                   np.zeros((k, k), dtype=complex))

    # unital instances need an invertible total effect: add operators until it is
    while not any(ops for per in kraus for ops in per) or \
            (unital and np.linalg.matrix_rank(total(kraus)) < k):
        i, s = int(rng.integers(n)), int(rng.integers(spec.n_factors))
        kraus[i][s].append(_gaussian(rng, (spec.block_dims[s], k)))
    ins = Instrument(spec, k, [cpmap_from_kraus(spec, k, per) for per in kraus])
    w, u = np.linalg.eigh(total(kraus))
    if unital:
        return conjugate_instrument(ins, (u / np.sqrt(w)) @ u.conj().T)
    return conjugate_instrument(ins, np.eye(k) / np.sqrt(max(1.0, w[-1])))


def _selector_kraus(d: int, k: int, cols: Sequence[int]) -> np.ndarray:
    """``d x k`` operator copying ``C^d`` into the listed output coordinates."""
    op = np.zeros((d, k), dtype=complex)
    for p, c in enumerate(cols):
        op[p, c] = 1.0
    return op


def spectral_instrument(rng: np.random.Generator, spec: AlgebraSpec, n: int,
                        max_mult: int = 1) -> Instrument:
    """Outcome-wise unital *-homomorphisms on orthogonal subspaces, then a
    random unitary conjugation.  Some outcomes may be zero."""
    layout = []
    for i in range(n):
        mult = [int(rng.integers(0, max_mult + 1)) for _ in spec.block_dims]
        if i == 0 and not any(mult):
            mult[0] = 1
        layout.append(mult)
    k = sum(d * m for mult in layout for d, m in zip(spec.block_dims, mult))
    kraus, col = [], 0
    for mult in layout:
        per = []
        for d, m in zip(spec.block_dims, mult):
            ops = []
            for _ in range(m):
                ops.append(_selector_kraus(d, k, range(col, col + d)))
                col += d
            per.append(ops)
        kraus.append(per)
    ins = Instrument(spec, k, [cpmap_from_kraus(spec, k, per) for per in kraus])
    return unitary_conjugate(ins, random_unitary(rng, k))


def compression_instrument(rng: np.random.Generator, spec: AlgebraSpec, n: int,
                           nested: bool = True, max_blocks: int = 2) -> Instrument:
    """Direct sum over outcomes of pure compressions ``X^* a_s X``.

    With ``nested`` the ranges of the isometries for one outcome and factor
    form a chain (C*-extreme); otherwise they are chosen to overlap without
    nesting where the factor is large enough.
    """
    pieces = []   # (outcome, factor, X)
    for i in range(n):
        for s, d in enumerate(spec.block_dims):
            if rng.random() < 0.4 and not (i == 0 and s == 0):
                continue
            y = random_unitary(rng, d)
            count = int(rng.integers(1, max_blocks + 1))
            if nested:
                sizes = sorted(rng.integers(1, d + 1, size=count).tolist(), reverse=True)
                xs = [y[:, :m] for m in sizes]
            elif d >= 2:
                xs = [y[:, [0]], y[:, [1]]]
            else:
                xs = [y[:, :1]]
            pieces.extend((i, s, x) for x in xs)
    k = sum(x.shape[1] for _, _, x in pieces)
    kraus = [[[] for _ in spec.block_dims] for _ in range(n)]
    col = 0
    for i, s, x in pieces:
        op = np.zeros((spec.block_dims[s], k), dtype=complex)
        op[:, col:col + x.shape[1]] = x
        col += x.shape[1]
        kraus[i][s].append(op)
    ins = Instrument(spec, k, [cpmap_from_kraus(spec, k, per) for per in kraus])
    return unitary_conjugate(ins, random_unitary(rng, k))


def random_povm(rng: np.random.Generator, k: int, n: int) -> POVM:
    effects, used = [], 0
    for i in range(n):
        # the last effect takes up whatever rank is still missing
        low = max(1, k - used) if i == n - 1 else 1
        rank = int(rng.integers(low, k + 1))
        used += rank
        g = _gaussian(rng, (k, rank))
        effects.append(g @ g.conj().T)
    w, u = np.linalg.eigh(sum(effects))
    t = (u / np.sqrt(w)) @ u.conj().T
    out = [t @ e @ t for e in effects]
    return POVM([(x + x.conj().T) / 2 for x in out])


def random_projective_povm(rng: np.random.Generator, k: int, n: int) -> POVM:
    u = random_unitary(rng, k)
    labels = rng.integers(0, n, size=k)
    return POVM([u[:, labels == i] @ u[:, labels == i].conj().T for i in range(n)])


@dataclass
class CorpusEntry:
    name: str
    family: str
    instrument: Instrument
    note: str = ""

    @property
    def dilation_size(self) -> int:
        """Upper bound ``sum d_s * (Kraus rank)`` of the bi-dilation dimension."""
        ins = self.instrument
        return sum(d * min(d * ins.out_dim, int(np.linalg.matrix_rank(c, tol=1e-9)))
                   for m in ins.maps for d, c in zip(ins.spec.block_dims, m.choi_blocks))


def corpus(seed: int = 0, size: int = 216, max_dilation: int = 24) -> List[CorpusEntry]:
    """Seeded corpus with ``d_s <= 3``, ``S <= 2``, ``k <= 4``, ``n <= 4``.

    Families cycle so every one is represented; instances whose bi-dilation
    would exceed ``max_dilation`` are redrawn.
    """
    rng = np.random.default_rng(seed)
    out = [
        CorpusEntry("luders-t=0.25", "worked", examples.luders_t(0.25)),
        CorpusEntry("luders-t=0.5", "worked", examples.luders_t(0.5),
                    note="not extreme: mu(1) = mu(2) = I/2 gives a midpoint decomposition"),
        CorpusEntry("diagonal", "worked", examples.diagonal()),
        CorpusEntry("omega-povm", "worked", examples.omega_instrument()),
        CorpusEntry("pure-4-2", "worked", examples.pure_4_2()),
    ]
    families = ["unital", "unital", "nonunital", "spectral", "nested", "nonnested",
                "luders", "luders-projective", "naimark", "mixture"]
    j = 0
    while len(out) < size:
        fam = families[j % len(families)]
        j += 1
        ins = _draw(rng, fam)
        if ins is None or ins.out_dim > 4 or ins.n > 4:
            continue
        entry = CorpusEntry(f"{fam}-{j}", fam, ins)
        if entry.dilation_size <= max_dilation:
            out.append(entry)
    return out


def _draw(rng: np.random.Generator, fam: str) -> Optional[Instrument]:
    n = int(rng.integers(1, 5))
    if fam in ("unital", "nonunital"):
        spec = random_spec(rng)
        k = int(rng.integers(1, 5))
        return random_kraus_instrument(rng, spec, k, n, unital=(fam == "unital"))
    if fam == "spectral":
        return spectral_instrument(rng, random_spec(rng, max_d=2), n)
    if fam in ("nested", "nonnested"):
        return compression_instrument(rng, random_spec(rng), n, nested=(fam == "nested"))
    if fam == "luders":
        k = int(rng.integers(1, 4))
        return luders(random_povm(rng, k, n))
    if fam == "luders-projective":
        k = int(rng.integers(1, 5))
        return luders(random_projective_povm(rng, k, n))
    if fam == "naimark":
        k = int(rng.integers(1, 4))
        return instrument_from_povm_naimark(random_povm(rng, k, n))
    if fam == "mixture":
        spec = random_spec(rng, max_d=2)
        k = int(rng.integers(1, 4))
        a = random_kraus_instrument(rng, spec, k, n, max_rank=1)
        b = random_kraus_instrument(rng, spec, k, n, max_rank=1)
        t = float(rng.uniform(0.2, 0.8))
        return convex_combine([a, b], [t, 1 - t])
    raise ValueError(fam)
