"""Kind-tagged witnesses and an independent checker.

A :class:`Certificate` carries everything needed to re-verify a verdict
against the instrument it was produced for.  :func:`check_certificate` uses
instrument arithmetic and :mod:`linalg` primitives; it never reuses the
producer's intermediate state.  The one exception is a ``not_cstar_extreme``
certificate whose reason is a failed nest test: there is no compact witness
for that, so the checker recomputes the test from the compressed outcome map.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from . import linalg
from .algebra import AlgebraElement, matrix_unit_basis, matrix_unit_labels
from .cpmap import apply, basis_images, compress, cpmap_from_kraus, unit_image
from .dilation import BiDilation, Block, verify_bidilation
from .errors import CheckFailed, InstrumentError, Mismatch
from .instrument import (Instrument, decomposability_defect, instrument_difference,
                         validate)
from .linalg import Tolerance, TolLike, as_tol, op_norm

KINDS = ("dilation", "extreme", "non_extreme", "cstar_extreme", "not_cstar_extreme",
         "rn", "decomposable_refutation")


@dataclass(frozen=True, eq=False)
class Certificate:
    kind: str
    payload: Dict[str, Any]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")


@dataclass
class CheckReport:
    kind: str
    passed: bool = True
    checks: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "checks": list(self.checks)}


# --------------------------------------------------------------------------
# producers that do not need the convexity machinery
# --------------------------------------------------------------------------

def dilation_certificate(dil: BiDilation) -> Certificate:
    return Certificate("dilation", {"blocks": dil.block_table(), "V": dil.V})


def rn_certificate(j: Instrument, rn) -> Certificate:
    """Certificate for an :class:`~cpinstruments.convexity.RNDerivative` of ``j``."""
    dil = rn.dilation
    return Certificate("rn", {"J": j, "blocks": dil.block_table(), "V": dil.V,
                              "D": rn.D, "coefficients": rn.coefficients})


def decomposable_refutation(ins: Instrument, tol: TolLike = None):
    """``decomposable_refutation`` certificate, or ``None`` if the instrument
    is decomposable within tolerance."""
    tol = as_tol(tol)
    worst, where = decomposability_defect(ins)
    if where is None or worst <= 10 * tol.slack(ins.scale() ** 2):
        return None
    i, u = where
    s, p, q = matrix_unit_labels(ins.spec)[u]
    return Certificate("decomposable_refutation",
                       {"outcome": i, "element": [s + 1, p + 1, q + 1], "residual": worst})


# --------------------------------------------------------------------------
# checker
# --------------------------------------------------------------------------

def _fail(clause: str, detail: str = ""):
    raise CheckFailed(clause, detail)


def _dilation_from(ins: Instrument, blocks, v) -> BiDilation:
    blocks = tuple(Block(*map(int, b)) for b in blocks)
    return BiDilation(ins.spec, ins.n, blocks, np.asarray(v, dtype=complex))


def check_certificate(cert: Certificate, ins: Instrument, tol: TolLike = None) -> CheckReport:
    """Re-verify ``cert`` against ``ins``.

    :raises CheckFailed: naming the first violated clause.
    """
    tol = as_tol(tol)
    rep = CheckReport(cert.kind)
    checker = _CHECKERS.get(cert.kind)
    if checker is None:
        _fail("UnknownKind", cert.kind)
    try:
        checker(cert.payload, ins, tol, rep)
    except CheckFailed:
        raise
    except (InstrumentError, KeyError, IndexError, TypeError, ValueError) as exc:
        _fail("Malformed", f"{type(exc).__name__}: {exc}")
    return rep


def _check_dilation(p, ins, tol, rep):
    dil = _dilation_from(ins, p["blocks"], p["V"])
    if dil.V.shape != (dil.dim, ins.out_dim):
        _fail("Shape", f"V has shape {dil.V.shape}, blocks need {(dil.dim, ins.out_dim)}")
    r = verify_bidilation(ins, dil, tol)
    for clause in ("reconstruction", "commutation", "minimality", "isometry"):
        if clause in r.failures:
            _fail(clause.capitalize(), str(r.as_dict()))
        rep.checks.append(clause)


def _check_extreme(p, ins, tol, rep):
    k = ins.out_dim
    kraus = {(int(e["outcome"]), int(e["factor"])): [np.asarray(x, dtype=complex) for x in e["operators"]]
             for e in p["kraus"]}
    maps = []
    for i in ins.outcomes:
        per = [kraus.get((i, s), []) for s in range(1, ins.spec.n_factors + 1)]
        maps.append(cpmap_from_kraus(ins.spec, k, per))
    rebuilt = Instrument(ins.spec, k, maps)
    if instrument_difference(rebuilt, ins) > tol.slack(ins.scale()):
        _fail("KrausMismatch", "Kraus data do not reproduce the instrument")
    rep.checks.append("kraus")
    cols, dim = [], 0
    for ops in kraus.values():
        r = len(ops)
        dim += r * r
        for h in linalg.hermitian_basis(r):
            img = sum(h[j, l] * ops[j].conj().T @ ops[l] for j in range(r) for l in range(r))
            cols.append(linalg.hermitian_to_real(img))
    big = max([1.0] + [op_norm(x) ** 2 for ops in kraus.values() for x in ops])
    rank = linalg.matrix_rank(np.column_stack(cols), tol, floor=tol.slack(big)) if cols else 0
    if rank != dim:
        _fail("NotInjective", f"rank {rank} < commutant dimension {dim}")
    rep.checks.append("injective")


def _check_pair(plus: Instrument, minus: Instrument, ins, tol, rep):
    if not validate(plus, tol).passed:
        _fail("PlusInvalid", "I+ is not a normalized CP instrument")
    if not validate(minus, tol).passed:
        _fail("MinusInvalid", "I- is not a normalized CP instrument")
    rep.checks.append("pair valid")
    avg = Instrument(ins.spec, ins.out_dim, [0.5 * (a + b) for a, b in zip(plus.maps, minus.maps)])
    try:
        gap = instrument_difference(avg, ins)
    except Mismatch:
        _fail("AverageMismatch", "pair does not match the instrument's shape")
    if gap > tol.slack(ins.scale()):
        _fail("AverageMismatch", f"||(I+ + I-)/2 - I|| = {gap:.3e}")
    rep.checks.append("average")
    if instrument_difference(plus, minus) <= 10 * tol.eps:
        _fail("PairNotDistinct", "I+ and I- coincide")
    rep.checks.append("distinct")


def _check_non_extreme(p, ins, tol, rep):
    _check_pair(p["plus"], p["minus"], ins, tol, rep)


def _check_cstar_extreme(p, ins, tol, rep):
    k = ins.out_dim
    u = np.asarray(p["U"], dtype=complex)
    if u.shape != (k, k) or not linalg.is_unitary(u, Tolerance(10 * tol.eps)):
        _fail("NotUnitary", "U is not a k x k unitary")
    rep.checks.append("unitary")
    blocks = p["blocks"]
    xs = [np.asarray(b["isometry"], dtype=complex) for b in blocks]
    for b, x in zip(blocks, xs):
        d = ins.spec.block_dims[int(b["factor"]) - 1]
        if x.shape[0] != d or not linalg.is_isometry(x, Tolerance(10 * tol.eps)):
            _fail("NotIsometry", f"block for outcome {b['outcome']} is not an isometry into C^{d}")
    rep.checks.append("isometries")
    groups = {}
    for j, b in enumerate(blocks):
        groups.setdefault((int(b["outcome"]), int(b["factor"])), []).append(j)
    ordered = {}
    for entry in p["nest_orders"]:
        ordered[(int(entry["outcome"]), int(entry["factor"]))] = [int(j) for j in entry["order"]]
    for key, members in groups.items():
        order = ordered.get(key)
        if order is None or sorted(order) != sorted(members):
            _fail("NotNested", f"no complete nest order for outcome/factor {key}")
        for a, b in zip(order, order[1:]):
            pa = xs[a] @ xs[a].conj().T
            pb = xs[b] @ xs[b].conj().T
            if op_norm(pa @ pb - pb) > 10 * tol.projection(pa.shape[0]):
                _fail("NotNested", f"range of block {b} is not inside range of block {a}")
    rep.checks.append("nested")
    sizes = [x.shape[1] for x in xs]
    if sum(sizes) != k:
        _fail("ReconstructionMismatch", f"blocks have total size {sum(sizes)}, expected {k}")
    offs = np.cumsum([0] + sizes)
    scale = ins.scale()
    for a in matrix_unit_basis(ins.spec):
        for i in ins.outcomes:
            mid = np.zeros((k, k), dtype=complex)
            for j, (b, x) in enumerate(zip(blocks, xs)):
                if int(b["outcome"]) == i:
                    blk = x.conj().T @ a.blocks[int(b["factor"]) - 1] @ x
                    mid[offs[j]:offs[j + 1], offs[j]:offs[j + 1]] = blk
            if op_norm(u.conj().T @ mid @ u - apply(ins.map(i), a)) > 10 * tol.slack(scale):
                _fail("ReconstructionMismatch", f"outcome {i} not reproduced")
    rep.checks.append("reconstruction")


def _check_not_cstar_extreme(p, ins, tol, rep):
    i = int(p["outcome"])
    if not 1 <= i <= ins.n:
        _fail("BadOutcome", f"outcome {i} outside 1..{ins.n}")
    mu = unit_image(ins.map(i))
    if p["reason"] == "non_projection":
        lam = float(p["eigenvalue"])
        v = np.asarray(p["eigenvector"], dtype=complex)
        if not 10 * tol.eps < lam < 1 - 10 * tol.eps:
            _fail("EigenvalueOutOfRange", f"eigenvalue {lam!r} is not strictly inside (0, 1)")
        rep.checks.append("eigenvalue range")
        if abs(np.linalg.norm(v) - 1) > tol.projection(len(v)) or \
                op_norm(mu @ v - lam * v) > tol.slack(op_norm(mu)) * 10:
            _fail("EigenResidual", "eigenpair residual too large")
        rep.checks.append("eigenpair")
    elif p["reason"] == "nest_failure":
        from .convexity import is_cstar_extreme_ucp
        w = np.asarray(p["range_basis"], dtype=complex)
        if not linalg.is_isometry(w, Tolerance(10 * tol.eps)):
            _fail("NotIsometry", "range basis is not orthonormal")
        if op_norm(w @ w.conj().T - mu) > 10 * tol.projection(ins.out_dim):
            _fail("RangeMismatch", f"basis does not span the projection mu({i})")
        rep.checks.append("range")
        if is_cstar_extreme_ucp(compress(ins.map(i), w, tol), tol)[0]:
            _fail("NestTestPassed", f"compressed outcome map {i} is C*-extreme")
        rep.checks.append("nest test")
    else:
        _fail("Malformed", f"unknown reason {p['reason']!r}")
    if "non_extreme" in p:
        _check_pair(p["non_extreme"]["plus"], p["non_extreme"]["minus"], ins, tol, rep)


def _check_rn(p, ins, tol, rep):
    dil = _dilation_from(ins, p["blocks"], p["V"])
    r = verify_bidilation(ins, dil, tol)
    if not r.passed:
        _fail("DilationInvalid", ", ".join(r.failures))
    rep.checks.append("dilation")
    d = np.asarray(p["D"], dtype=complex)
    if d.shape != (dil.dim, dil.dim):
        _fail("NotInCommutant", f"D has shape {d.shape}")
    gens = [dil.E([i]) for i in ins.outcomes] + [dil.pi(a) for a in matrix_unit_basis(ins.spec)]
    if max([0.0] + [op_norm(d @ g - g @ d) for g in gens]) > tol.slack(op_norm(d)):
        _fail("NotInCommutant", "D does not commute with pi(A) and E")
    rep.checks.append("commutant")
    if not linalg.is_hermitian(d, tol):
        _fail("NotHermitian", "D is not Hermitian")
    w = np.linalg.eigvalsh((d + d.conj().T) / 2) if d.size else np.zeros(1)
    if w[0] < -tol.slack(1.0) or w[-1] > 1 + tol.slack(1.0):
        _fail("NotContraction", f"spectrum of D is [{w[0]:.3e}, {w[-1]:.3e}]")
    rep.checks.append("positive contraction")
    j = p["J"]
    v = dil.V
    scale = max(ins.scale(), j.scale())
    for i in ins.outcomes:
        imgs = basis_images(j.map(i))
        for u, a in enumerate(matrix_unit_basis(ins.spec)):
            if op_norm(v.conj().T @ d @ dil.pi(a) @ dil.E([i]) @ v - imgs[u]) > 10 * tol.slack(scale):
                _fail("RNResidual", f"J(outcome {i}) not reproduced")
    rep.checks.append("reconstruction")


def _check_decomposable_refutation(p, ins, tol, rep):
    i = int(p["outcome"])
    s, a_p, a_q = (int(x) for x in p["element"])
    blocks = [np.zeros((d, d)) for d in ins.spec.block_dims]
    blocks[s - 1][a_p - 1, a_q - 1] = 1.0
    a = AlgebraElement(ins.spec, blocks)
    phi_a = sum(apply(m, a) for m in ins.maps)
    resid = op_norm(apply(ins.map(i), a) - phi_a @ unit_image(ins.map(i)))
    if resid <= 10 * tol.eps:
        _fail("NoViolation", f"product identity holds at outcome {i} (residual {resid:.3e})")
    rep.checks.append("violation")


_CHECKERS = {
    "dilation": _check_dilation,
    "extreme": _check_extreme,
    "non_extreme": _check_non_extreme,
    "cstar_extreme": _check_cstar_extreme,
    "not_cstar_extreme": _check_not_cstar_extreme,
    "rn": _check_rn,
    "decomposable_refutation": _check_decomposable_refutation,
}
