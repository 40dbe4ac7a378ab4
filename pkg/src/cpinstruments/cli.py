"""Command-line workbench: ``cpinst <command> [args] [flags]``.

An instrument argument is either a path to an instrument file or the name of
a bundled example (``luders-t``, ``diagonal``, ``omega-povm``, ``pure-4-2``).

Exit codes: 0 ok, 1 negative verdict or failed check, 2 parse or shape
error, 3 theory violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from . import __version__, examples
from .certificates import Certificate, check_certificate, decomposable_refutation, dilation_certificate, rn_certificate
from .convexity import (cp_marginal_cstar_extreme, dominated_pair_check, is_cstar_extreme_instrument,
                        is_extreme, is_pure_instrument, povm_is_cstar_extreme, povm_is_extreme,
                        rn_derivative, spectral_disjointness)
from .dilation import dilation_dims, minimal_bidilation, verify_bidilation
from .errors import CheckFailed, InstrumentError, NotDominated, ParseError, TheoryViolation
from .instrument import (atoms, cp_marginal, has_commutative_range, is_decomposable, is_spectral,
                         is_unital_instrument, povm_marginal, validate)
from .linalg import Tolerance
from .serialization import (parse_certificate, parse_instrument, serialize_certificate,
                            serialize_instrument, serialize_report, to_jsonable)

EXIT_OK, EXIT_NEGATIVE, EXIT_PARSE, EXIT_THEORY = 0, 1, 2, 3


class Failure(Exception):
    """Precondition failure reported with exit code 1."""


# --------------------------------------------------------------------------
# inputs and outputs
# --------------------------------------------------------------------------

def load_instrument(arg: str, t: float):
    """Instrument from a file path or a bundled example name, plus a label."""
    if os.path.isfile(arg):
        with open(arg, "rb") as fh:
            return parse_instrument(fh.read()), os.path.basename(arg)
    if arg in examples.EXAMPLES:
        label = f"example:{arg}"
        return examples.example(arg, t), label
    raise ParseError(f"no such file or bundled example: {arg!r}")


def _header(args, command: str, label: str) -> dict:
    rep = {"command": command, "library_version": __version__,
           "tol": args.tol, "seed": args.seed, "input": label}
    if label == "example:luders-t":
        rep["t"] = args.t
    return rep


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _emit(args, report: dict, out) -> None:
    if args.json:
        out.write(serialize_report(report))
        return
    for key, val in report.items():
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif val is None:
            val = "n/a"
        elif isinstance(val, (dict, list)):
            val = json.dumps(to_jsonable(val))
        out.write(f"{key}: {val}\n")


def _save_cert(args, cert: Optional[Certificate], report: dict):
    if cert is None:
        return
    report["certificate"] = cert.kind
    if args.out:
        _write(args.out, serialize_certificate(cert, __version__))
        report["certificate_file"] = args.out


def _need_unital(ins, tol):
    if not is_unital_instrument(ins, tol):
        raise Failure("instrument is not normalized; this decision needs sum_i Phi_i(1) = 1")


# --------------------------------------------------------------------------
# commands; each returns (exit code, report)
# --------------------------------------------------------------------------

def cmd_validate(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "validate", label)
    res = validate(ins, tol)
    rep.update(res.as_dict())
    return (EXIT_OK if res.passed else EXIT_NEGATIVE), rep


def cmd_marginals(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "marginals", label)
    povm = povm_marginal(ins)
    rep["povm"] = list(povm.effects)
    rep["povm_normalized"] = povm.is_normalized(tol)
    rep["povm_spectral"] = povm.is_spectral(tol)
    rep["cp_marginal_choi"] = list(cp_marginal(ins).choi_blocks)
    return EXIT_OK, rep


def cmd_dilate(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "dilate", label)
    dil = minimal_bidilation(ins, tol)
    check = verify_bidilation(ins, dil, tol)
    rep["dims"] = list(dilation_dims(dil, tol))
    rep["blocks"] = dil.block_table()
    rep["verified"] = check.passed
    rep["failures"] = list(check.failures)
    _save_cert(args, dilation_certificate(dil), rep)
    return (EXIT_OK if check.passed else EXIT_NEGATIVE), rep


def cmd_extreme(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "extreme", label)
    _need_unital(ins, tol)
    ok, cert = is_extreme(ins, tol)
    rep["extreme"] = ok
    _save_cert(args, cert, rep)
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def cmd_cstar_extreme(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "cstar-extreme", label)
    _need_unital(ins, tol)
    ok, cert = is_cstar_extreme_instrument(ins, tol)
    rep["cstar_extreme"] = ok
    if not ok:
        rep["reason"] = cert.payload["reason"]
        rep["outcome"] = cert.payload["outcome"]
        if "eigenvalue" in cert.payload:
            rep["eigenvalue"] = cert.payload["eigenvalue"]
    _save_cert(args, cert, rep)
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def cmd_pure(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "pure", label)
    ok = is_pure_instrument(ins, tol)
    rep["pure"] = ok
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def cmd_spectral(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "spectral", label)
    ok = is_spectral(ins, tol)
    rep["spectral"] = ok
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def cmd_decomposable(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "decomposable", label)
    ok = is_decomposable(ins, tol)
    rep["decomposable"] = ok
    if not ok:
        cert = decomposable_refutation(ins, tol)
        if cert is not None:
            rep["outcome"] = cert.payload["outcome"]
            rep["element"] = cert.payload["element"]
        _save_cert(args, cert, rep)
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def cmd_rn(args, tol):
    j, label_j = load_instrument(args.J, args.t)
    i, label_i = load_instrument(args.I, args.t)
    rep = _header(args, "rn", label_i)
    rep["dominated"] = label_j
    try:
        rn = rn_derivative(j, i, tol)
    except NotDominated as exc:
        rep["dominates"] = False
        rep["detail"] = str(exc)
        return EXIT_NEGATIVE, rep
    rep["dominates"] = True
    rep["residual"] = rn.residual
    rep["blocks"] = [c.shape[0] for c in rn.blocks]
    _save_cert(args, rn_certificate(j, rn), rep)
    return EXIT_OK, rep


def cmd_disjoint(args, tol):
    a, label_a = load_instrument(args.A, args.t)
    b, label_b = load_instrument(args.B, args.t)
    rep = _header(args, "disjoint", label_a)
    rep["other"] = label_b
    ok = spectral_disjointness(minimal_bidilation(a, tol), minimal_bidilation(b, tol), tol)
    rep["disjoint"] = ok
    return (EXIT_OK if ok else EXIT_NEGATIVE), rep


def analyze(ins, tol: Tolerance, seed: int = 0):
    """Full battery: a float-free report plus the certificates it produced."""
    rep: dict = {}
    certs: List[Certificate] = []
    rep["algebra"] = list(ins.spec.block_dims)
    rep["output_dim"] = ins.out_dim
    rep["outcomes"] = ins.n
    rep["valid"] = validate(ins, tol, require_unital=False).passed
    unital = is_unital_instrument(ins, tol)
    rep["unital"] = unital

    dil = minimal_bidilation(ins, tol)
    n_dim, cp_dim, povm_dim = dilation_dims(dil, tol)
    rep["dilation"] = {"dim": n_dim, "cp_subminimal_dim": cp_dim, "povm_subminimal_dim": povm_dim,
                       "commutant_dim": dil.commutant_dim(),
                       "verified": verify_bidilation(ins, dil, tol).passed}
    certs.append(dilation_certificate(dil))

    povm = povm_marginal(ins)
    rep["povm_spectral"] = povm.is_spectral(tol)
    rep["atoms"] = [sorted(a) for a in atoms(ins, tol)]
    rep["commutative_range"] = has_commutative_range(ins, tol)
    rep["pure"] = is_pure_instrument(ins, tol)
    rep["spectral"] = is_spectral(ins, tol)
    decomposable = is_decomposable(ins, tol)
    rep["decomposable"] = decomposable
    if not decomposable:
        refutation = decomposable_refutation(ins, tol)
        if refutation is not None:
            certs.append(refutation)

    if unital:
        ext, cert = is_extreme(ins, tol)
        certs.append(cert)
        cext, cert = is_cstar_extreme_instrument(ins, tol)
        certs.append(cert)
        rep["extreme"] = ext
        rep["cstar_extreme"] = cext
        rep["cp_marginal_cstar_extreme"] = cp_marginal_cstar_extreme(ins, tol)
        rep["povm_extreme"] = povm_is_extreme(povm, tol)
        rep["povm_cstar_extreme"] = povm_is_cstar_extreme(povm, tol)
        rep["dominated_pair_check"] = dominated_pair_check(ins, seed=seed, tol=tol)
    else:
        for key in ("extreme", "cstar_extreme", "cp_marginal_cstar_extreme", "povm_extreme",
                    "povm_cstar_extreme", "dominated_pair_check"):
            rep[key] = None
    return rep, certs


def cmd_analyze(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    rep = _header(args, "analyze", label)
    body, certs = analyze(ins, tol, args.seed)
    rep.update(body)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    listing, all_pass = [], True
    for cert in certs:
        entry = {"kind": cert.kind}
        try:
            check_certificate(cert, ins, tol)
            entry["checked"] = True
        except CheckFailed as exc:
            entry["checked"] = False
            entry["clause"] = exc.clause
            all_pass = False
        if args.out:
            name = f"{cert.kind}.json"
            _write(os.path.join(args.out, name), serialize_certificate(cert, __version__))
            entry["file"] = name
        listing.append(entry)
    rep["certificates"] = listing
    return (EXIT_OK if all_pass else EXIT_NEGATIVE), rep


def cmd_check_cert(args, tol):
    ins, label = load_instrument(args.instrument, args.t)
    with open(args.cert, "rb") as fh:
        cert = parse_certificate(fh.read())
    rep = _header(args, "check-cert", label)
    rep["kind"] = cert.kind
    try:
        check_certificate(cert, ins, tol)
    except CheckFailed as exc:
        rep["passed"] = False
        rep["clause"] = exc.clause
        rep["detail"] = exc.detail
        return EXIT_NEGATIVE, rep
    rep["passed"] = True
    return EXIT_OK, rep


def cmd_example(args, tol):
    try:
        ins = examples.example(args.name, args.t)
    except KeyError as exc:
        raise ParseError(str(exc.args[0])) from None
    return EXIT_OK, serialize_instrument(ins)


COMMANDS = {
    "validate": cmd_validate, "marginals": cmd_marginals, "dilate": cmd_dilate,
    "extreme": cmd_extreme, "cstar-extreme": cmd_cstar_extreme, "pure": cmd_pure,
    "spectral": cmd_spectral, "decomposable": cmd_decomposable, "rn": cmd_rn,
    "disjoint": cmd_disjoint, "analyze": cmd_analyze, "check-cert": cmd_check_cert,
    "example": cmd_example,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="relative tolerance (default 1e-8)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks (default 0)")
    common.add_argument("--json", action="store_true", help="machine-readable report")
    common.add_argument("--out", help="certificate file, output directory for analyze, "
                                      "or instrument file for example")
    common.add_argument("--t", type=float, default=0.25, help="parameter of the luders-t example")

    # flags live on the subcommands so their defaults cannot shadow each other
    parser = argparse.ArgumentParser(prog="cpinst", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    single = {
        "validate": "check complete positivity and normalization",
        "marginals": "POVM and CP marginals",
        "dilate": "minimal bi-dilation and its sub-minimal compressions",
        "extreme": "extreme point of the normalized instruments",
        "cstar-extreme": "C*-extreme point",
        "pure": "trivial bi-dilation commutant",
        "spectral": "values are *-homomorphisms",
        "decomposable": "product of the marginals",
        "analyze": "every property at once, with certificates",
    }
    for name, text in single.items():
        sub.add_parser(name, parents=[common], help=text).add_argument("instrument")
    p = sub.add_parser("rn", parents=[common], help="Radon-Nikodym derivative of J with respect to I")
    p.add_argument("J")
    p.add_argument("I")
    p = sub.add_parser("disjoint", parents=[common], help="spectral disjointness of two instruments")
    p.add_argument("A")
    p.add_argument("B")
    p = sub.add_parser("check-cert", parents=[common], help="re-verify a certificate file")
    p.add_argument("cert")
    p.add_argument("instrument")
    p = sub.add_parser("example", parents=[common], help="write a bundled example instrument")
    p.add_argument("name", choices=sorted(examples.EXAMPLES))
    return parser


def run_command(argv: Optional[List[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    try:
        tol = Tolerance(args.tol)
        code, rep = COMMANDS[args.command](args, tol)
    except TheoryViolation as exc:
        err.write(f"theory violation: {exc}\n")
        return EXIT_THEORY
    except (ParseError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (Failure, InstrumentError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NEGATIVE
    except ValueError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_PARSE
    if isinstance(rep, str):
        if args.out:
            _write(args.out, rep)
        else:
            out.write(rep)
    else:
        _emit(args, rep, out)
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
