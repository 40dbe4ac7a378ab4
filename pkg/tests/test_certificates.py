"""Producer/checker closure and one tampered fixture per certificate kind."""
import numpy as np
import pytest

from cpinstruments import examples
from cpinstruments.certificates import (KINDS, Certificate, check_certificate,
                                        decomposable_refutation, dilation_certificate,
                                        rn_certificate)
from cpinstruments.convexity import (is_cstar_extreme_instrument, is_extreme, rn_apply,
                                     rn_derivative)
from cpinstruments.dilation import minimal_bidilation
from cpinstruments.errors import CheckFailed
from cpinstruments.serialization import parse_certificate, serialize_certificate


def certificates_for(ins):
    dil = minimal_bidilation(ins)
    out = [dilation_certificate(dil), is_extreme(ins)[1], is_cstar_extreme_instrument(ins)[1]]
    refutation = decomposable_refutation(ins)
    if refutation is not None:
        out.append(refutation)
    cs = [0.5 * np.eye(b.r) for b in dil.blocks]
    j = rn_apply(ins, cs)
    out.append(rn_certificate(j, rn_derivative(j, ins)))
    return out


@pytest.mark.parametrize("name", sorted(examples.EXAMPLES))
@pytest.mark.parametrize("t", [0.25, 0.5])
def test_emitted_certificates_pass(name, t):
    ins = examples.example(name, t)
    for cert in certificates_for(ins):
        assert check_certificate(cert, ins).passed, cert.kind


@pytest.mark.parametrize("name", sorted(examples.EXAMPLES))
def test_certificates_survive_serialization(name):
    ins = examples.example(name)
    for cert in certificates_for(ins):
        back = parse_certificate(serialize_certificate(cert))
        assert back.kind == cert.kind
        assert check_certificate(back, ins).passed


def test_every_kind_is_produced():
    kinds = set()
    for name in examples.EXAMPLES:
        for t in (0.25, 0.5):
            kinds.update(c.kind for c in certificates_for(examples.example(name, t)))
    assert kinds == set(KINDS)


# --------------------------------------------------------------------------
# tampered fixtures: each must fail with its designated clause
# --------------------------------------------------------------------------

def tampered(cert, **changes):
    return Certificate(cert.kind, dict(cert.payload, **changes))


def expect_clause(cert, ins, clause):
    with pytest.raises(CheckFailed) as info:
        check_certificate(cert, ins)
    assert info.value.clause == clause


def test_tampered_dilation():
    ins = examples.luders_t(0.25)
    cert = dilation_certificate(minimal_bidilation(ins))
    expect_clause(tampered(cert, V=2 * cert.payload["V"]), ins, "Reconstruction")


def test_tampered_extreme():
    # the t = 1/2 Kraus data are genuine but the injectivity claim is false
    ins = examples.luders_t(0.5)
    dil = minimal_bidilation(ins)
    kraus = [{"outcome": b.outcome, "factor": b.factor, "operators": dil.kraus(j)}
             for j, b in enumerate(dil.blocks)]
    fake = Certificate("extreme", {"rank": 2, "commutant_dim": 2, "kraus": kraus})
    expect_clause(fake, ins, "NotInjective")
    _, honest = is_extreme(examples.luders_t(0.25))
    expect_clause(honest, ins, "KrausMismatch")


def test_tampered_non_extreme():
    ins = examples.luders_t(0.5)
    _, cert = is_extreme(ins)
    expect_clause(tampered(cert, minus=cert.payload["plus"]), ins, "AverageMismatch")
    expect_clause(tampered(cert, plus=ins, minus=ins), ins, "PairNotDistinct")


def test_tampered_cstar_extreme():
    ins = examples.diagonal()
    _, cert = is_cstar_extreme_instrument(ins)
    expect_clause(tampered(cert, U=2 * cert.payload["U"]), ins, "NotUnitary")


def test_tampered_not_cstar_extreme():
    ins = examples.luders_t(0.25)
    _, cert = is_cstar_extreme_instrument(ins)
    expect_clause(tampered(cert, eigenvalue=1.0), ins, "EigenvalueOutOfRange")
    expect_clause(tampered(cert, eigenvalue=0.5), ins, "EigenResidual")


def test_tampered_rn():
    ins = examples.luders_t(0.25)
    dil = minimal_bidilation(ins)
    j = rn_apply(ins, [0.5 * np.eye(b.r) for b in dil.blocks])
    cert = rn_certificate(j, rn_derivative(j, ins))
    expect_clause(tampered(cert, D=4 * cert.payload["D"]), ins, "NotContraction")


def test_tampered_decomposable_refutation():
    ins = examples.luders_t(0.25)
    cert = decomposable_refutation(ins)
    assert cert.payload["element"] == [1, 1, 2]
    # Phi_1(E11) = phi(E11) mu(1) holds exactly, so E11 refutes nothing
    expect_clause(tampered(cert, element=[1, 1, 1]), ins, "NoViolation")


def test_decomposable_instruments_have_no_refutation():
    assert decomposable_refutation(examples.diagonal()) is None


def test_malformed_payload():
    ins = examples.diagonal()
    expect_clause(Certificate("rn", {}), ins, "Malformed")
    with pytest.raises(ValueError):
        Certificate("bogus", {})
