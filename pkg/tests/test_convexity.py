import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import nonextreme_search

from cpinstruments import examples
from cpinstruments.algebra import AlgebraSpec
from cpinstruments.certificates import check_certificate
from cpinstruments.convexity import (BlockAlgebra, cp_marginal_cstar_extreme, dominated_pair_check,
                                     dominates, extremality_kernel, invariance_algebra,
                                     is_cstar_extreme_instrument, is_cstar_extreme_ucp,
                                     is_cstar_extreme_via_bidilation, is_extreme,
                                     is_pure_instrument, nest_subalgebra_test, povm_is_cstar_extreme,
                                     povm_is_extreme, radical, rn_apply, rn_derivative,
                                     spectral_disjointness)
from cpinstruments.cpmap import cpmap_from_kraus, identity_map, zero_map
from cpinstruments.dilation import commutant_element, minimal_bidilation
from cpinstruments.errors import InvalidDerivative, NotDominated, NotUnital
from cpinstruments.generators import (compression_instrument, random_kraus_instrument,
                                      spectral_instrument)
from cpinstruments.instrument import (Instrument, convex_combine, cp_marginal, from_cpmap,
                                      instrument_difference, is_spectral, povm_marginal)


# --------------------------------------------------------------------------
# worked examples
# --------------------------------------------------------------------------

def test_lueders_quarter_is_extreme():
    # [DERIVED] the products K_l^* K_m are diag(1/4, 3/4) and diag(3/4, 1/4),
    # linearly independent, so the instrument is extreme
    ok, cert = is_extreme(examples.luders_t(0.25))
    assert ok and cert.kind == "extreme"
    assert cert.payload["rank"] == cert.payload["commutant_dim"] == 2


def test_lueders_half_is_not_extreme():
    # [DERIVED] at t = 1/2 both Kraus products equal I/2
    ins = examples.luders_t(0.5)
    ok, cert = is_extreme(ins)
    assert not ok and cert.kind == "non_extreme"
    avg = convex_combine([cert.payload["plus"], cert.payload["minus"]], [0.5, 0.5])
    assert instrument_difference(avg, ins) < 1e-12
    assert check_certificate(cert, ins).passed
    assert nonextreme_search(ins, seed=0) is not None


def test_lueders_is_not_cstar_extreme_with_quarter_witness():
    ok, cert = is_cstar_extreme_instrument(examples.luders_t(0.25))
    assert not ok
    assert cert.payload["reason"] == "non_projection"
    assert cert.payload["outcome"] == 1
    assert cert.payload["eigenvalue"] == pytest.approx(0.25, abs=1e-6)


def test_lueders_marginals_not_extreme():
    # [REFERENCE] "the POVM marginal is not extreme"; the CP marginal is not
    # extreme either, by commutativity of mu
    ins = examples.luders_t(0.25)
    assert not povm_is_extreme(povm_marginal(ins))
    assert not is_extreme(from_cpmap(cp_marginal(ins)))[0]


def test_diagonal_example():
    # [REFERENCE] C*-extreme, while the CP marginal "mapping a matrix to its
    # diagonal part, is not extreme ... and hence not C*-extreme"
    ins = examples.diagonal()
    ok, cert = is_cstar_extreme_instrument(ins)
    assert ok and check_certificate(cert, ins).passed
    assert is_cstar_extreme_via_bidilation(ins)
    assert not cp_marginal_cstar_extreme(ins)
    assert not is_extreme(from_cpmap(cp_marginal(ins)))[0]


def test_omega_example():
    # [REFERENCE] "Then mu is an extreme POVM" and "I is an extreme UCP instrument"
    ins = examples.omega_instrument()
    assert povm_is_extreme(examples.omega_povm())
    assert is_extreme(ins)[0]
    assert nonextreme_search(ins, seed=0) is None
    # [DERIVED] no effect is a projection, so neither is C*-extreme
    assert not is_cstar_extreme_instrument(ins)[0]
    assert not povm_is_cstar_extreme(examples.omega_povm())


def test_pure_4_2_example():
    # [REFERENCE] "This defines a pure instrument with a spectral POVM marginal,
    # and hence I is clearly a C*-extreme UCP instrument."
    ins = examples.pure_4_2()
    assert is_pure_instrument(ins)
    assert povm_marginal(ins).is_spectral()
    ok, cert = is_cstar_extreme_instrument(ins)
    assert ok and check_certificate(cert, ins).passed


def test_identity_channel_is_cstar_extreme():
    phi = identity_map(AlgebraSpec([3]))
    ok, dec = is_cstar_extreme_ucp(phi)
    assert ok and len(dec.blocks) == 1
    assert is_cstar_extreme_instrument(from_cpmap(phi))[0]


def test_non_unital_inputs_are_rejected():
    spec = AlgebraSpec([2])
    half = Instrument(spec, 2, [0.5 * identity_map(spec)])
    with pytest.raises(NotUnital):
        is_extreme(half)
    with pytest.raises(NotUnital):
        is_cstar_extreme_instrument(half)


# --------------------------------------------------------------------------
# Radon-Nikodym derivatives
# --------------------------------------------------------------------------

def test_rn_roundtrip_on_lueders(rng):
    ins = examples.luders_t(0.25)
    dil = minimal_bidilation(ins)
    cs = [np.diag([0.3]), np.diag([0.9])]
    j = rn_apply(ins, cs)
    assert dominates(j, ins)
    rn = rn_derivative(j, ins)
    assert np.allclose(rn.D, commutant_element(dil, cs))
    assert rn.residual < 1e-12


def test_rn_rejects_undominated_and_invalid():
    ins = examples.luders_t(0.25)
    doubled = convex_combine([ins], [2.0])
    assert not dominates(doubled, ins)
    with pytest.raises(NotDominated):
        rn_derivative(doubled, ins)
    with pytest.raises(NotDominated):
        rn_derivative(examples.luders_t(0.4), ins)
    with pytest.raises(InvalidDerivative):
        rn_apply(ins, [2 * np.eye(1), np.eye(1)])
    with pytest.raises(InvalidDerivative):
        rn_apply(ins, np.ones((4, 4)))


def test_pure_and_dominated_pairs():
    assert not is_pure_instrument(examples.diagonal())
    assert dominated_pair_check(examples.luders_t(0.25))
    assert not dominated_pair_check(examples.luders_t(0.5))


# --------------------------------------------------------------------------
# nest machinery
# --------------------------------------------------------------------------

def units(r, pairs):
    out = []
    for p, q in pairs:
        e = np.zeros((r, r), dtype=complex)
        e[p, q] = 1
        out.append(e)
    return np.array(out)


def test_radical_of_upper_triangular():
    basis = units(3, [(p, q) for p in range(3) for q in range(p, 3)])
    rad = radical(basis)
    assert len(rad) == 3
    assert all(np.allclose(np.tril(x), 0) for x in rad)


def test_nest_test_accepts_upper_triangular():
    alg = BlockAlgebra((3,), units(3, [(p, q) for p in range(3) for q in range(p, 3)]))
    res = nest_subalgebra_test(alg)
    assert res.accepted
    assert res.flags.factors[0].sizes == (1, 1, 1)


def test_nest_test_rejects_non_chain_lattice():
    # invariant subspaces <e1>, <e1,e2>, <e1,e3> do not form a chain
    alg = BlockAlgebra((3,), units(3, [(0, 0), (0, 1), (0, 2), (1, 1), (2, 2)]))
    assert not nest_subalgebra_test(alg).accepted


def test_nest_test_block_upper_triangular():
    pairs = [(p, q) for p in range(3) for q in range(3) if not (p == 2 and q < 2)]
    res = nest_subalgebra_test(BlockAlgebra((3,), units(3, pairs)))
    assert res.accepted and res.flags.factors[0].sizes == (2, 1)


def test_invariance_algebra_of_extreme_points():
    dil = minimal_bidilation(examples.pure_4_2())
    assert invariance_algebra(dil).dim == 1


def test_extremality_kernel_dimensions():
    rank, dim, kernel = extremality_kernel(minimal_bidilation(examples.luders_t(0.5)))
    assert (rank, dim, len(kernel)) == (1, 2, 1)


# --------------------------------------------------------------------------
# disjointness
# --------------------------------------------------------------------------

def test_spectral_disjointness():
    spec = AlgebraSpec([2])
    ident, zero = identity_map(spec), zero_map(spec, 2)
    first = Instrument(spec, 2, [ident, zero])
    second = Instrument(spec, 2, [zero, ident])
    da, db = minimal_bidilation(first), minimal_bidilation(second)
    assert spectral_disjointness(da, db)
    assert not spectral_disjointness(da, da)


# --------------------------------------------------------------------------
# properties on random instruments
# --------------------------------------------------------------------------

def random_spec(rng):
    return AlgebraSpec(rng.integers(1, 3, size=int(rng.integers(1, 3))).tolist())


@given(st.integers(0, 2**32 - 1))
def test_cstar_paths_agree_on_generic_instruments(seed):
    rng = np.random.default_rng(seed)
    ins = random_kraus_instrument(rng, random_spec(rng), int(rng.integers(1, 4)),
                                  int(rng.integers(1, 4)))
    primary, cert = is_cstar_extreme_instrument(ins)
    assert primary == is_cstar_extreme_via_bidilation(ins)
    assert check_certificate(cert, ins).passed
    if primary:
        assert is_extreme(ins)[0]


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_compression_instruments(seed, nested):
    rng = np.random.default_rng(seed)
    ins = compression_instrument(rng, random_spec(rng), int(rng.integers(1, 3)), nested=nested)
    primary, cert = is_cstar_extreme_instrument(ins)
    assert primary == is_cstar_extreme_via_bidilation(ins)
    assert check_certificate(cert, ins).passed
    if nested:
        # [DERIVED] direct sums of nested compressions are C*-extreme by construction
        assert primary


@given(st.integers(0, 2**32 - 1))
def test_spectral_implies_everything(seed):
    rng = np.random.default_rng(seed)
    ins = spectral_instrument(rng, random_spec(rng), int(rng.integers(1, 4)))
    assert is_spectral(ins)
    assert is_extreme(ins)[0]
    assert is_cstar_extreme_instrument(ins)[0]
    assert nonextreme_search(ins, seed=seed, trials=200) is None


@given(st.integers(0, 2**32 - 1))
def test_rn_roundtrip_property(seed):
    rng = np.random.default_rng(seed)
    ins = random_kraus_instrument(rng, random_spec(rng), 2, 2)
    dil = minimal_bidilation(ins)
    cs = []
    for b in dil.blocks:
        g = rng.normal(size=(b.r, b.r)) + 1j * rng.normal(size=(b.r, b.r))
        h = g @ g.conj().T
        cs.append(h / (np.linalg.eigvalsh(h)[-1] + 1e-3))
    rn = rn_derivative(rn_apply(ins, cs), ins)
    assert np.linalg.norm(rn.D - commutant_element(dil, cs), 2) <= 1e-6


def test_single_pure_compression_is_cstar_extreme():
    spec = AlgebraSpec([3])
    w = np.eye(3)[:, :2]
    ins = from_cpmap(cpmap_from_kraus(spec, 2, [[w]]))
    assert is_pure_instrument(ins)
    assert is_cstar_extreme_instrument(ins)[0]


def test_corpus_annotation_for_lueders_half(corpus):
    # the family is extreme for t in (0, 1) except at t = 1/2
    entry = next(e for e in corpus if e.name == "luders-t=0.5")
    assert "not extreme" in entry.note
    assert not is_extreme(entry.instrument)[0]
