import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpinstruments.algebra import AlgebraElement, AlgebraSpec, embed_full, identity, random_hermitian
from cpinstruments.cpmap import (apply, basis_images, compress, conjugate, cpmap_from_function,
                                 cpmap_from_kraus, identity_map, irrep_map, is_homomorphism,
                                 is_pure_cpmap, is_unital, kraus_minimal, kraus_ranks,
                                 stinespring_minimal, transpose_map, unit_image, validate_cp,
                                 zero_map)
from cpinstruments.errors import NotCP, NotIsometry, ShapeMismatch


def gaussian(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_map(rng, dims, k, r=2):
    spec = AlgebraSpec(dims)
    kraus = [[gaussian(rng, (d, k)) for _ in range(r)] for d in dims]
    return cpmap_from_kraus(spec, k, kraus), kraus


def test_apply_matches_kraus_sum(rng):
    phi, kraus = random_map(rng, [2, 3], 2)
    a = random_hermitian(phi.spec, 1)
    direct = sum(K.conj().T @ a_s @ K for a_s, ops in zip(a.blocks, kraus) for K in ops)
    assert np.allclose(apply(phi, a), direct)


def test_identity_and_irrep_maps_are_homomorphisms():
    spec = AlgebraSpec([2, 1])
    ident = identity_map(spec)
    a = random_hermitian(spec, 3)
    assert np.allclose(apply(ident, a), embed_full(a))
    assert is_homomorphism(ident)
    assert is_unital(ident)
    assert is_homomorphism(irrep_map(spec, 1))
    assert is_unital(irrep_map(spec, 2))


def test_transpose_is_not_cp():
    t = transpose_map(2)
    assert not validate_cp(t)
    with pytest.raises(NotCP):
        kraus_minimal(t)


def test_kraus_minimal_reconstructs_with_choi_rank(rng):
    phi, _ = random_map(rng, [3], 2, r=5)
    ranks = kraus_ranks(phi)
    # a Choi block of M_3 -> M_2 has size 6, so at most six Kraus operators
    assert ranks == (5,)
    rebuilt = cpmap_from_kraus(phi.spec, 2, kraus_minimal(phi))
    assert np.allclose(rebuilt.choi_blocks[0], phi.choi_blocks[0])


def test_kraus_minimal_operators_are_independent(rng):
    phi, _ = random_map(rng, [2], 2, r=3)
    ops = kraus_minimal(phi)[0]
    gram = np.array([[np.vdot(a, b) for b in ops] for a in ops])
    assert np.allclose(gram, np.diag(np.diag(gram)))


def test_stinespring_reconstructs(rng):
    phi, _ = random_map(rng, [1, 2], 3)
    st_ = stinespring_minimal(phi)
    a = random_hermitian(phi.spec, 5)
    assert np.allclose(st_.V.conj().T @ st_.pi(a) @ st_.V, apply(phi, a))
    assert st_.dim == sum(d * r for d, r in zip(phi.spec.block_dims, st_.ranks))


def test_compress_and_conjugate(rng):
    phi = identity_map(AlgebraSpec([3]))
    w = np.eye(3)[:, :2]
    small = compress(phi, w)
    assert is_unital(small)
    with pytest.raises(NotIsometry):
        compress(phi, 2 * w)
    assert np.allclose(unit_image(conjugate(phi, 2 * w)), 4 * np.eye(2))


def test_pure_and_zero_maps():
    spec = AlgebraSpec([4])
    w = np.eye(4)[:, :2]
    assert is_pure_cpmap(cpmap_from_kraus(spec, 2, [[w]]))
    z = zero_map(spec, 2)
    assert z.is_zero() and validate_cp(z)
    assert not is_pure_cpmap(z)


def test_shape_errors():
    spec = AlgebraSpec([2])
    with pytest.raises(ShapeMismatch):
        cpmap_from_kraus(spec, 2, [[np.eye(3)]])
    with pytest.raises(ShapeMismatch):
        cpmap_from_kraus(spec, 2, [[np.eye(2)], []])


def test_basis_images_order():
    spec = AlgebraSpec([2])
    phi = cpmap_from_function(spec, 1, lambda s, p, q: np.array([[10 * p + q]]))
    assert basis_images(phi)[:, 0, 0].tolist() == [0, 1, 10, 11]


@given(st.lists(st.integers(1, 3), min_size=1, max_size=2), st.integers(1, 3),
       st.integers(0, 2**32 - 1))
def test_cp_maps_are_positive(dims, k, seed):
    rng = np.random.default_rng(seed)
    phi, _ = random_map(rng, dims, k)
    blocks = [gaussian(rng, (d, d)) for d in dims]
    a = AlgebraElement(phi.spec, [b @ b.conj().T for b in blocks])
    assert validate_cp(phi)
    assert np.linalg.eigvalsh(apply(phi, a)).min() >= -1e-9 * max(1.0, phi.choi_norm() * a.norm())


@given(st.lists(st.integers(1, 3), min_size=1, max_size=2), st.integers(1, 3),
       st.integers(0, 2**32 - 1))
def test_apply_is_linear_and_adjoint_preserving(dims, k, seed):
    rng = np.random.default_rng(seed)
    phi, _ = random_map(rng, dims, k)
    x = AlgebraElement(phi.spec, [gaussian(rng, (d, d)) for d in dims])
    y = AlgebraElement(phi.spec, [gaussian(rng, (d, d)) for d in dims])
    c = 0.3 - 1.2j
    assert np.allclose(apply(phi, x + c * y), apply(phi, x) + c * apply(phi, y))
    assert np.allclose(apply(phi, x.adjoint()), apply(phi, x).conj().T)
    assert np.allclose(unit_image(phi), apply(phi, identity(phi.spec)))
