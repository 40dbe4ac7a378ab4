import numpy as np
import pytest

from cpinstruments.algebra import (AlgebraElement, AlgebraSpec, embed_full, from_full, identity,
                                   irrep_apply, matrix_unit, matrix_unit_basis, matrix_unit_labels,
                                   random_hermitian, zero)
from cpinstruments.errors import ShapeMismatch, SpecMismatch


def test_spec_dimensions():
    spec = AlgebraSpec([2, 3, 1])
    assert spec.n_factors == 3
    assert spec.total_dim == 6
    assert spec.dimension == 14
    assert spec.offsets() == [0, 2, 5]
    with pytest.raises(ValueError):
        AlgebraSpec([])
    with pytest.raises(ValueError):
        AlgebraSpec([2, 0])


def test_matrix_units_multiply_like_matrix_units():
    spec = AlgebraSpec([2, 2])
    e01 = matrix_unit(spec, 1, 0, 1)
    e10 = matrix_unit(spec, 1, 1, 0)
    assert np.allclose(embed_full(e01 @ e10), embed_full(matrix_unit(spec, 1, 0, 0)))
    # units in different factors annihilate each other
    assert (matrix_unit(spec, 0, 0, 0) @ e01).norm() == 0
    basis = matrix_unit_basis(spec)
    assert len(basis) == spec.dimension
    assert matrix_unit_labels(spec)[5] == (1, 0, 1)
    total = sum((matrix_unit(spec, s, p, p) for s, d in enumerate(spec.block_dims) for p in range(d)),
                zero(spec))
    assert np.allclose(embed_full(total), embed_full(identity(spec)))


def test_embed_roundtrip_and_irreps(rng):
    spec = AlgebraSpec([1, 3])
    a = random_hermitian(spec, 7)
    assert a.norm() == pytest.approx(1.0)
    assert np.allclose(embed_full(a), embed_full(a.adjoint()))
    back = from_full(spec, embed_full(a))
    assert np.allclose(embed_full(back), embed_full(a))
    assert np.allclose(irrep_apply(spec, 2, a), a.blocks[1])
    with pytest.raises(IndexError):
        irrep_apply(spec, 3, a)


def test_shape_and_spec_errors():
    spec = AlgebraSpec([2])
    with pytest.raises(ShapeMismatch):
        AlgebraElement(spec, [np.eye(3)])
    with pytest.raises(ShapeMismatch):
        AlgebraElement(spec, [np.eye(2), np.eye(2)])
    with pytest.raises(SpecMismatch):
        identity(spec) + identity(AlgebraSpec([1, 1]))


def test_elements_are_immutable():
    a = identity(AlgebraSpec([2]))
    with pytest.raises(ValueError):
        a.blocks[0][0, 0] = 5
