"""Tensor-leg matrix layer: products, embeddings, traces, Neumann inversion."""

from fractions import Fraction as F

import pytest

from qvertex.errors import DomainError
from qvertex.matrices import MatrixSeries, antisymmetrizer, permutation_matrix
from qvertex.series import Context, TruncatedSeries, VarSpec, LAURENT_VAR


@pytest.fixture
def ctx():
    return Context([VarSpec("z", LAURENT_VAR, -6, 6)], 3)


def test_projector_identities(ctx):
    a = antisymmetrizer(ctx, 2)
    p = permutation_matrix(ctx, 2)
    ident = MatrixSeries.identity(ctx, (2, 2))
    assert (a @ a - a).nonzero_witness() is None
    assert (p @ p - ident).nonzero_witness() is None
    assert a.trace().coeff({}) == 1


def test_embed_and_permute(ctx):
    p = permutation_matrix(ctx, 2)
    p01 = p.embed((2, 2, 2), (0, 1))
    p12 = p.embed((2, 2, 2), (1, 2))
    # braid relation for plain permutations
    lhs = p01 @ p12 @ p01
    rhs = p12 @ p01 @ p12
    eq, wit = lhs.equal_on_common(rhs)
    assert eq, wit
    swapped = p.permute_legs([1, 0])
    eq, wit = swapped.equal_on_common(p)
    assert eq, wit  # P is symmetric under leg exchange


def test_transpose_and_trace(ctx):
    m = MatrixSeries(ctx, (2,), {})
    m.set((0,), (1,), TruncatedSeries.const(ctx, 3))
    mt = m.transpose_leg(0)
    assert mt.get((1,), (0,)).coeff({}) == 3
    big = m.embed((2, 2), (0,))
    assert big.partial_trace([1]).get((0,), (1,)).coeff({}) == 6  # traced identity leg


def test_neumann_inverse(ctx):
    ident = MatrixSeries.identity(ctx, (2,))
    x = MatrixSeries(ctx, (2,), {})
    x.set((0,), (1,), TruncatedSeries.monomial(ctx, {"z": -2}, 1))
    x.set((1,), (1,), TruncatedSeries.monomial(ctx, {}, 1, F(1, 2)))
    m = ident + x
    minv = m.neumann_inverse()
    eq, wit = (m @ minv).equal_on_common(ident)
    assert eq, wit
    eq, wit = (minv @ m).equal_on_common(ident)
    assert eq, wit


def test_neumann_rejects_nonunit(ctx):
    m = MatrixSeries.identity(ctx, (2,)).scale(F(2))
    with pytest.raises(DomainError):
        m.neumann_inverse()


def test_scale_by_series(ctx):
    s = TruncatedSeries.monomial(ctx, {"z": 2})
    m = MatrixSeries.identity(ctx, (2,)).scale(s)
    assert m.get((0,), (0,)).coeff({"z": 2}) == 1
    assert m.get((0,), (1,)).is_zero()
