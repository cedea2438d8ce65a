"""Core truncated-series arithmetic: frozen examples, oracles, ring axioms."""

from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from qvertex.errors import BudgetError, DomainError
from qvertex.series import (Context, LF, TruncatedSeries, VarSpec, EXP_VAR,
                            LAURENT_VAR, exp_linear, geom_inv_binomial,
                            substitute, subst_linear)


@pytest.fixture
def ctx():
    return Context([VarSpec("z", LAURENT_VAR, -10, 10),
                    VarSpec("u", EXP_VAR, -12, 8)], 4)


def one(ctx):
    return TruncatedSeries.const(ctx, 1)


def test_add_basics(ctx):
    a = one(ctx) + TruncatedSeries.monomial(ctx, {}, 1)
    b = TruncatedSeries.const(ctx, -1)
    assert (a + b).coeff({}, 1) == 1
    assert (a + b).coeff({}, 0) == 0
    z = TruncatedSeries.monomial(ctx, {"z": 2})
    assert (z + TruncatedSeries.zero(ctx)).coeff({"z": 2}) == 1
    half = TruncatedSeries.monomial(ctx, {"z": -2}, 0, F(1, 2))
    assert (half + half).coeff({"z": -2}) == 1


def test_mul_basics(ctx):
    h = TruncatedSeries.monomial(ctx, {}, 1)
    ctx2 = Context(ctx.vars, 2)
    a = TruncatedSeries.parse((one(ctx) + h).restrict_h(2).serialize(), ctx2)
    b = TruncatedSeries.parse((one(ctx) - h).restrict_h(2).serialize(), ctx2)
    prod = a * b
    eq, wit = prod.equal_on_common(TruncatedSeries.const(ctx2, 1))
    assert eq, wit
    # telescoping: (sum_k z^k) (1 - z) = 1 in-window
    geo = TruncatedSeries.zero(ctx)
    for k in range(6):
        geo = geo + TruncatedSeries.monomial(ctx, {"z": 2 * k})
    z = TruncatedSeries.monomial(ctx, {"z": 2})
    eq, wit = ((one(ctx) - z) * geo).equal_on_common(one(ctx))
    assert eq, wit
    u = TruncatedSeries.monomial(ctx, {"u": 2})
    uinv = TruncatedSeries.monomial(ctx, {"u": -2})
    assert (u * uinv).coeff({}) == 1


def test_invert_geometric(ctx):
    z = TruncatedSeries.monomial(ctx, {"z": 2})
    g = (one(ctx) - z).invert()
    for k in range(5):
        assert g.coeff({"z": 2 * k}) == 1
    eq, wit = (g * (one(ctx) - z)).equal_on_common(one(ctx))
    assert eq, wit


def test_invert_constant(ctx):
    assert TruncatedSeries.const(ctx, 2).invert().coeff({}) == F(1, 2)


def test_invert_u_plus_half_h(ctx):
    # 1/(u + h/2) = u^-1 sum (-h/(2u))^a, the standard expansion convention
    s = TruncatedSeries.monomial(ctx, {"u": 2}) \
        + TruncatedSeries.monomial(ctx, {}, 1, F(1, 2))
    si = s.invert()
    assert si.coeff({"u": -2}, 0) == 1
    assert si.coeff({"u": -4}, 1) == F(-1, 2)
    assert si.coeff({"u": -6}, 2) == F(1, 4)
    eq, wit = (si * s).equal_on_common(one(ctx))
    assert eq, wit


def test_invert_rejects_h_leading(ctx):
    h = TruncatedSeries.monomial(ctx, {}, 1)
    with pytest.raises(DomainError):
        h.invert()


def test_exp_linear(ctx):
    e = exp_linear(LF({"u": 1}, h=1), ctx)
    assert e.coeff({"u": 2}, 1) == 1  # from (u+h)^2/2
    assert exp_linear(LF(), ctx).coeff({}) == 1
    prod = exp_linear(LF({"u": 1}), ctx) * exp_linear(LF({"u": -1}), ctx)
    eq, wit = prod.equal_on_common(one(ctx))
    assert eq, wit
    # half-turn: e^{L + pi i} = -e^L
    assert exp_linear(LF({"u": 1}, t=1), ctx).coeff({}) == -1


def test_geom_inv_binomial_ascending(ctx):
    # (1 - z e^u)^{-1}: frozen low-order table, checked against the product
    g = geom_inv_binomial(1, {"z": 2}, LF({"u": 1}), ctx)
    assert g.coeff({}) == 1
    assert g.coeff({"z": 2}) == 1
    assert g.coeff({"z": 4}) == 1
    assert g.coeff({"z": 2, "u": 2}) == 1
    assert g.coeff({"z": 4, "u": 2}) == 2
    back = g * (one(ctx) - TruncatedSeries.monomial(ctx, {"z": 2})
                * exp_linear(LF({"u": 1}), ctx))
    eq, wit = back.equal_on_common(one(ctx))
    assert eq, wit
    assert geom_inv_binomial(0, {"z": 2}, LF(), ctx).coeff({}) == 1


def test_geom_inv_binomial_reversed():
    # context (x, y): 1/(1 - x/y) must expand as -sum_{k>=1} (y/x)^k
    ctx2 = Context([VarSpec("x", LAURENT_VAR, -8, 8),
                    VarSpec("y", LAURENT_VAR, -8, 8)], 2)
    g = geom_inv_binomial(1, {"x": 2, "y": -2}, LF(), ctx2)
    assert g.coeff({}) == 0
    assert g.coeff({"x": -2, "y": 2}) == -1
    assert g.coeff({"x": -4, "y": 4}) == -1
    prod = g * (TruncatedSeries.const(ctx2, 1)
                - TruncatedSeries.monomial(ctx2, {"x": 2, "y": -2}))
    eq, wit = prod.equal_on_common(TruncatedSeries.const(ctx2, 1))
    assert eq, wit
    # and the guaranteed window honestly excludes the truncated corner
    assert prod.covers_box({"x": (-4, 4), "y": (-4, 4)}, 2)
    assert not prod.covers_box({"x": (-8, 8), "y": (-8, 8)}, 2)


def test_substitute_monomial(ctx):
    ctx3 = Context([VarSpec("z2", LAURENT_VAR, -8, 8),
                    VarSpec("z0", EXP_VAR, -4, 6)], 4)
    zz = TruncatedSeries.monomial(ctx, {"z": 4})
    out = substitute(zz, "z", {"z2": 2}, LF({"z0": 1}), ctx3)
    assert out.coeff({"z2": 4}) == 1
    assert out.coeff({"z2": 4, "z0": 2}) == 2
    assert out.coeff({"z2": 4, "z0": 4}) == 2
    triv = substitute(one(ctx), "z", {"z2": 2}, LF(), ctx3)
    assert triv.coeff({}) == 1


def test_substitute_is_ring_hom(ctx):
    # target ceiling below the source guarantee, so unknown tails escape
    ctx3 = Context([VarSpec("z2", LAURENT_VAR, -20, 8),
                    VarSpec("z0", EXP_VAR, -4, 6)], 4)
    a = one(ctx) + TruncatedSeries.monomial(ctx, {"z": 2})
    b = (one(ctx) - TruncatedSeries.monomial(ctx, {"z": 2})).invert()
    sub = lambda s: substitute(s, "z", {"z2": 2}, LF({"z0": 1}), ctx3)
    eq, wit = sub(a * b).equal_on_common(sub(a) * sub(b))
    assert eq, wit


def test_subst_linear_inverse_power():
    ctxa = Context([VarSpec("u0", EXP_VAR, -6, 6)], 3)
    ctxb = Context([VarSpec("zz", EXP_VAR, -8, 6), VarSpec("uu", EXP_VAR, 0, 6)], 3)
    ua = TruncatedSeries.monomial(ctxa, {"u0": -2})
    out = subst_linear(ua, "u0", LF({"zz": 1, "uu": 1}), ctxb)
    # 1/(z+u) = z^-1 sum (-u/z)^j
    assert out.coeff({"zz": -2}) == 1
    assert out.coeff({"zz": -4, "uu": 2}) == -1
    assert out.coeff({"zz": -6, "uu": 4}) == 1
    base = subst_linear(TruncatedSeries.monomial(ctxa, {"u0": 2}), "u0",
                        LF({"zz": 1, "uu": 1}), ctxb)
    eq, wit = (out * base).equal_on_common(TruncatedSeries.const(ctxb, 1))
    assert eq, wit


def test_flip_sign():
    ctxh = Context([VarSpec("w", LAURENT_VAR, -4, 4)], 2)
    half = TruncatedSeries.monomial(ctxh, {"w": 1})
    whole = TruncatedSeries.monomial(ctxh, {"w": 2})
    assert half.flip_sign("w").coeff({"w": 1}) == -1
    assert whole.flip_sign("w").coeff({"w": 2}) == 1
    mixed = half + whole
    again = mixed.flip_sign("w").flip_sign("w")
    eq, wit = again.equal_on_common(mixed)
    assert eq, wit


def test_coeff_and_equal(ctx):
    s = one(ctx) + TruncatedSeries.monomial(ctx, {}, 1, 2)
    assert s.coeff({}, 1) == 2
    eq, _ = s.equal_on_common(s)
    assert eq
    g = (one(ctx) - TruncatedSeries.monomial(ctx, {"z": 2})).invert()
    assert g.coeff({"z": 6}) == 1


def test_serialize_roundtrip(ctx):
    s = (one(ctx) - TruncatedSeries.monomial(ctx, {"z": 2})).invert() \
        + TruncatedSeries.monomial(ctx, {"u": -2}, 2, F(3, 7))
    t = TruncatedSeries.parse(s.serialize(), ctx)
    assert s.terms == t.terms
    assert s.acc_hi == t.acc_hi and s.exhi == t.exhi and s.hacc == t.hacc
    assert s.serialize() == t.serialize()


def test_window_underflow_is_error(ctx):
    low = TruncatedSeries.monomial(ctx, {"z": -10})
    with pytest.raises(BudgetError):
        _ = low * low


# -- randomized ring axioms ----------------------------------------------------

_coef = st.integers(min_value=-4, max_value=4)


def _rand_series(ctx, draw_terms):
    out = TruncatedSeries.zero(ctx)
    for (ez, eu, k, c) in draw_terms:
        if c:
            out = out + TruncatedSeries.monomial(ctx, {"z": 2 * ez, "u": 2 * eu}, k, c)
    return out


_terms = st.lists(st.tuples(st.integers(-1, 2), st.integers(-1, 2),
                            st.integers(0, 3), _coef),
                  min_size=0, max_size=5)


@settings(max_examples=60, deadline=None)
@given(_terms, _terms, _terms)
def test_ring_axioms(ta, tb, tc):
    ctx = Context([VarSpec("z", LAURENT_VAR, -10, 10),
                   VarSpec("u", EXP_VAR, -12, 8)], 4)
    a, b, c = (_rand_series(ctx, t) for t in (ta, tb, tc))
    eq, wit = ((a * b) * c).equal_on_common(a * (b * c))
    assert eq, wit
    eq, wit = (a * (b + c)).equal_on_common(a * b + a * c)
    assert eq, wit
    eq, wit = (a * b).equal_on_common(b * a)
    assert eq, wit


@settings(max_examples=30, deadline=None)
@given(_terms)
def test_invert_roundtrip_random(ta):
    ctx = Context([VarSpec("z", LAURENT_VAR, -10, 10),
                   VarSpec("u", EXP_VAR, -12, 8)], 4)
    a = TruncatedSeries.const(ctx, 1) + _rand_series(ctx, ta).shift({}, 1)
    ai = a.invert()
    eq, wit = (ai * a).equal_on_common(TruncatedSeries.const(ctx, 1))
    assert eq, wit


@settings(max_examples=30, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_exp_group_law(m1, m2):
    ctx = Context([VarSpec("u", EXP_VAR, -4, 10), VarSpec("v", EXP_VAR, 0, 8)], 3)
    L1 = LF({"u": m1, "v": 1})
    L2 = LF({"u": m2, "v": -1})
    lhs = exp_linear(L1 + L2, ctx)
    rhs = exp_linear(L1, ctx) * exp_linear(L2, ctx)
    eq, wit = lhs.equal_on_common(rhs)
    assert eq, wit


def test_geom_respects_products():
    # expanding (1-A)^-1 (1-B)^-1 equals expanding each factor then multiplying
    ctx = Context([VarSpec("z", LAURENT_VAR, -12, 12), VarSpec("u", EXP_VAR, 0, 6)], 3)
    one_ = TruncatedSeries.const(ctx, 1)
    ga = geom_inv_binomial(1, {"z": 2}, LF({"u": 1}), ctx)
    gb = geom_inv_binomial(F(1, 2), {"z": 4}, LF(), ctx)
    prod = ga * gb
    fa = one_ - TruncatedSeries.monomial(ctx, {"z": 2}) * exp_linear(LF({"u": 1}), ctx)
    fb = one_ - TruncatedSeries.monomial(ctx, {"z": 4}, 0, F(1, 2))
    eq, wit = (prod * fa * fb).equal_on_common(one_)
    assert eq, wit
