"""Construction of the trigonometric and elliptic R-matrices.

Both families are produced over a caller-supplied expansion context, for a
general argument of the form  coeff * monomial * exp(linear form), which
covers the multiplicative form R(z), the additive form R(e^u), and every
shifted variant R(z e^{u-v+a h}) needed by the fused products.  Expansion
directions for the rational entries follow the context's dominance order
and may be overridden where an identity prescribes the opposite embedding.

The elliptic family (N = 2, eight-vertex) is assembled from the power
series f solving its q-difference equation, the Pochhammer-product ratios
alpha and beta with elliptic nome p = (c h^b)^2, and the four sum and
difference equations for the entries; the starred variant replaces p by
p e^{-c0 h} for a rational shift c0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

from .errors import BudgetError, DomainError, InternalInvariantError
from .matrices import MatrixSeries
from .series import (Context, LinearForm, LF, TruncatedSeries, VarSpec, EXP_VAR,
                     exp_linear, geom_inv_binomial, subst_linear)

TRIG = "trig"
ELLIPTIC = "elliptic"


@dataclass(frozen=True)
class RParams:
    """Family selection and elliptic nome data.

    Elliptic: p^(1/2) = p_coeff * h^p_power, and the starred R-matrix uses
    p* = p e^(-shift h) (i.e. p q^(-2 shift) with q = e^(h/2)).
    """

    family: str = TRIG
    N: int = 2
    p_coeff: Fraction = Fraction(1)
    p_power: int = 1
    shift: Fraction = Fraction(0)

    def __post_init__(self):
        if self.family not in (TRIG, ELLIPTIC):
            raise DomainError(f"unknown family {self.family!r}")
        if self.N < 2:
            raise DomainError("N must be >= 2")
        if self.family == ELLIPTIC:
            if self.N != 2:
                raise DomainError("the elliptic family requires N = 2")
            if self.p_coeff <= 0 or self.p_power < 1:
                raise DomainError("elliptic nome requires p_coeff > 0 and p_power >= 1")


@dataclass(frozen=True)
class Arg:
    """An R-matrix argument  coeff * mono * e^L  (mono in doubled exponents)."""

    coeff: Fraction = Fraction(1)
    mono: tuple[tuple[str, int], ...] = ()
    L: LinearForm = LinearForm()

    @staticmethod
    def make(coeff=1, mono: Mapping[str, int] | None = None,
             L: LinearForm | None = None) -> "Arg":
        return Arg(Fraction(coeff), tuple(sorted((mono or {}).items())),
                   L if L is not None else LinearForm())

    def series(self, ctx: Context) -> TruncatedSeries:
        out = TruncatedSeries.monomial(ctx, dict(self.mono), 0, self.coeff)
        if not self.L.is_zero():
            out = out * exp_linear(self.L, ctx)
        return out

    def inv(self) -> "Arg":
        return Arg(1 / self.coeff, tuple((k, -v) for k, v in self.mono),
                   self.L.scale(-1))

    def neg(self) -> "Arg":
        return Arg(-self.coeff, self.mono, self.L)

    def times_exp(self, extra: LinearForm) -> "Arg":
        return Arg(self.coeff, self.mono, self.L + extra)

    def is_exp_only(self) -> bool:
        return not self.mono

    def square(self) -> "Arg":
        return Arg(self.coeff ** 2, tuple((k, 2 * v) for k, v in self.mono),
                   self.L.scale(2))


def one_minus_inverse(arg: Arg, ctx: Context, hshift: Fraction = Fraction(0),
                      direction: int = 0) -> TruncatedSeries:
    """(1 - arg*e^(hshift*h))^(-1), expanded into the context's ring.

    Monomial-bearing arguments use the geometric embedding (direction
    selectable).  Pure-exponential unit-coefficient arguments factor the
    singular linear term out first, 1 - e^Y = -Y * (e^Y - 1)/Y, and invert
    the two factors separately: the second factor has no negative exponents
    at all, so the guaranteed windows do not erode with the window size.
    """
    shifted = arg.times_exp(LF(h=hshift))
    if not arg.is_exp_only():
        return geom_inv_binomial(shifted.coeff, dict(shifted.mono), shifted.L,
                                 ctx, direction)
    ceff = shifted.coeff * (-1 if shifted.L.t else 1)
    one = TruncatedSeries.const(ctx, 1)
    if ceff != 1:
        return (one - shifted.series(ctx)).invert()
    Y = LinearForm(shifted.L.coeffs, shifted.L.hcoeff, 0)
    if Y.is_zero():
        raise DomainError("(1 - 1)^(-1): argument is identically one")
    lin = TruncatedSeries.zero(ctx)
    for name, c in Y.coeffs:
        lin = lin + TruncatedSeries.monomial(ctx, {name: 2}, 0, c)
    if Y.hcoeff:
        lin = lin + TruncatedSeries.monomial(ctx, {}, 1, Y.hcoeff)
    # phi = (e^Y - 1)/Y = sum_{a>=0} Y^a/(a+1)!
    phi = TruncatedSeries.const(ctx, 1)
    term = TruncatedSeries.const(ctx, 1)
    a = 0
    while not lin.is_zero():
        a += 1
        term = term * lin
        phi = phi + term.scale(Fraction(1, _factorial(a + 1)))
        if term.is_zero():
            break
        if a > 10_000:
            raise BudgetError("phi expansion did not terminate")
    return -(lin.invert() * phi.invert())


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


# -- the series f of the q-difference equation -------------------------------

_FCACHE: dict[tuple[int, int], tuple] = {}
_FBASIS_CACHE: dict[int, tuple] = {}


def f_hcoeffs(max_deg: int, cap: int) -> tuple:
    """Coefficients f_0..f_max_deg of f(z) with q = e^(h/2), each an h-series
    (tuple of (h-exp, Fraction) pairs) exact mod h^cap.

    Solved from  f(z q^4) (1-z)(1-z q^4) = f(z) (1-z q^2)^2  degree by
    degree; the division by q^(4k) - 1 is an exact Laurent division in h
    (the numerator has h-valuation >= 1), performed at cap+1 and restricted,
    so the results are exact mod h^cap.
    """
    key = (max_deg, cap)
    got = _FCACHE.get(key)
    if got is not None:
        return got
    ctx0 = Context([], cap + 1)

    def qpow(m) -> TruncatedSeries:
        return exp_linear(LF(h=Fraction(m, 2)), ctx0)

    one = TruncatedSeries.const(ctx0, 1)
    fs = [one]
    for k in range(1, max_deg + 1):
        # numerator: f_{k-1} (q^{4k-4} + q^{4k} - 2 q^2) + f_{k-2} (q^4 - q^{4k-4})
        num = fs[k - 1] * (qpow(4 * k - 4) + qpow(4 * k) - qpow(2).scale(2))
        if k >= 2:
            num = num + fs[k - 2] * (qpow(4) - qpow(4 * k - 4))
        den = qpow(4 * k) - one
        if den.hval() != 1:
            raise InternalInvariantError("q^(4k)-1 must have h-valuation 1")
        if num.hval() < 1:
            raise InternalInvariantError("f-recursion numerator must be h-divisible")
        fk = num.divide_h_exact(1) * den.divide_h_exact(1).invert()
        if not fk.is_zero() and fk.hval() < 1:
            raise InternalInvariantError(f"f_{k} must vanish at h = 0")
        fs.append(fk)
    out = []
    for s in fs:
        # zero-variable context: the packed key is the h-exponent
        out.append(tuple(sorted((p, c) for p, c in s.terms.items() if p < cap)))
    _FCACHE[key] = tuple(out)
    return _FCACHE[key]


def f_basis_hcoeffs(cap: int) -> tuple:
    """Coefficients b_1..b_cap of f(z) = 1 + sum b_k (z/(1-z))^k, exact mod
    h^cap, with the h-valuation bound val(b_k) >= k asserted.

    The bound makes the expansion h-adically summable for arguments such as
    e^(2u), which is what renders the exponential form of the elliptic
    entries well-defined.  b_k is recovered from the plain coefficients by
    the triangular relation f_k = sum_j b_j C(k-1, j-1).
    """
    got = _FBASIS_CACHE.get(cap)
    if got is not None:
        return got
    plain = f_hcoeffs(cap, cap)
    ctx0 = Context([], cap)

    def lift(pairs) -> TruncatedSeries:
        return TruncatedSeries(ctx0, {h: c for h, c in pairs if h < cap})

    bs: list[TruncatedSeries] = []
    for k in range(1, cap + 1):
        acc = lift(plain[k])
        for j in range(1, k):
            acc = acc - bs[j - 1].scale(_binom(k - 1, j - 1))
        if not acc.is_zero() and acc.hval() < k:
            raise InternalInvariantError(f"basis coefficient b_{k} violates the "
                                         "h-valuation bound")
        bs.append(acc)
    out = tuple(tuple(sorted(s.terms.items())) for s in bs)
    _FBASIS_CACHE[cap] = out
    return out


def _binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


# -- factory ------------------------------------------------------------------


class RMatrixFactory:
    """Builds R, R*, U and fused products over one expansion context."""

    def __init__(self, params: RParams, ctx: Context, _inner: bool = False):
        self.params = params
        self.ctx = ctx
        self.N = params.N
        if params.family == ELLIPTIC:
            self.fcoeffs = f_hcoeffs(ctx.hcap, ctx.hcap)
            self.fbasis = f_basis_hcoeffs(ctx.hcap)
        else:
            self.fcoeffs = None
            self.fbasis = None
        self._inner = _inner
        self._cache: dict = {}

    # trig building blocks

    def _qfac(self, m: Fraction) -> TruncatedSeries:
        key = ("qfac", m)
        got = self._cache.get(key)
        if got is None:
            got = exp_linear(LF(h=m), self.ctx)
            self._cache[key] = got
        return got

    def g_trig(self, arg: Arg, direction: int = 0) -> TruncatedSeries:
        """g = -e^(h/2) (1 - arg e^h)^(-1)."""
        inv = one_minus_inverse(arg, self.ctx, Fraction(1), direction)
        return inv * self._qfac(Fraction(1, 2)).scale(-1)

    def rbar_two(self, a1: Arg, a2: Arg) -> MatrixSeries:
        """The two-parameter polynomial trigonometric matrix."""
        ctx = self.ctx
        N = self.N
        s1 = a1.series(ctx)
        s2 = a2.series(ctx)
        em = self._qfac(Fraction(-1, 2))
        ep = self._qfac(Fraction(1, 2))
        diag_same = s1 * em - s2 * ep
        diag_diff = s1 - s2
        hopm = (em - ep) * s1
        hopp = (em - ep) * s2
        out = MatrixSeries(ctx, (N, N), {})
        for i in range(N):
            out.set((i, i), (i, i), diag_same)
            for j in range(N):
                if i == j:
                    continue
                out.set((i, j), (i, j), diag_diff)
                out.set((i, j), (j, i), hopm if i > j else hopp)
        return out

    def rbar_norm(self, arg: Arg) -> MatrixSeries:
        """e^(-h/2) * rbar_two(arg, 1): the generalized h-Yangian R-matrix."""
        return self.rbar_two(arg, Arg.make(1)).scale(self._qfac(Fraction(-1, 2)))

    # elliptic building blocks

    def p_sqrt(self, star: bool) -> TruncatedSeries:
        key = ("psqrt", star)
        got = self._cache.get(key)
        if got is None:
            pr = self.params
            got = TruncatedSeries.monomial(self.ctx, {}, pr.p_power, pr.p_coeff)
            if star and pr.shift:
                got = got * exp_linear(LF(h=-pr.shift / 2), self.ctx)
            self._cache[key] = got
        return got

    def _poch_ratio(self, arg: Arg, star: bool, beta: bool) -> TruncatedSeries:
        """(w q arg; p)inf / (w q^-1 arg; p)inf with w = p^(1/2) (alpha) or
        w = -p (beta), times prod_k f(p^k arg^2)."""
        ctx = self.ctx
        ps = self.p_sqrt(star)
        base = arg.series(ctx)
        qp = self._qfac(Fraction(1, 2))
        qm = self._qfac(Fraction(-1, 2))
        one = TruncatedSeries.const(ctx, 1)
        num = one
        den = one
        p_odd = ps if not beta else ps * ps  # p^(1/2) or p^1 starting weight
        sign = Fraction(1) if not beta else Fraction(-1)
        weight = p_odd
        p_full = ps * ps
        while not weight.is_zero():
            num = num * (one - weight * base * qp * TruncatedSeries.const(ctx, sign))
            den = den * (one - weight * base * qm * TruncatedSeries.const(ctx, sign))
            weight = weight * p_full
        ratio = num * den.invert()
        # prod_{k>=1} f(p^k arg^2): arguments carry h-valuation >= 2, so the
        # plain coefficient expansion is h-adically finite
        a2 = arg.square().series(ctx)
        pk = p_full
        while not pk.is_zero():
            ratio = ratio * self._f_hvalued(a2 * pk)
            pk = pk * p_full
        return ratio

    def _lift0(self, pairs) -> TruncatedSeries:
        ctx = self.ctx
        return TruncatedSeries(ctx, {ctx.pack((0,) * ctx.n, h): c
                                     for h, c in pairs if h < ctx.hcap})

    def _f_hvalued(self, w: TruncatedSeries) -> TruncatedSeries:
        """f at an argument series of h-valuation >= 1 (plain coefficients)."""
        if not w.is_zero() and w.hval() < 1:
            raise InternalInvariantError("plain f-expansion requires an h-valued "
                                         "argument")
        ctx = self.ctx
        out = TruncatedSeries.const(ctx, 1)
        w_pow = TruncatedSeries.const(ctx, 1)
        for m in range(1, len(self.fcoeffs)):
            w_pow = w_pow * w
            if w_pow.is_zero():
                return out
            lift = self._lift0(self.fcoeffs[m])
            if not lift.is_zero():
                out = out + w_pow * lift
        return out

    def f_main(self, arg2: Arg, direction: int = 0) -> TruncatedSeries:
        """f at a squared R-matrix argument, via the h-adically summable
        presentation f = 1 + sum_k b_k (w/(1-w))^k with val(b_k) >= k."""
        ctx = self.ctx
        base = arg2.series(ctx) * one_minus_inverse(arg2, ctx, Fraction(0), direction)
        out = TruncatedSeries.const(ctx, 1)
        base_pow = TruncatedSeries.const(ctx, 1)
        for k in range(1, ctx.hcap + 1):
            base_pow = base_pow * base
            if base_pow.is_zero():
                break
            lift = self._lift0(self.fbasis[k - 1])
            if not lift.is_zero():
                out = out + base_pow * lift
        return out

    def ell_entries(self, arg: Arg, star: bool, direction: int = 0
                    ) -> tuple[TruncatedSeries, ...]:
        """(a, b, c, d) of the eight-vertex matrix at the given argument."""
        ctx = self.ctx
        qp = self._qfac(Fraction(1, 4))    # q^(1/2)
        qm = self._qfac(Fraction(-1, 4))
        finv = self.f_main(arg.square(), direction).invert()
        ai = arg.inv()

        def alpha_ratio(neg: bool) -> TruncatedSeries:
            top = self._poch_ratio(ai.neg() if neg else ai, star, beta=False)
            bot = self._poch_ratio(arg.neg() if neg else arg, star, beta=False)
            return top * bot.invert()

        def beta_ratio(neg: bool) -> TruncatedSeries:
            top = self._poch_ratio(ai.neg() if neg else ai, star, beta=True)
            bot = self._poch_ratio(arg.neg() if neg else arg, star, beta=True)
            return top * bot.invert()

        one = TruncatedSeries.const(ctx, 1)
        a_plus_d = qm * finv * alpha_ratio(False)
        a_minus_d = qm * finv * alpha_ratio(True)
        # (1 + q^{-1} arg) / (1 + q arg)  and the minus-signed version
        num_p = one + arg.times_exp(LF(h=Fraction(-1, 2))).series(ctx)
        num_m = one - arg.times_exp(LF(h=Fraction(-1, 2))).series(ctx)
        inv_p = one_minus_inverse(arg.neg(), ctx, Fraction(1, 2), direction)
        inv_m = one_minus_inverse(arg, ctx, Fraction(1, 2), direction)
        b_plus_c = qp * finv * num_p * inv_p * beta_ratio(False)
        b_minus_c = qp * finv * num_m * inv_m * beta_ratio(True)
        half = Fraction(1, 2)
        return ((a_plus_d + a_minus_d).scale(half),
                (b_plus_c + b_minus_c).scale(half),
                (b_plus_c - b_minus_c).scale(half),
                (a_plus_d - a_minus_d).scale(half))

    def ell_matrix(self, arg: Arg, star: bool, direction: int = 0) -> MatrixSeries:
        a, b, c, d = self.ell_entries(arg, star, direction)
        out = MatrixSeries(self.ctx, (2, 2), {})
        out.set((0, 0), (0, 0), a)
        out.set((1, 1), (1, 1), a)
        out.set((0, 0), (1, 1), d)
        out.set((1, 1), (0, 0), d)
        out.set((0, 1), (0, 1), b)
        out.set((1, 0), (1, 0), b)
        out.set((0, 1), (1, 0), c)
        out.set((1, 0), (0, 1), c)
        return out

    def U(self, arg: Arg, direction: int = 0) -> TruncatedSeries:
        """U = e^(-h/2) f(arg^2)^(-1) f(arg^(-2))^(-1); trig: 1."""
        if self.params.family == TRIG:
            return TruncatedSeries.const(self.ctx, 1)
        f1 = self.f_main(arg.square(), direction).invert()
        f2 = self.f_main(arg.inv().square(), direction).invert()
        return self._qfac(Fraction(-1, 2)) * f1 * f2

    # unified entry points

    def _direct_R(self, arg: Arg, star: bool, direction: int) -> MatrixSeries:
        if self.params.family == TRIG:
            g = self.g_trig(arg, direction)
            return self.rbar_two(arg, Arg.make(1)).scale(g)
        return self.ell_matrix(arg, star, direction)

    def R(self, arg: Arg, star: bool = False, direction: int = 0) -> MatrixSeries:
        if arg.is_exp_only() and arg.coeff == 1 and arg.L.coeffs and not self._inner:
            return self.Rexp(arg.L, star=star)
        key = ("R", arg, star, direction)
        got = self._cache.get(key)
        if got is None:
            got = self._direct_R(arg, star, direction)
            self._cache[key] = got
        return got

    def _wfactory(self, hi_needed: int) -> "RMatrixFactory":
        hi = ((hi_needed // 16) + 1) * 16
        key = ("wfac", hi)
        got = self._cache.get(key)
        if got is None:
            wctx = Context([VarSpec("_w", EXP_VAR, -8 * (self.ctx.hcap + 2), hi)],
                           self.ctx.hcap)
            got = RMatrixFactory(self.params, wctx, _inner=True)
            self._cache[key] = got
        return got

    def Rexp(self, L: LinearForm, star: bool = False,
             inverse: bool = False) -> MatrixSeries:
        """Additive form R(e^L)^(+-1) for a linear exponent.

        Built in a private one-variable context and carried over by linear
        substitution: the one-variable computation keeps guaranteed windows
        tight, and the substitution transports them exactly.  A half-turn
        count on L contributes the sign flip e^(m(L+pi i)) = (-1)^m e^(m L).
        """
        if self._inner or not L.coeffs:
            arg = Arg.make(1, None, L)
            out = self._direct_R(arg, star, 0)
            return out.neumann_inverse() if inverse else out
        key = ("Rexp", L, star, inverse)
        got = self._cache.get(key)
        if got is not None:
            return got
        cap = 2 * (self.ctx.hcap - 1) if L.hcoeff else 0
        for nm, _c in L.coeffs:
            cap += max(0, self.ctx.hi[self.ctx.index[nm]])
        wfac = self._wfactory(cap + 16 * (self.ctx.hcap + 2))
        wname = wfac.ctx.names[0]
        wkey = ("wbase", star, inverse)
        base = wfac._cache.get(wkey)
        if base is None:
            base = wfac.R(Arg.make(1, None, LF({wname: 1})), star=star)
            if inverse:
                base = base.neumann_inverse()
            wfac._cache[wkey] = base
        plain = LinearForm(L.coeffs, L.hcoeff, 0)

        def carry(s: TruncatedSeries) -> TruncatedSeries:
            s = s.clip_to_accuracy()
            if L.t:
                s = s.flip_sign(wname, 2)
            return subst_linear(s, wname, plain, self.ctx)

        out = base.map_entries(carry, self.ctx)
        self._cache[key] = out
        return out

    def R_inv(self, arg: Arg, star: bool = False, direction: int = 0) -> MatrixSeries:
        if arg.is_exp_only() and arg.coeff == 1 and arg.L.coeffs and not self._inner:
            return self.Rexp(arg.L, star=star, inverse=True)
        key = ("Rinv", arg, star, direction)
        got = self._cache.get(key)
        if got is None:
            got = self.R(arg, star, direction).neumann_inverse()
            self._cache[key] = got
        return got


# -- ordered fused products ---------------------------------------------------


def ordered_pairs(n: int, m: int, order: str) -> list[tuple[int, int]]:
    """Factor order of the n x m fused products; legs are 0-based, the second
    block occupying positions n..n+m-1.  ``order`` is one of "12", "b12",
    "1b2", "b1b2" (bars mark reversed arrows on the block)."""
    ii = list(range(n))
    jj = list(range(n, n + m))
    if order == "12":        # i ascending, j descending
        return [(i, j) for i in ii for j in reversed(jj)]
    if order == "b12":       # i descending, j descending
        return [(i, j) for i in reversed(ii) for j in reversed(jj)]
    if order == "1b2":       # i ascending, j ascending
        return [(i, j) for i in ii for j in jj]
    if order == "b1b2":      # i descending, j ascending
        return [(i, j) for i in reversed(ii) for j in jj]
    raise DomainError(f"unknown fused order {order!r}")


def fused_product(factory_entry: Callable[[int, int], MatrixSeries],
                  pairs: list[tuple[int, int]], dims: tuple[int, ...],
                  ctx: Context) -> MatrixSeries:
    """Multiply two-leg factors embedded at the given leg pairs, in order."""
    out = MatrixSeries.identity(ctx, dims)
    for (i, j) in pairs:
        out = out @ factory_entry(i, j).embed(dims, (i, j))
    return out


def bracket_pairs(n: int) -> list[tuple[int, int]]:
    """Factor order of R_[n]: i = 1..n-1 ascending, j = i+1..n ascending."""
    return [(i, j) for i in range(n - 1) for j in range(i + 1, n)]
