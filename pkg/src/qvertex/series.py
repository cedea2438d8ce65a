"""Exact truncated arithmetic for iterated Laurent series over the rationals.

A series lives in a fixed expansion context: an ordered tuple of named
variables (the nesting order of the iterated Laurent ring, first variable
dominant) together with a cap K on the deformation parameter h.  Variable
exponents are stored in half-integer units (doubled integers); h-exponents
are plain integers in [0, K).

Truncation semantics: each variable has a hard storage window, and every
series additionally carries the per-variable ceiling up to which its stored
coefficients are guaranteed to equal those of the ideal (untruncated)
series.  Dropping terms above a window ceiling is silent but recorded;
dropping below a window floor is a hard BudgetError, because low Laurent
tails are finite and meaningful and losing them would poison later
products.  Equality and coefficient extraction only answer inside the
guaranteed region, so the engine produces exact values or refuses, never
silent wrong zeros.

Leading terms and expansion directions are decided by the dominance key
(h-exponent, e_n, ..., e_1), compared lexicographically with the smallest
key dominant.  A monomial ratio is geometrically expandable within the
context exactly when its key is positive; this reproduces the standard
embeddings of rational functions into C((x_1))...((x_n))[[h]].
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Mapping, Optional, Sequence

from .errors import ContextMismatchError, DomainError, BudgetError

Rational = Fraction

# Exponent vectors are packed into one integer: slot 0 holds the h-exponent,
# slot i+1 holds variable i's doubled exponent plus an offset.
_RADIX = 1 << 20
_OFF = 1 << 19

_MAX_ITER = 200_000

EXP_VAR = "exp"
LAURENT_VAR = "laurent"


@dataclass(frozen=True)
class VarSpec:
    """One series variable: name, kind and storage window.

    ``lo``/``hi`` are in half-integer units (doubled).  Exp-kind variables
    (u, v, z0, ...) admit only integer exponents, so their doubled
    exponents must be even; laurent-kind variables admit half-integers.
    """

    name: str
    kind: str = EXP_VAR
    lo: int = 0
    hi: int = 0

    def __post_init__(self):
        if self.kind not in (EXP_VAR, LAURENT_VAR):
            raise DomainError(f"unknown variable kind {self.kind!r}")
        if self.lo > self.hi:
            raise DomainError(f"variable {self.name}: empty window [{self.lo},{self.hi}]")
        if self.lo <= -_OFF + 1 or self.hi >= _OFF - 1:
            raise DomainError(f"variable {self.name}: window exceeds packing range")


class Context:
    """An ordered list of variables plus the h-truncation order K."""

    __slots__ = ("vars", "hcap", "n", "names", "index", "lo", "hi", "_sig", "_zero_pack")

    def __init__(self, variables: Sequence[VarSpec], hcap: int):
        if hcap < 1:
            raise DomainError("h-cap must be >= 1")
        names = tuple(v.name for v in variables)
        if len(set(names)) != len(names):
            raise DomainError("duplicate variable names in context")
        self.vars = tuple(variables)
        self.hcap = hcap
        self.n = len(self.vars)
        self.names = names
        self.index = {v.name: i for i, v in enumerate(self.vars)}
        self.lo = tuple(v.lo for v in self.vars)
        self.hi = tuple(v.hi for v in self.vars)
        self._sig = "|".join(f"{v.name}:{v.kind}:{v.lo}:{v.hi}" for v in self.vars) \
            + f"#h^{hcap}"
        p = 0
        for _ in range(self.n):
            p = p * _RADIX + _OFF
        self._zero_pack = p * _RADIX

    def signature(self) -> str:
        return self._sig

    def __eq__(self, other):
        return isinstance(other, Context) and self._sig == other._sig

    def __hash__(self):
        return hash(self._sig)

    def __repr__(self):
        return f"Context({self._sig})"

    def pack(self, exps: Sequence[int], h: int) -> int:
        p = 0
        for e in exps:
            p = p * _RADIX + (e + _OFF)
        return p * _RADIX + h

    def unpack(self, p: int) -> tuple[tuple[int, ...], int]:
        h = p % _RADIX
        p //= _RADIX
        out = [0] * self.n
        for i in range(self.n - 1, -1, -1):
            out[i] = p % _RADIX - _OFF
            p //= _RADIX
        return tuple(out), h

    def dominance_key(self, p: int) -> tuple[int, ...]:
        exps, h = self.unpack(p)
        return (h,) + tuple(reversed(exps))

    def spec(self, name: str) -> VarSpec:
        return self.vars[self.index[name]]


def _require_same_ctx(a: "TruncatedSeries", b: "TruncatedSeries"):
    if a.ctx is not b.ctx and a.ctx != b.ctx:
        raise ContextMismatchError(f"{a.ctx.signature()} vs {b.ctx.signature()}")


@dataclass(frozen=True)
class LinearForm:
    """A rational-linear exponent: sum(coeffs[v]*v) + hcoeff*h + t*pi*i.

    The half-turn count t enters only as a global sign (-1)**t on
    exponentials; it never produces complex series coefficients.
    """

    coeffs: tuple[tuple[str, Fraction], ...] = ()
    hcoeff: Fraction = Fraction(0)
    t: int = 0

    @staticmethod
    def make(coeffs: Mapping[str, Fraction | int] | None = None,
             h: Fraction | int = 0, t: int = 0) -> "LinearForm":
        items = tuple(sorted((k, Fraction(v)) for k, v in (coeffs or {}).items() if v != 0))
        return LinearForm(items, Fraction(h), t % 2)

    def scale(self, q: Fraction | int) -> "LinearForm":
        q = Fraction(q)
        tq = q * self.t
        if tq.denominator != 1:
            raise DomainError("half-turn count does not scale to an integer")
        return LinearForm(tuple((k, c * q) for k, c in self.coeffs), self.hcoeff * q,
                          int(tq) % 2)

    def __add__(self, other: "LinearForm") -> "LinearForm":
        d = dict(self.coeffs)
        for k, c in other.coeffs:
            d[k] = d.get(k, Fraction(0)) + c
        return LinearForm.make(d, self.hcoeff + other.hcoeff, self.t + other.t)

    def is_zero(self) -> bool:
        return not self.coeffs and self.hcoeff == 0 and self.t == 0


def LF(coeffs=None, h=0, t=0) -> LinearForm:
    """Shorthand constructor for :class:`LinearForm`."""
    return LinearForm.make(coeffs, h, t)


_INF = 1 << 40


class TruncatedSeries:
    """Immutable sparse series over a :class:`Context`.

    ``terms`` maps packed exponent keys to nonzero Fractions.  ``acc_hi``
    bounds the guaranteed-exact ceiling per variable and per h-level: the
    coefficient of v^e h^j is guaranteed for e <= acc_hi[v][j].  The
    per-level resolution matters because negative Laurent depth grows with
    the h-order, so products lose far less accuracy at low h-levels than a
    global ceiling would indicate.  ``exhi[v][j]`` records whether the ideal
    series is known to have no h-level-j support above the ceiling (higher
    coefficients are then known zeros rather than unknowns); classical
    (h-level-0) parts typically stay exact forever.  Low sides are
    always exact by construction.  ``hacc`` is the h-order up to which
    coefficients are guaranteed at all (== hcap unless an exact h-division
    happened upstream).
    """

    __slots__ = ("ctx", "terms", "acc_hi", "exhi", "hacc",
                 "_supmin", "_supmax", "_hval", "_lvlmin", "_haslvl")

    def __init__(self, ctx: Context, terms: dict[int, Fraction],
                 acc_hi: tuple[tuple[int, ...], ...] | None = None,
                 exhi: tuple[bool, ...] | None = None,
                 hacc: int | None = None):
        self.ctx = ctx
        self.terms = terms
        if acc_hi is None:
            self.acc_hi = tuple((h,) * ctx.hcap for h in ctx.hi)
        else:
            self.acc_hi = acc_hi
        if exhi is None:
            self.exhi = ((True,) * ctx.hcap,) * ctx.n
        else:
            self.exhi = exhi
        self.hacc = hacc if hacc is not None else ctx.hcap
        self._supmin = None
        self._supmax = None
        self._hval = None
        self._lvlmin = None
        self._haslvl = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(ctx: Context) -> "TruncatedSeries":
        return TruncatedSeries(ctx, {})

    @staticmethod
    def const(ctx: Context, value) -> "TruncatedSeries":
        value = Fraction(value)
        if value == 0:
            return TruncatedSeries.zero(ctx)
        return TruncatedSeries(ctx, {ctx._zero_pack: value})

    @staticmethod
    def monomial(ctx: Context, exps: Mapping[str, int] | None = None, h: int = 0,
                 coeff=Fraction(1)) -> "TruncatedSeries":
        """A single term; ``exps`` are doubled (half-integer-unit) exponents."""
        coeff = Fraction(coeff)
        if coeff == 0:
            return TruncatedSeries.zero(ctx)
        if h < 0:
            raise DomainError("negative h-exponent")
        if h >= ctx.hcap:
            return TruncatedSeries.zero(ctx)
        vec = [0] * ctx.n
        for name, e in (exps or {}).items():
            i = ctx.index[name]
            v = ctx.vars[i]
            if v.kind == EXP_VAR and e % 2:
                raise DomainError(f"half-integer exponent on exp-variable {name}")
            if e < v.lo:
                raise BudgetError(f"monomial exponent {Fraction(e,2)} below window of {name}",
                                  hint=f"lower the floor of {name}")
            if e > v.hi:
                # above-window support is representable as an empty series
                # that is inexact above the ceiling at this h-level
                exhi = tuple(
                    tuple(ctx.names[j] != name or lev != h for lev in range(ctx.hcap))
                    for j in range(ctx.n))
                return TruncatedSeries(ctx, {}, None, exhi, None)
            vec[i] = e
        return TruncatedSeries(ctx, {ctx.pack(vec, h): coeff})

    def _level_min(self) -> tuple[tuple[int, ...], ...]:
        """Per-variable, per-h-level minimal stored exponents (INF if none)."""
        if self._lvlmin is None:
            ctx = self.ctx
            arr = [[_INF] * ctx.hcap for _ in range(ctx.n)]
            has = [False] * ctx.hcap
            for p in self.terms:
                exps, h = ctx.unpack(p)
                has[h] = True
                for i, e in enumerate(exps):
                    if e < arr[i][h]:
                        arr[i][h] = e
            self._lvlmin = tuple(tuple(row) for row in arr)
            self._haslvl = tuple(has)
        return self._lvlmin

    def _has_level(self) -> tuple[bool, ...]:
        if self._haslvl is None:
            self._level_min()
        return self._haslvl

    # -- metadata -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def support_min(self) -> tuple[int, ...]:
        if self._supmin is None:
            self._profile()
        return self._supmin

    def support_max(self) -> tuple[int, ...]:
        if self._supmax is None:
            self._profile()
        return self._supmax

    def hval(self) -> int:
        """Minimal h-exponent of the stored support (hcap when zero)."""
        if self._hval is None:
            self._profile()
        return self._hval

    def _profile(self):
        n = self.ctx.n
        if not self.terms:
            self._supmin = (0,) * n
            self._supmax = (0,) * n
            self._hval = self.ctx.hcap
            return
        mins = [None] * n
        maxs = [None] * n
        hv = None
        for p in self.terms:
            exps, h = self.ctx.unpack(p)
            hv = h if hv is None or h < hv else hv
            for i, e in enumerate(exps):
                if mins[i] is None or e < mins[i]:
                    mins[i] = e
                if maxs[i] is None or e > maxs[i]:
                    maxs[i] = e
        self._supmin = tuple(mins)
        self._supmax = tuple(maxs)
        self._hval = hv

    def accurate_window(self) -> dict:
        """The guaranteed-exact region, for reporting and window checks."""
        return {
            "vars": {v.name: {"lo": self.ctx.lo[i], "hi": list(self.acc_hi[i]),
                              "exact_above": list(self.exhi[i])}
                     for i, v in enumerate(self.ctx.vars)},
            "h": self.hacc,
        }

    def acc_floor(self, i: int) -> int:
        """The per-variable ceiling valid at every guaranteed h-level."""
        return min(self.acc_hi[i][: max(1, self.hacc)])

    def covers_box(self, box: Mapping[str, tuple[int, int]] | None = None,
                   h: int | None = None) -> bool:
        """True when the guaranteed region contains the doubled-exponent box."""
        h = self.ctx.hcap if h is None else h
        if self.hacc < h:
            return False
        for name, (lo, hi) in (box or {}).items():
            i = self.ctx.index[name]
            if lo < self.ctx.lo[i]:
                return False
            if any(hi > self.acc_hi[i][j] and not self.exhi[i][j]
                   for j in range(h)):
                return False
        return True

    # -- accuracy combination -----------------------------------------------

    @staticmethod
    def _combine_acc(ctx: Context, a: "TruncatedSeries", b: "TruncatedSeries",
                     product: bool):
        """Guaranteed ceilings of a sum or product.

        For a product, an unknown term of one factor above its ceiling at
        h-level j_a can reach level j = j_a + j_b only through partners at
        level j_b, whose minimal exponents bound how far down the
        contamination reaches; tracking this per level captures that the
        Laurent depth of the partners grows with their h-order.
        """
        n = ctx.n
        cap = ctx.hcap
        if not product:
            exhi = tuple(tuple(x and y for x, y in zip(a.exhi[i], b.exhi[i]))
                         for i in range(n))
            hi = []
            for i in range(n):
                hi.append(tuple(
                    min(a.acc_hi[i][j] if not a.exhi[i][j] else _INF,
                        b.acc_hi[i][j] if not b.exhi[i][j] else _INF,
                        ctx.hi[i]) for j in range(cap)))
            return tuple(hi), exhi, min(a.hacc, b.hacc)

        amin = a._level_min()
        bmin = b._level_min()
        ahas = a._has_level()
        bhas = b._has_level()
        hi = []
        exhi = []
        for i in range(n):
            arow_hi = a.acc_hi[i]
            brow_hi = b.acc_hi[i]
            arow_ex = a.exhi[i]
            brow_ex = b.exhi[i]
            arow_min = amin[i]
            brow_min = bmin[i]
            row = []
            erow = []
            for j in range(cap):
                best = ctx.hi[i]
                exact = True
                for ja in range(j + 1):
                    jb = j - ja
                    if not arow_ex[ja] and bhas[jb]:
                        exact = False
                        c = arow_hi[ja] + brow_min[jb]
                        if c < best:
                            best = c
                    if not brow_ex[jb] and ahas[ja]:
                        exact = False
                        c = brow_hi[jb] + arow_min[ja]
                        if c < best:
                            best = c
                row.append(best)
                erow.append(exact)
            hi.append(tuple(row))
            exhi.append(tuple(erow))
        ha = cap if a.hacc >= cap else a.hacc + b.hval()
        hb = cap if b.hacc >= cap else b.hacc + a.hval()
        return tuple(hi), tuple(exhi), min(cap, ha, hb)

    # -- ring operations ------------------------------------------------------

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        _require_same_ctx(self, other)
        big, small = (self.terms, other.terms) if len(self.terms) >= len(other.terms) \
            else (other.terms, self.terms)
        out = dict(big)
        for p, c in small.items():
            s = out.get(p)
            if s is None:
                out[p] = c
            else:
                s = s + c
                if s:
                    out[p] = s
                else:
                    del out[p]
        hi, exhi, hacc = self._combine_acc(self.ctx, self, other, False)
        return TruncatedSeries(self.ctx, out, hi, exhi, hacc)

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.ctx, {p: -c for p, c in self.terms.items()},
                               self.acc_hi, self.exhi, self.hacc)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        return self + (-other)

    def scale(self, value) -> "TruncatedSeries":
        value = Fraction(value)
        if value == 0:
            return TruncatedSeries(self.ctx, {}, self.acc_hi, self.exhi, self.hacc)
        return TruncatedSeries(self.ctx, {p: c * value for p, c in self.terms.items()},
                               self.acc_hi, self.exhi, self.hacc)

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        _require_same_ctx(self, other)
        ctx = self.ctx
        if not self.terms or not other.terms:
            hi, exhi, hacc = self._combine_acc(ctx, self, other, True)
            return TruncatedSeries(ctx, {}, hi, exhi, hacc)
        a, b = (self, other) if len(self.terms) <= len(other.terms) else (other, self)

        # Integer-normalized convolution: far cheaper than Fraction products.
        da = _common_den(a.terms)
        db = _common_den(b.terms)
        aitems = [(p, int(c * da)) for p, c in a.terms.items()]
        bitems = [(p, int(c * db)) for p, c in b.terms.items()]

        zero_pack = ctx._zero_pack
        cap = ctx.hcap
        n = ctx.n
        amin, amax = a.support_min(), a.support_max()
        bmin, bmax = b.support_min(), b.support_max()
        all_inside = all(amax[i] + bmax[i] <= ctx.hi[i] and
                         amin[i] + bmin[i] >= ctx.lo[i] for i in range(n))

        out: dict[int, int] = {}
        get = out.get
        dropped_hi = [[False] * cap for _ in range(n)]
        if all_inside:
            for pa, ca in aitems:
                base = pa - zero_pack
                for pb, cb in bitems:
                    p = base + pb
                    if p % _RADIX >= cap:
                        continue
                    s = get(p)
                    out[p] = cb * ca if s is None else s + cb * ca
        else:
            # a term above any ceiling drops (recorded); a term below a floor
            # while inside every ceiling is a hard budget violation
            hi_w, lo_w = ctx.hi, ctx.lo
            unpack = ctx.unpack
            ea_cache = {pa: unpack(pa)[0] for pa, _ in aitems}
            eb_cache = {pb: unpack(pb)[0] for pb, _ in bitems}
            for pa, ca in aitems:
                base = pa - zero_pack
                ea = ea_cache[pa]
                for pb, cb in bitems:
                    p = base + pb
                    if p % _RADIX >= cap:
                        continue
                    eb = eb_cache[pb]
                    over = -1
                    under = -1
                    for i in range(n):
                        e = ea[i] + eb[i]
                        if e > hi_w[i]:
                            over = i
                            break
                        if under < 0 and e < lo_w[i]:
                            under = i
                    if over >= 0:
                        dropped_hi[over][p % _RADIX] = True
                        continue
                    if under >= 0:
                        raise BudgetError(
                            f"product term of {ctx.names[under]} falls below its "
                            "window floor",
                            hint=f"lower the floor of {ctx.names[under]}")
                    s = get(p)
                    out[p] = cb * ca if s is None else s + cb * ca
        den = da * db
        terms = {}
        for p, c in out.items():
            if c:
                terms[p] = Fraction(c, den)
        hi, exhi, hacc = self._combine_acc(ctx, a, b, True)
        if not all_inside:
            exhi = tuple(tuple(exhi[i][j] and not dropped_hi[i][j]
                               for j in range(cap)) for i in range(n))
        return TruncatedSeries(ctx, terms, hi, exhi, hacc)

    def shift(self, exps: Mapping[str, int] | None = None, h: int = 0,
              coeff=Fraction(1)) -> "TruncatedSeries":
        """Multiply by a single monomial (doubled exponents)."""
        return self * TruncatedSeries.monomial(self.ctx, exps, h, coeff)

    def power(self, k: int) -> "TruncatedSeries":
        if k < 0:
            raise DomainError("use invert() for negative powers")
        out = TruncatedSeries.const(self.ctx, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    # -- inversion and division ----------------------------------------------

    def leading_term(self) -> tuple[int, Fraction]:
        """The dominant (minimal-key) stored term."""
        if not self.terms:
            raise DomainError("zero series has no leading term")
        p = min(self.terms, key=self.ctx.dominance_key)
        return p, self.terms[p]

    def invert(self) -> "TruncatedSeries":
        """Inverse via the leading monomial and a geometric tail sum.

        Requires the dominant monomial to carry h-exponent 0, otherwise the
        inverse would leave the h-adic ring.
        """
        ctx = self.ctx
        p0, c0 = self.leading_term()
        exps, h0 = ctx.unpack(p0)
        if h0 != 0:
            raise DomainError("leading term carries a positive h-power; "
                              "not invertible in [[h]]")
        inv_mono = TruncatedSeries.monomial(
            ctx, {v.name: -exps[i] for i, v in enumerate(ctx.vars) if exps[i]},
            0, Fraction(1) / c0)
        n_ser = self * inv_mono - TruncatedSeries.const(ctx, 1)
        acc = TruncatedSeries.const(ctx, 1)
        term = TruncatedSeries.const(ctx, 1)
        it = 0
        while not n_ser.is_zero():
            term = term * n_ser
            # zero terms still carry truncation records that must merge in
            acc = acc - term if it % 2 == 0 else acc + term
            if term.is_zero():
                break
            it += 1
            if it > _MAX_ITER:
                raise BudgetError("inversion tail did not terminate",
                                  hint="check dominance of correction terms")
        return acc * inv_mono

    def divide_h_exact(self, j: int) -> "TruncatedSeries":
        """Exact division by h**j; the guaranteed h-order drops by j."""
        if j == 0:
            return self
        out = {}
        for p, c in self.terms.items():
            if p % _RADIX < j:
                raise DomainError(f"series not divisible by h^{j}")
            out[p - j] = c
        cap = self.ctx.hcap
        acc = tuple(tuple(row[min(lev + j, cap - 1)] for lev in range(cap))
                    for row in self.acc_hi)
        exhi = tuple(tuple(row[min(lev + j, cap - 1)] for lev in range(cap))
                     for row in self.exhi)
        return TruncatedSeries(self.ctx, out, acc, exhi,
                               max(0, self.hacc - j))

    def flip_sign(self, name: str, step: int = 1) -> "TruncatedSeries":
        """Negate coefficients whose doubled exponent of ``name`` is an odd
        multiple of ``step``.

        With the default step this realizes var^(1/2) -> -var^(1/2) (the
        additive half-turn shift on the variable's logarithm); step 2 flips
        integer powers, i.e. var -> -var.
        """
        i = self.ctx.index[name]
        div = _RADIX ** (self.ctx.n - i)
        out = {}
        for p, c in self.terms.items():
            e = (p // div) % _RADIX - _OFF
            out[p] = -c if (e // step) % 2 else c
        return TruncatedSeries(self.ctx, out, self.acc_hi, self.exhi, self.hacc)

    # -- extraction, comparison, serialization --------------------------------

    def coeff(self, exps: Mapping[str, int] | None = None, h: int = 0) -> Fraction:
        """Exact coefficient at the given doubled exponents; refuses to answer
        outside the guaranteed region."""
        ctx = self.ctx
        if h >= self.hacc:
            raise BudgetError(f"h^{h} outside guaranteed h-window (< {self.hacc})",
                              hint="rebuild with a larger h-cap")
        vec = [0] * ctx.n
        for name, e in (exps or {}).items():
            i = ctx.index[name]
            if e < ctx.lo[i]:
                raise BudgetError(f"exponent {Fraction(e,2)} of {name} below window")
            if e > self.acc_hi[i][h]:
                if self.exhi[i][h]:
                    return Fraction(0)
                raise BudgetError(f"exponent {Fraction(e,2)} of {name} above "
                                  "guaranteed window",
                                  hint=f"enlarge window of {name}")
            vec[i] = e
        return self.terms.get(ctx.pack(vec, h), Fraction(0))

    def clip_to_accuracy(self) -> "TruncatedSeries":
        """Drop stored terms outside the guaranteed region.

        Such terms carry no information (their true values are unknown);
        clipping them keeps iterations like Neumann inversion from chasing
        phantom tails.  Accuracy metadata is unchanged.
        """
        ctx = self.ctx
        out = {}
        for p, c in self.terms.items():
            exps, h = ctx.unpack(p)
            if h >= self.hacc:
                continue
            if any(e > self.acc_hi[i][h] and not self.exhi[i][h]
                   for i, e in enumerate(exps)):
                continue
            out[p] = c
        if len(out) == len(self.terms):
            return self
        return TruncatedSeries(ctx, out, self.acc_hi, self.exhi, self.hacc)

    def restrict_h(self, newcap: int) -> "TruncatedSeries":
        """Reinterpret in a context with a smaller h-cap."""
        if newcap > self.ctx.hcap:
            raise DomainError("cannot raise the h-cap by restriction")
        ctx2 = Context(self.ctx.vars, newcap)
        out = {p: c for p, c in self.terms.items() if p % _RADIX < newcap}
        return TruncatedSeries(ctx2, out, tuple(row[:newcap] for row in self.acc_hi),
                               tuple(row[:newcap] for row in self.exhi),
                               min(self.hacc, newcap))

    def reorder_to(self, ctx2: Context) -> "TruncatedSeries":
        """Re-express in another context containing the same-named variables.

        Pure coefficient transport: exponents are permuted by name, missing
        target variables get exponent zero.  Only expansion decisions depend
        on the order, so transported coefficients stay exact; narrower
        target ceilings drop terms with the exactness flag cleared, narrower
        floors are a budget error.
        """
        src = self.ctx
        perm = []
        for i, v in enumerate(src.vars):
            if v.name not in ctx2.index:
                if self.support_min()[i] == 0 and self.support_max()[i] == 0:
                    perm.append(-1)  # unused variable, drop silently
                    continue
                raise DomainError(f"target context lacks variable {v.name}")
            j = ctx2.index[v.name]
            if self.support_min()[i] < ctx2.lo[j]:
                raise BudgetError(f"reorder would drop low terms of {v.name}",
                                  hint=f"lower the floor of {v.name}")
            perm.append(j)
        out: dict[int, Fraction] = {}
        dropped_hi = [[False] * ctx2.hcap for _ in range(ctx2.n)]
        for p, c in self.terms.items():
            exps, h = src.unpack(p)
            if h >= ctx2.hcap:
                continue
            vec = [0] * ctx2.n
            ok = True
            for i, e in enumerate(exps):
                j = perm[i]
                if j < 0:
                    continue
                if e > ctx2.hi[j]:
                    dropped_hi[j][h] = True
                    ok = False
                    break
                vec[j] = e
            if ok:
                out[ctx2.pack(vec, h)] = c
        hi = [[ctx2.hi[j]] * ctx2.hcap for j in range(ctx2.n)]
        exhi = [[True] * ctx2.hcap for _ in range(ctx2.n)]
        for i in range(src.n):
            j = perm[i]
            if j < 0:
                continue
            for lev in range(ctx2.hcap):
                hi[j][lev] = min(ctx2.hi[j], self.acc_hi[i][lev])
                exhi[j][lev] = self.exhi[i][lev] and not dropped_hi[j][lev]
        return TruncatedSeries(ctx2, out, tuple(tuple(r) for r in hi),
                               tuple(tuple(r) for r in exhi),
                               min(self.hacc, ctx2.hcap))

    def equal_on_common(self, other: "TruncatedSeries") -> tuple[bool, Optional[str]]:
        """Compare wherever both guaranteed regions overlap.

        Returns (equal, witness); the witness names the first differing
        monomial.  Terms outside either guaranteed region are ignored.
        """
        _require_same_ctx(self, other)
        ctx = self.ctx
        hmin = min(self.hacc, other.hacc)

        def known(s: "TruncatedSeries", exps, h) -> bool:
            if h >= hmin:
                return False
            for i, e in enumerate(exps):
                if e > s.acc_hi[i][h] and not s.exhi[i][h]:
                    return False
            return True

        diffs = []
        for p in set(self.terms) | set(other.terms):
            ca = self.terms.get(p, Fraction(0))
            cb = other.terms.get(p, Fraction(0))
            if ca == cb:
                continue
            exps, h = ctx.unpack(p)
            if known(self, exps, h) and known(other, exps, h):
                diffs.append((ctx.dominance_key(p), exps, h, ca, cb))
        if not diffs:
            return True, None
        _, exps, h, ca, cb = min(diffs)
        return False, f"{_monomial_str(ctx, exps, h)}: {ca} != {cb}"

    def nonzero_witness(self) -> Optional[str]:
        """First guaranteed-region nonzero term, or None if zero there."""
        ctx = self.ctx
        for p, c in sorted(self.terms.items(), key=lambda kv: ctx.dominance_key(kv[0])):
            exps, h = ctx.unpack(p)
            if h >= self.hacc:
                continue
            if all(e <= self.acc_hi[i][h] or self.exhi[i][h]
                   for i, e in enumerate(exps)):
                return f"{_monomial_str(ctx, exps, h)}: {c}"
        return None

    def serialize(self) -> str:
        """Canonical text form: context line, accuracy line, sorted term lines."""
        ctx = self.ctx
        lines = [f"ctx {ctx.signature()}",
                 "acc " + " ".join(
                     ",".join(str(x) for x in self.acc_hi[i]) + ":"
                     + "".join(str(int(f)) for f in self.exhi[i])
                     for i in range(ctx.n)) + f" h:{self.hacc}"]
        rows = []
        for p, c in self.terms.items():
            exps, h = ctx.unpack(p)
            rows.append((exps, h, c))
        rows.sort()
        for exps, h, c in rows:
            lines.append(" ".join(str(e) for e in exps)
                         + f" {h} : {c.numerator}/{c.denominator}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str, ctx: Context) -> "TruncatedSeries":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("ctx "):
            raise DomainError("malformed series text: missing ctx line")
        if lines[0][4:].strip() != ctx.signature():
            raise ContextMismatchError("serialized context does not match")
        if len(lines) < 2 or not lines[1].startswith("acc "):
            raise DomainError("malformed series text: missing acc line")
        accs = lines[1][4:].split()
        if len(accs) != ctx.n + 1 or not accs[-1].startswith("h:"):
            raise DomainError("malformed accuracy line")
        hi, exhi = [], []
        for tok in accs[:-1]:
            a, b = tok.split(":")
            hi.append(tuple(int(x) for x in a.split(",")))
            exhi.append(tuple(ch == "1" for ch in b))
        hacc = int(accs[-1][2:])
        terms = {}
        for ln in lines[2:]:
            head, frac = ln.split(":")
            parts = head.split()
            if len(parts) != ctx.n + 1:
                raise DomainError("malformed term line")
            exps = tuple(int(x) for x in parts[:ctx.n])
            h = int(parts[ctx.n])
            num, den = frac.strip().split("/")
            c = Fraction(int(num), int(den))
            if c:
                terms[ctx.pack(exps, h)] = c
        return TruncatedSeries(ctx, terms, tuple(hi), tuple(exhi), hacc)

    def __repr__(self):
        items = sorted(self.terms.items(), key=lambda kv: self.ctx.dominance_key(kv[0]))
        body = " + ".join(f"{c}*{_monomial_str(self.ctx, *self.ctx.unpack(p))}"
                          for p, c in items[:8])
        more = "" if len(items) <= 8 else f" + ... ({len(items)} terms)"
        return f"<Series {body or '0'}{more}>"


def _common_den(terms: dict[int, Fraction]) -> int:
    den = 1
    for c in terms.values():
        d = c.denominator
        den = den // gcd(den, d) * d
    return den


def _monomial_str(ctx: Context, exps: Sequence[int], h: int) -> str:
    parts = [f"{ctx.vars[i].name}^{Fraction(e, 2)}" for i, e in enumerate(exps) if e]
    if h:
        parts.append(f"h^{h}")
    return "*".join(parts) if parts else "1"


# -- transcendental and embedding helpers -------------------------------------


def exp_linear(L: LinearForm, ctx: Context) -> TruncatedSeries:
    """exp of a rational-linear form in exp-variables and h, truncated.

    The half-turn count contributes the exact global sign (-1)**t.
    """
    lin = TruncatedSeries.zero(ctx)
    for name, c in L.coeffs:
        if ctx.spec(name).kind != EXP_VAR:
            raise DomainError(f"exp of Laurent-type variable {name}")
        lin = lin + TruncatedSeries.monomial(ctx, {name: 2}, 0, c)
    if L.hcoeff:
        lin = lin + TruncatedSeries.monomial(ctx, {}, 1, L.hcoeff)
    out = TruncatedSeries.const(ctx, 1)
    term = TruncatedSeries.const(ctx, 1)
    a = 0
    while not lin.is_zero():
        a += 1
        term = (term * lin).scale(Fraction(1, a))
        out = out + term
        if term.is_zero():
            break
        if a > _MAX_ITER:
            raise BudgetError("exp expansion did not terminate")
    return -out if L.t else out


def geom_inv_binomial(c, mono: Mapping[str, int], L: LinearForm, ctx: Context,
                      direction: int = 0) -> TruncatedSeries:
    """The embedding of (1 - c*mono*e^L)^(-1) into the context's ring.

    ``mono`` holds doubled exponents.  With ``direction`` 0 the expansion
    side is selected by the dominance key of the monomial; +1 forces the
    geometric sum in c*mono*e^L, -1 forces the reversed expansion
    -sum_{k>=1} (c*mono*e^L)^(-k).
    """
    c = Fraction(c)
    if c == 0:
        return TruncatedSeries.const(ctx, 1)
    if direction == 0:
        key = _mono_key(ctx, mono)
        if all(k == 0 for k in key):
            raise DomainError("unit ratio: expansion direction undecidable; use invert")
        direction = 1 if key > (0,) * len(key) else -1
    sign = 1 if L.t == 0 else -1
    plain = LinearForm(L.coeffs, L.hcoeff, 0)
    if direction == 1:
        ratio = TruncatedSeries.monomial(ctx, mono, 0, c * sign) * exp_linear(plain, ctx)
        acc = TruncatedSeries.const(ctx, 1)
        term = TruncatedSeries.const(ctx, 1)
    else:
        inv_mono = {k: -v for k, v in mono.items()}
        ratio = TruncatedSeries.monomial(ctx, inv_mono, 0, sign / c) * \
            exp_linear(plain.scale(-1), ctx)
        acc = TruncatedSeries.zero(ctx)
        term = TruncatedSeries.const(ctx, -1)
    it = 0
    while True:
        term = term * ratio
        acc = acc + term
        if term.is_zero():
            break
        it += 1
        if it > _MAX_ITER:
            raise BudgetError("geometric expansion did not terminate",
                              hint="enlarge windows or check dominance")
    return acc


def _mono_key(ctx: Context, mono: Mapping[str, int]) -> tuple[int, ...]:
    vec = [0] * ctx.n
    for name, e in mono.items():
        vec[ctx.index[name]] = e
    return (0,) + tuple(reversed(vec))


def _check_subst_accuracy(s: TruncatedSeries, i0: int, safe_escape: bool, what: str):
    if not all(s.exhi[i0][: max(1, s.hacc)]) and not safe_escape:
        raise BudgetError(
            f"substituted variable {s.ctx.names[i0]} has unknown high terms that land "
            f"inside the target window ({what})",
            hint=f"enlarge window of {s.ctx.names[i0]} before substituting")


def substitute(s: TruncatedSeries, name: str, mono: Mapping[str, int],
               L: LinearForm, ctx2: Context, coeff=Fraction(1)) -> TruncatedSeries:
    """Substitute  var -> coeff * mono * e^L  (mono in doubled exponents of ctx2).

    Powers of the variable map to monomial powers times exp_linear of the
    scaled form, so negative powers need no series inversion.  Every other
    variable must exist in the target context.  A rational ``coeff`` other
    than 1 requires integer powers of the substituted variable; signs for
    half-integer substitutions go through flip_sign on the caller's side.
    """
    src = s.ctx
    if L.t:
        raise DomainError("half-turn substitutions are realized via flip_sign")
    i0 = src.index[name]

    # Unknown high powers of the substituted variable are harmless only when
    # the monomial part maps them beyond the target window in some variable.
    if not all(s.exhi[i0][: max(1, s.hacc)]):
        thr = s.acc_floor(i0) + 1
        escapes = False
        for nm, b in mono.items():
            if b == 0:
                continue
            j = ctx2.index[nm]
            ee = Fraction(b * thr, 2)
            if b > 0 and ee > ctx2.hi[j]:
                escapes = True
            if b < 0 and ee < ctx2.lo[j]:
                escapes = True
        _check_subst_accuracy(s, i0, escapes, "monomial substitution")

    def carry(name: str) -> str:
        if name not in ctx2.index:
            raise DomainError(f"target context lacks variable {name}")
        return name

    factor_cache: dict[int, TruncatedSeries] = {}
    out = TruncatedSeries.zero(ctx2)
    for p, c in s.terms.items():
        exps, h = src.unpack(p)
        if h >= ctx2.hcap:
            continue
        m = exps[i0]
        factor = factor_cache.get(m)
        if factor is None:
            half = Fraction(m, 2)
            mexp = {}
            for nm, e in mono.items():
                ee = Fraction(e) * half
                if ee.denominator != 1:
                    raise DomainError("substitution produces quarter-integer exponents")
                mexp[nm] = int(ee)
            if coeff != 1:
                if half.denominator != 1:
                    raise DomainError("rational substitution coefficient on a "
                                      "half-integer power")
                cc = Fraction(coeff) ** int(half)
            else:
                cc = Fraction(1)
            factor = TruncatedSeries.monomial(ctx2, mexp, 0, cc)
            if not L.is_zero() and not factor.is_zero():
                factor = factor * exp_linear(L.scale(half), ctx2)
            factor_cache[m] = factor
        tgt = {carry(src.names[i]): e for i, e in enumerate(exps) if i != i0 and e != 0}
        out = out + factor * TruncatedSeries.monomial(ctx2, tgt, h, c)
    return out


def subst_linear(s: TruncatedSeries, name: str, L: LinearForm,
                 ctx2: Context) -> TruncatedSeries:
    """Substitute an exp-variable by a rational-linear form: var -> L.

    Positive powers become powers of the degree-one series of L in the
    target context; negative powers go through a single series inversion.
    """
    src = s.ctx
    if L.t:
        raise DomainError("half-turn substitutions are realized via flip_sign")
    if src.spec(name).kind != EXP_VAR:
        raise DomainError("linear substitution requires an exp-variable")
    i0 = src.index[name]
    if not all(s.exhi[i0][: max(1, s.hacc)]):
        # L is homogeneous of degree one: power k occupies total degree k,
        # so unknown powers escape once they exceed the target's capacity.
        capacity = 2 * (ctx2.hcap - 1 if L.hcoeff else 0)
        for nm, _ in L.coeffs:
            j = ctx2.index[nm]
            capacity += max(0, ctx2.hi[j])
        _check_subst_accuracy(s, i0, s.acc_floor(i0) >= capacity,
                               "linear substitution")

    def carry(name: str) -> str:
        if name not in ctx2.index:
            raise DomainError(f"target context lacks variable {name}")
        return name

    base = TruncatedSeries.zero(ctx2)
    for nm, c in L.coeffs:
        base = base + TruncatedSeries.monomial(ctx2, {nm: 2}, 0, c)
    if L.hcoeff:
        base = base + TruncatedSeries.monomial(ctx2, {}, 1, L.hcoeff)
    pow_cache: dict[int, TruncatedSeries] = {0: TruncatedSeries.const(ctx2, 1)}
    inv_base: list[TruncatedSeries] = []

    def var_power(m: int) -> TruncatedSeries:
        got = pow_cache.get(m)
        if got is not None:
            return got
        if m > 0:
            out = var_power(m - 1) * base
        else:
            if not inv_base:
                inv_base.append(base.invert())
            out = var_power(m + 1) * inv_base[0]
        pow_cache[m] = out
        return out

    out = TruncatedSeries.zero(ctx2)
    for p, c in s.terms.items():
        exps, h = src.unpack(p)
        if h >= ctx2.hcap:
            continue
        m2 = exps[i0]
        if m2 % 2:
            raise DomainError("half-integer power of an exp-variable")
        tgt = {carry(src.names[i]): e for i, e in enumerate(exps) if i != i0 and e != 0}
        out = out + var_power(m2 // 2) * TruncatedSeries.monomial(ctx2, tgt, h, c)
    return out
