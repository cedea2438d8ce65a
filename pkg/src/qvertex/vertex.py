"""The FRT-type quantum vertex algebra as a computable object.

Generators l_{ij}^{(-r)} are rewritten into a canonical order using the
defining exchange relation; the rewrite table is extracted from the
R-matrix expansions once per mode pair and every correction term carries a
positive power of h, so rewriting terminates at the truncation order.  On
top of the normal form live the operator series L(u0) and its
annihilation-type part, the vertex map Y, the braiding-derived map sigma,
trace families and the quantum determinant.

Windows are explicit: generator modes beyond the configured ceiling and
expansions beyond the pole budget raise BudgetError rather than truncating
silently.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Iterable, Optional

from .errors import BudgetError, InternalInvariantError
from .matrices import MatrixSeries, antisymmetrizer
from .rmatrix import (Arg, RMatrixFactory, RParams, TRIG, ELLIPTIC,
                      bracket_pairs, ordered_pairs)
from .series import (Context, LF, LinearForm, TruncatedSeries, VarSpec,
                     EXP_VAR, LAURENT_VAR, exp_linear, subst_linear)
from .states import Gen, StateSeries, Word


def lift_h(ctx: Context, hpoly: TruncatedSeries) -> TruncatedSeries:
    """Carry a scalar h-polynomial (zero-variable context) into ``ctx``."""
    out = TruncatedSeries.zero(ctx)
    for p, c in hpoly.terms.items():
        if p < ctx.hcap:
            out = out + TruncatedSeries.monomial(ctx, {}, p, c)
    if hpoly.hacc < ctx.hcap:
        out = TruncatedSeries(ctx, out.terms, out.acc_hi, out.exhi, hpoly.hacc)
    return out


class VertexEngine:
    """Rewriting and operator calculus for one R-matrix family at order K."""

    def __init__(self, params: RParams, K: int, mode_max: int | None = None,
                 in_mode: int = 3, word_len: int = 5,
                 z_lo: int = -12, z_hi: int = 12, u0_extra: int = 4):
        self.params = params
        self.N = params.N
        self.K = K
        self.ctx0 = Context([], K)
        self.in_mode = in_mode
        self.word_len = word_len
        self.u_floor = -8 * (K + 2)
        # the operator variable window must absorb the vertex variable plus
        # extraction degrees, with room demanded by the substitution safety
        self.z_lo, self.z_hi = z_lo, z_hi
        self.u0_hi = z_hi + 2 * (in_mode - 1) + 2 * (K - 1) + 2 * u0_extra
        if mode_max is None:
            # operator modes reach u0_hi/2 + 1; rewriting can raise the first
            # slot by the per-level pole depth once per h-order
            mode_max = self.u0_hi // 2 + 1 + K * (K + 2)
        self.mode_max = mode_max
        self.ctx_u0 = Context([VarSpec("u0", EXP_VAR, self.u_floor, self.u0_hi)], K)
        self._facs: dict = {}
        self._table: dict = {}
        self._nf: dict = {}
        self._Lmem: dict = {}
        self._Lminmem: dict = {}

    def _L_ctx(self, mbucket: int) -> Context:
        key = ("Lctx", mbucket)
        got = self._facs.get(key)
        if got is None:
            evars = [VarSpec("u0", EXP_VAR, self.u_floor, self.u0_hi)]
            evars += [VarSpec(f"e{i}", EXP_VAR, 0, 2 * (mbucket - 1))
                      for i in range(1, self.word_len + 1)]
            got = Context(evars, self.K)
            self._facs[key] = got
        return got

    # -- factories -----------------------------------------------------------

    def fac(self, ctx: Context) -> RMatrixFactory:
        got = self._facs.get(ctx.signature())
        if got is None:
            got = RMatrixFactory(self.params, ctx)
            self._facs[ctx.signature()] = got
        return got

    # -- swap table -----------------------------------------------------------

    def _table_matrices(self, s: int):
        """Expansion matrices for the defining exchange relation,

            R_21(e^{-u+v}) L_1+(u) L_2+(v) = L_2+(v) L_1+(u) R*_12(e^{-u+v}),

        both embedded with u dominant; this is the unique reading of the
        relation whose rewriting is confluent (any opposite-argument pairing
        forces h-torsion against the ordered monomials).  By unitarity the
        left inverse is R_12(e^{u-v}) in the same embedding, so the solved
        form  L1 L2 = R_12(e^{u-v}) L2 L1 R*_12(e^{-u+v})  needs no matrix
        inversion.  Matrices are bucketed by the second mode: the
        subdominant window hugs the extraction box so the guaranteed
        ceilings of the product stay above it."""
        bucket = self.in_mode
        while bucket < s:
            bucket += 4
        got = self._facs.get(("tablemats", bucket))
        if got is None:
            vhi = 2 * (bucket - 1)
            uhi = 2 * (self.mode_max - 1) + vhi + 4 * (self.K + 2)
            ctx = Context([VarSpec("u", EXP_VAR, self.u_floor - vhi - 8, uhi),
                           VarSpec("v", EXP_VAR, 0, vhi)], self.K)
            fac = self.fac(ctx)
            ainv = fac.Rexp(LF({"u": 1, "v": -1}))
            rstar = fac.Rexp(LF({"u": -1, "v": 1}), star=True)
            got = (ctx, ainv, rstar)
            self._facs[("tablemats", bucket)] = got
        return got

    def table(self, g1: Gen, g2: Gen):
        """Rewrite of the word (g1, g2) into transposed order plus h-graded
        corrections; a tuple of (word, h-polynomial coefficient)."""
        key = (g1, g2)
        got = self._table.get(key)
        if got is not None:
            return got
        r, i, j = g1
        s, k, l = g2
        if r > self.mode_max or s > self.mode_max:
            raise BudgetError(f"mode pair ({r},{s}) beyond the mode ceiling",
                              hint="raise mode_max")
        ctx, rinv21, rstar = self._table_matrices(s)
        out: dict[Word, TruncatedSeries] = {}
        box = {"u": (max(ctx.lo[0], 2 * (r - self.mode_max)), 2 * (r - 1)),
               "v": (0, 2 * (s - 1))}
        for (row_a, col_a), sa in rinv21.entries.items():
            if row_a != (i, k):
                continue
            a, b = col_a
            for (row_b, col_b), sb in rstar.entries.items():
                if col_b != (j, l):
                    continue
                c, d = row_b
                prod = sa * sb
                if not prod.covers_box(box, self.K):
                    raise BudgetError("swap-table extraction window not guaranteed",
                                      hint="raise pole budget or mode_max")
                for p, coeff in prod.clip_to_accuracy().terms.items():
                    exps, h = ctx.unpack(p)
                    if exps[0] % 2 or exps[1] % 2:
                        raise InternalInvariantError("odd doubled exponent in table")
                    rp = r - exps[0] // 2
                    sp = s - exps[1] // 2
                    if sp < 1 or rp < 1:
                        continue
                    if rp > self.mode_max:
                        raise BudgetError(f"mode escape to {rp} in swap table",
                                          hint="raise mode_max")
                    word = ((sp, b, d), (rp, a, c))
                    cur = out.get(word)
                    mono = TruncatedSeries.monomial(self.ctx0, {}, h, coeff)
                    out[word] = mono if cur is None else cur + mono
        # classical part must be the plain transposition
        for word, coeff in out.items():
            h0 = coeff.terms.get(0, Fraction(0))
            want = Fraction(1) if word == ((s, k, l), (r, i, j)) else Fraction(0)
            if h0 != want:
                raise InternalInvariantError("swap table classical part is not the "
                                             "transposition")
        got = tuple((w, c) for w, c in out.items() if c.terms)
        self._table[key] = got
        return got

    # -- normal form ------------------------------------------------------------

    @staticmethod
    def _first_inversion(w: Word) -> int:
        for i in range(len(w) - 1):
            if w[i] > w[i + 1]:
                return i
        return -1

    def nf_word(self, w: Word, hbudget: int | None = None, pos: int | None = None):
        """Normal form of a word as dict word -> h-polynomial.

        Each correction raises the h-degree, so recursion depth is bounded
        by the remaining budget; the transposition branch strictly reduces
        inversions.  ``pos`` overrides the first rewrite position (used by
        the confluence check)."""
        hbudget = self.K if hbudget is None else hbudget
        if hbudget <= 0:
            return {}
        key = (w, hbudget)
        if pos is None:
            got = self._nf.get(key)
            if got is not None:
                return got
        i = self._first_inversion(w) if pos is None else pos
        if i < 0:
            return {w: TruncatedSeries.const(self.ctx0, 1)}
        out: dict[Word, TruncatedSeries] = {}
        for pair, coeff in self.table(w[i], w[i + 1]):
            ww = w[:i] + pair + w[i + 2:]
            nu = coeff.hval()
            for w2, c2 in self.nf_word(ww, hbudget - nu).items():
                prod = c2 * coeff
                if prod.is_zero():
                    continue
                cur = out.get(w2)
                out[w2] = prod if cur is None else cur + prod
        # results are only exact below the budget; keeping higher terms would
        # feed route-dependent junk into the callers' accumulations
        trimmed: dict[Word, TruncatedSeries] = {}
        for w2, c in out.items():
            terms = {p: x for p, x in c.terms.items() if p < hbudget}
            if terms:
                trimmed[w2] = TruncatedSeries(self.ctx0, terms,
                                              hacc=min(c.hacc, hbudget))
        if pos is None:
            self._nf[key] = trimmed
        return trimmed

    def normal_form(self, state: StateSeries) -> StateSeries:
        ctx = state.ctx

        def nf_label(label: Hashable) -> StateSeries:
            out = StateSeries(ctx)
            for w2, c in self.nf_word(tuple(label)).items():
                out.iadd_part(w2, lift_h(ctx, c))
            return out

        return state.map_labels(nf_label).compact()

    def multiply(self, left_word: Word, state: StateSeries) -> StateSeries:
        """Left multiplication by a word, then normal form."""
        out = StateSeries(state.ctx)
        for label, s in state.parts.items():
            out.iadd_part(tuple(left_word) + tuple(label), s)
        return self.normal_form(out)

    # -- the operator series L(u0) and the annihilation part ---------------------

    def _L_factors(self, n: int) -> list[MatrixSeries]:
        key = ("Lfac", n)
        got = self._facs.get(key)
        if got is None:
            fac = self.fac(self.ctx_L)
            got = [fac.Rexp(LF({"u0": 1, f"e{i}": -1}), inverse=True)
                   for i in range(1, n + 1)]
            self._facs[key] = got
        return got

    def _mode_depth(self, n: int) -> tuple[int, ...]:
        """Per-h-level minimal u0-exponent reachable by the n-fold inverse
        R-matrix prefactor; bounds how far the missing generating-series
        modes above the ceiling can reach down."""
        key = ("Ldepth", n)
        got = self._facs.get(key)
        if got is not None:
            return got
        cap = self.K
        i_u0 = self.ctx_L.index["u0"]
        conv = [0] + [_BIG] * (cap - 1)
        for mat in self._L_factors(n):
            prof = [_BIG] * cap
            for s in mat.entries.values():
                lm = s._level_min()[i_u0]
                for j in range(cap):
                    if lm[j] < prof[j]:
                        prof[j] = lm[j]
            nxt = [_BIG] * cap
            for j1 in range(cap):
                if conv[j1] >= _BIG:
                    continue
                for j2 in range(cap - j1):
                    if prof[j2] >= _BIG:
                        continue
                    v = conv[j1] + prof[j2]
                    if v < nxt[j1 + j2]:
                        nxt[j1 + j2] = v
            conv = nxt
        got = tuple(conv)
        self._facs[key] = got
        return got

    def _l_apply_raw(self, w: Word, with_plus: bool) -> dict:
        """Matrix entries (i0, j0) of L(u0) w, resp. of the annihilation-type
        operator (same prefactor, no creation factor), as StateSeries over
        the one-variable operator context, in normal form."""
        mem = self._Lmem if with_plus else self._Lminmem
        got = mem.get(w)
        if got is not None:
            return got
        n = len(w)
        if n > self.word_len:
            raise BudgetError("word longer than the configured operator length",
                              hint="raise word_len")
        modes = [g[0] for g in w]
        if any(r > self.in_mode for r in modes):
            raise BudgetError("input mode beyond the configured input ceiling",
                              hint="raise in_mode")
        ctx = self.ctx_L
        N = self.N
        cap = self.K
        r0cap = self.u0_hi // 2 + 1
        rmats = self._L_factors(n)
        want_rows = tuple(g[1] for g in w)
        mode_choices = [list(range(1, r + 1)) for r in modes]
        final: dict = {}
        for j0 in range(N):
            col: dict[tuple, StateSeries] = {}
            kbars = [()]
            for _ in range(n):
                kbars = [kb + (x,) for kb in kbars for x in range(N)]
            for kb in [(k0,) + kb for k0 in range(N) for kb in kbars]:
                st = StateSeries(ctx)
                for mv in _product_lists(mode_choices):
                    tail = tuple((mv[idx], kb[idx + 1], w[idx][2])
                                 for idx in range(n))
                    eexp = {f"e{idx + 1}": 2 * (mv[idx] - 1) for idx in range(n)
                            if mv[idx] > 1}
                    if with_plus:
                        for r0 in range(1, r0cap + 1):
                            exps = dict(eexp)
                            if r0 > 1:
                                exps["u0"] = 2 * (r0 - 1)
                            st.iadd_part(((r0, kb[0], j0),) + tail,
                                         TruncatedSeries.monomial(ctx, exps))
                    else:
                        if kb[0] != j0:
                            continue
                        st.iadd_part(tail, TruncatedSeries.monomial(ctx, eexp))
                if st.parts:
                    col[kb] = st
            # apply the inverse prefactor right to left: R_{0n}^{-1}...R_{01}^{-1}
            for leg in range(1, n + 1):
                mat = rmats[leg - 1]
                newcol: dict[tuple, StateSeries] = {}
                for kb, st in col.items():
                    k0, rest = kb[0], kb[1:]
                    for (ra, ca), s in mat.entries.items():
                        if ca != (k0, rest[leg - 1]):
                            continue
                        a0, al = ra
                        nk = (a0,) + rest[:leg - 1] + (al,) + rest[leg:]
                        scaled = st.scale(s)
                        got2 = newcol.get(nk)
                        newcol[nk] = scaled if got2 is None else got2 + scaled
                col = newcol
            target = {f"e{idx + 1}": 2 * (modes[idx] - 1) for idx in range(n)}
            box = {f"e{idx + 1}": (2 * (modes[idx] - 1), 2 * (modes[idx] - 1))
                   for idx in range(n)}
            depth = self._mode_depth(n) if with_plus else None
            for kb, st in col.items():
                if kb[1:] != want_rows:
                    continue
                ent = StateSeries(self.ctx_u0)
                for word, s in st.parts.items():
                    if not s.covers_box(box, cap):
                        raise BudgetError("operator extraction window is not "
                                          "guaranteed", hint="raise pole budget")
                    ent.iadd_part(word, _extract_vars(s, target, self.ctx_u0))
                if with_plus:
                    ent = ent.map_series(lambda s: _cap_mode_acc(
                        s, self.ctx_u0.index["u0"], 2 * r0cap, depth))
                final[(kb[0], j0)] = self.normal_form(ent).compact()
        mem[w] = final
        return final

    def l_apply(self, w: Word) -> dict:
        """(i0, j0) -> StateSeries over the operator context: L(u0) w."""
        return self._l_apply_raw(w, True)

    def l_minus_apply(self, w: Word) -> dict:
        """The annihilation-type operator of the vertex map decomposition."""
        return self._l_apply_raw(w, False)


_BIG = 1 << 40


def _product_lists(lists):
    out = [()]
    for lst in lists:
        out = [t + (x,) for t in out for x in lst]
    return out


def _cap_mode_acc(s: TruncatedSeries, ivar: int, mode_exp_cap: int,
                  depth: tuple[int, ...]) -> TruncatedSeries:
    """Record the accuracy ceiling induced by truncating the generating
    series at the mode ceiling: missing modes reach down at h-level j no
    further than mode_exp_cap + depth[j]."""
    acc = list(s.acc_hi)
    exh = list(s.exhi)
    row = list(acc[ivar])
    erow = list(exh[ivar])
    for j in range(s.ctx.hcap):
        if depth[j] >= _BIG:
            continue
        lim = mode_exp_cap + depth[j]
        if lim < row[j]:
            row[j] = lim
        erow[j] = False
    acc[ivar] = tuple(row)
    exh[ivar] = tuple(erow)
    return TruncatedSeries(s.ctx, dict(s.terms), tuple(acc), tuple(exh), s.hacc)


def _extract_vars(s: TruncatedSeries, target: dict[str, int],
                  ctx2: Context) -> TruncatedSeries:
    """Pick the coefficient of the given doubled exponents, transporting the
    remaining variables into ctx2 by name."""
    src = s.ctx
    idx = {src.index[name]: e for name, e in target.items()}
    terms = {}
    for p, c in s.terms.items():
        exps, h = src.unpack(p)
        ok = True
        for i, e in idx.items():
            if exps[i] != e:
                ok = False
                break
        if not ok:
            continue
        vec = [0] * ctx2.n
        for i, e in enumerate(exps):
            if i in idx:
                continue
            if e:
                vec[ctx2.index[src.names[i]]] = e
        terms[ctx2.pack(tuple(vec), h)] = c
    acc = []
    exh = []
    for j2 in range(ctx2.n):
        name = ctx2.names[j2]
        if name in src.index:
            i = src.index[name]
            acc.append(tuple(min(x, ctx2.hi[j2]) for x in s.acc_hi[i]))
            exh.append(s.exhi[i])
        else:
            acc.append((ctx2.hi[j2],) * ctx2.hcap)
            exh.append((True,) * ctx2.hcap)
    return TruncatedSeries(ctx2, terms, tuple(acc), tuple(exh), s.hacc)
