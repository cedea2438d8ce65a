"""Verification suite for the R-matrix level identities.

Every check constructs its own expansion context sized from the requested
degree box and h-order, evaluates both sides exactly, and reports pass only
when the residual vanishes on a guaranteed window covering the box.  Pole
orders and shift-compatibility powers are found by bounded upward scans; an
exhausted scan yields the status "inconclusive", never "fail".
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .errors import BudgetError
from .matrices import MatrixSeries, antisymmetrizer, permutation_matrix
from .report import CheckReport, run_check
from .rmatrix import (Arg, RMatrixFactory, RParams, TRIG, ELLIPTIC, f_hcoeffs,
                      ordered_pairs, fused_product)
from .series import (Context, LF, LinearForm, TruncatedSeries, VarSpec,
                     EXP_VAR, LAURENT_VAR, exp_linear, subst_linear, substitute)


def _zwin(deg: int, K: int) -> int:
    # doubled window for degree-deg certification with elliptic spread margin
    return 2 * deg + 4 * (K + 1)


def _ufloor(K: int) -> int:
    return -4 * (K + 2)


def _echo(params: RParams, K: int, **kw) -> dict:
    out = {"N": params.N, "K": K}
    if params.family == ELLIPTIC:
        out.update({"b": params.p_power, "c": params.p_coeff, "shift": params.shift})
    out.update(kw)
    return out


def verify_qybe_mult(params: RParams, K: int, deg: int = 3) -> CheckReport:
    def body():
        W = _zwin(deg, K)
        ctx = Context([VarSpec("z1", LAURENT_VAR, -W, W),
                       VarSpec("z2", LAURENT_VAR, -W, W)], K)
        fac = RMatrixFactory(params, ctx)
        N = params.N
        dims = (N, N, N)
        r12 = fac.R(Arg.make(1, {"z1": 2})).embed(dims, (0, 1))
        r13 = fac.R(Arg.make(1, {"z1": 2, "z2": 2})).embed(dims, (0, 2))
        r23 = fac.R(Arg.make(1, {"z2": 2})).embed(dims, (1, 2))
        diff = (r12 @ r13 @ r23) - (r23 @ r13 @ r12)
        wit = diff.nonzero_witness()
        box = {"z1": (-2 * deg, 2 * deg), "z2": (-2 * deg, 2 * deg)}
        return wit is None, diff.covers_box(box, K), wit, {"deg": deg}
    return run_check("qybe-mult", params.family, _echo(params, K, deg=deg), body)


def verify_qybe_add(params: RParams, K: int, deg: int = 3) -> CheckReport:
    # additive-form entries are Laurent in their dominant variable with depth
    # growing by the subdominant spread; the windows are sized so the
    # guaranteed ceilings still cover the box after the triple product
    def body():
        u2hi = 2 * deg + 2 * K + 4
        u1hi = 2 * deg + 4 * K + 2 * u2hi + 4
        ctx = Context([VarSpec("u1", EXP_VAR, 2 * _ufloor(K), u1hi),
                       VarSpec("u2", EXP_VAR, 2 * _ufloor(K), u2hi)], K)
        fac = RMatrixFactory(params, ctx)
        N = params.N
        dims = (N, N, N)
        r12 = fac.Rexp(LF({"u1": 1})).embed(dims, (0, 1))
        r13 = fac.Rexp(LF({"u1": 1, "u2": 1})).embed(dims, (0, 2))
        r23 = fac.Rexp(LF({"u2": 1})).embed(dims, (1, 2))
        diff = (r12 @ r13 @ r23) - (r23 @ r13 @ r12)
        wit = diff.nonzero_witness()
        box = {"u1": (0, 2 * deg), "u2": (0, 2 * deg)}
        return wit is None, diff.covers_box(box, K), wit, {"deg": deg}
    return run_check("qybe-add", params.family, _echo(params, K, deg=deg), body)


def verify_unitarity(params: RParams, K: int, deg: int = 3) -> CheckReport:
    """R12(z) R21(1/z) = U(z) (trig: U = 1), and the additive counterpart."""
    def body():
        W = _zwin(deg, K)
        ctx = Context([VarSpec("z", LAURENT_VAR, -W, W)], K)
        fac = RMatrixFactory(params, ctx)
        N = params.N
        az = Arg.make(1, {"z": 2})
        prod = fac.R(az) @ fac.R(az.inv()).permute_legs([1, 0])
        target = MatrixSeries.from_scalar(ctx, (N, N), fac.U(az))
        diff = prod - target
        wit = diff.nonzero_witness()
        if wit is not None:
            return False, True, "multiplicative: " + wit, {}
        covered = diff.covers_box({"z": (-2 * deg, 2 * deg)}, K)

        ctxu = Context([VarSpec("u", EXP_VAR, 2 * _ufloor(K), 2 * deg + 4 * K)], K)
        facu = RMatrixFactory(params, ctxu)
        au = Arg.make(1, None, LF({"u": 1}))
        produ = facu.R(au) @ facu.R(au.inv()).permute_legs([1, 0])
        diffu = produ - MatrixSeries.from_scalar(ctxu, (N, N), facu.U(au))
        witu = diffu.nonzero_witness()
        if witu is not None:
            return False, True, "additive: " + witu, {}
        covered = covered and diffu.covers_box({"u": (0, 2 * deg)}, K)
        return True, covered, None, {"deg": deg}
    return run_check("unitarity", params.family, _echo(params, K, deg=deg), body)


def verify_classical_limit(params: RParams, K: int, deg: int = 3) -> CheckReport:
    """R = identity matrix mod h, in both forms."""
    def body():
        W = _zwin(deg, K)
        ctx = Context([VarSpec("z", LAURENT_VAR, -W, W)], K)
        fac = RMatrixFactory(params, ctx)
        N = params.N
        mats = [fac.R(Arg.make(1, {"z": 2}))]
        ctxu = Context([VarSpec("u", EXP_VAR, 2 * _ufloor(K), 2 * deg + 4 * K)], K)
        facu = RMatrixFactory(params, ctxu)
        mats.append(facu.Rexp(LF({"u": 1})))
        for mat in mats:
            for (row, col), s in mat.entries.items():
                for p, c in s.clip_to_accuracy().terms.items():
                    exps, h = s.ctx.unpack(p)
                    if h:
                        continue
                    want = Fraction(1) if row == col and not any(exps) else Fraction(0)
                    if c != want:
                        return False, True, f"entry {row},{col} at h^0", {}
        return True, True, None, {}
    return run_check("classical-limit", params.family, _echo(params, K), body)


def verify_f_qdiff(K: int, deg: int = 6) -> CheckReport:
    """f(z q^4)(1-z)(1-z q^4) = f(z)(1-z q^2)^2 to the given z-degree, plus
    the h-valuation bound on the basis coefficients."""
    def body():
        ctx = Context([VarSpec("z", LAURENT_VAR, 0, 2 * deg)], K)
        fc = f_hcoeffs(deg, K)

        def lift(pairs, zexp=0, qshift=0):
            out = TruncatedSeries.zero(ctx)
            for h, c in pairs:
                if h < K:
                    out = out + TruncatedSeries.monomial(ctx, {"z": zexp}, h, c)
            if qshift:
                out = out * exp_linear(LF(h=Fraction(qshift, 2)), ctx)
            return out

        f_plain = TruncatedSeries.zero(ctx)
        f_shift = TruncatedSeries.zero(ctx)   # f(z q^4)
        for k in range(deg + 1):
            f_plain = f_plain + lift(fc[k], 2 * k)
            f_shift = f_shift + lift(fc[k], 2 * k, qshift=4 * k)
        one = TruncatedSeries.const(ctx, 1)
        z = TruncatedSeries.monomial(ctx, {"z": 2})
        q2 = exp_linear(LF(h=1), ctx)
        q4 = exp_linear(LF(h=2), ctx)
        lhs = f_shift * (one - z) * (one - z * q4)
        rhs = f_plain * (one - z * q2) * (one - z * q2)
        diff = lhs - rhs
        wit = None
        for p, c in sorted(diff.terms.items()):
            exps, h = ctx.unpack(p)
            if exps[0] <= 2 * (deg - 1):  # the top degree mixes truncated tails
                wit = f"z^{exps[0] // 2} h^{h}: {c}"
                break
        return wit is None, True, wit, {"deg": deg}
    return run_check("f-qdiff", ELLIPTIC, {"K": K, "deg": deg}, body)


def verify_f_valuation(K: int, kmax: int = 6) -> CheckReport:
    """h-valuation >= k of the k-th coefficient in the z/(1-z) basis (the
    h-adic presentation of f), for k <= kmax."""
    def body():
        from .rmatrix import f_basis_hcoeffs
        cap = max(K, kmax + 1)
        bs = f_basis_hcoeffs(cap)
        for k in range(1, kmax + 1):
            d = dict(bs[k - 1])
            bad = [h for h in d if h < k]
            if bad:
                return False, True, f"b_{k} has h-order {min(bad)}", {}
        return True, True, None, {"kmax": kmax}
    return run_check("f-valuation", ELLIPTIC, {"K": K, "kmax": kmax}, body)


def verify_antisym_fusion(params: RParams, K: int) -> CheckReport:
    """R_10(e^u) R_20(e^{u-h/2}) A_12 = A_12, plain and starred."""
    def body():
        ctx = Context([VarSpec("u", EXP_VAR, 2 * _ufloor(K), 8 * K)], K)
        fac = RMatrixFactory(params, ctx)
        dims = (2, 2, 2)
        a12 = antisymmetrizer(ctx, 2).embed(dims, (1, 2))
        for star in (False, True):
            r10 = fac.R(Arg.make(1, None, LF({"u": 1})), star=star).embed(dims, (1, 0))
            r20 = fac.R(Arg.make(1, None, LF({"u": 1}, h=Fraction(-1, 2))),
                        star=star).embed(dims, (2, 0))
            diff = (r10 @ r20 @ a12) - a12
            wit = diff.nonzero_witness()
            if wit is not None:
                return False, True, ("starred: " if star else "plain: ") + wit, {}
        return True, True, None, {}
    return run_check("antisym-fusion", params.family, _echo(params, K), body)


def verify_u_pair(params: RParams, K: int) -> CheckReport:
    """U(e^u) U(e^{u+h/2}) = 1 and evenness U(e^u) = U(e^{-u})."""
    def body():
        ctx = Context([VarSpec("u", EXP_VAR, 2 * _ufloor(K), 8 * K)], K)
        fac = RMatrixFactory(params, ctx)
        au = Arg.make(1, None, LF({"u": 1}))
        u1 = fac.U(au)
        u2 = fac.U(Arg.make(1, None, LF({"u": 1}, h=Fraction(1, 2))))
        diff = u1 * u2 - TruncatedSeries.const(ctx, 1)
        wit = diff.nonzero_witness()
        if wit is not None:
            return False, True, "pair: " + wit, {}
        diff2 = u1 - fac.U(au.inv())
        wit2 = diff2.nonzero_witness()
        if wit2 is not None:
            return False, True, "evenness: " + wit2, {}
        return True, True, None, {}
    return run_check("u-pair", params.family, _echo(params, K), body)


def verify_r_quad(params: RParams, K: int) -> CheckReport:
    """R02(e^{u+h/2})^-1 R01(e^u)^-1 R10(e^-u)^-1 R20(e^{-u-h/2})^-1 = 1."""
    def body():
        ctx = Context([VarSpec("u", EXP_VAR, 2 * _ufloor(K), 8 * K)], K)
        fac = RMatrixFactory(params, ctx)
        dims = (2, 2, 2)

        def rinv(pos, L):
            return fac.R(Arg.make(1, None, L)).neumann_inverse().embed(dims, pos)

        prod = rinv((0, 2), LF({"u": 1}, h=Fraction(1, 2))) \
            @ rinv((0, 1), LF({"u": 1})) \
            @ rinv((1, 0), LF({"u": -1})) \
            @ rinv((2, 0), LF({"u": -1}, h=Fraction(-1, 2)))
        diff = prod - MatrixSeries.identity(ctx, dims)
        wit = diff.nonzero_witness()
        return wit is None, True, wit, {}
    return run_check("r-quad", params.family, _echo(params, K), body)


def verify_antisym_projector(params: RParams, K: int) -> CheckReport:
    """A^2 = A, P^2 = I, tr A = 1 (N = 2)."""
    def body():
        ctx = Context([], K)
        a = antisymmetrizer(ctx, 2)
        p = permutation_matrix(ctx, 2)
        ident = MatrixSeries.identity(ctx, (2, 2))
        if (a @ a - a).nonzero_witness() is not None:
            return False, True, "A^2 != A", {}
        if (p @ p - ident).nonzero_witness() is not None:
            return False, True, "P^2 != I", {}
        tr = a.trace()
        if tr.coeff({}, 0) != 1:
            return False, True, "tr A != 1", {}
        return True, True, None, {}
    return run_check("antisym-projector", params.family, _echo(params, K), body)


def _poly_certified(s: TruncatedSeries, margin: int,
                    names: tuple[str, ...] | None = None) -> bool:
    """Truncated-polynomiality certificate in the named Laurent variables.

    For each named variable whose high side is not exactly known, an empty
    guaranteed zone of the given (doubled) width must separate the stored
    support from the accuracy ceiling.  Tail coefficients of all series
    built here are exponent-polynomials of h-bounded degree times a
    period-two sign, so a vanishing zone wider than twice that degree pins
    the whole ideal tail to zero.  Exp-variables serving as the coefficient
    box are exempt: their truncation is the box restriction itself.
    """
    s = s.clip_to_accuracy()
    ctx = s.ctx
    smax = s.support_max() if not s.is_zero() else None
    idxs = range(ctx.n) if names is None else [ctx.index[n] for n in names]
    for i in idxs:
        if all(s.exhi[i][: max(1, s.hacc)]):
            continue
        top = smax[i] if smax is not None else ctx.lo[i]
        if top > s.acc_floor(i) - margin:
            return False
    return True


def _as_exact(s: TruncatedSeries) -> TruncatedSeries:
    """Adopt a certified truncated polynomial as exact on its window."""
    s = s.clip_to_accuracy()
    return TruncatedSeries(s.ctx, dict(s.terms), hacc=s.hacc)


def minimal_pole_order(params: RParams, K: int, k: int | None = None,
                       rmax: int = 6) -> CheckReport:
    """Smallest r with (1-z)^r R^{+-1} polynomial (trig) resp. (1-z^2)^r
    R^{+-1} Laurent-polynomial (elliptic) mod h^k, by upward scan."""
    k = min(K, k if k is not None else K)
    def body():
        margin = 8 * (k + 1)
        W = 2 * margin + 8 * (k + 2) + 4 * rmax
        ctx = Context([VarSpec("z", LAURENT_VAR, -W, W)], k)
        fac = RMatrixFactory(params, ctx)
        az = Arg.make(1, {"z": 2})
        mats = [fac.R(az), fac.R(az).neumann_inverse()]
        if params.family == TRIG:
            factor = TruncatedSeries.const(ctx, 1) - TruncatedSeries.monomial(ctx, {"z": 2})
        else:
            factor = TruncatedSeries.const(ctx, 1) - TruncatedSeries.monomial(ctx, {"z": 4})
        for r in range(rmax + 1):
            mult = factor.power(r)
            good = True
            for mat in mats:
                for s in mat.entries.values():
                    prod = s * mult
                    if not _poly_certified(prod, margin):
                        good = False
                        break
                    if params.family == TRIG and not prod.is_zero() \
                            and prod.support_min()[0] < 0:
                        good = False
                        break
                if not good:
                    break
            if good:
                return True, True, None, {"pole_order": r, "k": k}
        return True, False, f"no r <= {rmax} certified", {"k": k}
    return run_check("pole-order", params.family, _echo(params, K, k=k), body)


def verify_shift_compat(params: RParams, K: int, abox: int = 2, alpha=Fraction(1, 2),
                        rmax: int = 10) -> CheckReport:
    """Coincidence of the two substitution routes for R(z1 e^{u-v+alpha h}/z2).

    Route one multiplies by (z1 - z2)^r (trig) or (z1^2 - z2^2)^r (elliptic)
    until the boxed u,v,h coefficients are certified Laurent polynomials,
    then substitutes z1 = z2 e^{z0}.  Route two evaluates
    z2^{s r} (e^{s z0} - 1)^r R(e^{z0+u-v+alpha h})^{+-1} with s = 1 resp. 2.
    The difference is written (z1^s - z2^s)^r = (-z2^s)^r (1 - z1^s/z2^s)^r,
    so comparing after dividing both routes by z2^{s r} the right side picks
    up the sign (-1)^r.  Both matrix powers are checked; the minimal working
    r is reported.
    """
    def body():
        d = 2 * abox
        margin = 4 * (K + 2)
        W = 2 * margin + 8 * (K + 2) + 4 * rmax
        ell = params.family == ELLIPTIC
        ctx = Context([VarSpec("z1", LAURENT_VAR, -W, W),
                       VarSpec("z2", LAURENT_VAR, -W, W),
                       VarSpec("u", EXP_VAR, 0, d), VarSpec("v", EXP_VAR, 0, d)], K)
        fac = RMatrixFactory(params, ctx)
        arg = Arg.make(1, {"z1": 2, "z2": -2}, LF({"u": 1, "v": -1}, h=alpha))
        mats = [fac.R(arg), fac.R(arg).neumann_inverse()]
        one = TruncatedSeries.const(ctx, 1)
        ratio_pow = 4 if ell else 2
        zfac = one - TruncatedSeries.monomial(ctx, {"z1": ratio_pow, "z2": -ratio_pow})
        ctx2 = Context([VarSpec("z2", LAURENT_VAR, -2 * W, 2 * W),
                        VarSpec("z0", EXP_VAR, 2 * _ufloor(K),
                                max(4 * K + 8, 2 * rmax + 4)),
                        VarSpec("u", EXP_VAR, 0, d), VarSpec("v", EXP_VAR, 0, d)], K)
        fac2 = RMatrixFactory(params, ctx2)
        wit = None
        for r in range(rmax + 1):
            mult = zfac.power(r)
            route1 = [m.scale(mult) for m in mats]
            if not all(_poly_certified(s, margin, ("z1", "z2"))
                       for m in route1 for s in m.entries.values()):
                continue
            ok = True
            for sign, m in enumerate(route1):
                msub = m.map_entries(
                    lambda s: substitute(_as_exact(s), "z1", {"z2": 2},
                                         LF({"z0": 1}), ctx2), ctx2)
                base = fac2.R(Arg.make(1, None, LF({"z0": 1, "u": 1, "v": -1},
                                                   h=alpha)))
                m2 = base if sign == 0 else base.neumann_inverse()
                efac = (exp_linear(LF({"z0": ratio_pow // 2}), ctx2)
                        - TruncatedSeries.const(ctx2, 1)).power(r)
                if r % 2:
                    efac = -efac
                m2 = m2.scale(efac)
                diff = msub - m2
                w = diff.nonzero_witness()
                if w is not None:
                    ok = False
                    wit = f"r={r} power={'+1' if sign == 0 else '-1'}: {w}"
                    break
                box = {"u": (0, d), "v": (0, d), "z0": (0, 2 * K)}
                if not diff.covers_box(box, K):
                    ok = False
                    wit = None
                    break
            if ok:
                return True, True, None, {"r": r, "alpha": str(alpha)}
        if wit is not None:
            return False, True, wit, {}
        return True, False, f"no r <= {rmax} certified the polynomial box", {}
    return run_check("shift-compat", params.family,
                     _echo(params, K, abox=abox, alpha=alpha), body)


def verify_invariants_step(params: RParams, K: int, nmax: int = 2) -> CheckReport:
    """R*_{2n}^{12}(zbar/y)^{-1} A^1 = A^1 with zbar = (z, z e^{-h/2}), n <= nmax."""
    def body():
        for n in range(1, nmax + 1):
            W = 8 * (K + 2)
            specs = [VarSpec("z", LAURENT_VAR, -W, W)]
            specs += [VarSpec(f"y{j}", LAURENT_VAR, -W, W) for j in range(1, n + 1)]
            ctx = Context(specs, K)
            fac = RMatrixFactory(params, ctx)
            dims = (2,) * (2 + n)

            def factor(i, j):
                L = LF() if i == 0 else LF(h=Fraction(-1, 2))
                arg = Arg.make(1, {"z": 2, f"y{j - 1}": -2}, L)
                return fac.R(arg, star=True, direction=1)

            pairs = ordered_pairs(2, n, "12")
            prod = fused_product(factor, pairs, dims, ctx)
            a1 = antisymmetrizer(ctx, 2).embed(dims, (0, 1))
            diff = (prod.neumann_inverse() @ a1) - a1
            wit = diff.nonzero_witness()
            if wit is not None:
                return False, True, f"n={n}: {wit}", {}
        return True, True, None, {"nmax": nmax}
    return run_check("invariants-step", params.family, _echo(params, K, nmax=nmax), body)
