"""Sparse matrices over truncated series with named tensor legs.

A MatrixSeries acts on a tensor product of small vector spaces ("legs",
dimension N each); entries are indexed by (row multi-index, column
multi-index) and hold TruncatedSeries sharing one expansion context.
Missing entries are exact zeros; computed entries that vanish but carry a
shrunken guaranteed window are kept so that accuracy information survives.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product as iproduct
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import ContextMismatchError, DomainError, InternalInvariantError
from .series import Context, TruncatedSeries

Idx = tuple[int, ...]


def _is_droppable(s: TruncatedSeries) -> bool:
    return s.is_zero() and all(all(row) for row in s.exhi) and s.hacc >= s.ctx.hcap


class MatrixSeries:
    """A sparse (N^k x N^k) matrix of series over ``k`` tensor legs."""

    __slots__ = ("ctx", "dims", "entries")

    def __init__(self, ctx: Context, dims: Sequence[int],
                 entries: dict[tuple[Idx, Idx], TruncatedSeries] | None = None):
        self.ctx = ctx
        self.dims = tuple(dims)
        self.entries = entries if entries is not None else {}

    # -- constructors --------------------------------------------------------

    @staticmethod
    def identity(ctx: Context, dims: Sequence[int]) -> "MatrixSeries":
        one = TruncatedSeries.const(ctx, 1)
        ent = {}
        for idx in iproduct(*[range(d) for d in dims]):
            ent[(idx, idx)] = one
        return MatrixSeries(ctx, dims, ent)

    @staticmethod
    def from_scalar(ctx: Context, dims: Sequence[int],
                    s: TruncatedSeries) -> "MatrixSeries":
        ent = {}
        for idx in iproduct(*[range(d) for d in dims]):
            ent[(idx, idx)] = s
        return MatrixSeries(ctx, dims, ent)

    # -- structural helpers --------------------------------------------------

    def copy_with(self, entries) -> "MatrixSeries":
        return MatrixSeries(self.ctx, self.dims, entries)

    def set(self, row: Idx, col: Idx, s: TruncatedSeries) -> None:
        # builder-style mutation; not used on shared instances
        if _is_droppable(s):
            self.entries.pop((row, col), None)
        else:
            self.entries[(row, col)] = s

    def get(self, row: Idx, col: Idx) -> TruncatedSeries:
        got = self.entries.get((row, col))
        return got if got is not None else TruncatedSeries.zero(self.ctx)

    def embed(self, dims: Sequence[int], positions: Sequence[int]) -> "MatrixSeries":
        """Place this matrix on the given leg positions of a larger identity."""
        dims = tuple(dims)
        positions = tuple(positions)
        if len(positions) != len(self.dims):
            raise DomainError("embed: positions must match leg count")
        for p, d in zip(positions, self.dims):
            if dims[p] != d:
                raise DomainError("embed: dimension mismatch")
        rest = [i for i in range(len(dims)) if i not in positions]
        ent: dict[tuple[Idx, Idx], TruncatedSeries] = {}
        rest_ranges = [range(dims[i]) for i in rest]
        for (row, col), s in self.entries.items():
            for fill in iproduct(*rest_ranges):
                r = [0] * len(dims)
                c = [0] * len(dims)
                for k, p in enumerate(positions):
                    r[p] = row[k]
                    c[p] = col[k]
                for k, p in enumerate(rest):
                    r[p] = fill[k]
                    c[p] = fill[k]
                ent[(tuple(r), tuple(c))] = s
        return MatrixSeries(self.ctx, dims, ent)

    def permute_legs(self, perm: Sequence[int]) -> "MatrixSeries":
        """Relabel legs: new leg i is old leg perm[i]."""
        perm = tuple(perm)
        dims = tuple(self.dims[p] for p in perm)
        ent = {}
        for (row, col), s in self.entries.items():
            r = tuple(row[p] for p in perm)
            c = tuple(col[p] for p in perm)
            ent[(r, c)] = s
        return MatrixSeries(self.ctx, dims, ent)

    def transpose_leg(self, leg: int) -> "MatrixSeries":
        ent = {}
        for (row, col), s in self.entries.items():
            r = list(row)
            c = list(col)
            r[leg], c[leg] = c[leg], r[leg]
            ent[(tuple(r), tuple(c))] = s
        return MatrixSeries(self.ctx, self.dims, ent)

    def map_entries(self, fn: Callable[[TruncatedSeries], TruncatedSeries],
                    ctx: Context | None = None) -> "MatrixSeries":
        out = MatrixSeries(ctx or self.ctx, self.dims, {})
        for key, s in self.entries.items():
            v = fn(s)
            if not _is_droppable(v):
                out.entries[key] = v
        return out

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other: "MatrixSeries") -> "MatrixSeries":
        self._check_compat(other)
        ent = dict(self.entries)
        for key, s in other.entries.items():
            got = ent.get(key)
            v = s if got is None else got + s
            if _is_droppable(v):
                ent.pop(key, None)
            else:
                ent[key] = v
        return MatrixSeries(self.ctx, self.dims, ent)

    def __sub__(self, other: "MatrixSeries") -> "MatrixSeries":
        return self + other.scale(Fraction(-1))

    def scale(self, factor) -> "MatrixSeries":
        if isinstance(factor, TruncatedSeries):
            return self.map_entries(lambda s: s * factor)
        return self.map_entries(lambda s: s.scale(factor))

    def __matmul__(self, other: "MatrixSeries") -> "MatrixSeries":
        self._check_compat(other)
        by_row: dict[Idx, list[tuple[Idx, TruncatedSeries]]] = {}
        for (row, col), s in other.entries.items():
            by_row.setdefault(row, []).append((col, s))
        ent: dict[tuple[Idx, Idx], TruncatedSeries] = {}
        for (row, mid), sa in self.entries.items():
            hits = by_row.get(mid)
            if not hits:
                continue
            for col, sb in hits:
                key = (row, col)
                v = sa * sb
                got = ent.get(key)
                ent[key] = v if got is None else got + v
        for key in [k for k, v in ent.items() if _is_droppable(v)]:
            del ent[key]
        return MatrixSeries(self.ctx, self.dims, ent)

    def apply_on(self, dims: Sequence[int], positions: Sequence[int],
                 other: "MatrixSeries") -> "MatrixSeries":
        """self (small, on ``positions``) times other (full, on ``dims``)."""
        return self.embed(dims, positions) @ other

    def partial_trace(self, legs: Iterable[int]) -> "MatrixSeries":
        legs = sorted(set(legs))
        keep = [i for i in range(len(self.dims)) if i not in legs]
        dims = tuple(self.dims[i] for i in keep)
        ent: dict[tuple[Idx, Idx], TruncatedSeries] = {}
        for (row, col), s in self.entries.items():
            if any(row[i] != col[i] for i in legs):
                continue
            key = (tuple(row[i] for i in keep), tuple(col[i] for i in keep))
            got = ent.get(key)
            ent[key] = s if got is None else got + s
        for key in [k for k, v in ent.items() if _is_droppable(v)]:
            del ent[key]
        return MatrixSeries(self.ctx, dims, ent)

    def trace(self) -> TruncatedSeries:
        out = TruncatedSeries.zero(self.ctx)
        for (row, col), s in self.entries.items():
            if row == col:
                out = out + s
        return out

    def neumann_inverse(self) -> "MatrixSeries":
        """Inverse of a matrix of the form I + X with X of h-valuation >= 1.

        Stored terms outside the guaranteed windows are clipped first; they
        carry no information and would otherwise masquerade as h-order-zero
        obstructions.
        """
        ident = MatrixSeries.identity(self.ctx, self.dims)
        x = (self - ident).map_entries(lambda s: s.clip_to_accuracy())
        for s in x.entries.values():
            if not s.is_zero() and s.hval() == 0:
                raise DomainError("matrix is not of unit form I + O(h); "
                                  "Neumann inversion unavailable")
        out = ident
        term = ident
        sign = -1
        for _ in range(self.ctx.hcap + 1):
            term = term @ x
            if not term.entries:
                break
            out = out + term.scale(sign)
            if all(s.is_zero() for s in term.entries.values()):
                break
            sign = -sign
        else:
            raise InternalInvariantError("Neumann series did not terminate at the h-cap")
        return out

    def _check_compat(self, other: "MatrixSeries"):
        if self.dims != other.dims:
            raise DomainError(f"leg mismatch {self.dims} vs {other.dims}")
        if self.ctx is not other.ctx and self.ctx != other.ctx:
            raise ContextMismatchError("matrix contexts differ")

    # -- comparison -------------------------------------------------------------

    def equal_on_common(self, other: "MatrixSeries") -> tuple[bool, Optional[str]]:
        self._check_compat(other)
        for key in set(self.entries) | set(other.entries):
            a = self.entries.get(key)
            b = other.entries.get(key)
            a = a if a is not None else TruncatedSeries.zero(self.ctx)
            b = b if b is not None else TruncatedSeries.zero(self.ctx)
            eq, w = a.equal_on_common(b)
            if not eq:
                return False, f"entry {key}: {w}"
        return True, None

    def nonzero_witness(self) -> Optional[str]:
        for key in sorted(self.entries):
            w = self.entries[key].nonzero_witness()
            if w is not None:
                return f"entry {key}: {w}"
        return None

    def covers_box(self, box=None, h: int | None = None) -> bool:
        return all(s.covers_box(box, h) for s in self.entries.values())

    def __repr__(self):
        return f"<MatrixSeries legs={self.dims} nnz={len(self.entries)}>"


def permutation_matrix(ctx: Context, n: int) -> MatrixSeries:
    """P: x (x) y -> y (x) x on two legs of dimension n."""
    one = TruncatedSeries.const(ctx, 1)
    ent = {}
    for i in range(n):
        for j in range(n):
            ent[((i, j), (j, i))] = one
    return MatrixSeries(ctx, (n, n), ent)


def antisymmetrizer(ctx: Context, n: int = 2) -> MatrixSeries:
    """A = (I - P)/2 on two legs."""
    ident = MatrixSeries.identity(ctx, (n, n))
    return (ident - permutation_matrix(ctx, n)).scale(Fraction(1, 2))
